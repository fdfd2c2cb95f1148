#include "rdkin/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "rdkin/rng.hpp"

namespace rdkin {

namespace {

Eigen::VectorXd mole_fractions_of(const Eigen::VectorXd& inv_m,
                                  const Eigen::VectorXd& y) {
  const double mbar = 1.0 / y.dot(inv_m);
  // Clip solver undershoot: the loss basis is the physical mole fraction.
  return (y.cwiseProduct(inv_m) * mbar).cwiseMax(0.0);
}

double log_mse(const Eigen::VectorXd& x, const Eigen::MatrixXd& x_ref, int m,
               const std::vector<int>& set, double eps) {
  double acc = 0.0;
  for (int i : set) {
    const double r = std::log(x[i] + eps) - std::log(x_ref(i, m) + eps);
    acc += r * r;
  }
  return acc;
}

}  // namespace

std::pair<double, double> loss(const Mechanism& mech,
                               const std::vector<Eigen::VectorXd>& pred_states,
                               const ObservationSet& obs, const LossSpec& spec) {
  if (static_cast<int>(pred_states.size()) != obs.n_obs())
    throw std::invalid_argument("prediction/observation grids are misaligned");
  if (spec.primal.empty())
    throw std::invalid_argument("the primal species set must not be empty");
  const int n_sp = mech.n_species();
  std::vector<char> is_primal(n_sp, 0);
  for (int i : spec.primal) is_primal.at(i) = 1;
  std::vector<int> secondary;
  for (int i = 0; i < n_sp; ++i)
    if (!is_primal[i]) secondary.push_back(i);

  const Eigen::VectorXd inv_m = mech.molar_masses().cwiseInverse();
  double acc_p = 0.0, acc_s = 0.0;
  for (int m = 0; m < obs.n_obs(); ++m) {
    const Eigen::VectorXd x =
        mole_fractions_of(inv_m, pred_states[m].tail(n_sp));
    acc_p += log_mse(x, obs.mole_fractions, m, spec.primal, spec.epsilon);
    acc_s += log_mse(x, obs.mole_fractions, m, secondary, spec.epsilon);
  }
  const double np = static_cast<double>(obs.n_obs());
  const double lp = acc_p / (np * static_cast<double>(spec.primal.size()));
  const double ls = secondary.empty()
                        ? 0.0
                        : acc_s / (np * static_cast<double>(secondary.size()));
  return {lp, ls};
}

Eigen::VectorXd adam_step(const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                          AdamMoments& moments, int iteration,
                          const OptConfig& cfg, double lower_bound) {
  if (x.size() != grad.size() || moments.m.size() != x.size() ||
      moments.v.size() != x.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (!grad.allFinite())
    throw std::invalid_argument("adam_step: non-finite gradient");

  const double t = static_cast<double>(iteration) + 1.0;
  moments.m = cfg.beta1 * moments.m + (1.0 - cfg.beta1) * grad;
  moments.v = cfg.beta2 * moments.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double mc = 1.0 - std::pow(cfg.beta1, t);
  const double vc = 1.0 - std::pow(cfg.beta2, t);
  Eigen::VectorXd m_hat = moments.m / mc;
  Eigen::VectorXd v_hat = moments.v / vc;
  Eigen::VectorXd next =
      x - cfg.lr * m_hat.cwiseQuotient(
                       v_hat.cwiseSqrt() +
                       Eigen::VectorXd::Constant(x.size(), cfg.eps_adam));
  return next.cwiseMax(lower_bound);
}

Eigen::VectorXd init_theta(int n_reactions, double lo, double hi,
                           std::uint64_t seed) {
  if (!(lo > kThetaMin) || !(hi > lo))
    throw std::invalid_argument("init_theta: invalid range");
  Rng rng(seed);
  Eigen::VectorXd theta(n_reactions);
  for (int j = 0; j < n_reactions; ++j) theta[j] = rng.uniform(lo, hi);
  return theta;
}

ObservationSet perturb_observations(const ObservationSet& obs, double sigma,
                                    std::uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("noise level must be non-negative");
  ObservationSet out = obs;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (int i : obs.primal)
    for (int m = 0; m < obs.n_obs(); ++m)
      out.mole_fractions(i, m) =
          std::max(0.0, obs.mole_fractions(i, m) * (1.0 + sigma * rng.normal()));
  return out;
}

OptimizeResult optimize(const Mechanism& mech, const Eigen::VectorXd& theta0,
                        const State& phi0, const ForcedProfiles& profiles,
                        const ObservationSet& obs, const LossSpec& spec,
                        RhsMode mode, const OptConfig& cfg) {
  const SensitivityProblem problem =
      make_kinetics_problem(mech, phi0, profiles, obs, spec, mode);

  OptimizeResult result;
  OptimizationTrace& trace = result.trace;

  // Adam walks ln(theta): positivity is structural and multiplicative moves
  // are symmetric. The projection bound stays as a safety net.
  Eigen::VectorXd theta = theta0.cwiseMax(cfg.theta_min);
  Eigen::VectorXd u = theta.array().log();
  AdamMoments moments{Eigen::VectorXd::Zero(theta.size()),
                      Eigen::VectorXd::Zero(theta.size())};
  const double u_min = std::log(cfg.theta_min);

  int consecutive_failures = 0;
  for (int k = 0; k < cfg.max_iters; ++k) {
    const auto tic = std::chrono::steady_clock::now();
    GradientResult grad_res;
    try {
      grad_res = evaluate_gradient(problem, theta, cfg.solver, cfg.method);
      consecutive_failures = 0;
    } catch (const IntegrationError& e) {
      ++consecutive_failures;
      if (consecutive_failures >= 3) {
        result.aborted = true;
        result.stop_reason = std::string("integration failure: ") + e.what();
        break;
      }
      continue;
    }

    std::vector<Eigen::VectorXd> pred(obs.n_obs());
    for (int m = 0; m < obs.n_obs(); ++m)
      pred[m] = grad_res.pred_obs_states.col(m);
    const auto [lp, ls] = loss(mech, pred, obs, spec);

    const double gnorm = grad_res.grad.norm();
    const auto toc = std::chrono::steady_clock::now();
    trace.theta.push_back(theta);
    trace.loss_primal.push_back(lp);
    trace.loss_secondary.push_back(ls);
    trace.grad_norm.push_back(gnorm);
    trace.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(toc - tic).count());

    if (gnorm < cfg.grad_norm_tol) {
      result.stop_reason = "gradient norm below threshold";
      break;
    }
    const int w = cfg.plateau_window;
    if (trace.n_iters() > w) {
      double best_recent = trace.loss_primal.back();
      for (int i = trace.n_iters() - w; i < trace.n_iters(); ++i)
        best_recent = std::min(best_recent, trace.loss_primal[i]);
      double best_before = trace.loss_primal.front();
      for (int i = 0; i < trace.n_iters() - w; ++i)
        best_before = std::min(best_before, trace.loss_primal[i]);
      if (best_recent > best_before * (1.0 - cfg.plateau_rel_improvement)) {
        result.stop_reason = "loss plateau";
        break;
      }
    }

    Eigen::VectorXd grad_u = theta.cwiseProduct(grad_res.grad);
    u = adam_step(u, grad_u, moments, k, cfg, u_min);
    theta = u.array().exp().max(cfg.theta_min);
  }
  if (result.stop_reason.empty()) result.stop_reason = "max iterations";

  if (trace.n_iters() == 0) {
    result.aborted = true;
    if (result.stop_reason.empty()) result.stop_reason = "no completed iteration";
    result.theta_opt = theta0;
    return result;
  }
  int best = 0;
  for (int i = 1; i < trace.n_iters(); ++i)
    if (trace.loss_primal[i] < trace.loss_primal[best]) best = i;
  result.theta_opt = trace.theta[best];
  return result;
}

}  // namespace rdkin
