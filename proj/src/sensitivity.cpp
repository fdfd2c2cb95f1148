#include "rdkin/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace rdkin {

namespace {

// Augmented tolerance vector: sensitivity block components inherit the
// tolerance of their state row.
Eigen::VectorXd replicate_atol(const SolverConfig& cfg, Eigen::Index n,
                               Eigen::Index blocks) {
  Eigen::VectorXd atol(n * blocks);
  for (Eigen::Index b = 0; b < blocks; ++b)
    for (Eigen::Index i = 0; i < n; ++i) atol[b * n + i] = cfg.atol_of(i);
  return atol;
}

// Extract the states at the observation times and total the loss terms.
double loss_at_observations(const SensitivityProblem& p, const Trajectory& traj,
                            Eigen::MatrixXd& pred) {
  pred.resize(p.state_dim, static_cast<Eigen::Index>(p.obs_times.size()));
  double loss = 0.0;
  for (size_t m = 0; m < p.obs_times.size(); ++m) {
    pred.col(static_cast<Eigen::Index>(m)) = dense_eval(traj, p.obs_times[m]);
    loss += p.loss_term(static_cast<int>(m), pred.col(static_cast<Eigen::Index>(m)));
  }
  return loss;
}

}  // namespace

GradientMethod select_engine(Eigen::Index state_dim, Eigen::Index param_dim) {
  return state_dim * param_dim <= 2000 ? GradientMethod::forward
                                       : GradientMethod::adjoint;
}

GradientResult forward_gradient(const SensitivityProblem& p,
                                const Eigen::VectorXd& theta,
                                const SolverConfig& config) {
  const Eigen::Index n = p.state_dim;
  const Eigen::Index np = p.param_dim;
  const Eigen::Index dim = n * (1 + np);

  OdeSystem aug;
  aug.dim = dim;
  Eigen::MatrixXd j_phi(n, n), j_theta(n, np);
  aug.rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& out) {
    out.resize(dim);
    const auto phi = y.head(n);
    Eigen::VectorXd f(n);
    p.rhs(t, phi, theta, f);
    p.jacobians(t, phi, theta, j_phi, j_theta);
    out.head(n) = f;
    Eigen::Map<const Eigen::MatrixXd> g(y.data() + n, n, np);
    Eigen::Map<Eigen::MatrixXd> gdot(out.data() + n, n, np);
    gdot = j_phi * g + j_theta;
  };
  // Block-diagonal Newton matrix: J_phi repeated, G-blocks decoupled from phi.
  aug.jacobian = [&](double t, const Eigen::VectorXd& y, Eigen::MatrixXd& jac) {
    const auto phi = y.head(n);
    p.jacobians(t, phi, theta, j_phi, j_theta);
    jac.setZero(dim, dim);
    for (Eigen::Index b = 0; b <= np; ++b)
      jac.block(b * n, b * n, n, n) = j_phi;
  };

  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(dim);
  y0.head(n) = p.y0;

  SolverConfig cfg = config;
  cfg.atol = replicate_atol(config, n, 1 + np);
  cfg.checkpoints = p.obs_times;

  Trajectory traj = integrate(aug, y0, p.tau0, p.tauM, cfg);

  GradientResult res;
  res.method = "forward";
  res.grad = Eigen::VectorXd::Zero(np);
  res.pred_obs_states.resize(n, static_cast<Eigen::Index>(p.obs_times.size()));
  for (size_t m = 0; m < p.obs_times.size(); ++m) {
    const Eigen::VectorXd y = dense_eval(traj, p.obs_times[m]);
    const auto phi = y.head(n);
    Eigen::Map<const Eigen::MatrixXd> g(y.data() + n, n, np);
    res.pred_obs_states.col(static_cast<Eigen::Index>(m)) = phi;
    res.loss += p.loss_term(static_cast<int>(m), phi);
    res.grad += g.transpose() * p.loss_state_grad(static_cast<int>(m), phi);
  }
  res.rhs_evaluations = traj.stats.rhs_evaluations;
  res.integrations = 1;
  return res;
}

GradientResult adjoint_gradient(const SensitivityProblem& p,
                                const Eigen::VectorXd& theta,
                                const SolverConfig& config) {
  const Eigen::Index n = p.state_dim;
  const Eigen::Index np = p.param_dim;

  // Primal solve with observation times as exact nodes.
  OdeSystem primal;
  primal.dim = n;
  primal.rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& out) {
    p.rhs(t, y, theta, out);
  };
  Eigen::MatrixXd jth_scratch(n, np);
  primal.jacobian = [&](double t, const Eigen::VectorXd& y, Eigen::MatrixXd& jac) {
    p.jacobians(t, y, theta, jac, jth_scratch);
  };
  SolverConfig cfg = config;
  cfg.checkpoints = p.obs_times;
  Trajectory traj = integrate(primal, p.y0, p.tau0, p.tauM, cfg);

  GradientResult res;
  res.method = "adjoint";
  res.loss = loss_at_observations(p, traj, res.pred_obs_states);
  res.rhs_evaluations = traj.stats.rhs_evaluations;
  res.integrations = 2;

  // Observation jumps, grouped by coincident times, processed outlet-first.
  std::map<double, Eigen::VectorXd, std::greater<double>> jumps;
  double jump_scale = 0.0;
  for (size_t m = 0; m < p.obs_times.size(); ++m) {
    Eigen::VectorXd de =
        p.loss_state_grad(static_cast<int>(m), dense_eval(traj, p.obs_times[m]));
    auto [it, fresh] = jumps.try_emplace(p.obs_times[m], de);
    if (!fresh) it->second += de;
  }
  for (const auto& [t, de] : jumps)
    jump_scale = std::max(jump_scale, de.lpNorm<Eigen::Infinity>());
  res.grad = Eigen::VectorXd::Zero(np);
  if (jump_scale == 0.0) return res;  // homogeneous adjoint

  // Backward system in s = tauM - tau; linear in [a; g], exact Jacobian.
  OdeSystem back;
  back.dim = n + np;
  Eigen::MatrixXd j_phi(n, n), j_theta(n, np);
  back.rhs = [&](double s, const Eigen::VectorXd& z, Eigen::VectorXd& out) {
    const double tau = p.tauM - s;
    const Eigen::VectorXd phi = dense_eval(traj, tau);
    p.jacobians(tau, phi, theta, j_phi, j_theta);
    out.resize(n + np);
    out.head(n) = j_phi.transpose() * z.head(n);
    out.tail(np) = j_theta.transpose() * z.head(n);
  };
  back.jacobian = [&](double s, const Eigen::VectorXd&, Eigen::MatrixXd& jac) {
    const double tau = p.tauM - s;
    const Eigen::VectorXd phi = dense_eval(traj, tau);
    p.jacobians(tau, phi, theta, j_phi, j_theta);
    jac.setZero(n + np, n + np);
    jac.topLeftCorner(n, n) = j_phi.transpose();
    jac.bottomLeftCorner(np, n) = j_theta.transpose();
  };

  SolverConfig bcfg = config;
  bcfg.checkpoints.clear();
  bcfg.atol = Eigen::VectorXd::Constant(n + np, 1e-12 * std::max(1.0, jump_scale));

  Eigen::VectorXd z = Eigen::VectorXd::Zero(n + np);
  double s = 0.0;
  double carry_h = 0.0;
  auto sweep_to = [&](double s_target) {
    if (s_target <= s) return;
    bcfg.initial_step = carry_h > 0 ? std::min(carry_h, s_target - s) : 0.0;
    Trajectory seg = integrate(back, z, s, s_target, bcfg);
    res.rhs_evaluations += seg.stats.rhs_evaluations;
    z = seg.states.back();
    const size_t k = seg.times.size();
    if (k >= 2) carry_h = seg.times[k - 1] - seg.times[k - 2];
    s = s_target;
  };
  for (const auto& [t_obs, de] : jumps) {
    sweep_to(p.tauM - t_obs);
    z.head(n) += de;
  }
  sweep_to(p.tauM - p.tau0);

  res.grad = z.tail(np);
  return res;
}

GradientResult fd_gradient(const SensitivityProblem& p, const Eigen::VectorXd& theta,
                           const SolverConfig& config, double h_rel) {
  if (h_rel <= 0) throw std::invalid_argument("fd step must be positive");
  OdeSystem sys;
  sys.dim = p.state_dim;
  const Eigen::VectorXd* theta_cur = &theta;
  sys.rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& out) {
    p.rhs(t, y, *theta_cur, out);
  };
  Eigen::MatrixXd jth_scratch(p.state_dim, p.param_dim);
  sys.jacobian = [&](double t, const Eigen::VectorXd& y, Eigen::MatrixXd& jac) {
    p.jacobians(t, y, *theta_cur, jac, jth_scratch);
  };
  SolverConfig cfg = config;
  cfg.checkpoints = p.obs_times;

  GradientResult res;
  res.method = "fd";
  res.grad.resize(p.param_dim);

  Trajectory base = integrate(sys, p.y0, p.tau0, p.tauM, cfg);
  res.loss = loss_at_observations(p, base, res.pred_obs_states);
  res.rhs_evaluations = base.stats.rhs_evaluations;
  res.integrations = 1;

  for (Eigen::Index j = 0; j < p.param_dim; ++j) {
    Eigen::VectorXd th = theta;
    const double dh = h_rel * theta[j];
    th[j] += dh;
    theta_cur = &th;
    Trajectory pert = integrate(sys, p.y0, p.tau0, p.tauM, cfg);
    Eigen::MatrixXd pred_scratch;
    res.grad[j] = (loss_at_observations(p, pert, pred_scratch) - res.loss) / dh;
    res.rhs_evaluations += pert.stats.rhs_evaluations;
    ++res.integrations;
    theta_cur = &theta;
  }
  return res;
}

GradientResult evaluate_gradient(const SensitivityProblem& problem,
                                 const Eigen::VectorXd& theta,
                                 const SolverConfig& config, GradientMethod method,
                                 double fd_h_rel) {
  if (method == GradientMethod::automatic)
    method = select_engine(problem.state_dim, problem.param_dim);
  switch (method) {
    case GradientMethod::forward:
      return forward_gradient(problem, theta, config);
    case GradientMethod::adjoint:
      return adjoint_gradient(problem, theta, config);
    case GradientMethod::fd:
      return fd_gradient(problem, theta, config, fd_h_rel);
    default:
      throw std::logic_error("unreachable");
  }
}

std::vector<int> resolve_species(const Mechanism& mech,
                                 const std::vector<std::string>& names) {
  std::vector<int> idx;
  for (const auto& name : names) {
    const int i = mech.species_index(name);
    if (i < 0) throw std::invalid_argument("unknown species '" + name + "'");
    idx.push_back(i);
  }
  return idx;
}

SensitivityProblem make_kinetics_problem(const Mechanism& mech, const State& phi0,
                                         const ForcedProfiles& profiles,
                                         const ObservationSet& obs,
                                         const LossSpec& loss_spec, RhsMode mode) {
  if (mode.diffusion_on() && !profiles.sdiff_present)
    throw std::invalid_argument(
        "diff-chem mode requires profiles with diffusion-source data");
  if (loss_spec.primal.empty())
    throw std::invalid_argument("the primal species set must not be empty");
  for (int i : loss_spec.primal)
    if (i < 0 || i >= mech.n_species())
      throw std::invalid_argument("primal species index out of range");

  const int n_sp = mech.n_species();
  auto eval = std::make_shared<KineticsEvaluator>(mech, &profiles, mode);
  Eigen::VectorXd inv_m = mech.molar_masses().cwiseInverse();
  const double eps = loss_spec.epsilon;
  const double norm =
      1.0 / (static_cast<double>(obs.n_obs()) *
             static_cast<double>(loss_spec.primal.size()));
  std::vector<int> primal = loss_spec.primal;
  Eigen::MatrixXd x_ref = obs.mole_fractions;

  SensitivityProblem p;
  p.state_dim = n_sp + 1;
  p.param_dim = mech.n_reactions();
  p.tau0 = profiles.tau_begin();
  p.tauM = profiles.tau_end();
  p.y0 = phi0.pack();
  p.obs_times = obs.times;
  p.rhs = [eval](double t, const Eigen::VectorXd& y, const Eigen::VectorXd& th,
                 Eigen::VectorXd& out) { eval->rhs(t, y, th, out); };
  p.jacobians = [eval](double t, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& th, Eigen::MatrixXd& jy,
                       Eigen::MatrixXd& jt) { eval->jacobians(t, y, th, jy, jt); };
  p.loss_term = [n_sp, inv_m, eps, norm, primal, x_ref](
                    int m, const Eigen::VectorXd& phi) {
    const auto y = phi.tail(n_sp);
    const double mbar = 1.0 / y.dot(inv_m);
    double acc = 0.0;
    for (int i : primal) {
      // Transient solver undershoot may leave X a hair negative; the loss
      // basis is the physical (clipped) mole fraction.
      const double x = std::max(y[i] * mbar * inv_m[i], 0.0);
      const double r = std::log(x + eps) - std::log(x_ref(i, m) + eps);
      acc += r * r;
    }
    return norm * acc;
  };
  p.loss_state_grad = [n_sp, inv_m, eps, norm, primal, x_ref](
                          int m, const Eigen::VectorXd& phi) {
    const auto y = phi.tail(n_sp);
    const double mbar = 1.0 / y.dot(inv_m);
    Eigen::VectorXd x = (y.cwiseProduct(inv_m) * mbar).cwiseMax(0.0);
    // d e / d Y_k = norm * mbar/M_k * (g_k - sum_i g_i X_i), g on primal only.
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n_sp);
    for (int i : primal)
      g[i] = 2.0 * (std::log(x[i] + eps) - std::log(x_ref(i, m) + eps)) /
             (x[i] + eps);
    const double gx = g.dot(x);
    Eigen::VectorXd de = Eigen::VectorXd::Zero(n_sp + 1);
    de.tail(n_sp) =
        norm * mbar *
        (g - Eigen::VectorXd::Constant(n_sp, gx)).cwiseProduct(inv_m);
    return de;
  };
  return p;
}

GradientResult forward_gradient(const Mechanism& mech, const Eigen::VectorXd& theta,
                                const State& phi0, const ForcedProfiles& profiles,
                                const ObservationSet& obs, const LossSpec& loss_spec,
                                RhsMode mode, const SolverConfig& config) {
  return forward_gradient(make_kinetics_problem(mech, phi0, profiles, obs, loss_spec, mode),
                          theta, config);
}

GradientResult adjoint_gradient(const Mechanism& mech, const Eigen::VectorXd& theta,
                                const State& phi0, const ForcedProfiles& profiles,
                                const ObservationSet& obs, const LossSpec& loss_spec,
                                RhsMode mode, const SolverConfig& config) {
  return adjoint_gradient(make_kinetics_problem(mech, phi0, profiles, obs, loss_spec, mode),
                          theta, config);
}

GradientResult fd_gradient(const Mechanism& mech, const Eigen::VectorXd& theta,
                           const State& phi0, const ForcedProfiles& profiles,
                           const ObservationSet& obs, const LossSpec& loss_spec,
                           RhsMode mode, const SolverConfig& config, double h_rel) {
  return fd_gradient(make_kinetics_problem(mech, phi0, profiles, obs, loss_spec, mode),
                     theta, config, h_rel);
}

}  // namespace rdkin
