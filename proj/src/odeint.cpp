#include "rdkin/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rdkin/interp.hpp"

namespace rdkin {

namespace {

constexpr double kGamma = 2.0 - 1.4142135623730951;  // 2 - sqrt(2)
constexpr double kStageWeight = kGamma / 2.0;        // implicit weight, both stages
constexpr int kMaxNewton = 8;
constexpr int kMaxHalvings = 10;

// BDF2-stage combination coefficients.
const double kBdfGammaCoeff = 1.0 / (kGamma * (2.0 - kGamma));
const double kBdfPrevCoeff =
    -(1.0 - kGamma) * (1.0 - kGamma) / (kGamma * (2.0 - kGamma));
// Third-order companion error weights. The bracket of f-values below equals
// h^2 * f[t_n, t_mid, t_new] = h^2 * y'''/2, so the leading local error
// C h^3 y''' needs twice the classical constant.
const double kErrConst = 2.0 * (-3.0 * kGamma * kGamma + 4.0 * kGamma - 2.0) /
                         (12.0 * (2.0 - kGamma));

struct Stepper {
  const OdeSystem& sys;
  const SolverConfig& cfg;
  SolverStats& stats;
  Eigen::VectorXd weights;  // 1/(atol_i + rtol*|y_i|)
  Eigen::MatrixXd jac;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;

  Stepper(const OdeSystem& s, const SolverConfig& c, SolverStats& st)
      : sys(s), cfg(c), stats(st) {}

  void eval_rhs(double t, const Eigen::VectorXd& y, Eigen::VectorXd& f) {
    sys.rhs(t, y, f);
    ++stats.rhs_evaluations;
  }

  void refresh_weights(const Eigen::VectorXd& y) {
    weights.resize(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
      weights[i] = 1.0 / (cfg.atol_of(i) + cfg.rtol * std::abs(y[i]));
  }

  double wrms(const Eigen::VectorXd& v) const {
    return std::sqrt(v.cwiseProduct(weights).squaredNorm() /
                     static_cast<double>(v.size()));
  }

  void factor(double h) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(sys.dim, sys.dim);
    m -= (kStageWeight * h) * jac;
    lu.compute(m);
    ++stats.lu_factorizations;
  }

  // Modified Newton on y - d*h*f(t, y) = rhs_const. Returns false on
  // non-convergence; `y` holds the predictor on entry.
  bool solve_stage(double t, double d_h, const Eigen::VectorXd& rhs_const,
                   Eigen::VectorXd& y, Eigen::VectorXd& f) {
    double prev_norm = 0.0;
    for (int it = 0; it < kMaxNewton; ++it) {
      eval_rhs(t, y, f);
      Eigen::VectorXd residual = y - d_h * f - rhs_const;
      Eigen::VectorXd delta = lu.solve(-residual);
      y += delta;
      ++stats.newton_iterations;
      const double norm = wrms(delta);
      if (norm <= 0.03) {
        eval_rhs(t, y, f);
        return true;
      }
      if (it >= 1 && norm > 1.5 * prev_norm) return false;  // diverging
      prev_norm = norm;
    }
    return false;
  }
};

}  // namespace

SolverConfig chemistry_solver_config(int n_species) {
  SolverConfig cfg;
  cfg.atol.resize(n_species + 1);
  cfg.atol[0] = 1e-6;  // temperature component
  cfg.atol.tail(n_species).setConstant(1e-12);
  return cfg;
}

Trajectory integrate(const OdeSystem& system, const Eigen::VectorXd& y0,
                     double t0, double t1, const SolverConfig& config) {
  if (!(t0 < t1)) throw IntegrationError("integration span must be positive");
  if (y0.size() != system.dim)
    throw IntegrationError("initial state has the wrong dimension");
  if (config.rtol <= 0 || config.max_atol() <= 0)
    throw IntegrationError("tolerances must be positive");

  Trajectory traj;
  Stepper st(system, config, traj.stats);

  // Checkpoints inside (t0, t1), deduplicated; t1 itself is always last.
  std::set<double> cps;
  for (double c : config.checkpoints) {
    if (c < t0 || c > t1)
      throw IntegrationError("checkpoint outside the integration span");
    if (c > t0 && c < t1) cps.insert(c);
  }
  std::vector<double> targets(cps.begin(), cps.end());
  targets.push_back(t1);

  double t = t0;
  Eigen::VectorXd y = y0;
  Eigen::VectorXd f(system.dim);
  try {
    st.eval_rhs(t, y, f);
  } catch (const std::domain_error& e) {
    throw IntegrationError(std::string("right-hand side failed at the initial point: ") +
                           e.what());
  }
  traj.times.push_back(t);
  traj.states.push_back(y);
  traj.derivatives.push_back(f);

  const double span = t1 - t0;
  double h;
  if (config.initial_step > 0) {
    h = config.initial_step;
  } else {
    const double fnorm = f.lpNorm<Eigen::Infinity>();
    h = 1e-2 * span * std::min(1.0, config.max_atol() / std::max(fnorm, 1e-300));
    h = std::max(h, 1e-14 * span);
  }
  const double h_min = 1e-14 * span;

  size_t target_idx = 0;
  Eigen::VectorXd y_mid(system.dim), f_mid(system.dim);
  Eigen::VectorXd y_new(system.dim), f_new(system.dim);

  while (t < t1) {
    const double target = targets[target_idx];
    bool hits_target = false;
    if (t + h >= target - 1e-14 * span) {
      h = target - t;
      hits_target = true;
    }
    if (traj.stats.steps + traj.stats.rejected_steps >= config.max_steps)
      throw IntegrationError("maximum number of steps exceeded at t = " +
                             std::to_string(t));

    st.refresh_weights(y);
    bool jac_ok = true;
    try {
      system.jacobian(t, y, st.jac);
      ++traj.stats.jacobian_evaluations;
    } catch (const std::domain_error&) {
      jac_ok = false;
    }

    int halvings = 0;
    while (true) {
      bool ok = jac_ok;
      double err = 0.0;
      if (ok) {
        try {
          st.factor(h);
          const double d_h = kStageWeight * h;

          // Trapezoidal stage to t + gamma*h.
          Eigen::VectorXd rhs_tr = y + d_h * f;
          y_mid = y + (kGamma * h) * f;  // explicit predictor
          ok = st.solve_stage(t + kGamma * h, d_h, rhs_tr, y_mid, f_mid);

          if (ok) {
            // BDF2 stage to t + h.
            Eigen::VectorXd rhs_bdf = kBdfGammaCoeff * y_mid + kBdfPrevCoeff * y;
            y_new = y + (y_mid - y) / kGamma;  // linear extrapolation
            ok = st.solve_stage(t + h, d_h, rhs_bdf, y_new, f_new);
          }
          if (ok) {
            Eigen::VectorXd est =
                (kErrConst * h) *
                (f / kGamma - f_mid / (kGamma * (1.0 - kGamma)) +
                 f_new / (1.0 - kGamma));
            est = st.lu.solve(est);  // stiffly damped estimate
            err = st.wrms(est);
            ok = std::isfinite(err);
          }
        } catch (const std::domain_error&) {
          ok = false;
        }
      }

      if (ok && err <= 1.0) {
        t = hits_target ? target : t + h;
        y = y_new;
        f = f_new;
        traj.times.push_back(t);
        traj.states.push_back(y);
        traj.derivatives.push_back(f);
        ++traj.stats.steps;
        if (hits_target && target_idx + 1 < targets.size()) ++target_idx;
        const double grow =
            err > 0 ? std::min(5.0, std::max(0.2, 0.7 * std::pow(err, -1.0 / 3.0)))
                    : 5.0;
        h = std::min(h * grow, span);
        break;
      }

      ++traj.stats.rejected_steps;
      if (!ok) {
        h *= 0.25;
        ++halvings;
        if (halvings >= kMaxHalvings)
          throw IntegrationError(
              "stage solve failed after repeated step halving at t = " +
              std::to_string(t));
      } else {
        h *= std::min(0.5, std::max(0.1, 0.7 * std::pow(err, -1.0 / 3.0)));
      }
      if (h < h_min)
        throw IntegrationError("step size underflow at t = " + std::to_string(t));
      hits_target = false;
      if (traj.stats.steps + traj.stats.rejected_steps >= config.max_steps)
        throw IntegrationError("maximum number of steps exceeded at t = " +
                               std::to_string(t));
    }
  }
  return traj;
}

Eigen::VectorXd dense_eval(const Trajectory& traj, double t) {
  if (traj.times.size() < 1) throw std::invalid_argument("empty trajectory");
  if (t < traj.times.front() || t > traj.times.back())
    throw std::domain_error("dense evaluation outside the trajectory span");

  // Exact node hits return the stored state.
  const auto it = std::lower_bound(traj.times.begin(), traj.times.end(), t);
  if (it != traj.times.end() && *it == t)
    return traj.states[static_cast<size_t>(it - traj.times.begin())];

  const size_t k = static_cast<size_t>(it - traj.times.begin()) - 1;
  const double t0 = traj.times[k], t1 = traj.times[k + 1];
  const Eigen::VectorXd& y0 = traj.states[k];
  const Eigen::VectorXd& y1 = traj.states[k + 1];
  const Eigen::VectorXd& f0 = traj.derivatives[k];
  const Eigen::VectorXd& f1 = traj.derivatives[k + 1];

  Eigen::VectorXd out(y0.size());
  for (Eigen::Index i = 0; i < y0.size(); ++i)
    out[i] = hermite_value(t0, t1, y0[i], y1[i], f0[i], f1[i], t);
  return out;
}

}  // namespace rdkin
