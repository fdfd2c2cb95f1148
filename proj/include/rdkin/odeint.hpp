#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdkin {

/// A dense ODE system with analytic Jacobian of the right-hand side.
/// std::domain_error thrown by either callback is treated as a recoverable
/// step failure (the step is retried smaller); other exceptions propagate.
struct OdeSystem {
  Eigen::Index dim = 0;
  std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)> rhs;
  std::function<void(double, const Eigen::VectorXd&, Eigen::MatrixXd&)> jacobian;
};

struct SolverConfig {
  double rtol = 1e-6;
  /// Per-component absolute tolerances; when empty every component gets
  /// atol_fallback.
  Eigen::VectorXd atol;
  double atol_fallback = 1e-12;
  long max_steps = 100000;
  double initial_step = 0.0;  ///< 0 selects the built-in heuristic
  std::vector<double> checkpoints;

  double atol_of(Eigen::Index i) const {
    return atol.size() ? atol[i] : atol_fallback;
  }
  double max_atol() const {
    return atol.size() ? atol.maxCoeff() : atol_fallback;
  }
};

/// Tolerance layout for the chemistry state [T, Y...]: loose on the
/// temperature component, tight on mass fractions.
SolverConfig chemistry_solver_config(int n_species);

struct SolverStats {
  long steps = 0;
  long rejected_steps = 0;
  long newton_iterations = 0;
  long jacobian_evaluations = 0;
  long rhs_evaluations = 0;
  long lu_factorizations = 0;
};

/// Accepted solver nodes with the derivative at each node; the stored
/// derivatives feed the cubic Hermite dense output.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> derivatives;
  SolverStats stats;

  double front_time() const { return times.front(); }
  double back_time() const { return times.back(); }
};

class IntegrationError : public std::runtime_error {
 public:
  explicit IntegrationError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Adaptive TR-BDF2 (trapezoidal stage + BDF2 stage, L-stable, one-step)
/// with modified-Newton stage solves on the analytic Jacobian and an
/// embedded third-order error estimate. Every checkpoint time appears
/// exactly as a step endpoint. Deterministic: identical inputs produce
/// bitwise-identical trajectories.
Trajectory integrate(const OdeSystem& system, const Eigen::VectorXd& y0,
                     double t0, double t1, const SolverConfig& config);

/// Cubic Hermite dense output on the accepted steps; reproduces stored
/// nodes exactly.
Eigen::VectorXd dense_eval(const Trajectory& traj, double t);

}  // namespace rdkin
