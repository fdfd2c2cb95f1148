#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "rdkin/observations.hpp"
#include "rdkin/sensitivity.hpp"

namespace rdkin {

struct OptConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int max_iters = 100;
  double theta_min = kThetaMin;
  GradientMethod method = GradientMethod::automatic;
  double grad_norm_tol = 1e-8;
  int plateau_window = 20;
  double plateau_rel_improvement = 1e-3;  ///< < 0.1% over the window stops
  std::uint64_t seed = 0;
  SolverConfig solver;
};

struct AdamMoments {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};

struct OptimizationTrace {
  std::vector<Eigen::VectorXd> theta;  ///< iterate 0 is the initial state
  std::vector<double> loss_primal;
  std::vector<double> loss_secondary;
  std::vector<double> grad_norm;
  std::vector<double> wall_ms;

  int n_iters() const { return static_cast<int>(loss_primal.size()); }
};

struct OptimizeResult {
  Eigen::VectorXd theta_opt;  ///< lowest recorded primal loss
  OptimizationTrace trace;
  std::string stop_reason;
  bool aborted = false;
};

/// log-MSE over mole fractions: primal loss over spec.primal, secondary loss
/// (diagnostic) over the complement set. Predicted states are phi vectors
/// aligned with obs.times.
std::pair<double, double> loss(const Mechanism& mech,
                               const std::vector<Eigen::VectorXd>& pred_states,
                               const ObservationSet& obs, const LossSpec& spec);

/// One Adam update with bias correction followed by projection onto
/// [lower_bound, inf). `iteration` is 0-based; moments must be zero-initialized
/// with the parameter size before the first call.
Eigen::VectorXd adam_step(const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                          AdamMoments& moments, int iteration,
                          const OptConfig& cfg, double lower_bound);

/// i.i.d. uniform multipliers on [lo, hi], deterministic under seed.
Eigen::VectorXd init_theta(int n_reactions, double lo, double hi,
                           std::uint64_t seed);

/// Multiplicative Gaussian noise on the primal-species reference mole
/// fractions, clamped at zero; sigma = 0 returns the input bitwise.
ObservationSet perturb_observations(const ObservationSet& obs, double sigma,
                                    std::uint64_t seed);

/// The simulate-compare-update loop: primal solve, loss, gradient, Adam step
/// in ln(theta), trace recording, and the stop criteria (max iterations,
/// gradient norm, loss plateau).
OptimizeResult optimize(const Mechanism& mech, const Eigen::VectorXd& theta0,
                        const State& phi0, const ForcedProfiles& profiles,
                        const ObservationSet& obs, const LossSpec& spec,
                        RhsMode mode, const OptConfig& cfg);

}  // namespace rdkin
