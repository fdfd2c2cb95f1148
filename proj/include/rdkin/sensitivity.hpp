#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "rdkin/kinetics.hpp"
#include "rdkin/observations.hpp"
#include "rdkin/odeint.hpp"

namespace rdkin {

struct GradientResult {
  double loss = 0.0;
  Eigen::VectorXd grad;
  std::string method;      ///< "forward" | "adjoint" | "fd"
  long rhs_evaluations = 0;
  int integrations = 0;
  /// Predicted states at the observation times (state_dim x n_obs), from the
  /// primal solve that produced the loss.
  Eigen::MatrixXd pred_obs_states;
};

/// A parameterized ODE with a loss accumulated at discrete observation
/// times: L = sum_m loss_term(m, y(tau_m)). The gradient engines only see
/// this interface, so they apply to plain test systems as well as to the
/// chemistry binding below.
struct SensitivityProblem {
  Eigen::Index state_dim = 0;
  Eigen::Index param_dim = 0;
  double tau0 = 0.0, tauM = 0.0;
  Eigen::VectorXd y0;
  std::function<void(double, const Eigen::VectorXd&, const Eigen::VectorXd&,
                     Eigen::VectorXd&)>
      rhs;
  std::function<void(double, const Eigen::VectorXd&, const Eigen::VectorXd&,
                     Eigen::MatrixXd&, Eigen::MatrixXd&)>
      jacobians;
  std::vector<double> obs_times;
  std::function<double(int, const Eigen::VectorXd&)> loss_term;
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> loss_state_grad;
};

/// Forward sensitivities: integrate [phi; vec(G)] with dG/dtau = J_phi G +
/// J_theta, G(tau0) = 0, and accumulate dL/dtheta = sum_m de/dphi|_m G(tau_m).
GradientResult forward_gradient(const SensitivityProblem& problem,
                                const Eigen::VectorXd& theta,
                                const SolverConfig& config);

/// Interpolating adjoint: primal solve with dense output, then backward
/// integration of [a; g] with observation jumps a += de/dphi, returning
/// g(tau0).
GradientResult adjoint_gradient(const SensitivityProblem& problem,
                                const Eigen::VectorXd& theta,
                                const SolverConfig& config);

/// Forward finite differences over theta; N_R + 1 full solves. The
/// independent oracle for both gradient engines.
GradientResult fd_gradient(const SensitivityProblem& problem,
                           const Eigen::VectorXd& theta,
                           const SolverConfig& config, double h_rel = 1e-4);

enum class GradientMethod { automatic, forward, adjoint, fd };

GradientMethod select_engine(Eigen::Index state_dim, Eigen::Index param_dim);

GradientResult evaluate_gradient(const SensitivityProblem& problem,
                                 const Eigen::VectorXd& theta,
                                 const SolverConfig& config, GradientMethod method,
                                 double fd_h_rel = 1e-4);

/// Chemistry binding: the Diff-Chem/Pure-Chem ODE with the log-MSE loss over
/// primal mole fractions. The returned problem references mech, profiles and
/// obs, which must outlive it.
SensitivityProblem make_kinetics_problem(const Mechanism& mech,
                                         const State& phi0,
                                         const ForcedProfiles& profiles,
                                         const ObservationSet& obs,
                                         const LossSpec& loss_spec, RhsMode mode);

/// Spec-level convenience wrappers over the chemistry binding.
GradientResult forward_gradient(const Mechanism& mech, const Eigen::VectorXd& theta,
                                const State& phi0, const ForcedProfiles& profiles,
                                const ObservationSet& obs, const LossSpec& loss_spec,
                                RhsMode mode, const SolverConfig& config);
GradientResult adjoint_gradient(const Mechanism& mech, const Eigen::VectorXd& theta,
                                const State& phi0, const ForcedProfiles& profiles,
                                const ObservationSet& obs, const LossSpec& loss_spec,
                                RhsMode mode, const SolverConfig& config);
GradientResult fd_gradient(const Mechanism& mech, const Eigen::VectorXd& theta,
                           const State& phi0, const ForcedProfiles& profiles,
                           const ObservationSet& obs, const LossSpec& loss_spec,
                           RhsMode mode, const SolverConfig& config,
                           double h_rel = 1e-4);

}  // namespace rdkin
