#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "rdkin/mechanism.hpp"
#include "rdkin/observations.hpp"
#include "rdkin/profiles.hpp"

namespace rdkin {

struct InletBC {
  Eigen::VectorXd y_in;   ///< inlet mass fractions, sums to 1 within 1e-10
  double t_in = 300.0;    ///< K
  double mdot = 0.3;      ///< kg/(m^2 s)
  double pressure = kStandardPressure;  ///< Pa
};

/// Power-law transport closure: D_i = Dref_i (T/300)^a (101325/P) * scale,
/// lambda = lambda_ref (T/300)^b. diffusion_scale = 0 turns transport off
/// (the solution then collapses onto the pure-reaction streamline ODE).
struct TransportModel {
  double lambda_ref = 0.05;        ///< W/(m K) at 300 K
  double diff_temp_exponent = 1.7;
  double cond_temp_exponent = 0.7;
  double diffusion_scale = 1.0;
};

/// Either solve the temperature equation or pin T(x) to a prescribed nodal
/// profile (twin experiments decouple kinetics from energy-equation fidelity
/// this way).
struct ThermalSpec {
  bool solve_energy = true;
  Eigen::VectorXd fixed_temperature;  ///< per grid node when !solve_energy
};

struct FlameOptions {
  double residual_tol = 1e-8;       ///< scaled steady residual target
  long max_pseudo_steps = 2000;
  int max_newton_iters = 50;
  double initial_pseudo_dt = 1e-6;  ///< s
  double initial_hot_temperature = 1800.0;  ///< energy-mode initial ramp, K
  /// Optional outlet Dirichlet composition (replaces the default
  /// zero-gradient outlet; used for verification against two-point
  /// analytic solutions).
  std::optional<Eigen::VectorXd> outlet_y;
  bool verbose = false;
};

struct FlameSolution {
  Eigen::VectorXd x;    ///< m
  Eigen::MatrixXd Y;    ///< n_species x n_nodes
  Eigen::VectorXd T;    ///< K
  Eigen::VectorXd rho;  ///< kg/m^3
  Eigen::VectorXd u;    ///< m/s, mdot / rho
  double mdot = 0.0;
  double pressure = 0.0;
  double residual_norm = 0.0;  ///< scaled, at exit
  bool converged = false;
};

/// Steady 1D burner-stabilized flat-flame solve: upwind convection, central
/// diffusion with the flux-sum correction term, pseudo-transient continuation
/// into Newton. Throws std::runtime_error on non-convergence.
FlameSolution solve_bsf(const Mechanism& mech, const InletBC& bc,
                        const Eigen::VectorXd& x_grid,
                        const Eigen::VectorXd& theta, const ThermalSpec& thermal,
                        const TransportModel& transport = {},
                        const FlameOptions& options = {});

/// Forced profiles (tau, T, P, S_diff) plus a uniformly subsampled reference
/// observation set, both derived with the same discrete stencils the solver
/// used. The observation primal set is left empty for the caller to fill.
std::pair<ForcedProfiles, ObservationSet> export_profiles(
    const Mechanism& mech, const FlameSolution& sol,
    const TransportModel& transport = {}, int n_obs = 50);

/// Elemental mass fluxes (convective + diffusive) at the interior faces,
/// one row per element in `elements`; constant along x for a converged
/// solution.
Eigen::MatrixXd element_fluxes(const Mechanism& mech, const FlameSolution& sol,
                               const TransportModel& transport,
                               std::vector<std::string>& elements);

}  // namespace rdkin
