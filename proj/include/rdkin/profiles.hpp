#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "rdkin/mechanism.hpp"

namespace rdkin {

/// Tabulated forcing along the residence-time coordinate: T(tau), P(tau),
/// the per-species diffusion source (kg/(m^3 s)) and the thermal diffusion
/// source (W/m^3), with shape-preserving cubic interpolation between nodes.
struct ForcedProfiles {
  Eigen::VectorXd tau;                 ///< strictly increasing, s
  Eigen::VectorXd temperature;         ///< K
  Eigen::VectorXd pressure;            ///< Pa
  Eigen::MatrixXd sdiff_species;       ///< n_species x n_nodes
  Eigen::VectorXd sdiff_temperature;   ///< n_nodes
  std::vector<std::string> species_names;

  /// True when the source data actually carried diffusion-source columns;
  /// loaders that default them to zero clear this flag.
  bool sdiff_present = true;

  // Optional provenance from a spatial solution (size 0 when absent).
  Eigen::VectorXd x;  ///< m
  Eigen::VectorXd u;  ///< m/s
  /// Optional reference mass fractions carried alongside (n_species x n_nodes).
  Eigen::MatrixXd y_ref;

  /// Validate invariants and precompute interpolation slopes. Must be
  /// called after the node arrays are filled; throws std::invalid_argument
  /// on violated invariants.
  void finalize();

  int n_nodes() const { return static_cast<int>(tau.size()); }
  int n_species() const { return static_cast<int>(sdiff_species.rows()); }
  double tau_begin() const { return tau[0]; }
  double tau_end() const { return tau[tau.size() - 1]; }

  // Precomputed pchip slopes (filled by finalize()).
  Eigen::VectorXd temperature_slope;
  Eigen::VectorXd pressure_slope;
  Eigen::MatrixXd sdiff_species_slope;
  Eigen::VectorXd sdiff_temperature_slope;
};

struct ProfileSample {
  double temperature;     ///< K
  double temperature_dot; ///< dT/dtau, K/s
  double pressure;        ///< Pa
  Eigen::VectorXd sdiff_species;
  double sdiff_temperature;
};

/// Residence time from a spatial velocity field: trapezoidal integration of
/// 1/max(u, u_floor) along x. Throws std::invalid_argument for non-monotone
/// x or non-positive u outside the final 5% of the domain.
Eigen::VectorXd residence_time(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                               double u_floor = 1e-4);

/// Parse the profile CSV format. Species columns must match the mechanism's
/// species names; missing Sdiff columns default to zero and clear
/// sdiff_present. Requires either a `tau` column or both `x` and `u`.
ForcedProfiles load_profiles(const std::string& csv, const Mechanism& mech);

/// Emit the profile CSV at full precision (round-trips bit-exactly).
std::string serialize_profiles(const ForcedProfiles& profiles);

/// Interpolate all channels at tau. Throws std::domain_error outside the
/// tabulated domain.
ProfileSample eval_profiles(const ForcedProfiles& profiles, double tau);

/// Scalar-channel variants used where only part of the sample is needed.
double eval_profile_temperature(const ForcedProfiles& profiles, double tau,
                                double* derivative = nullptr);

}  // namespace rdkin
