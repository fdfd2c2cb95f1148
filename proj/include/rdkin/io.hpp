#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "rdkin/mechanism.hpp"
#include "rdkin/observations.hpp"
#include "rdkin/odeint.hpp"
#include "rdkin/profiles.hpp"

namespace rdkin {

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// FNV-1a 64-bit digest as a hex string (run-manifest input fingerprints).
std::string fnv1a_digest(const std::string& bytes);

/// Full-precision formatting that round-trips through strtod bit-exactly.
std::string format_double(double v);

/// theta vectors as {"theta": [...]}, full precision.
Eigen::VectorXd parse_theta_json(const std::string& text);
std::string serialize_theta_json(const Eigen::VectorXd& theta);

/// Trajectory export: tau, T, Y_<name> columns.
std::string trajectory_csv(const Mechanism& mech, const Trajectory& traj);

/// Solver statistics sidecar.
std::string stats_json(const SolverStats& stats);

/// Build an observation set from profile reference compositions: a uniform
/// n_obs subsample of the nodes (mass fractions converted to mole
/// fractions). Throws when the profiles carry no Y columns.
ObservationSet observations_from_profiles(const Mechanism& mech,
                                          const ForcedProfiles& profiles,
                                          int n_obs);

}  // namespace rdkin
