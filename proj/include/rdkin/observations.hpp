#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "rdkin/mechanism.hpp"

namespace rdkin {

/// Reference data sampled along the residence coordinate. Species references
/// are mole fractions (the loss basis); temperatures are carried for
/// diagnostics only and may be empty.
struct ObservationSet {
  std::vector<double> times;
  Eigen::MatrixXd mole_fractions;  ///< n_species x n_obs
  Eigen::VectorXd temperatures;    ///< n_obs or empty
  std::vector<int> primal;         ///< species indices entering the loss

  int n_obs() const { return static_cast<int>(times.size()); }
};

/// log-MSE loss specification: mean over observations and primal species of
/// squared differences of ln(X + epsilon).
struct LossSpec {
  std::vector<int> primal;
  double epsilon = 1e-20;
};

/// Resolve species names ("H2,O2,H2O") to indices; throws on unknown names.
std::vector<int> resolve_species(const Mechanism& mech,
                                 const std::vector<std::string>& names);

}  // namespace rdkin
