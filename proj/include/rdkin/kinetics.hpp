#pragma once

#include <Eigen/Dense>

#include <memory>

#include "rdkin/mechanism.hpp"
#include "rdkin/profiles.hpp"

namespace rdkin {

/// Transported thermo-chemical state: temperature plus mass fractions,
/// packed as phi = [T, Y_1 .. Y_n] for integration.
struct State {
  double temperature = 0.0;
  Eigen::VectorXd mass_fractions;

  Eigen::VectorXd pack() const;
  static State unpack(const Eigen::VectorXd& phi);
};

/// Smallest admissible kinetic multiplier.
inline constexpr double kThetaMin = 1e-6;
/// Allowed transient mass-fraction undershoot during integration.
inline constexpr double kMassFractionClip = 1e-12;

struct RhsMode {
  enum class Coupling { diff_chem, pure_chem };
  enum class Thermal { forced, coupled };
  Coupling coupling = Coupling::diff_chem;
  Thermal thermal = Thermal::forced;

  bool diffusion_on() const { return coupling == Coupling::diff_chem; }
  bool temperature_forced() const { return thermal == Thermal::forced; }
};

/// Forward and reverse rate constants of reaction j at temperature T with
/// multiplier theta_j. Reverse is K_f / K_eq,c; zero when irreversible.
std::pair<double, double> rate_constants(const Mechanism& mech, int reaction,
                                         double temperature, double theta_j);

/// Concentration-based equilibrium constant of reaction j,
/// (P0/RT)^dnu * exp(-dG0/RT). Independent of theta.
double equilibrium_constant(const Mechanism& mech, int reaction, double temperature);

/// Net molar production rates, mol/(m^3 s). Negative concentrations are
/// clamped to zero inside the rate products only.
Eigen::VectorXd production_rates(const Mechanism& mech, const State& state,
                                 double pressure, const Eigen::VectorXd& theta);

/// Right-hand side of the residence-time ODE, d phi / d tau.
Eigen::VectorXd rhs(const Mechanism& mech, double tau, const Eigen::VectorXd& phi,
                    const Eigen::VectorXd& theta, const ForcedProfiles& profiles,
                    RhsMode mode);

/// Analytic Jacobians of rhs with respect to the state and to theta.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> jacobians(
    const Mechanism& mech, double tau, const Eigen::VectorXd& phi,
    const Eigen::VectorXd& theta, const ForcedProfiles& profiles, RhsMode mode);

/// Flattened, reusable evaluator behind the free functions above. The
/// compiled tables are immutable; scratch space makes one instance
/// single-threaded, so use one evaluator per concurrent integration.
class KineticsEvaluator {
 public:
  KineticsEvaluator(const Mechanism& mech, const ForcedProfiles* profiles,
                    RhsMode mode);
  ~KineticsEvaluator();

  int state_dim() const { return n_species_ + 1; }
  int n_reactions() const { return n_reactions_; }
  const Mechanism& mechanism() const { return *mech_; }
  RhsMode mode() const { return mode_; }

  void rhs(double tau, const Eigen::VectorXd& phi, const Eigen::VectorXd& theta,
           Eigen::VectorXd& out) const;
  void jacobians(double tau, const Eigen::VectorXd& phi,
                 const Eigen::VectorXd& theta, Eigen::MatrixXd& j_phi,
                 Eigen::MatrixXd& j_theta) const;

  /// Production rates at an explicit rate state (used by flame1d too).
  void production_rates(double temperature, double pressure,
                        const Eigen::VectorXd& mass_fractions,
                        const Eigen::VectorXd& theta, Eigen::VectorXd& omega) const;

  /// Energy source -sum_i h_i * omega_i, W/m^3.
  double heat_release(double temperature, const Eigen::VectorXd& omega) const;

  /// cp (J/(mol K)) and h (J/mol) of every species at T.
  void species_thermo(double temperature, Eigen::VectorXd& cp,
                      Eigen::VectorXd& h) const;

 private:
  struct FlatReaction {
    std::vector<std::pair<int, int>> fwd, rev;  // (species, nu)
    double a, beta, ea;
    bool reversible;
    bool third_body;
    int dnu;
    Eigen::VectorXd eff;  // size n_species when third_body
  };

  struct RateWork;
  RateWork& work() const;

  void eval_thermo(double T) const;
  void eval_rates(double T, double P, const Eigen::VectorXd& Y,
                  const Eigen::VectorXd& theta, RateWork& w) const;

  const Mechanism* mech_;
  const ForcedProfiles* profiles_;
  RhsMode mode_;
  int n_species_;
  int n_reactions_;
  Eigen::VectorXd molar_mass_;
  Eigen::VectorXd inv_molar_mass_;
  Eigen::MatrixXd delta_nu_;  // n_species x n_reactions, nu'' - nu'
  std::vector<FlatReaction> flat_;

  // Scratch (mutable: evaluator instances are not shared across threads).
  mutable Eigen::VectorXd cp_, h_, s_, dcp_;
  mutable double thermo_T_ = -1.0;
  mutable std::unique_ptr<RateWork> work_;
};

}  // namespace rdkin
