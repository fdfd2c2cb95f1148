#pragma once

#include <Eigen/Dense>

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdkin {

/// Universal gas constant, J/(mol K).
inline constexpr double kGasConstant = 8.314462618;
/// Standard-state pressure for equilibrium constants, Pa.
inline constexpr double kStandardPressure = 101325.0;
/// Reference temperature of the per-species diffusivities, K.
inline constexpr double kTransportRefTemperature = 300.0;

/// Two-range NASA-7 polynomial coefficients for cp, h, s of one species.
struct Nasa7 {
  double t_low = 0.0;
  double t_mid = 0.0;
  double t_high = 0.0;
  std::array<double, 7> low{};
  std::array<double, 7> high{};
};

struct SpeciesSpec {
  std::string name;
  double molar_mass = 0.0;              ///< kg/mol
  std::map<std::string, int> elements;  ///< element symbol -> atom count
  Nasa7 thermo;
  double d_ref = 0.0;  ///< reference diffusivity at 300 K, m^2/s
};

/// Arrhenius parameters. `a` carries units consistent with the reaction
/// order (mol, m^3, s); `ea` is J/mol.
struct ArrheniusParams {
  double a = 0.0;
  double beta = 0.0;
  double ea = 0.0;
};

struct Reaction {
  std::map<int, int> forward;  ///< species index -> nu'
  std::map<int, int> reverse;  ///< species index -> nu''
  ArrheniusParams rate;
  bool reversible = true;
  bool has_third_body = false;
  std::map<int, double> efficiencies;  ///< overrides; unlisted species are 1.0

  int delta_nu() const;  ///< sum_i (nu''_i - nu'_i)
};

struct Mechanism {
  std::vector<SpeciesSpec> species;
  std::vector<Reaction> reactions;

  int n_species() const { return static_cast<int>(species.size()); }
  int n_reactions() const { return static_cast<int>(reactions.size()); }
  /// Index of a species by name, -1 if absent.
  int species_index(const std::string& name) const;
  Eigen::VectorXd molar_masses() const;  ///< kg/mol, mechanism order
};

struct ThermoPoint {
  double cp;  ///< J/(mol K)
  double h;   ///< J/mol
  double s;   ///< J/(mol K)
};

struct MixtureProps {
  double rho;              ///< kg/m^3
  double cp_mass;          ///< J/(kg K)
  double mean_molar_mass;  ///< kg/mol
  Eigen::VectorXd mole_fractions;
  Eigen::VectorXd concentrations;  ///< mol/m^3
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Parse the line-oriented mechanism format. Throws ParseError on syntax
/// errors, unknown species, element imbalance, non-positive A or M, and
/// invalid thermo temperature ranges.
Mechanism parse_mechanism(const std::string& text);

/// Emit the mechanism in the same format at full precision; parse of the
/// output reproduces every numeric field bit-exactly.
std::string serialize_mechanism(const Mechanism& mech);

/// Enumerate every invariant violation; empty result means valid.
std::vector<std::string> validate_mechanism(const Mechanism& mech);

/// NASA-7 evaluation; the coefficient set is chosen by T vs t_mid.
/// Throws std::domain_error for T outside [t_low, t_high].
ThermoPoint thermo_eval(const SpeciesSpec& species, double temperature);

/// d(cp)/dT in J/(mol K^2), same range rules as thermo_eval.
double thermo_cp_derivative(const SpeciesSpec& species, double temperature);

/// Ideal-gas mixture state. Preconditions (T > 0, P > 0, Y >= 0,
/// |sum Y - 1| <= 1e-6) are enforced with std::domain_error.
MixtureProps mixture_props(const Mechanism& mech, double temperature,
                           double pressure, const Eigen::VectorXd& mass_fractions);

/// Standard atomic mass in kg/mol, or nullopt for unknown symbols.
std::optional<double> standard_atomic_mass(const std::string& element);

}  // namespace rdkin
