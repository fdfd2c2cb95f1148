#include "rdkin/mechanism.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>
#include <unordered_map>

namespace rdkin {

namespace {

// IUPAC 2021 standard atomic weights, kg/mol.
const std::unordered_map<std::string, double>& atomic_masses() {
  static const std::unordered_map<std::string, double> table = {
      {"H", 1.008e-3},   {"He", 4.002602e-3}, {"Li", 6.94e-3},
      {"Be", 9.0121831e-3}, {"B", 10.81e-3},  {"C", 12.011e-3},
      {"N", 14.007e-3},  {"O", 15.999e-3},    {"F", 18.998403163e-3},
      {"Ne", 20.1797e-3}, {"Na", 22.98976928e-3}, {"Mg", 24.305e-3},
      {"Al", 26.9815384e-3}, {"Si", 28.085e-3}, {"P", 30.973761998e-3},
      {"S", 32.06e-3},   {"Cl", 35.45e-3},    {"Ar", 39.95e-3},
      {"K", 39.0983e-3}, {"Ca", 40.078e-3},   {"Kr", 83.798e-3},
      {"Xe", 131.293e-3}};
  return table;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, int line) {
  const std::string t = trim(s);
  if (t.empty()) throw ParseError(line, "expected a number");
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw ParseError(line, "malformed number '" + t + "'");
  return v;
}

int parse_int(const std::string& s, int line) {
  const std::string t = trim(s);
  char* end = nullptr;
  long v = std::strtol(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size())
    throw ParseError(line, "malformed integer '" + t + "'");
  return static_cast<int>(v);
}

// key=value tokens; the value may not contain whitespace.
std::map<std::string, std::string> parse_kv(
    const std::vector<std::string>& toks, size_t first, int line) {
  std::map<std::string, std::string> kv;
  for (size_t i = first; i < toks.size(); ++i) {
    size_t eq = toks[i].find('=');
    if (eq == std::string::npos || eq == 0)
      throw ParseError(line, "expected key=value, got '" + toks[i] + "'");
    kv[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
  }
  return kv;
}

std::array<double, 7> parse_coeff_list(const std::string& s, int line) {
  std::string t = trim(s);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']')
    throw ParseError(line, "coefficient list must be bracketed [a1,...,a7]");
  auto parts = split_on(t.substr(1, t.size() - 2), ',');
  if (parts.size() != 7)
    throw ParseError(line, "expected 7 coefficients, got " +
                               std::to_string(parts.size()));
  std::array<double, 7> a{};
  for (int i = 0; i < 7; ++i) a[i] = parse_number(parts[i], line);
  return a;
}

struct SideTerm {
  int coeff;
  std::string name;
};

// One side of a reaction equation: "2 H2 + O2 + M".
std::vector<SideTerm> parse_side(const std::string& side, int line) {
  std::vector<SideTerm> terms;
  for (const std::string& raw : split_on(side, '+')) {
    auto toks = split_ws(trim(raw));
    if (toks.empty()) throw ParseError(line, "empty reaction term");
    if (toks.size() == 1) {
      terms.push_back({1, toks[0]});
    } else if (toks.size() == 2) {
      int c = parse_int(toks[0], line);
      if (c <= 0) throw ParseError(line, "stoichiometric coefficient must be positive");
      terms.push_back({c, toks[1]});
    } else {
      throw ParseError(line, "malformed reaction term '" + trim(raw) + "'");
    }
  }
  return terms;
}

void check_element_balance(const Mechanism& mech, const Reaction& rxn,
                           int line) {
  std::map<std::string, long> net;
  for (const auto& [idx, nu] : rxn.forward)
    for (const auto& [el, cnt] : mech.species[idx].elements)
      net[el] += static_cast<long>(nu) * cnt;
  for (const auto& [idx, nu] : rxn.reverse)
    for (const auto& [el, cnt] : mech.species[idx].elements)
      net[el] -= static_cast<long>(nu) * cnt;
  for (const auto& [el, v] : net)
    if (v != 0)
      throw ParseError(line, "element imbalance for '" + el + "'");
}

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::array<double, 7>& select_coeffs(const Nasa7& t, double T) {
  return T <= t.t_mid ? t.low : t.high;
}

}  // namespace

int Reaction::delta_nu() const {
  int d = 0;
  for (const auto& [i, nu] : reverse) d += nu;
  for (const auto& [i, nu] : forward) d -= nu;
  return d;
}

int Mechanism::species_index(const std::string& name) const {
  for (size_t i = 0; i < species.size(); ++i)
    if (species[i].name == name) return static_cast<int>(i);
  return -1;
}

Eigen::VectorXd Mechanism::molar_masses() const {
  Eigen::VectorXd m(n_species());
  for (int i = 0; i < n_species(); ++i) m[i] = species[i].molar_mass;
  return m;
}

std::optional<double> standard_atomic_mass(const std::string& element) {
  auto it = atomic_masses().find(element);
  if (it == atomic_masses().end()) return std::nullopt;
  return it->second;
}

Mechanism parse_mechanism(const std::string& text) {
  Mechanism mech;
  std::set<std::string> declared_elements;
  bool have_elements_line = false;
  std::map<std::string, int> species_lookup;
  std::vector<bool> has_thermo;
  std::vector<int> species_line;

  std::istringstream stream(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(stream, raw)) {
    ++lineno;
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string ln = trim(raw);
    if (ln.empty()) continue;

    if (ln.rfind("elements:", 0) == 0) {
      for (const std::string& el : split_ws(ln.substr(9)))
        declared_elements.insert(el);
      have_elements_line = true;
      continue;
    }

    auto toks = split_ws(ln);
    const std::string& kw = toks[0];

    if (kw == "species") {
      if (toks.size() < 2) throw ParseError(lineno, "species line needs a name");
      SpeciesSpec sp;
      sp.name = toks[1];
      if (species_lookup.count(sp.name))
        throw ParseError(lineno, "duplicate species '" + sp.name + "'");
      auto kv = parse_kv(toks, 2, lineno);
      if (!kv.count("M") || !kv.count("elements") || !kv.count("Dref"))
        throw ParseError(lineno, "species line needs M=, elements=, Dref=");
      sp.molar_mass = parse_number(kv["M"], lineno);
      if (sp.molar_mass <= 0.0)
        throw ParseError(lineno, "molar mass must be positive");
      sp.d_ref = parse_number(kv["Dref"], lineno);
      if (sp.d_ref <= 0.0)
        throw ParseError(lineno, "reference diffusivity must be positive");
      double elem_mass = 0.0;
      bool elem_mass_known = true;  // abstract elements skip the mass check
      for (const std::string& pair : split_on(kv["elements"], ',')) {
        auto bits = split_on(pair, ':');
        if (bits.size() != 2)
          throw ParseError(lineno, "elements= expects El:count pairs");
        const std::string el = trim(bits[0]);
        int cnt = parse_int(bits[1], lineno);
        if (cnt <= 0) throw ParseError(lineno, "element count must be positive");
        if (have_elements_line && !declared_elements.count(el))
          throw ParseError(lineno, "element '" + el + "' not declared");
        sp.elements[el] = cnt;
        if (auto am = standard_atomic_mass(el))
          elem_mass += cnt * *am;
        else
          elem_mass_known = false;
      }
      if (sp.elements.empty())
        throw ParseError(lineno, "species needs at least one element");
      if (elem_mass_known &&
          std::abs(sp.molar_mass - elem_mass) > 1e-3 * elem_mass)
        throw ParseError(lineno, "molar mass of '" + sp.name +
                                     "' deviates more than 0.1% from the "
                                     "element-weighted sum");
      species_lookup[sp.name] = mech.n_species();
      mech.species.push_back(std::move(sp));
      has_thermo.push_back(false);
      species_line.push_back(lineno);
      continue;
    }

    if (kw == "thermo") {
      if (toks.size() < 2) throw ParseError(lineno, "thermo line needs a name");
      auto it = species_lookup.find(toks[1]);
      if (it == species_lookup.end())
        throw ParseError(lineno, "thermo for unknown species '" + toks[1] + "'");
      // Re-split so the bracketed lists survive embedded spaces.
      std::string rest = ln.substr(ln.find(toks[1]) + toks[1].size());
      std::map<std::string, std::string> kv;
      for (const std::string key : {"Tlow", "Tmid", "Thigh", "low", "high"}) {
        // Anchor at a token boundary so "low=" cannot match inside "Tlow=".
        size_t pos = std::string::npos;
        for (size_t at = rest.find(key + "="); at != std::string::npos;
             at = rest.find(key + "=", at + 1)) {
          if (at == 0 || rest[at - 1] == ' ' || rest[at - 1] == '\t') {
            pos = at;
            break;
          }
        }
        if (pos == std::string::npos)
          throw ParseError(lineno, "thermo line missing " + key + "=");
        size_t vbeg = pos + key.size() + 1;
        size_t vend;
        if (rest[vbeg] == '[') {
          vend = rest.find(']', vbeg);
          if (vend == std::string::npos)
            throw ParseError(lineno, "unterminated coefficient list");
          ++vend;
        } else {
          vend = rest.find_first_of(" \t", vbeg);
          if (vend == std::string::npos) vend = rest.size();
        }
        kv[key] = rest.substr(vbeg, vend - vbeg);
      }
      Nasa7 th;
      th.t_low = parse_number(kv["Tlow"], lineno);
      th.t_mid = parse_number(kv["Tmid"], lineno);
      th.t_high = parse_number(kv["Thigh"], lineno);
      if (!(th.t_low < th.t_mid && th.t_mid < th.t_high))
        throw ParseError(lineno, "thermo ranges must satisfy Tlow < Tmid < Thigh");
      th.low = parse_coeff_list(kv["low"], lineno);
      th.high = parse_coeff_list(kv["high"], lineno);
      mech.species[it->second].thermo = th;
      has_thermo[it->second] = true;
      continue;
    }

    if (kw == "reaction") {
      std::string body = trim(ln.substr(8));
      // Equation runs until the first key=value token.
      auto all = split_ws(body);
      size_t kv_start = all.size();
      for (size_t i = 0; i < all.size(); ++i) {
        if (all[i].find('=') != std::string::npos && all[i] != "<=>" &&
            all[i] != "=>") {
          kv_start = i;
          break;
        }
      }
      std::string equation;
      for (size_t i = 0; i < kv_start; ++i) {
        if (i) equation += ' ';
        equation += all[i];
      }
      Reaction rxn;
      size_t arrow = equation.find("<=>");
      size_t arrow_len = 3;
      rxn.reversible = true;
      if (arrow == std::string::npos) {
        arrow = equation.find("=>");
        arrow_len = 2;
        rxn.reversible = false;
      }
      if (arrow == std::string::npos)
        throw ParseError(lineno, "reaction needs '<=>' or '=>'");
      auto lhs = parse_side(equation.substr(0, arrow), lineno);
      auto rhs_terms = parse_side(equation.substr(arrow + arrow_len), lineno);

      bool m_lhs = false, m_rhs = false;
      auto fill = [&](const std::vector<SideTerm>& terms,
                      std::map<int, int>& dst, bool& m_flag) {
        for (const auto& t : terms) {
          if (t.name == "M") {
            if (t.coeff != 1 || m_flag)
              throw ParseError(lineno, "third body 'M' may appear once per side");
            m_flag = true;
            continue;
          }
          auto it = species_lookup.find(t.name);
          if (it == species_lookup.end())
            throw ParseError(lineno, "unknown species '" + t.name + "' in reaction");
          dst[it->second] += t.coeff;
        }
      };
      fill(lhs, rxn.forward, m_lhs);
      fill(rhs_terms, rxn.reverse, m_rhs);
      if (m_lhs != m_rhs)
        throw ParseError(lineno, "third body 'M' must appear on both sides");
      rxn.has_third_body = m_lhs;

      auto kv = parse_kv(all, kv_start, lineno);
      if (!kv.count("A") || !kv.count("beta") || !kv.count("Ea"))
        throw ParseError(lineno, "reaction line needs A=, beta=, Ea=");
      rxn.rate.a = parse_number(kv["A"], lineno);
      if (rxn.rate.a <= 0.0)
        throw ParseError(lineno, "pre-exponential factor must be positive");
      rxn.rate.beta = parse_number(kv["beta"], lineno);
      rxn.rate.ea = parse_number(kv["Ea"], lineno);
      if (kv.count("third_body")) {
        rxn.has_third_body = true;
        for (const std::string& pair : split_on(kv["third_body"], ',')) {
          auto bits = split_on(pair, ':');
          if (bits.size() != 2)
            throw ParseError(lineno, "third_body= expects sp:eff pairs");
          auto it = species_lookup.find(trim(bits[0]));
          if (it == species_lookup.end())
            throw ParseError(lineno, "unknown species '" + trim(bits[0]) +
                                         "' in third_body");
          rxn.efficiencies[it->second] = parse_number(bits[1], lineno);
        }
      }
      if (rxn.forward.empty())
        throw ParseError(lineno, "reaction needs at least one reactant");
      int molecularity = 0;
      for (const auto& [i, nu] : rxn.forward) molecularity += nu;
      if (molecularity < 1 || molecularity > 3)
        throw ParseError(lineno, "forward molecularity must be 1, 2, or 3");
      check_element_balance(mech, rxn, lineno);
      mech.reactions.push_back(std::move(rxn));
      continue;
    }

    throw ParseError(lineno, "unknown directive '" + kw + "'");
  }

  if (mech.species.empty()) throw ParseError(lineno, "no species defined");
  if (mech.reactions.empty()) throw ParseError(lineno, "no reactions defined");
  for (int i = 0; i < mech.n_species(); ++i)
    if (!has_thermo[i])
      throw ParseError(species_line[i],
                       "species '" + mech.species[i].name + "' has no thermo");
  return mech;
}

std::string serialize_mechanism(const Mechanism& mech) {
  std::ostringstream out;
  std::set<std::string> elements;
  for (const auto& sp : mech.species)
    for (const auto& [el, cnt] : sp.elements) elements.insert(el);
  out << "elements:";
  for (const auto& el : elements) out << ' ' << el;
  out << '\n';

  for (const auto& sp : mech.species) {
    out << "species " << sp.name << " M=" << format_full(sp.molar_mass)
        << " elements=";
    bool first = true;
    for (const auto& [el, cnt] : sp.elements) {
      if (!first) out << ',';
      out << el << ':' << cnt;
      first = false;
    }
    out << " Dref=" << format_full(sp.d_ref) << '\n';
  }
  for (const auto& sp : mech.species) {
    out << "thermo " << sp.name << " Tlow=" << format_full(sp.thermo.t_low)
        << " Tmid=" << format_full(sp.thermo.t_mid)
        << " Thigh=" << format_full(sp.thermo.t_high) << " low=[";
    for (int i = 0; i < 7; ++i)
      out << (i ? "," : "") << format_full(sp.thermo.low[i]);
    out << "] high=[";
    for (int i = 0; i < 7; ++i)
      out << (i ? "," : "") << format_full(sp.thermo.high[i]);
    out << "]\n";
  }
  for (const auto& rxn : mech.reactions) {
    out << "reaction ";
    auto side = [&](const std::map<int, int>& terms) {
      std::string s;
      bool first = true;
      for (const auto& [idx, nu] : terms) {
        if (!first) s += " + ";
        if (nu != 1) s += std::to_string(nu) + ' ';
        s += mech.species[idx].name;
        first = false;
      }
      if (rxn.has_third_body) s += " + M";
      return s;
    };
    out << side(rxn.forward) << (rxn.reversible ? " <=> " : " => ")
        << side(rxn.reverse);
    out << " A=" << format_full(rxn.rate.a)
        << " beta=" << format_full(rxn.rate.beta)
        << " Ea=" << format_full(rxn.rate.ea);
    if (!rxn.efficiencies.empty()) {
      out << " third_body=";
      bool first = true;
      for (const auto& [idx, eff] : rxn.efficiencies) {
        if (!first) out << ',';
        out << mech.species[idx].name << ':' << format_full(eff);
        first = false;
      }
    }
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> validate_mechanism(const Mechanism& mech) {
  std::vector<std::string> report;
  auto add = [&](const std::string& msg) { report.push_back(msg); };

  if (mech.species.empty()) add("mechanism has no species");
  if (mech.reactions.empty()) add("mechanism has no reactions");

  std::set<std::string> seen;
  for (const auto& sp : mech.species)
    if (!seen.insert(sp.name).second)
      add("duplicate species name '" + sp.name + "'");

  for (const auto& sp : mech.species) {
    if (sp.molar_mass <= 0.0)
      add("species '" + sp.name + "': molar mass must be positive");
    if (sp.d_ref <= 0.0)
      add("species '" + sp.name + "': reference diffusivity must be positive");
    double elem_mass = 0.0;
    bool mass_known = true;
    for (const auto& [el, cnt] : sp.elements) {
      if (auto am = standard_atomic_mass(el))
        elem_mass += cnt * *am;
      else
        mass_known = false;  // abstract element: mass check is vacuous
    }
    if (mass_known && !sp.elements.empty() &&
        std::abs(sp.molar_mass - elem_mass) > 1e-3 * elem_mass)
      add("species '" + sp.name +
          "': molar mass deviates more than 0.1% from element sum");
    const Nasa7& th = sp.thermo;
    if (!(th.t_low < th.t_mid && th.t_mid < th.t_high)) {
      add("species '" + sp.name + "': invalid thermo temperature ranges");
    } else {
      const double tm = th.t_mid;
      auto cp_of = [&](const std::array<double, 7>& a) {
        return kGasConstant *
               (a[0] + tm * (a[1] + tm * (a[2] + tm * (a[3] + tm * a[4]))));
      };
      double cp_lo = cp_of(th.low), cp_hi = cp_of(th.high);
      double scale = std::max(std::abs(cp_lo), std::abs(cp_hi));
      if (scale > 0.0 && std::abs(cp_lo - cp_hi) > 0.01 * scale)
        add("species '" + sp.name + "': cp discontinuous at Tmid (" +
            format_full(std::abs(cp_lo - cp_hi) / scale * 100.0) + "%)");
    }
  }

  for (size_t j = 0; j < mech.reactions.size(); ++j) {
    const Reaction& rxn = mech.reactions[j];
    const std::string tag = "reaction " + std::to_string(j);
    if (rxn.rate.a <= 0.0) add(tag + ": A must be positive");
    std::map<std::string, long> net;
    bool indices_ok = true;
    auto scan = [&](const std::map<int, int>& terms, int sign) {
      for (const auto& [idx, nu] : terms) {
        if (idx < 0 || idx >= mech.n_species()) {
          indices_ok = false;
          continue;
        }
        if (nu < 0) add(tag + ": negative stoichiometric coefficient");
        for (const auto& [el, cnt] : mech.species[idx].elements)
          net[el] += static_cast<long>(sign) * nu * cnt;
      }
    };
    scan(rxn.forward, +1);
    scan(rxn.reverse, -1);
    if (!indices_ok) add(tag + ": species index out of range");
    for (const auto& [el, v] : net)
      if (v != 0) add(tag + ": element imbalance for '" + el + "'");
    int molecularity = 0;
    for (const auto& [idx, nu] : rxn.forward) molecularity += nu;
    if (molecularity < 1 || molecularity > 3)
      add(tag + ": forward molecularity must be 1, 2, or 3");
    for (const auto& [idx, eff] : rxn.efficiencies)
      if (eff < 0.0) add(tag + ": negative third-body efficiency");
  }
  return report;
}

ThermoPoint thermo_eval(const SpeciesSpec& species, double temperature) {
  const Nasa7& th = species.thermo;
  const double T = temperature;
  if (T < th.t_low || T > th.t_high)
    throw std::domain_error("temperature " + std::to_string(T) +
                            " K outside thermo range of '" + species.name + "'");
  const auto& a = select_coeffs(th, T);
  const double R = kGasConstant;
  ThermoPoint p;
  p.cp = R * (a[0] + T * (a[1] + T * (a[2] + T * (a[3] + T * a[4]))));
  p.h = R * T *
        (a[0] + T * (a[1] / 2 + T * (a[2] / 3 + T * (a[3] / 4 + T * a[4] / 5))) +
         a[5] / T);
  p.s = R * (a[0] * std::log(T) +
             T * (a[1] + T * (a[2] / 2 + T * (a[3] / 3 + T * a[4] / 4))) + a[6]);
  return p;
}

double thermo_cp_derivative(const SpeciesSpec& species, double temperature) {
  const Nasa7& th = species.thermo;
  const double T = temperature;
  if (T < th.t_low || T > th.t_high)
    throw std::domain_error("temperature " + std::to_string(T) +
                            " K outside thermo range of '" + species.name + "'");
  const auto& a = select_coeffs(th, T);
  return kGasConstant * (a[1] + T * (2.0 * a[2] + T * (3.0 * a[3] + T * 4.0 * a[4])));
}

MixtureProps mixture_props(const Mechanism& mech, double temperature,
                           double pressure, const Eigen::VectorXd& mass_fractions) {
  const int n = mech.n_species();
  if (mass_fractions.size() != n)
    throw std::domain_error("mass-fraction vector has wrong length");
  if (temperature <= 0.0) throw std::domain_error("temperature must be positive");
  if (pressure <= 0.0) throw std::domain_error("pressure must be positive");
  if ((mass_fractions.array() < 0.0).any())
    throw std::domain_error("mass fractions must be non-negative");
  if (std::abs(mass_fractions.sum() - 1.0) > 1e-6)
    throw std::domain_error("mass fractions must sum to 1 within 1e-6");

  MixtureProps mix;
  double inv_mbar = 0.0;
  for (int i = 0; i < n; ++i)
    inv_mbar += mass_fractions[i] / mech.species[i].molar_mass;
  mix.mean_molar_mass = 1.0 / inv_mbar;
  mix.rho = pressure * mix.mean_molar_mass / (kGasConstant * temperature);
  mix.mole_fractions.resize(n);
  mix.concentrations.resize(n);
  double cp_mass = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m_i = mech.species[i].molar_mass;
    mix.mole_fractions[i] = mass_fractions[i] * mix.mean_molar_mass / m_i;
    mix.concentrations[i] = mix.rho * mass_fractions[i] / m_i;
    cp_mass += mass_fractions[i] * thermo_eval(mech.species[i], temperature).cp / m_i;
  }
  mix.cp_mass = cp_mass;
  return mix;
}

}  // namespace rdkin
