#include "rdkin/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>

#include "rdkin/interp.hpp"

namespace rdkin {

namespace {

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Eigen::VectorXd pchip_slopes(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.size();
  if (n < 2 || y.size() != n)
    throw std::invalid_argument("pchip needs at least two matching nodes");
  Eigen::VectorXd m(n);
  if (n == 2) {
    m[0] = m[1] = (y[1] - y[0]) / (x[1] - x[0]);
    return m;
  }
  Eigen::VectorXd h(n - 1), d(n - 1);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    h[k] = x[k + 1] - x[k];
    d[k] = (y[k + 1] - y[k]) / h[k];
  }
  for (Eigen::Index k = 1; k + 1 < n; ++k) {
    if (d[k - 1] * d[k] <= 0.0) {
      m[k] = 0.0;
    } else {
      // Weighted harmonic mean of the neighbouring secants.
      const double w1 = 2.0 * h[k] + h[k - 1];
      const double w2 = h[k] + 2.0 * h[k - 1];
      m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
    }
  }
  // One-sided three-point ends, clipped to preserve shape.
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double m0 = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (sign(m0) != sign(d0)) {
      m0 = 0.0;
    } else if (sign(d0) != sign(d1) && std::abs(m0) > 3.0 * std::abs(d0)) {
      m0 = 3.0 * d0;
    }
    return m0;
  };
  m[0] = end_slope(h[0], h[1], d[0], d[1]);
  m[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
  return m;
}

double hermite_value(double x0, double x1, double y0, double y1, double m0,
                     double m1, double x) {
  const double h = x1 - x0;
  const double t = (x - x0) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 +
         (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1;
}

double hermite_derivative(double x0, double x1, double y0, double y1, double m0,
                          double m1, double x) {
  const double h = x1 - x0;
  const double t = (x - x0) / h;
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * h * m0 +
          (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * h * m1) /
         h;
}

Eigen::Index hunt_interval(const Eigen::VectorXd& x, double q) {
  const Eigen::Index n = x.size();
  Eigen::Index lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    const Eigen::Index mid = (lo + hi) / 2;
    if (x[mid] <= q)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

Eigen::VectorXd residence_time(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                               double u_floor) {
  const Eigen::Index n = x.size();
  if (n < 2 || u.size() != n)
    throw std::invalid_argument("residence_time needs matching grids of size >= 2");
  const double span = x[n - 1] - x[0];
  for (Eigen::Index k = 0; k + 1 < n; ++k)
    if (!(x[k + 1] > x[k]))
      throw std::invalid_argument("x grid must be strictly increasing");
  for (Eigen::Index k = 0; k < n; ++k) {
    const bool near_stagnation = x[k] > x[0] + 0.95 * span;
    if (u[k] <= 0.0 && !near_stagnation)
      throw std::invalid_argument(
          "velocity must be positive away from the stagnation region");
  }
  Eigen::VectorXd tau(n);
  tau[0] = 0.0;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const double inv0 = 1.0 / std::max(u[k], u_floor);
    const double inv1 = 1.0 / std::max(u[k + 1], u_floor);
    tau[k + 1] = tau[k] + 0.5 * (x[k + 1] - x[k]) * (inv0 + inv1);
  }
  return tau;
}

void ForcedProfiles::finalize() {
  const Eigen::Index n = tau.size();
  if (n < 2) throw std::invalid_argument("profiles need at least two nodes");
  for (Eigen::Index k = 0; k + 1 < n; ++k)
    if (!(tau[k + 1] > tau[k]))
      throw std::invalid_argument("tau grid must be strictly increasing");
  if (temperature.size() != n || pressure.size() != n ||
      sdiff_temperature.size() != n || sdiff_species.cols() != n)
    throw std::invalid_argument("profile arrays must share the tau grid length");
  if ((temperature.array() <= 0.0).any())
    throw std::invalid_argument("profile temperature must be positive");
  if ((pressure.array() <= 0.0).any())
    throw std::invalid_argument("profile pressure must be positive");
  if (static_cast<Eigen::Index>(species_names.size()) != sdiff_species.rows())
    throw std::invalid_argument("species name list must match sdiff rows");

  temperature_slope = pchip_slopes(tau, temperature);
  pressure_slope = pchip_slopes(tau, pressure);
  sdiff_temperature_slope = pchip_slopes(tau, sdiff_temperature);
  sdiff_species_slope.resize(sdiff_species.rows(), n);
  for (Eigen::Index i = 0; i < sdiff_species.rows(); ++i)
    sdiff_species_slope.row(i) =
        pchip_slopes(tau, sdiff_species.row(i).transpose()).transpose();
}

ProfileSample eval_profiles(const ForcedProfiles& p, double tau_q) {
  if (p.temperature_slope.size() != p.tau.size())
    throw std::logic_error("profiles not finalized");
  if (tau_q < p.tau_begin() || tau_q > p.tau_end())
    throw std::domain_error("tau outside the profile domain");
  const Eigen::Index k = hunt_interval(p.tau, tau_q);
  const double x0 = p.tau[k], x1 = p.tau[k + 1];

  ProfileSample s;
  s.temperature = hermite_value(x0, x1, p.temperature[k], p.temperature[k + 1],
                                p.temperature_slope[k], p.temperature_slope[k + 1],
                                tau_q);
  s.temperature_dot =
      hermite_derivative(x0, x1, p.temperature[k], p.temperature[k + 1],
                         p.temperature_slope[k], p.temperature_slope[k + 1], tau_q);
  s.pressure = hermite_value(x0, x1, p.pressure[k], p.pressure[k + 1],
                             p.pressure_slope[k], p.pressure_slope[k + 1], tau_q);
  s.sdiff_temperature = hermite_value(
      x0, x1, p.sdiff_temperature[k], p.sdiff_temperature[k + 1],
      p.sdiff_temperature_slope[k], p.sdiff_temperature_slope[k + 1], tau_q);
  const Eigen::Index ns = p.sdiff_species.rows();
  s.sdiff_species.resize(ns);
  for (Eigen::Index i = 0; i < ns; ++i)
    s.sdiff_species[i] = hermite_value(
        x0, x1, p.sdiff_species(i, k), p.sdiff_species(i, k + 1),
        p.sdiff_species_slope(i, k), p.sdiff_species_slope(i, k + 1), tau_q);
  return s;
}

double eval_profile_temperature(const ForcedProfiles& p, double tau_q,
                                double* derivative) {
  if (tau_q < p.tau_begin() || tau_q > p.tau_end())
    throw std::domain_error("tau outside the profile domain");
  const Eigen::Index k = hunt_interval(p.tau, tau_q);
  const double x0 = p.tau[k], x1 = p.tau[k + 1];
  if (derivative)
    *derivative =
        hermite_derivative(x0, x1, p.temperature[k], p.temperature[k + 1],
                           p.temperature_slope[k], p.temperature_slope[k + 1], tau_q);
  return hermite_value(x0, x1, p.temperature[k], p.temperature[k + 1],
                       p.temperature_slope[k], p.temperature_slope[k + 1], tau_q);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

ForcedProfiles load_profiles(const std::string& csv, const Mechanism& mech) {
  std::istringstream stream(csv);
  std::string line;
  if (!std::getline(stream, line))
    throw std::invalid_argument("profile CSV is empty");

  auto header = split_csv_line(line);
  std::map<std::string, int> col;
  for (size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = static_cast<int>(i);

  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(stream, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("profile CSV row " + std::to_string(lineno) +
                                  " has " + std::to_string(cells.size()) +
                                  " cells, expected " + std::to_string(header.size()));
    std::vector<double> vals(cells.size());
    for (size_t i = 0; i < cells.size(); ++i) {
      const std::string cell = trim(cells[i]);
      char* end = nullptr;
      vals[i] = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw std::invalid_argument("profile CSV row " + std::to_string(lineno) +
                                    ": malformed number '" + cell + "'");
    }
    rows.push_back(std::move(vals));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  if (n < 2) throw std::invalid_argument("profile CSV needs at least two rows");

  auto column = [&](const std::string& name) {
    Eigen::VectorXd v(n);
    const int c = col.at(name);
    for (Eigen::Index r = 0; r < n; ++r) v[r] = rows[r][c];
    return v;
  };

  const int ns = mech.n_species();
  ForcedProfiles p;
  p.species_names.resize(ns);
  for (int i = 0; i < ns; ++i) p.species_names[i] = mech.species[i].name;

  if (!col.count("T") || !col.count("P"))
    throw std::invalid_argument("profile CSV needs T and P columns");
  const bool have_tau = col.count("tau") > 0;
  const bool have_xu = col.count("x") > 0 && col.count("u") > 0;
  if (!have_tau && !have_xu)
    throw std::invalid_argument("profile CSV needs a tau column or x and u columns");

  if (col.count("x")) p.x = column("x");
  if (col.count("u")) p.u = column("u");
  if (have_tau) {
    p.tau = column("tau");
    for (Eigen::Index k = 0; k + 1 < n; ++k)
      if (!(p.tau[k + 1] > p.tau[k]))
        throw std::invalid_argument("tau column must be strictly increasing");
  } else {
    p.tau = residence_time(p.x, p.u);
  }
  p.temperature = column("T");
  p.pressure = column("P");

  // Species-linked columns. Any unknown species name is an error.
  for (const auto& [name, idx] : col) {
    for (const std::string prefix : {"SdiffY_", "Y_"}) {
      if (name.rfind(prefix, 0) == 0) {
        const std::string sp = name.substr(prefix.size());
        if (mech.species_index(sp) < 0)
          throw std::invalid_argument("profile column '" + name +
                                      "' names unknown species '" + sp + "'");
      }
    }
  }

  p.sdiff_species = Eigen::MatrixXd::Zero(ns, n);
  p.sdiff_temperature = Eigen::VectorXd::Zero(n);
  bool any_sdiff = false;
  for (int i = 0; i < ns; ++i) {
    const std::string name = "SdiffY_" + mech.species[i].name;
    if (col.count(name)) {
      p.sdiff_species.row(i) = column(name).transpose();
      any_sdiff = true;
    }
  }
  if (col.count("SdiffT")) {
    p.sdiff_temperature = column("SdiffT");
    any_sdiff = true;
  }
  p.sdiff_present = any_sdiff;

  bool any_y = false;
  for (int i = 0; i < ns; ++i)
    if (col.count("Y_" + mech.species[i].name)) any_y = true;
  if (any_y) {
    p.y_ref = Eigen::MatrixXd::Zero(ns, n);
    for (int i = 0; i < ns; ++i) {
      const std::string name = "Y_" + mech.species[i].name;
      if (col.count(name)) p.y_ref.row(i) = column(name).transpose();
    }
  }

  p.finalize();
  return p;
}

std::string serialize_profiles(const ForcedProfiles& p) {
  std::ostringstream out;
  const Eigen::Index n = p.tau.size();
  const Eigen::Index ns = p.sdiff_species.rows();
  const bool have_x = p.x.size() == n;
  const bool have_u = p.u.size() == n;
  const bool have_y = p.y_ref.rows() == ns && p.y_ref.cols() == n;

  out << "tau";
  if (have_x) out << ",x";
  if (have_u) out << ",u";
  out << ",T,P";
  if (have_y)
    for (Eigen::Index i = 0; i < ns; ++i) out << ",Y_" << p.species_names[i];
  if (p.sdiff_present) {
    for (Eigen::Index i = 0; i < ns; ++i) out << ",SdiffY_" << p.species_names[i];
    out << ",SdiffT";
  }
  out << '\n';
  for (Eigen::Index k = 0; k < n; ++k) {
    out << format_full(p.tau[k]);
    if (have_x) out << ',' << format_full(p.x[k]);
    if (have_u) out << ',' << format_full(p.u[k]);
    out << ',' << format_full(p.temperature[k]) << ',' << format_full(p.pressure[k]);
    if (have_y)
      for (Eigen::Index i = 0; i < ns; ++i) out << ',' << format_full(p.y_ref(i, k));
    if (p.sdiff_present) {
      for (Eigen::Index i = 0; i < ns; ++i)
        out << ',' << format_full(p.sdiff_species(i, k));
      out << ',' << format_full(p.sdiff_temperature[k]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace rdkin
