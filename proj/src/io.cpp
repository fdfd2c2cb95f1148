#include "rdkin/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rdkin {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

std::string fnv1a_digest(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Eigen::VectorXd parse_theta_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.contains("theta") || !j["theta"].is_array())
    throw std::runtime_error("theta file needs a \"theta\" array");
  const auto& arr = j["theta"];
  Eigen::VectorXd theta(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) theta[i] = arr[i].get<double>();
  return theta;
}

std::string serialize_theta_json(const Eigen::VectorXd& theta) {
  std::ostringstream out;
  out << "{\"theta\": [";
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    out << (i ? ", " : "") << format_double(theta[i]);
  out << "]}\n";
  return out.str();
}

std::string trajectory_csv(const Mechanism& mech, const Trajectory& traj) {
  std::ostringstream out;
  out << "tau,T";
  for (const auto& sp : mech.species) out << ",Y_" << sp.name;
  out << '\n';
  for (size_t k = 0; k < traj.times.size(); ++k) {
    out << format_double(traj.times[k]);
    const Eigen::VectorXd& y = traj.states[k];
    for (Eigen::Index i = 0; i < y.size(); ++i) out << ',' << format_double(y[i]);
    out << '\n';
  }
  return out.str();
}

std::string stats_json(const SolverStats& stats) {
  nlohmann::json j;
  j["steps"] = stats.steps;
  j["rejected_steps"] = stats.rejected_steps;
  j["newton_iterations"] = stats.newton_iterations;
  j["jacobian_evaluations"] = stats.jacobian_evaluations;
  j["rhs_evaluations"] = stats.rhs_evaluations;
  j["lu_factorizations"] = stats.lu_factorizations;
  return j.dump(2) + "\n";
}

ObservationSet observations_from_profiles(const Mechanism& mech,
                                          const ForcedProfiles& profiles,
                                          int n_obs) {
  const int n_nodes = profiles.n_nodes();
  const int n_sp = mech.n_species();
  if (profiles.y_ref.rows() != n_sp || profiles.y_ref.cols() != n_nodes)
    throw std::runtime_error(
        "profiles carry no reference compositions (Y_<name> columns)");
  if (n_obs < 2 || n_obs > n_nodes)
    throw std::runtime_error("observation count must lie in [2, n_nodes]");

  const Eigen::VectorXd inv_m = mech.molar_masses().cwiseInverse();
  ObservationSet obs;
  obs.times.resize(n_obs);
  obs.mole_fractions.resize(n_sp, n_obs);
  obs.temperatures.resize(n_obs);
  for (int m = 0; m < n_obs; ++m) {
    const int k = static_cast<int>(std::lround(
        static_cast<double>(m) * (n_nodes - 1) / (n_obs - 1)));
    obs.times[m] = profiles.tau[k];
    const Eigen::VectorXd y = profiles.y_ref.col(k);
    const double mbar = 1.0 / y.dot(inv_m);
    obs.mole_fractions.col(m) = y.cwiseProduct(inv_m) * mbar;
    obs.temperatures[m] = profiles.temperature[k];
  }
  return obs;
}

}  // namespace rdkin
