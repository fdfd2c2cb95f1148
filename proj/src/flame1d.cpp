#include "rdkin/flame1d.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <stdexcept>

#include "rdkin/kinetics.hpp"

namespace rdkin {

namespace {

// Node-major unknown layout: species first, temperature last (energy mode).
struct Discretization {
  const Mechanism& mech;
  const InletBC& bc;
  const TransportModel& tr;
  const ThermalSpec& thermal;
  const FlameOptions& opts;
  Eigen::VectorXd x;
  int n_nodes, n_sp, nvar;
  bool energy;
  KineticsEvaluator eval;
  Eigen::VectorXd molar, inv_m;
  double s_y, s_t;  // residual row scales

  Discretization(const Mechanism& m, const InletBC& b, const Eigen::VectorXd& grid,
                 const ThermalSpec& th, const TransportModel& t,
                 const FlameOptions& o)
      : mech(m),
        bc(b),
        tr(t),
        thermal(th),
        opts(o),
        x(grid),
        n_nodes(static_cast<int>(grid.size())),
        n_sp(m.n_species()),
        nvar(m.n_species() + (th.solve_energy ? 1 : 0)),
        energy(th.solve_energy),
        eval(m, nullptr, RhsMode{}),
        molar(m.molar_masses()),
        inv_m(m.molar_masses().cwiseInverse()) {
    const double dx_mean = (x[n_nodes - 1] - x[0]) / (n_nodes - 1);
    s_y = bc.mdot / dx_mean;
    s_t = s_y * 1.0e3 * 1.0e3;  // cp_ref * dT_ref
  }

  double node_T(const Eigen::VectorXd& z, int k) const {
    return energy ? z[k * nvar + n_sp] : thermal.fixed_temperature[k];
  }
  Eigen::Map<const Eigen::VectorXd> node_Y(const Eigen::VectorXd& z, int k) const {
    return Eigen::Map<const Eigen::VectorXd>(z.data() + k * nvar, n_sp);
  }

  double diffusivity(int i, double t_face) const {
    return mech.species[i].d_ref *
           std::pow(t_face / kTransportRefTemperature, tr.diff_temp_exponent) *
           (kStandardPressure / bc.pressure) * tr.diffusion_scale;
  }
  double conductivity(double t_face) const {
    return tr.lambda_ref *
           std::pow(t_face / kTransportRefTemperature, tr.cond_temp_exponent);
  }

  // Species diffusion flux (Fick + flux-sum correction) at face k (between
  // nodes k and k+1), plus the face conductivity.
  void face_flux(const Eigen::VectorXd& z, int k, Eigen::VectorXd& j_face,
                 double* lambda_face) const {
    const double h = x[k + 1] - x[k];
    const double t_face = 0.5 * (node_T(z, k) + node_T(z, k + 1));
    Eigen::VectorXd y_face = 0.5 * (node_Y(z, k) + node_Y(z, k + 1));
    const double inv_mbar = y_face.dot(inv_m);
    const double rho_face =
        bc.pressure / (inv_mbar * kGasConstant * t_face);
    double corr = 0.0;
    j_face.resize(n_sp);
    for (int i = 0; i < n_sp; ++i) {
      const double grad = (z[(k + 1) * nvar + i] - z[k * nvar + i]) / h;
      const double d = diffusivity(i, t_face);
      j_face[i] = -rho_face * d * grad;
      corr += d * grad;
    }
    j_face += rho_face * corr * y_face;
    if (lambda_face) *lambda_face = conductivity(t_face);
  }

  void residual(const Eigen::VectorXd& z, const Eigen::VectorXd& theta,
                Eigen::VectorXd& f) const {
    f.resize(n_nodes * nvar);

    // Inlet Dirichlet rows.
    for (int i = 0; i < n_sp; ++i) f[i] = bc.y_in[i] - z[i];
    if (energy) f[n_sp] = bc.t_in - z[n_sp];

    // Outlet: zero gradient, or a Dirichlet composition when requested.
    const int last = (n_nodes - 1) * nvar;
    const int prev = (n_nodes - 2) * nvar;
    for (int i = 0; i < n_sp; ++i)
      f[last + i] = opts.outlet_y ? (*opts.outlet_y)[i] - z[last + i]
                                  : z[prev + i] - z[last + i];
    if (energy) f[last + n_sp] = z[prev + n_sp] - z[last + n_sp];

    Eigen::VectorXd j_left(n_sp), j_right(n_sp), omega(n_sp), cp(n_sp), hmol(n_sp);
    double lam_left = 0.0, lam_right = 0.0;
    face_flux(z, 0, j_left, &lam_left);
    for (int k = 1; k + 1 < n_nodes; ++k) {
      face_flux(z, k, j_right, &lam_right);
      const double dxm = x[k] - x[k - 1];
      const double dxc = 0.5 * (x[k + 1] - x[k - 1]);
      const double t_k = node_T(z, k);
      const auto y_k = node_Y(z, k);

      eval.production_rates(t_k, bc.pressure, y_k, theta, omega);
      for (int i = 0; i < n_sp; ++i) {
        const double conv =
            bc.mdot * (z[k * nvar + i] - z[(k - 1) * nvar + i]) / dxm;
        const double diff_div = (j_right[i] - j_left[i]) / dxc;
        f[k * nvar + i] = -conv - diff_div + molar[i] * omega[i];
      }
      if (energy) {
        eval.species_thermo(t_k, cp, hmol);
        const double cp_mass = y_k.cwiseProduct(cp).dot(inv_m);
        const double t_prev = node_T(z, k - 1);
        const double t_next = node_T(z, k + 1);
        const double conv = bc.mdot * cp_mass * (t_k - t_prev) / dxm;
        const double cond = (lam_right * (t_next - t_k) / (x[k + 1] - x[k]) -
                             lam_left * (t_k - t_prev) / dxm) /
                            dxc;
        const double dtdx = (t_next - t_prev) / (2.0 * dxc);
        double cp_j = 0.0;
        for (int i = 0; i < n_sp; ++i)
          cp_j += cp[i] * inv_m[i] * 0.5 * (j_left[i] + j_right[i]);
        const double heat = -hmol.dot(omega);
        f[k * nvar + n_sp] = -conv + cond - cp_j * dtdx + heat;
      }
      j_left.swap(j_right);
      lam_left = lam_right;
    }
  }

  double scaled_norm(const Eigen::VectorXd& f) const {
    double worst = 0.0;
    for (int k = 0; k < n_nodes; ++k) {
      const bool bc_row = (k == 0 || k == n_nodes - 1);
      for (int c = 0; c < nvar; ++c) {
        const bool t_row = energy && c == n_sp;
        double scale;
        if (bc_row)
          scale = t_row ? 1.0e3 : 1.0;
        else
          scale = t_row ? s_t : s_y;
        worst = std::max(worst, std::abs(f[k * nvar + c]) / scale);
      }
    }
    return worst;
  }

  // Tridiagonal-block finite-difference Jacobian via 3-coloring of nodes.
  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& z,
                                       const Eigen::VectorXd& theta,
                                       const Eigen::VectorXd& f0) const {
    const int dim = n_nodes * nvar;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(dim) * 3 * nvar);
    Eigen::VectorXd zp = z, fp(dim);
    for (int color = 0; color < 3; ++color) {
      for (int c = 0; c < nvar; ++c) {
        zp = z;
        std::vector<double> steps(n_nodes, 0.0);
        for (int k = color; k < n_nodes; k += 3) {
          const bool t_var = energy && c == n_sp;
          const double base = z[k * nvar + c];
          steps[k] = 1e-7 * std::abs(base) + (t_var ? 1e-5 : 1e-9);
          zp[k * nvar + c] += steps[k];
        }
        residual(zp, theta, fp);
        for (int k = color; k < n_nodes; k += 3) {
          const int col = k * nvar + c;
          for (int kk = std::max(0, k - 1); kk <= std::min(n_nodes - 1, k + 1);
               ++kk)
            for (int r = 0; r < nvar; ++r) {
              const int row = kk * nvar + r;
              const double v = (fp[row] - f0[row]) / steps[k];
              if (v != 0.0) trip.emplace_back(row, col, v);
            }
        }
      }
    }
    Eigen::SparseMatrix<double> jac(dim, dim);
    jac.setFromTriplets(trip.begin(), trip.end());
    return jac;
  }
};

}  // namespace

FlameSolution solve_bsf(const Mechanism& mech, const InletBC& bc,
                        const Eigen::VectorXd& x_grid, const Eigen::VectorXd& theta,
                        const ThermalSpec& thermal, const TransportModel& transport,
                        const FlameOptions& options) {
  const int n_nodes = static_cast<int>(x_grid.size());
  const int n_sp = mech.n_species();
  if (n_nodes < 20) throw std::invalid_argument("grid needs at least 20 nodes");
  for (int k = 0; k + 1 < n_nodes; ++k)
    if (!(x_grid[k + 1] > x_grid[k]))
      throw std::invalid_argument("grid must be strictly increasing");
  if (bc.y_in.size() != n_sp)
    throw std::invalid_argument("inlet composition has the wrong length");
  if (std::abs(bc.y_in.sum() - 1.0) > 1e-10)
    throw std::invalid_argument("inlet mass fractions must sum to 1 within 1e-10");
  if (!(bc.t_in > 0) || !(bc.mdot > 0) || !(bc.pressure > 0))
    throw std::invalid_argument("inlet temperature, mass flux, pressure must be positive");
  if (!thermal.solve_energy && thermal.fixed_temperature.size() != n_nodes)
    throw std::invalid_argument("fixed temperature profile must match the grid");
  if (theta.size() != mech.n_reactions())
    throw std::invalid_argument("theta has the wrong length");

  Discretization disc(mech, bc, x_grid, thermal, transport, options);
  const int nvar = disc.nvar;
  const int dim = n_nodes * nvar;

  // Initial iterate: inlet composition everywhere; energy mode ignites from a
  // smooth temperature ramp.
  Eigen::VectorXd z(dim);
  for (int k = 0; k < n_nodes; ++k) {
    z.segment(k * nvar, n_sp) = bc.y_in;
    if (disc.energy) {
      const double span = x_grid[n_nodes - 1] - x_grid[0];
      const double s = (x_grid[k] - x_grid[0] - 0.3 * span) / (0.08 * span);
      z[k * nvar + n_sp] =
          bc.t_in + 0.5 * (options.initial_hot_temperature - bc.t_in) *
                        (1.0 + std::tanh(s));
    }
  }

  Eigen::VectorXd f(dim), f_new(dim);
  disc.residual(z, theta, f);
  double fnorm = disc.scaled_norm(f);

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  auto solve_linear = [&](const Eigen::SparseMatrix<double>& jac, double inv_dt,
                          const Eigen::VectorXd& rhs) {
    Eigen::SparseMatrix<double> a = -jac;
    if (inv_dt > 0) {
      Eigen::SparseMatrix<double> ident(dim, dim);
      ident.setIdentity();
      a += inv_dt * ident;
    }
    lu.compute(a);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("flame1d: singular iteration matrix");
    return Eigen::VectorXd(lu.solve(rhs));
  };

  // Pseudo-transient continuation with switched evolution relaxation.
  double dt = options.initial_pseudo_dt;
  const double newton_gate = 1e-4;
  long step = 0;
  while (fnorm > newton_gate && step < options.max_pseudo_steps) {
    ++step;
    Eigen::SparseMatrix<double> jac = disc.jacobian(z, theta, f);
    bool accepted = false;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      Eigen::VectorXd delta = solve_linear(jac, 1.0 / dt, f);
      Eigen::VectorXd z_trial = z + delta;
      double fnorm_new = std::numeric_limits<double>::infinity();
      bool valid = true;
      try {
        disc.residual(z_trial, theta, f_new);
        fnorm_new = disc.scaled_norm(f_new);
        valid = std::isfinite(fnorm_new);
      } catch (const std::domain_error&) {
        valid = false;
      }
      if (valid && fnorm_new < 3.0 * fnorm) {
        z = z_trial;
        f = f_new;
        const double gain = fnorm / std::max(fnorm_new, 1e-300);
        fnorm = fnorm_new;
        dt = std::min(dt * std::min(2.0, std::max(1.0, gain)), 1e3);
        accepted = true;
      } else {
        dt *= 0.3;
        if (dt < 1e-14)
          throw std::runtime_error(
              "flame1d: pseudo-transient continuation stalled");
      }
    }
    if (!accepted)
      throw std::runtime_error("flame1d: pseudo-transient step rejected repeatedly");
    if (options.verbose && step % 20 == 0)
      std::cerr << "flame1d: pseudo step " << step << " residual " << fnorm
                << " dt " << dt << '\n';
  }

  // Newton refinement with simple backtracking.
  for (int it = 0; it < options.max_newton_iters && fnorm > 1e-13; ++it) {
    Eigen::SparseMatrix<double> jac = disc.jacobian(z, theta, f);
    Eigen::VectorXd delta = solve_linear(jac, 0.0, f);
    double lambda = 1.0;
    bool moved = false;
    for (int cut = 0; cut < 6; ++cut) {
      Eigen::VectorXd z_trial = z + lambda * delta;
      try {
        disc.residual(z_trial, theta, f_new);
        const double fnorm_new = disc.scaled_norm(f_new);
        if (std::isfinite(fnorm_new) && fnorm_new < fnorm) {
          z = z_trial;
          f = f_new;
          fnorm = fnorm_new;
          moved = true;
          break;
        }
      } catch (const std::domain_error&) {
      }
      lambda *= 0.5;
    }
    if (!moved) break;
    if (options.verbose)
      std::cerr << "flame1d: newton iter " << it << " residual " << fnorm << '\n';
  }

  if (!(fnorm <= options.residual_tol))
    throw std::runtime_error("flame1d: failed to converge (scaled residual " +
                             std::to_string(fnorm) + ")");

  FlameSolution sol;
  sol.x = x_grid;
  sol.Y.resize(n_sp, n_nodes);
  sol.T.resize(n_nodes);
  sol.rho.resize(n_nodes);
  sol.u.resize(n_nodes);
  sol.mdot = bc.mdot;
  sol.pressure = bc.pressure;
  for (int k = 0; k < n_nodes; ++k) {
    sol.Y.col(k) = z.segment(k * nvar, n_sp);
    sol.T[k] = disc.node_T(z, k);
    const double inv_mbar = sol.Y.col(k).dot(disc.inv_m);
    sol.rho[k] = bc.pressure / (inv_mbar * kGasConstant * sol.T[k]);
    sol.u[k] = bc.mdot / sol.rho[k];
  }
  sol.residual_norm = fnorm;
  sol.converged = true;
  return sol;
}

namespace {

// Shared face-flux evaluation on a finished solution.
void solution_face_fluxes(const Mechanism& mech, const FlameSolution& sol,
                          const TransportModel& tr, Eigen::MatrixXd& j_faces,
                          Eigen::VectorXd& lambda_faces,
                          Eigen::VectorXd& hflux_faces) {
  const int n_sp = mech.n_species();
  const int n_nodes = static_cast<int>(sol.x.size());
  const Eigen::VectorXd inv_m = mech.molar_masses().cwiseInverse();
  j_faces.resize(n_sp, n_nodes - 1);
  lambda_faces.resize(n_nodes - 1);
  hflux_faces.resize(n_nodes - 1);
  for (int k = 0; k + 1 < n_nodes; ++k) {
    const double h = sol.x[k + 1] - sol.x[k];
    const double t_face = 0.5 * (sol.T[k] + sol.T[k + 1]);
    Eigen::VectorXd y_face = 0.5 * (sol.Y.col(k) + sol.Y.col(k + 1));
    const double rho_face =
        sol.pressure / (y_face.dot(inv_m) * kGasConstant * t_face);
    double corr = 0.0;
    for (int i = 0; i < n_sp; ++i) {
      const double grad = (sol.Y(i, k + 1) - sol.Y(i, k)) / h;
      const double d = mech.species[i].d_ref *
                       std::pow(t_face / kTransportRefTemperature,
                                tr.diff_temp_exponent) *
                       (kStandardPressure / sol.pressure) * tr.diffusion_scale;
      j_faces(i, k) = -rho_face * d * grad;
      corr += d * grad;
    }
    j_faces.col(k) += rho_face * corr * y_face;
    lambda_faces[k] = tr.lambda_ref * std::pow(t_face / kTransportRefTemperature,
                                               tr.cond_temp_exponent);
    double hf = 0.0;
    for (int i = 0; i < n_sp; ++i)
      hf += thermo_eval(mech.species[i], t_face).h * inv_m[i] * j_faces(i, k);
    hflux_faces[k] = hf;
  }
}

}  // namespace

std::pair<ForcedProfiles, ObservationSet> export_profiles(
    const Mechanism& mech, const FlameSolution& sol, const TransportModel& transport,
    int n_obs) {
  if (!sol.converged)
    throw std::invalid_argument("export requires a converged solution");
  const int n_nodes = static_cast<int>(sol.x.size());
  const int n_sp = mech.n_species();
  if (n_obs < 2 || n_obs > n_nodes)
    throw std::invalid_argument("observation count must lie in [2, n_nodes]");

  Eigen::MatrixXd j_faces;
  Eigen::VectorXd lambda_faces, hflux_faces;
  solution_face_fluxes(mech, sol, transport, j_faces, lambda_faces, hflux_faces);

  ForcedProfiles p;
  p.species_names.resize(n_sp);
  for (int i = 0; i < n_sp; ++i) p.species_names[i] = mech.species[i].name;
  p.x = sol.x;
  p.u = sol.u;
  p.tau = residence_time(sol.x, sol.u);
  p.temperature = sol.T;
  p.pressure = Eigen::VectorXd::Constant(n_nodes, sol.pressure);
  p.sdiff_species.resize(n_sp, n_nodes);
  p.sdiff_temperature.resize(n_nodes);
  for (int k = 1; k + 1 < n_nodes; ++k) {
    const double dxc = 0.5 * (sol.x[k + 1] - sol.x[k - 1]);
    p.sdiff_species.col(k) = -(j_faces.col(k) - j_faces.col(k - 1)) / dxc;
    const double cond =
        (lambda_faces[k] * (sol.T[k + 1] - sol.T[k]) / (sol.x[k + 1] - sol.x[k]) -
         lambda_faces[k - 1] * (sol.T[k] - sol.T[k - 1]) /
             (sol.x[k] - sol.x[k - 1])) /
        dxc;
    p.sdiff_temperature[k] = cond - (hflux_faces[k] - hflux_faces[k - 1]) / dxc;
  }
  p.sdiff_species.col(0) = p.sdiff_species.col(1);
  p.sdiff_species.col(n_nodes - 1) = p.sdiff_species.col(n_nodes - 2);
  p.sdiff_temperature[0] = p.sdiff_temperature[1];
  p.sdiff_temperature[n_nodes - 1] = p.sdiff_temperature[n_nodes - 2];
  p.y_ref = sol.Y;
  p.sdiff_present = true;
  p.finalize();

  ObservationSet obs;
  const Eigen::VectorXd inv_m = mech.molar_masses().cwiseInverse();
  obs.mole_fractions.resize(n_sp, n_obs);
  obs.temperatures.resize(n_obs);
  obs.times.resize(n_obs);
  for (int m = 0; m < n_obs; ++m) {
    const int k = static_cast<int>(std::lround(
        static_cast<double>(m) * (n_nodes - 1) / (n_obs - 1)));
    obs.times[m] = p.tau[k];
    const double mbar = 1.0 / sol.Y.col(k).dot(inv_m);
    obs.mole_fractions.col(m) = sol.Y.col(k).cwiseProduct(inv_m) * mbar;
    obs.temperatures[m] = sol.T[k];
  }
  return {std::move(p), std::move(obs)};
}

Eigen::MatrixXd element_fluxes(const Mechanism& mech, const FlameSolution& sol,
                               const TransportModel& transport,
                               std::vector<std::string>& elements) {
  std::set<std::string> names;
  for (const auto& sp : mech.species)
    for (const auto& [el, cnt] : sp.elements) names.insert(el);
  elements.assign(names.begin(), names.end());

  Eigen::MatrixXd j_faces;
  Eigen::VectorXd lambda_faces, hflux_faces;
  solution_face_fluxes(mech, sol, transport, j_faces, lambda_faces, hflux_faces);

  const int n_faces = static_cast<int>(sol.x.size()) - 1;
  const int n_sp = mech.n_species();
  Eigen::MatrixXd fluxes =
      Eigen::MatrixXd::Zero(static_cast<int>(elements.size()), n_faces);
  for (size_t e = 0; e < elements.size(); ++e) {
    for (int i = 0; i < n_sp; ++i) {
      const auto it = mech.species[i].elements.find(elements[e]);
      if (it == mech.species[i].elements.end()) continue;
      const double w = it->second *
                       standard_atomic_mass(elements[e]).value_or(1.0) /
                       mech.species[i].molar_mass;
      for (int k = 0; k < n_faces; ++k)
        fluxes(static_cast<int>(e), k) +=
            w * (sol.mdot * sol.Y(i, k) + j_faces(i, k));
    }
  }
  return fluxes;
}

}  // namespace rdkin
