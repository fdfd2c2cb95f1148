#include "rdkin/kinetics.hpp"

#include <cmath>
#include <stdexcept>

namespace rdkin {

namespace {

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace

Eigen::VectorXd State::pack() const {
  Eigen::VectorXd phi(mass_fractions.size() + 1);
  phi[0] = temperature;
  phi.tail(mass_fractions.size()) = mass_fractions;
  return phi;
}

State State::unpack(const Eigen::VectorXd& phi) {
  State s;
  s.temperature = phi[0];
  s.mass_fractions = phi.tail(phi.size() - 1);
  return s;
}

double equilibrium_constant(const Mechanism& mech, int reaction,
                            double temperature) {
  const Reaction& rxn = mech.reactions[reaction];
  const double T = temperature;
  const double RT = kGasConstant * T;
  double dg_rt = 0.0;
  for (const auto& [i, nu] : rxn.reverse) {
    const ThermoPoint tp = thermo_eval(mech.species[i], T);
    dg_rt += nu * (tp.h / RT - tp.s / kGasConstant);
  }
  for (const auto& [i, nu] : rxn.forward) {
    const ThermoPoint tp = thermo_eval(mech.species[i], T);
    dg_rt -= nu * (tp.h / RT - tp.s / kGasConstant);
  }
  return std::exp(-dg_rt) * std::pow(kStandardPressure / RT, rxn.delta_nu());
}

std::pair<double, double> rate_constants(const Mechanism& mech, int reaction,
                                         double temperature, double theta_j) {
  if (theta_j < kThetaMin)
    throw std::domain_error("theta below the admissible minimum");
  const Reaction& rxn = mech.reactions[reaction];
  const double T = temperature;
  const double kf_ref =
      rxn.rate.a * std::pow(T, rxn.rate.beta) * std::exp(-rxn.rate.ea / (kGasConstant * T));
  const double kf = theta_j * kf_ref;
  // K_r derives from the theta-free equilibrium constant, so scaling K_f by
  // theta scales K_r identically and K_f/K_r stays pinned to K_eq.
  const double kr = rxn.reversible ? kf / equilibrium_constant(mech, reaction, T) : 0.0;
  return {kf, kr};
}

struct KineticsEvaluator::RateWork {
  double T = 0, P = 0, rho = 0, mbar = 0;
  Eigen::VectorXd C, Cc;            // raw / clamped concentrations
  Eigen::VectorXd kf, kr;           // theta-scaled
  Eigen::VectorXd prod_f, prod_r;   // mass-action products
  Eigen::VectorXd m3b;              // third-body factor, 1 when absent
  Eigen::VectorXd q;                // net rate of progress, mol/(m^3 s)
};

KineticsEvaluator::~KineticsEvaluator() = default;

KineticsEvaluator::RateWork& KineticsEvaluator::work() const {
  if (!work_) work_ = std::make_unique<RateWork>();
  return *work_;
}

KineticsEvaluator::KineticsEvaluator(const Mechanism& mech,
                                     const ForcedProfiles* profiles, RhsMode mode)
    : mech_(&mech),
      profiles_(profiles),
      mode_(mode),
      n_species_(mech.n_species()),
      n_reactions_(mech.n_reactions()) {
  molar_mass_ = mech.molar_masses();
  inv_molar_mass_ = molar_mass_.cwiseInverse();
  delta_nu_ = Eigen::MatrixXd::Zero(n_species_, n_reactions_);
  flat_.resize(n_reactions_);
  for (int j = 0; j < n_reactions_; ++j) {
    const Reaction& rxn = mech.reactions[j];
    FlatReaction& f = flat_[j];
    for (const auto& [i, nu] : rxn.forward) {
      f.fwd.emplace_back(i, nu);
      delta_nu_(i, j) -= nu;
    }
    for (const auto& [i, nu] : rxn.reverse) {
      f.rev.emplace_back(i, nu);
      delta_nu_(i, j) += nu;
    }
    f.a = rxn.rate.a;
    f.beta = rxn.rate.beta;
    f.ea = rxn.rate.ea;
    f.reversible = rxn.reversible;
    f.third_body = rxn.has_third_body;
    f.dnu = rxn.delta_nu();
    if (f.third_body) {
      f.eff = Eigen::VectorXd::Ones(n_species_);
      for (const auto& [i, e] : rxn.efficiencies) f.eff[i] = e;
    }
  }
  cp_.resize(n_species_);
  h_.resize(n_species_);
  s_.resize(n_species_);
  dcp_.resize(n_species_);
}

void KineticsEvaluator::eval_thermo(double T) const {
  for (int i = 0; i < n_species_; ++i) {
    const ThermoPoint tp = thermo_eval(mech_->species[i], T);
    cp_[i] = tp.cp;
    h_[i] = tp.h;
    s_[i] = tp.s;
    dcp_[i] = thermo_cp_derivative(mech_->species[i], T);
  }
  thermo_T_ = T;
}

void KineticsEvaluator::eval_rates(double T, double P, const Eigen::VectorXd& Y,
                                   const Eigen::VectorXd& theta, RateWork& w) const {
  if (!(T > 0.0)) throw std::domain_error("non-positive rate temperature");
  const double inv_mbar = Y.dot(inv_molar_mass_);
  if (!(inv_mbar > 0.0))
    throw std::domain_error("mass fractions give a non-positive mean molar mass");
  w.T = T;
  w.P = P;
  w.mbar = 1.0 / inv_mbar;
  w.rho = P * w.mbar / (kGasConstant * T);
  w.C = w.rho * Y.cwiseProduct(inv_molar_mass_);
  w.Cc = w.C.cwiseMax(0.0);

  eval_thermo(T);
  const double RT = kGasConstant * T;

  w.kf.resize(n_reactions_);
  w.kr.resize(n_reactions_);
  w.prod_f.resize(n_reactions_);
  w.prod_r.resize(n_reactions_);
  w.m3b.resize(n_reactions_);
  w.q.resize(n_reactions_);

  for (int j = 0; j < n_reactions_; ++j) {
    const FlatReaction& f = flat_[j];
    const double kf_ref = f.a * std::pow(T, f.beta) * std::exp(-f.ea / RT);
    w.kf[j] = theta[j] * kf_ref;
    if (f.reversible) {
      double dg_rt = 0.0;
      for (const auto& [i, nu] : f.rev) dg_rt += nu * (h_[i] / RT - s_[i] / kGasConstant);
      for (const auto& [i, nu] : f.fwd) dg_rt -= nu * (h_[i] / RT - s_[i] / kGasConstant);
      const double keq = std::exp(-dg_rt) * std::pow(kStandardPressure / RT, f.dnu);
      w.kr[j] = w.kf[j] / keq;
    } else {
      w.kr[j] = 0.0;
    }
    double pf = 1.0;
    for (const auto& [i, nu] : f.fwd) pf *= ipow(w.Cc[i], nu);
    w.prod_f[j] = pf;
    double pr = 1.0;
    if (f.reversible) {
      for (const auto& [i, nu] : f.rev) pr *= ipow(w.Cc[i], nu);
    }
    w.prod_r[j] = pr;
    w.m3b[j] = f.third_body ? f.eff.dot(w.Cc) : 1.0;
    w.q[j] = w.m3b[j] * (w.kf[j] * w.prod_f[j] - w.kr[j] * w.prod_r[j]);
  }
}

void KineticsEvaluator::production_rates(double temperature, double pressure,
                                         const Eigen::VectorXd& mass_fractions,
                                         const Eigen::VectorXd& theta,
                                         Eigen::VectorXd& omega) const {
  RateWork& w = work();
  eval_rates(temperature, pressure, mass_fractions, theta, w);
  omega.noalias() = delta_nu_ * w.q;
}

double KineticsEvaluator::heat_release(double temperature,
                                       const Eigen::VectorXd& omega) const {
  if (thermo_T_ != temperature) eval_thermo(temperature);
  return -h_.dot(omega);
}

void KineticsEvaluator::species_thermo(double temperature, Eigen::VectorXd& cp,
                                       Eigen::VectorXd& h) const {
  if (thermo_T_ != temperature) eval_thermo(temperature);
  cp = cp_;
  h = h_;
}

void KineticsEvaluator::rhs(double tau, const Eigen::VectorXd& phi,
                            const Eigen::VectorXd& theta, Eigen::VectorXd& out) const {
  const ProfileSample sample = eval_profiles(*profiles_, tau);
  const auto Y = phi.tail(n_species_);
  const bool diffusion = mode_.diffusion_on();
  const double T_rate = mode_.temperature_forced() ? sample.temperature : phi[0];

  RateWork& w = work();
  eval_rates(T_rate, sample.pressure, Y, theta, w);
  Eigen::VectorXd omega = delta_nu_ * w.q;

  out.resize(n_species_ + 1);
  out.tail(n_species_) = molar_mass_.cwiseProduct(omega) / w.rho;
  if (diffusion) out.tail(n_species_) += sample.sdiff_species / w.rho;

  if (mode_.temperature_forced()) {
    out[0] = sample.temperature_dot;
  } else {
    const double cp_mass = Y.cwiseProduct(cp_).dot(inv_molar_mass_);
    const double source = (diffusion ? sample.sdiff_temperature : 0.0) - h_.dot(omega);
    out[0] = source / (w.rho * cp_mass);
  }
}

void KineticsEvaluator::jacobians(double tau, const Eigen::VectorXd& phi,
                                  const Eigen::VectorXd& theta,
                                  Eigen::MatrixXd& j_phi,
                                  Eigen::MatrixXd& j_theta) const {
  const ProfileSample sample = eval_profiles(*profiles_, tau);
  const auto Y = phi.tail(n_species_);
  const bool diffusion = mode_.diffusion_on();
  const bool forced = mode_.temperature_forced();
  const double T_rate = forced ? sample.temperature : phi[0];

  RateWork& w = work();
  eval_rates(T_rate, sample.pressure, Y, theta, w);
  const double T = w.T, rho = w.rho, mbar = w.mbar;

  Eigen::VectorXd omega = delta_nu_ * w.q;
  Eigen::VectorXd f_y = molar_mass_.cwiseProduct(omega) / rho;
  if (diffusion) f_y += sample.sdiff_species / rho;

  // dq_j/dC_k at fixed temperature, including the third-body factor.
  Eigen::MatrixXd dq_dc = Eigen::MatrixXd::Zero(n_reactions_, n_species_);
  for (int j = 0; j < n_reactions_; ++j) {
    const FlatReaction& f = flat_[j];
    for (const auto& [k, nu] : f.fwd) {
      double dp = nu * ipow(w.Cc[k], nu - 1);
      for (const auto& [l, mu] : f.fwd)
        if (l != k) dp *= ipow(w.Cc[l], mu);
      dq_dc(j, k) += w.m3b[j] * w.kf[j] * dp;
    }
    if (f.reversible) {
      for (const auto& [k, nu] : f.rev) {
        double dp = nu * ipow(w.Cc[k], nu - 1);
        for (const auto& [l, mu] : f.rev)
          if (l != k) dp *= ipow(w.Cc[l], mu);
        dq_dc(j, k) -= w.m3b[j] * w.kr[j] * dp;
      }
    }
    if (f.third_body) {
      const double core = w.kf[j] * w.prod_f[j] - w.kr[j] * w.prod_r[j];
      dq_dc.row(j) += core * f.eff.transpose();
    }
  }

  // d omega / d Y through C(Y) = rho(Y) Y / M.
  Eigen::MatrixXd W = delta_nu_ * dq_dc;           // n_s x n_s
  Eigen::VectorXd WC = W * w.C;
  Eigen::MatrixXd domega_dy = rho * W;
  domega_dy.colwise() -= mbar * WC;
  domega_dy.array().rowwise() *= inv_molar_mass_.transpose().array();

  const int n = n_species_ + 1;
  j_phi.setZero(n, n);
  j_theta.setZero(n, n_reactions_);

  // Species block: f_Y = (Sdiff + M.omega)/rho, d rho/d Y_k = -rho mbar/M_k.
  j_phi.bottomRightCorner(n_species_, n_species_) =
      molar_mass_.asDiagonal() * domega_dy / rho +
      f_y * (mbar * inv_molar_mass_).transpose();

  // Theta columns: q_j is proportional to theta_j.
  Eigen::VectorXd q_scale = w.q.cwiseQuotient(theta);
  j_theta.bottomRows(n_species_) =
      (molar_mass_.asDiagonal() * delta_nu_) * q_scale.asDiagonal() / rho;

  if (!forced) {
    const double cp_mass = Y.cwiseProduct(cp_).dot(inv_molar_mass_);
    const double dcp_mass_dT = Y.cwiseProduct(dcp_).dot(inv_molar_mass_);
    const double source = (diffusion ? sample.sdiff_temperature : 0.0) - h_.dot(omega);
    const double f_t = source / (rho * cp_mass);

    // Temperature column: Arrhenius, equilibrium, and density derivatives.
    Eigen::VectorXd dq_dT(n_reactions_);
    Eigen::VectorXd dh_rxn = delta_nu_.transpose() * h_;
    for (int j = 0; j < n_reactions_; ++j) {
      const FlatReaction& f = flat_[j];
      const double dlnkf = f.beta / T + f.ea / (kGasConstant * T * T);
      const double dkf = w.kf[j] * dlnkf;
      double explicit_part = w.m3b[j] * dkf * w.prod_f[j];
      if (f.reversible) {
        const double dlnkr =
            dlnkf + f.dnu / T - dh_rxn[j] / (kGasConstant * T * T);
        explicit_part -= w.m3b[j] * w.kr[j] * dlnkr * w.prod_r[j];
      }
      dq_dT[j] = explicit_part;
    }
    dq_dT -= (dq_dc * w.C) / T;  // dC/dT = -C/T at fixed Y, P
    Eigen::VectorXd domega_dT = delta_nu_ * dq_dT;

    j_phi.col(0).tail(n_species_) =
        molar_mass_.cwiseProduct(domega_dT) / rho + f_y / T;

    // Temperature row.
    const double dsource_dT = -(cp_.dot(omega) + h_.dot(domega_dT));
    j_phi(0, 0) = dsource_dT / (rho * cp_mass) -
                  f_t * (-1.0 / T + dcp_mass_dT / cp_mass);
    Eigen::VectorXd dsource_dy = -(domega_dy.transpose() * h_);
    Eigen::VectorXd row_term =
        dsource_dy / (rho * cp_mass) +
        f_t * (Eigen::VectorXd::Constant(n_species_, mbar) - cp_ / cp_mass)
                  .cwiseProduct(inv_molar_mass_);
    j_phi.row(0).tail(n_species_) = row_term.transpose();

    j_theta.row(0) = (-dh_rxn.cwiseProduct(q_scale) / (rho * cp_mass)).transpose();
  }
}

Eigen::VectorXd production_rates(const Mechanism& mech, const State& state,
                                 double pressure, const Eigen::VectorXd& theta) {
  KineticsEvaluator eval(mech, nullptr, RhsMode{});
  Eigen::VectorXd omega;
  eval.production_rates(state.temperature, pressure, state.mass_fractions, theta,
                        omega);
  return omega;
}

Eigen::VectorXd rhs(const Mechanism& mech, double tau, const Eigen::VectorXd& phi,
                    const Eigen::VectorXd& theta, const ForcedProfiles& profiles,
                    RhsMode mode) {
  KineticsEvaluator eval(mech, &profiles, mode);
  Eigen::VectorXd out;
  eval.rhs(tau, phi, theta, out);
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> jacobians(
    const Mechanism& mech, double tau, const Eigen::VectorXd& phi,
    const Eigen::VectorXd& theta, const ForcedProfiles& profiles, RhsMode mode) {
  KineticsEvaluator eval(mech, &profiles, mode);
  Eigen::MatrixXd j_phi, j_theta;
  eval.jacobians(tau, phi, theta, j_phi, j_theta);
  return {j_phi, j_theta};
}

}  // namespace rdkin
