#include <doctest.h>

#include <cmath>

#include "rdkin/odeint.hpp"
#include "support/test_helpers.hpp"

using namespace rdkin;

namespace {

OdeSystem scalar_decay() {
  OdeSystem sys;
  sys.dim = 1;
  sys.rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& f) {
    f.resize(1);
    f[0] = -y[0];
  };
  sys.jacobian = [](double, const Eigen::VectorXd&, Eigen::MatrixXd& j) {
    j.resize(1, 1);
    j(0, 0) = -1.0;
  };
  return sys;
}

SolverConfig tolerance(double rtol, double atol) {
  SolverConfig cfg;
  cfg.rtol = rtol;
  cfg.atol_fallback = atol;
  return cfg;
}

}  // namespace

TEST_CASE("integrate: scalar linear decay") {
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  const Trajectory traj =
      integrate(scalar_decay(), y0, 0.0, 1.0, tolerance(1e-8, 1e-12));
  CHECK(std::abs(traj.states.back()[0] - std::exp(-1.0)) < 1e-6);
  CHECK(traj.times.back() == 1.0);
}

TEST_CASE("integrate: stiff 2x2 system vs matrix exponential") {
  // Triangular system with eigenvalues {-1, -1e6}; the closed form of
  // expm(tA) for A = [[a, b], [0, d]] is the oracle.
  const double a = -1.0, b = 0.5, d = -1e6;
  OdeSystem sys;
  sys.dim = 2;
  sys.rhs = [=](double, const Eigen::VectorXd& y, Eigen::VectorXd& f) {
    f.resize(2);
    f[0] = a * y[0] + b * y[1];
    f[1] = d * y[1];
  };
  sys.jacobian = [=](double, const Eigen::VectorXd&, Eigen::MatrixXd& j) {
    j.resize(2, 2);
    j << a, b, 0.0, d;
  };
  Eigen::VectorXd y0(2);
  y0 << 1.0, 1.0;
  const double rtol = 1e-4;
  const Trajectory traj = integrate(sys, y0, 0.0, 1.0, tolerance(rtol, 1e-12));

  const double t = 1.0;
  const double e_at = std::exp(a * t), e_dt = std::exp(d * t);
  const double y1 = e_at * y0[0] + b * (e_at - e_dt) / (a - d) * y0[1];
  const double y2 = e_dt * y0[1];
  CHECK(std::abs(traj.states.back()[0] - y1) < 10 * rtol * std::abs(y1));
  CHECK(std::abs(traj.states.back()[1] - y2) < 1e-10);
  // L-stability evidence: the fast mode does not dictate the step count.
  CHECK(traj.stats.steps < 1000);
}

TEST_CASE("integrate: checkpoints appear exactly as step endpoints") {
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  SolverConfig cfg = tolerance(1e-6, 1e-10);
  cfg.checkpoints = {0.25, 0.5, 0.75};
  const Trajectory traj = integrate(scalar_decay(), y0, 0.0, 1.0, cfg);
  for (double c : cfg.checkpoints) {
    bool found = false;
    for (double t : traj.times) found |= (t == c);
    CHECK(found);
  }

  // Checkpoint forcing only splits steps; endpoint accuracy is unchanged.
  const Trajectory free_run =
      integrate(scalar_decay(), y0, 0.0, 1.0, tolerance(1e-6, 1e-10));
  CHECK(std::abs(traj.states.back()[0] - free_run.states.back()[0]) <
        10 * 1e-6 * std::exp(-1.0));
}

TEST_CASE("integrate: empirical order in tolerance") {
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  auto endpoint_error = [&](double rtol) {
    const Trajectory traj =
        integrate(scalar_decay(), y0, 0.0, 1.0, tolerance(rtol, 1e-14));
    return std::abs(traj.states.back()[0] - std::exp(-1.0));
  };
  const double coarse = endpoint_error(1e-4);
  const double fine = endpoint_error(1e-6);
  CHECK(coarse / fine >= 10.0);
}

TEST_CASE("integrate: determinism is bitwise") {
  testing::ToySystem sys = testing::random_toy_system(5);
  KineticsEvaluator eval(sys.mech, &sys.profiles, RhsMode{});
  OdeSystem ode;
  ode.dim = eval.state_dim();
  ode.rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& f) {
    eval.rhs(t, y, sys.theta, f);
  };
  Eigen::MatrixXd jth;
  ode.jacobian = [&](double t, const Eigen::VectorXd& y, Eigen::MatrixXd& j) {
    eval.jacobians(t, y, sys.theta, j, jth);
  };
  SolverConfig cfg = chemistry_solver_config(sys.mech.n_species());
  const Trajectory a = integrate(ode, sys.phi0, sys.profiles.tau_begin(),
                                 sys.profiles.tau_end(), cfg);
  const Trajectory b = integrate(ode, sys.phi0, sys.profiles.tau_begin(),
                                 sys.profiles.tau_end(), cfg);
  REQUIRE(a.times.size() == b.times.size());
  for (size_t k = 0; k < a.times.size(); ++k) {
    CHECK(a.times[k] == b.times[k]);
    CHECK(a.states[k] == b.states[k]);
  }
}

TEST_CASE("integrate: error paths") {
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  SUBCASE("max_steps exceeded") {
    SolverConfig cfg = tolerance(1e-10, 1e-14);
    cfg.max_steps = 3;
    CHECK_THROWS_AS(integrate(scalar_decay(), y0, 0.0, 1.0, cfg),
                    IntegrationError);
  }
  SUBCASE("rhs failure at the initial point propagates") {
    OdeSystem sys = scalar_decay();
    sys.rhs = [](double, const Eigen::VectorXd&, Eigen::VectorXd&) {
      throw std::domain_error("bad state");
    };
    CHECK_THROWS_AS(integrate(sys, y0, 0.0, 1.0, tolerance(1e-6, 1e-10)),
                    IntegrationError);
  }
  SUBCASE("empty span rejected") {
    CHECK_THROWS_AS(integrate(scalar_decay(), y0, 1.0, 1.0, tolerance(1e-6, 1e-10)),
                    IntegrationError);
  }
}

TEST_CASE("dense_eval: stored nodes and midstep accuracy") {
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  const Trajectory traj =
      integrate(scalar_decay(), y0, 0.0, 1.0, tolerance(1e-6, 1e-12));
  // Node times reproduce stored states exactly.
  for (size_t k = 0; k < traj.times.size(); ++k)
    CHECK(dense_eval(traj, traj.times[k])[0] == traj.states[k][0]);
  // Midstep values stay within the dense-output error bound.
  for (int i = 0; i < 200; ++i) {
    const double t = i / 200.0;
    CHECK(std::abs(dense_eval(traj, t)[0] - std::exp(-t)) < 1e-5);
  }
  CHECK_THROWS_AS(dense_eval(traj, -0.1), std::domain_error);
  CHECK_THROWS_AS(dense_eval(traj, 1.1), std::domain_error);
}

TEST_CASE("dense_eval: cubic trajectories reproduce exactly") {
  // Hermite data taken from a cubic polynomial is reproduced to round-off.
  auto poly = [](double t) { return 2.0 + t * (-1.5 + t * (0.75 + 0.3 * t)); };
  auto dpoly = [](double t) { return -1.5 + t * (1.5 + 0.9 * t); };
  Trajectory traj;
  for (double t : {0.0, 0.4, 1.1, 2.0}) {
    traj.times.push_back(t);
    traj.states.push_back(Eigen::VectorXd::Constant(1, poly(t)));
    traj.derivatives.push_back(Eigen::VectorXd::Constant(1, dpoly(t)));
  }
  for (int i = 0; i <= 100; ++i) {
    const double t = 2.0 * i / 100.0;
    CHECK(dense_eval(traj, t)[0] == doctest::Approx(poly(t)).epsilon(1e-14));
  }
}
