#include <doctest.h>

#include <cmath>

#include "rdkin/mechanism.hpp"
#include "support/test_helpers.hpp"

using namespace rdkin;

namespace {

const char* kToyFile = R"(# two-species toy
elements: Q
species A M=0.002 elements=Q:2 Dref=1e-5
species B M=0.004 elements=Q:4 Dref=1e-5
thermo A Tlow=200 Tmid=1000 Thigh=5000 low=[3.5,0,0,0,0,0,10] high=[3.5,0,0,0,0,0,10]
thermo B Tlow=200 Tmid=1000 Thigh=5000 low=[4.5,0,0,0,0,-500,12] high=[4.5,0,0,0,0,-500,12]
reaction 2 A => B A=1e6 beta=0 Ea=0
)";

}  // namespace

TEST_CASE("parse: minimal two-species file") {
  const Mechanism mech = parse_mechanism(kToyFile);
  CHECK(mech.n_species() == 2);
  CHECK(mech.n_reactions() == 1);
  CHECK(mech.species[0].name == "A");
  CHECK(mech.reactions[0].forward.at(0) == 2);
  CHECK(mech.reactions[0].reverse.at(1) == 1);
  CHECK(!mech.reactions[0].reversible);
  CHECK(validate_mechanism(mech).empty());
}

TEST_CASE("parse: element imbalance is rejected") {
  std::string text = kToyFile;
  const auto pos = text.find("elements=Q:4");
  text.replace(pos, 12, "elements=Q:6");
  // B now weighs 6 Q-atoms while the reaction consumes 4.
  const auto mpos = text.find("M=0.004");
  text.replace(mpos, 7, "M=0.006");
  CHECK_THROWS_WITH_AS(parse_mechanism(text),
                       doctest::Contains("element imbalance"), ParseError);
}

TEST_CASE("parse: hydrogen mechanism has 9 species and 19 reactions") {
  const Mechanism mech = parse_mechanism(testing::hydrogen_file());
  CHECK(mech.n_species() == 9);
  CHECK(mech.n_reactions() == 19);
  CHECK(validate_mechanism(mech).empty());
  // Third-body reactions carry their efficiencies.
  int third = 0;
  for (const auto& r : mech.reactions) third += r.has_third_body;
  CHECK(third == 6);
}

TEST_CASE("parse: errors carry line numbers and reasons") {
  CHECK_THROWS_AS(parse_mechanism("species A M=0.002\n"), ParseError);
  CHECK_THROWS_WITH_AS(
      parse_mechanism("elements: Q\n"
                      "species A M=-1 elements=Q:1 Dref=1e-5\n"),
      doctest::Contains("positive"), ParseError);
  CHECK_THROWS_WITH_AS(
      parse_mechanism("elements: Q\n"
                      "species A M=0.002 elements=Q:2 Dref=1e-5\n"
                      "thermo A Tlow=2000 Tmid=1000 Thigh=5000 low=[1,0,0,0,0,0,0] "
                      "high=[1,0,0,0,0,0,0]\n"),
      doctest::Contains("Tlow < Tmid < Thigh"), ParseError);
  // Unknown species inside a reaction.
  std::string text = kToyFile;
  text += "reaction A + C => B A=1 beta=0 Ea=0\n";
  CHECK_THROWS_WITH_AS(parse_mechanism(text), doctest::Contains("unknown species"),
                       ParseError);
}

TEST_CASE("parse/serialize round trip is bit-exact") {
  // Jittered values exercise the full 17-digit path.
  Mechanism mech = parse_mechanism(testing::hydrogen_file());
  mech.reactions[0].rate.a *= 1.0 + 1e-15;
  mech.reactions[3].rate.ea = -2079.4480000000017;
  mech.species[2].thermo.low[4] = 1.7719781712345678e-12;

  const std::string text = serialize_mechanism(mech);
  const Mechanism back = parse_mechanism(text);
  REQUIRE(back.n_species() == mech.n_species());
  REQUIRE(back.n_reactions() == mech.n_reactions());
  for (int i = 0; i < mech.n_species(); ++i) {
    CHECK(back.species[i].molar_mass == mech.species[i].molar_mass);
    CHECK(back.species[i].d_ref == mech.species[i].d_ref);
    for (int c = 0; c < 7; ++c) {
      CHECK(back.species[i].thermo.low[c] == mech.species[i].thermo.low[c]);
      CHECK(back.species[i].thermo.high[c] == mech.species[i].thermo.high[c]);
    }
  }
  for (int j = 0; j < mech.n_reactions(); ++j) {
    CHECK(back.reactions[j].rate.a == mech.reactions[j].rate.a);
    CHECK(back.reactions[j].rate.beta == mech.reactions[j].rate.beta);
    CHECK(back.reactions[j].rate.ea == mech.reactions[j].rate.ea);
    CHECK(back.reactions[j].forward == mech.reactions[j].forward);
    CHECK(back.reactions[j].reverse == mech.reactions[j].reverse);
    CHECK(back.reactions[j].efficiencies == mech.reactions[j].efficiencies);
  }
  // Serialized form is a fixed point.
  CHECK(serialize_mechanism(back) == text);
}

TEST_CASE("validate: reports each constructed violation") {
  Mechanism mech = testing::toy_species_pool();
  mech.reactions = testing::toy_reaction_pool();
  REQUIRE(validate_mechanism(mech).empty());

  SUBCASE("cp discontinuity at Tmid") {
    mech.species[1].thermo.high[0] *= 1.05;
    const auto report = validate_mechanism(mech);
    REQUIRE(report.size() == 1);
    CHECK(report[0].find("discontinuous") != std::string::npos);
  }
  SUBCASE("duplicate species names") {
    mech.species[3].name = "Q2";
    const auto report = validate_mechanism(mech);
    REQUIRE(report.size() == 1);
    CHECK(report[0].find("duplicate") != std::string::npos);
  }
  SUBCASE("molar mass off the element sum") {
    Mechanism h2 = parse_mechanism(testing::hydrogen_file());
    h2.species[0].molar_mass *= 1.01;
    const auto report = validate_mechanism(h2);
    REQUIRE(report.size() == 1);
    CHECK(report[0].find("0.1%") != std::string::npos);
  }
}

TEST_CASE("thermo_eval: constant-cp coefficients") {
  const SpeciesSpec sp = testing::toy_species("X", {{"Q", 1}}, 1e-3, 3.5, 0.0, 0.0);
  const auto p1000 = thermo_eval(sp, 1000.0);
  CHECK(p1000.cp == doctest::Approx(29.100619163).epsilon(1e-12));
  // Logarithmic identity: s(T) - s(T/e) = a1*R exactly.
  const double t = 2000.0;
  const auto pa = thermo_eval(sp, t);
  const auto pb = thermo_eval(sp, t / std::exp(1.0));
  CHECK(pa.s - pb.s == doctest::Approx(3.5 * kGasConstant).epsilon(1e-12));
}

TEST_CASE("thermo_eval: frozen high-precision oracle for O2 at 1500 K") {
  const Mechanism mech = parse_mechanism(testing::hydrogen_file());
  const int i = mech.species_index("O2");
  REQUIRE(i >= 0);
  const auto p = thermo_eval(mech.species[i], 1500.0);
  // Expected values evaluated with 50-digit arithmetic from the same
  // coefficients.
  CHECK(p.cp == doctest::Approx(36.575270210836959796).epsilon(1e-14));
  CHECK(p.h == doctest::Approx(40602.074967754286473).epsilon(1e-14));
  CHECK(p.s == doctest::Approx(258.07508938551705492).epsilon(1e-14));
}

TEST_CASE("thermo_eval: out-of-range temperatures are errors") {
  const SpeciesSpec sp = testing::toy_species("X", {{"Q", 1}}, 1e-3, 3.5, 0.0, 0.0);
  CHECK_THROWS_AS(thermo_eval(sp, 100.0), std::domain_error);
  CHECK_THROWS_AS(thermo_eval(sp, 7000.0), std::domain_error);
  CHECK_NOTHROW(thermo_eval(sp, 150.0));
  CHECK_NOTHROW(thermo_eval(sp, 6000.0));
}

TEST_CASE("mixture_props: single species ideal gas") {
  Mechanism mech;
  mech.species = {testing::toy_species("A", {{"Q", 2}}, 0.002, 3.5, 0.0, 10.0)};
  mech.reactions = {testing::make_reaction({{0, 1}}, {{0, 1}}, 1.0, 0, 0, false)};
  Eigen::VectorXd y(1);
  y << 1.0;
  const auto mix = mixture_props(mech, 300.0, 101325.0, y);
  CHECK(mix.rho == doctest::Approx(0.081243975832858810984).epsilon(1e-14));
  CHECK(mix.mean_molar_mass == doctest::Approx(0.002).epsilon(1e-15));
  CHECK(mix.mole_fractions[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("mixture_props: equal molar masses make X == Y") {
  Mechanism mech = testing::toy_species_pool();
  mech.species[1] = testing::toy_species("Z2", {{"Z", 2}}, 2.0e-3, 3.6, 0.0, 22.0);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(5);
  y[0] = 0.25;
  y[1] = 0.75;
  const auto mix = mixture_props(mech, 500.0, 2e5, y);
  CHECK(mix.mole_fractions[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(mix.mole_fractions[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("mixture_props: algebraic identities on random inputs") {
  const Mechanism mech = testing::toy_species_pool();
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd y(5);
    for (int i = 0; i < 5; ++i) y[i] = rng.uniform(0.01, 1.0);
    y /= y.sum();
    const double t = rng.uniform(200.0, 3000.0);
    const double p = rng.uniform(1e4, 1e6);
    const auto mix = mixture_props(mech, t, p, y);
    CHECK(std::abs(mix.mole_fractions.sum() - 1.0) < 1e-12);
    const double mass_density = mix.concentrations.dot(mech.molar_masses());
    CHECK(testing::rel_err(mass_density, mix.rho) < 1e-12);
    // Density strictly decreasing in T at fixed P, Y.
    const auto hotter = mixture_props(mech, t * 1.01, p, y);
    CHECK(hotter.rho < mix.rho);
  }
}

TEST_CASE("mixture_props: precondition violations are domain errors") {
  const Mechanism mech = testing::toy_species_pool();
  Eigen::VectorXd y = Eigen::VectorXd::Constant(5, 0.2);
  CHECK_NOTHROW(mixture_props(mech, 300, 1e5, y));
  CHECK_THROWS_AS(mixture_props(mech, -1, 1e5, y), std::domain_error);
  CHECK_THROWS_AS(mixture_props(mech, 300, 0, y), std::domain_error);
  Eigen::VectorXd bad = y;
  bad[0] = -0.1;
  bad[1] = 0.5;
  CHECK_THROWS_AS(mixture_props(mech, 300, 1e5, bad), std::domain_error);
  Eigen::VectorXd unnorm = y * 1.1;
  CHECK_THROWS_AS(mixture_props(mech, 300, 1e5, unnorm), std::domain_error);
}
