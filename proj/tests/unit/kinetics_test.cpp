#include "porerom/errors.hpp"
#include "porerom/kinetics.hpp"

#include <doctest.h>

#include <cmath>

using namespace porerom;

// Reference values from tests/oracles/kinetics_fixtures.py (40 digit mpmath).
namespace fixture {
constexpr double ocp_neg_0 = 1.278;
constexpr double ocp_neg_1 = -0.090264796413272279314;
constexpr double ocp_pos_half = 4.1228319755670192463;
constexpr double ocp_pos_011 = 88865.246945046893733;
constexpr double bv_neg_j = 3.3507104605380457856e-7;
constexpr double bv_neg_N = 3.4727066449760545831e-12;
constexpr double bv_pos_j = -0.00011715444133712819716;
}  // namespace fixture

TEST_CASE("open circuit potentials against the high precision fixtures") {
  CHECK(open_circuit_potential(0.0, ElectrodeSide::Neg).value == doctest::Approx(fixture::ocp_neg_0).epsilon(1e-14));
  CHECK(open_circuit_potential(1.0, ElectrodeSide::Neg).value == doctest::Approx(fixture::ocp_neg_1).epsilon(1e-13));
  CHECK(open_circuit_potential(1e-300, ElectrodeSide::Neg).value == doctest::Approx(1.278).epsilon(1e-14));
  CHECK(open_circuit_potential(0.5, ElectrodeSide::Pos).value == doctest::Approx(fixture::ocp_pos_half).epsilon(1e-13));
  CHECK(open_circuit_potential(0.11, ElectrodeSide::Pos).value == doctest::Approx(fixture::ocp_pos_011).epsilon(1e-12));
}

TEST_CASE("open circuit potential domain") {
  CHECK_THROWS_AS(open_circuit_potential(-0.1, ElectrodeSide::Neg), DomainError);
  CHECK_THROWS_AS(open_circuit_potential(1.1, ElectrodeSide::Neg), DomainError);
  CHECK_THROWS_AS(open_circuit_potential(0.0, ElectrodeSide::Pos), DomainError);
  CHECK_THROWS_AS(open_circuit_potential(1.0, ElectrodeSide::Pos), DomainError);
  CHECK_THROWS_AS(open_circuit_potential(std::nan(""), ElectrodeSide::Pos), DomainError);
}

TEST_CASE("open circuit potential derivatives by central differences") {
  for (ElectrodeSide side : {ElectrodeSide::Neg, ElectrodeSide::Pos}) {
    for (double s : {0.2, 0.35, 0.5, 0.7, 0.9}) {
      const double h = 1e-6;
      const double fd = (open_circuit_potential(s + h, side).value - open_circuit_potential(s - h, side).value) / (2 * h);
      const double d = open_circuit_potential(s, side).derivative;
      CHECK(std::abs(fd - d) <= 1e-6 * std::max(1.0, std::abs(d)));
    }
  }
}

TEST_CASE("Butler-Volmer against the high precision fixtures") {
  const PhysicalConstants k;
  {
    const double c_s = k.c_max_neg / 2;
    const double u0 = open_circuit_potential(0.5, ElectrodeSide::Neg).value;
    const auto r = butler_volmer(1.2e-3, c_s, 0.0, u0 + 0.01, ElectrodeSide::Neg, k);
    CHECK(r.j == doctest::Approx(fixture::bv_neg_j).epsilon(1e-12));
    CHECK(r.N == doctest::Approx(fixture::bv_neg_N).epsilon(1e-12));
    CHECK_FALSE(r.clamped);
  }
  {
    const double c_s = 2639e-6;
    const double u0 = open_circuit_potential(c_s / k.c_max_pos, ElectrodeSide::Pos).value;
    // the phi difference carries U0 ~ 1e5 V here; the rounding of u0 - 0.05
    // costs about 1e-11 V of overpotential
    const auto r = butler_volmer(1.2e-3, c_s, 0.0, u0 - 0.05, ElectrodeSide::Pos, k);
    CHECK(r.j == doctest::Approx(fixture::bv_pos_j).epsilon(1e-8));
  }
}

TEST_CASE("Butler-Volmer equilibrium, antisymmetry, clamp, derivatives") {
  const PhysicalConstants k;
  const double c_e = 1.1e-3;
  for (ElectrodeSide side : {ElectrodeSide::Neg, ElectrodeSide::Pos}) {
    const double c_s = 0.45 * k.c_max(side);
    const double u0 = open_circuit_potential(0.45, side).value;
    CHECK(butler_volmer(c_e, c_s, 0.3, 0.3 + u0, side, k).j == 0.0);
    for (double eta : {1e-3, 0.02, 0.3}) {
      const double jp = butler_volmer(c_e, c_s, 0.0, u0 + eta, side, k).j;
      const double jm = butler_volmer(c_e, c_s, 0.0, u0 - eta, side, k).j;
      CHECK(jp == doctest::Approx(-jm).epsilon(1e-12));
    }
    const auto big = butler_volmer(c_e, c_s, 0.0, u0 + 10.0, side, k);
    CHECK(big.clamped);
    CHECK(std::isfinite(big.j));

    // partial derivatives by central differences
    const double phi_s = u0 + 0.03, phi_e = 0.0;
    const auto r = butler_volmer(c_e, c_s, phi_e, phi_s, side, k);
    auto j = [&](double ce, double cs, double pe, double ps) { return butler_volmer(ce, cs, pe, ps, side, k).j; };
    const double hc = 1e-9, hp = 1e-7;
    const double d_ce = (j(c_e + hc, c_s, phi_e, phi_s) - j(c_e - hc, c_s, phi_e, phi_s)) / (2 * hc);
    const double d_cs = (j(c_e, c_s + hc, phi_e, phi_s) - j(c_e, c_s - hc, phi_e, phi_s)) / (2 * hc);
    const double d_pe = (j(c_e, c_s, phi_e + hp, phi_s) - j(c_e, c_s, phi_e - hp, phi_s)) / (2 * hp);
    const double d_ps = (j(c_e, c_s, phi_e, phi_s + hp) - j(c_e, c_s, phi_e, phi_s - hp)) / (2 * hp);
    CHECK(r.dj_dce == doctest::Approx(d_ce).epsilon(1e-6));
    CHECK(r.dj_dcs == doctest::Approx(d_cs).epsilon(1e-6));
    CHECK(r.dj_dphie == doctest::Approx(d_pe).epsilon(1e-6));
    CHECK(r.dj_dphis == doctest::Approx(d_ps).epsilon(1e-6));
  }
}

TEST_CASE("Butler-Volmer domain") {
  const PhysicalConstants k;
  CHECK_THROWS_AS(butler_volmer(0.0, 0.01, 0, 0, ElectrodeSide::Neg, k), DomainError);
  CHECK_THROWS_AS(butler_volmer(1e-3, 0.0, 0, 0, ElectrodeSide::Neg, k), DomainError);
  CHECK_THROWS_AS(butler_volmer(1e-3, k.c_max_pos, 0, 0, ElectrodeSide::Pos, k), DomainError);
}

TEST_CASE("constants validation") {
  PhysicalConstants k;
  CHECK_NOTHROW(k.validate());
  k.t_plus = 1.0;
  CHECK_THROWS_AS(k.validate(), DomainError);
  k = {};
  k.kappa = -1.0;
  CHECK_THROWS_AS(k.validate(), DomainError);
  CHECK(PhysicalConstants{}.hash() == PhysicalConstants{}.hash());
  CHECK(PhysicalConstants{}.hash() != k.hash());
}
