#include <cmath>

#include "doctest.h"
#include "fowlerlab/error.hpp"
#include "fowlerlab/separation.hpp"
#include "gen.hpp"

using namespace fl;

namespace {

PotentialSpec weighted_node() {
  KParams k;
  k.kInf = 1.0;
  k.amp = 1.0;
  k.eta = 1.0;
  k.gamma = 1.0;
  return PotentialSpec::weighted(5.0, 0.0, k);
}

const std::vector<double> kAlphas{0.5, 1.0, 2.0, 4.0};

}  // namespace

TEST_SUITE("separation") {

TEST_CASE("ordering in the node regime") {
  for (const auto& spec : {PotentialSpec::pure_power(4.0), weighted_node()}) {
    auto rep = verify_ordering(spec, 13, kAlphas);
    CHECK(rep.verdict == Verdict::Pass);
    CHECK(rep.violations == 0);
    REQUIRE(rep.pairs.size() == 3);
    for (const auto& p : rep.pairs) {
      CHECK(p.minGap > 0.0);
      CHECK_FALSE(p.crossed);
    }
  }
}

TEST_CASE("identical heights form a degenerate pair") {
  auto rep = verify_ordering(PotentialSpec::pure_power(4.0), 13, {1.0, 1.0, 2.0});
  REQUIRE(rep.pairs.size() == 2);
  CHECK(rep.pairs[0].degenerate);
  CHECK(rep.pairs[0].verdict == Verdict::Untested);
  CHECK(rep.verdict == Verdict::Pass);
  CHECK(rep.json().find("degenerate pair") != std::string::npos);
  CHECK_THROWS_AS(verify_ordering(PotentialSpec::pure_power(4.0), 13, {2.0, 1.0}), Error);
}

TEST_CASE("focus regime control crosses") {
  auto rep = verify_ordering(PotentialSpec::pure_power(3.0), 13, kAlphas);
  CHECK(rep.verdict == Verdict::Fail);
  CHECK(rep.violations >= 1);
  double first = 1e300;
  for (const auto& p : rep.pairs)
    if (p.crossed) first = std::min(first, p.firstCrossing);
  CHECK(first == doctest::Approx(13.34).epsilon(0.02));
  CHECK(rep.note.find("first crossing") != std::string::npos);
}

TEST_CASE("phase bounds") {
  SUBCASE("node ground states stay in the region") {
    for (const auto& spec : {PotentialSpec::pure_power(4.0), weighted_node()}) {
      auto t = derive_exponents(spec, 13);
      for (double a : kAlphas) CHECK(verify_phase_bounds(shoot(spec, 13, a, 1e3), t, spec).verdict == Verdict::Pass);
    }
  }
  SUBCASE("focus ground states overshoot P") {
    auto spec = PotentialSpec::pure_power(3.0);
    auto t = derive_exponents(spec, 13);
    auto rep = verify_phase_bounds(shoot(spec, 13, 1.0, 1e3), t, spec);
    CHECK(rep.verdict == Verdict::Fail);
    CHECK(rep.violations > 0);
  }
  SUBCASE("a trajectory on the fixed point is at bound") {
    auto spec = PotentialSpec::pure_power(4.0);
    auto t = derive_exponents(spec, 13);
    GroundState gs;
    gs.singular = true;
    for (double r = 0.01; r < 100.0; r *= 1.5) {
      gs.r.push_back(r);
      gs.U.push_back(t.P1plus / r);
      gs.dU.push_back(-t.P1plus / (r * r));
    }
    auto rep = verify_phase_bounds(gs, t, spec);
    CHECK(rep.verdict == Verdict::Untested);
    CHECK(rep.note.find("at bound") != std::string::npos);
  }
}

TEST_CASE("singular majorant") {
  for (const auto& spec : {PotentialSpec::pure_power(4.0), weighted_node()}) {
    auto rep = verify_singular_majorant(spec, 13, kAlphas);
    CHECK(rep.verdict == Verdict::Pass);
    CHECK(rep.violations == 0);
    REQUIRE(rep.values.size() == kAlphas.size());
    for (size_t i = 0; i + 1 < rep.values.size(); ++i) CHECK(rep.values[i + 1] < rep.values[i]);
  }
}

TEST_CASE("tail coefficients are increasing in alpha") {
  auto spec = PotentialSpec::pure_power(4.0);
  auto fits = tail_coefficients(spec, 13, kAlphas);
  auto rep = verify_coefficient_monotonicity(fits);
  CHECK(rep.verdict == Verdict::Pass);
  // q = 4, n = 13: U(r, alpha) = alpha U(alpha r, 1) gives A(alpha) = A(1) alpha^{-4}
  for (const auto& f : fits) CHECK(f.fit.A * std::pow(f.alpha, 4) == doctest::Approx(-995.7096).epsilon(1e-4));
  auto wrep = verify_coefficient_monotonicity(tail_coefficients(weighted_node(), 13, kAlphas));
  CHECK(wrep.verdict == Verdict::Pass);
}

TEST_CASE("synthetic coefficient sequences") {
  auto sample = [](double alpha, double A) {
    CoefficientSample s;
    s.alpha = alpha;
    s.fit.A = A;
    s.fit.residual = 1e-9;
    return s;
  };
  CHECK(verify_coefficient_monotonicity({sample(1, -3), sample(2, -1)}).verdict == Verdict::Pass);
  CHECK(verify_coefficient_monotonicity({sample(1, -1), sample(2, -3)}).verdict == Verdict::Fail);
  auto deg = verify_coefficient_monotonicity({sample(1, -1), sample(1, -1)});
  CHECK(deg.pairs[0].degenerate);
  CHECK(deg.verdict == Verdict::Untested);
  CHECK_THROWS_AS(verify_coefficient_monotonicity({sample(1, -1), sample(2, -1 + 1e-10)}), Error);
}

TEST_CASE("distance halving") {
  SUBCASE("from below in the node regime") {
    auto rep = verify_distance_halving(PotentialSpec::pure_power(4.0), 13, 1.0, -0.1);
    CHECK(rep.verdict == Verdict::Pass);
    REQUIRE(rep.values.size() == 4);
    for (size_t i = 0; i + 1 < 4; ++i) CHECK(rep.values[i + 1] / rep.values[i] <= 0.5);
  }
  SUBCASE("beta = alpha gives distance 0") {
    auto rep = verify_distance_halving(PotentialSpec::pure_power(4.0), 13, 1.0, 0.0);
    for (double d : rep.values) CHECK(d == 0.0);
  }
  SUBCASE("degenerate node uses the log-corrected weight") {
    auto rep = verify_distance_halving(PotentialSpec::pure_power(3.9306913006394556575), 13, 1.0, -0.1);
    REQUIRE(rep.values.size() == 4);
    for (double d : rep.values) CHECK(std::isfinite(d));
    CHECK(rep.values[3] < rep.values[0]);
  }
  SUBCASE("focus is refused") {
    CHECK_THROWS_AS(verify_distance_halving(PotentialSpec::pure_power(3.0), 13, 1.0, -0.1), Error);
  }
}

TEST_CASE("property: shared samples stay inside the window") {
  gen::Gen g(61);
  auto spec = PotentialSpec::pure_power(4.0);
  for (int k = 0; k < 10; ++k) {
    double a = g.log_uniform(0.2, 5.0), b = g.log_uniform(0.2, 5.0);
    double lo = g.log_uniform(1e-3, 1.0), hi = g.log_uniform(2.0, 100.0);
    auto c = common_samples(shoot(spec, 13, a, 100.0), shoot(spec, 13, b, 100.0), lo, hi);
    REQUIRE(!c.r.empty());
    for (double r : c.r) {
      CHECK(r >= lo);
      CHECK(r <= hi);
    }
    if (a < b)
      for (size_t i = 0; i < c.r.size(); ++i) CHECK(c.u1[i] < c.u2[i]);
  }
}

}  // TEST_SUITE
