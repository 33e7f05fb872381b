#include <cmath>

#include "doctest.h"
#include "fowlerlab/error.hpp"
#include "fowlerlab/expand.hpp"
#include "gen.hpp"
#include "systems.hpp"

using namespace fl;

namespace {

// Sum of the polynomials of one coordinate over all keys of the given rate.
Poly at_rate(const ExpSeries& s, int coord, double rate) {
  Poly out;
  for (const auto& [k, polys] : s.terms)
    if (std::fabs(s.rate_of(k) - rate) < 1e-9) {
      const Poly& p = polys[coord];
      if (out.size() < p.size()) out.resize(p.size(), 0.0);
      for (size_t j = 0; j < p.size(); ++j) out[j] += p[j];
    }
  return out;
}

double coeff(const Poly& p, size_t j) { return j < p.size() ? p[j] : 0.0; }

KParams weight(double eta, double gamma) {
  KParams k;
  k.kInf = 1.0;
  k.amp = 1.0;
  k.eta = eta;
  k.gamma = gamma;
  return k;
}

}  // namespace

TEST_SUITE("expand") {

TEST_CASE("rates and the sweep ladder") {
  Rate r = Rate::from(2.5);
  CHECK(r.exact);
  CHECK(r.q == boost::rational<long long>(5, 2));
  CHECK_FALSE(Rate::from(std::sqrt(2.0)).exact);
  CHECK(rates_equal(Rate::from(0.5).times(2), Rate::from(1.0)));
  CHECK(rates_equal(Rate::from(1.0) + Rate::from(1.5), Rate::from(2.5)));
  CHECK(sweep_ladder({1.0, 2.5}) == std::vector<int>{1, 1});
  CHECK(sweep_ladder({1.0, 3.0, 3.5}) == std::vector<int>{1, 2, 0});
}

TEST_CASE("scalar series arithmetic") {
  std::vector<Rate> rates{Rate::from(1.0), Rate::from(2.0)};
  ScalarSeries a, b;
  a.add({1, 0}, {2.0});
  b.add({0, 1}, {0.0, 3.0});
  ScalarSeries ab = series_multiply(a, b, 6.0, rates);
  REQUIRE(ab.terms.size() == 1);
  CHECK(ab.terms.at({1, 1}) == Poly{0.0, 6.0});
  CHECK(ab.eval(0.5, {1.0, 2.0}) == doctest::Approx(3.0 * std::exp(-1.5)));

  TruncationInfo tr{2.5, rates};
  CHECK(multiply(a, b, &tr).empty());
  CHECK(tr.droppedMin == doctest::Approx(3.0));

  a.add(a, -1.0);
  a.prune();
  CHECK(a.empty());
}

TEST_CASE("series add, scale and derivative") {
  auto sys = sys2::resonant();
  ExpSeries x = linear_seed(sys, 0, {0.5}, 6.0);
  ExpSeries y = series_scale(x, -1.0);
  CHECK(series_add(x, y).empty());
  ExpSeries z = series_add(x, x);
  CHECK(z.eval(0.3)[0] == doctest::Approx(std::exp(-0.3)));
  CHECK(x.derivative().eval(0.3)[0] == doctest::Approx(-0.5 * std::exp(-0.3)));
  CHECK(apply_linear(sys, x).eval(0.3)[0] == doctest::Approx(-0.5 * std::exp(-0.3)));
}

TEST_CASE("resolve_forcing") {
  SUBCASE("non-resonant forcing with homogeneous correction") {
    // x2' = -3 x2 + x1^2 with x1 = a e^{-t}
    auto sys = StableSystem::make({{1.0}, {3.0}}, PolyMap::direct(2, {{}, {{1.0, {2, 0}}}}));
    double a = 0.7;
    ExpSeries F = ExpSeries::zero(sys, 10.0);
    F.terms[{2, 0}] = {Poly{}, Poly{a * a}};
    ExpSeries X = resolve_forcing(sys, F, 0);
    CHECK(coeff(at_rate(X, 1, 2.0), 0) == doctest::Approx(a * a));
    CHECK(coeff(at_rate(X, 1, 3.0), 0) == doctest::Approx(-a * a));
    ExpSeries P = resolve_forcing(sys, F, 0, false);
    CHECK(at_rate(P, 1, 3.0).empty());
  }
  SUBCASE("resonant forcing produces a secular term") {
    auto sys = sys2::resonant();
    double a = 0.7;
    ExpSeries F = ExpSeries::zero(sys, 10.0);
    F.terms[{2, 0}] = {Poly{}, Poly{a * a}};
    std::vector<ResonanceEvent> log;
    ExpSeries X = resolve_forcing(sys, F, 0, true, &log);
    Poly p = at_rate(X, 1, 2.0);
    CHECK(coeff(p, 0) == 0.0);
    CHECK(coeff(p, 1) == doctest::Approx(a * a));
    REQUIRE(log.size() == 1);
    CHECK(log[0].resonant);
    // resolving mode 2 with a tail integral diverges
    CHECK_THROWS_AS(resolve_forcing(sys, F, 1), Error);
  }
  SUBCASE("zero forcing gives zero") {
    auto sys = sys2::resonant();
    CHECK(resolve_forcing(sys, ExpSeries::zero(sys, 6.0), 0).empty());
  }
}

TEST_CASE("linear systems are reproduced exactly") {
  auto sys = StableSystem::make({{1.0}, {2.5}}, PolyMap::direct(2, {{}, {}}));
  ExpSeries s = expand_orbit(sys, {{0.4}, {-1.3}}, 8.0);
  for (double t : {0.0, 1.0, 4.0}) {
    Eigen::VectorXd x = s.eval(t);
    CHECK(x[0] == doctest::Approx(0.4 * std::exp(-t)).epsilon(1e-15));
    CHECK(x[1] == doctest::Approx(-1.3 * std::exp(-2.5 * t)).epsilon(1e-15));
  }
  CHECK(symbolic_residual(sys, s).empty());
}

TEST_CASE("resonant two-mode system") {
  auto sys = sys2::resonant();
  double a = 0.6, c = -0.35;
  ExpSeries s = expand_orbit(sys, {{a}, {c}}, 6.0);
  Poly p = at_rate(s, 1, 2.0);
  CHECK(std::fabs(coeff(p, 0) - c) < 1e-12);
  CHECK(std::fabs(coeff(p, 1) - a * a) < 1e-12);
  CHECK(p.size() == 2);
  CHECK(s.terms.size() == 3);  // a e^{-t}, c e^{-2t}, a^2 t e^{-2t}
  CHECK(check_residual(s, symbolic_residual(sys, s)).cancelled);
  CHECK_FALSE(condition_R2(sys, 6.0));
}

TEST_CASE("symbolic residual of the truncated augmented series") {
  auto sys = sys2::augmented();
  SUBCASE("theta = 5 leaves terms only above 5") {
    ExpSeries s = expand_orbit(sys, {{0.8}, {0.3}}, 5.0);
    ResidualCheck rc = check_residual(s, symbolic_residual(sys, s));
    CHECK(rc.cancelled);
    CHECK(rc.firstRate > 5.0);
    CHECK(rc.firstRate == doctest::Approx(6.0));
    CHECK(s.remainderExponent == doctest::Approx(6.0));
  }
  SUBCASE("theta below 2 leaves the first dropped term at rate 2") {
    ExpSeries s = expand_orbit(sys, {{0.8}, {0.0}}, 1.5);
    ResidualCheck rc = check_residual(s, symbolic_residual(sys, s));
    CHECK(rc.cancelled);
    CHECK(rc.firstRate == doctest::Approx(2.0));
  }
}

TEST_CASE("condition R2 forces secular degree 0") {
  auto sys = StableSystem::make({{1.0}, {2.5}}, PolyMap::direct(2, {{}, {{1.0, {2, 0}}, {1.0, {1, 1}}}}));
  CHECK(condition_R2(sys, 8.0));
  ExpSeries s = expand_orbit(sys, {{0.9}, {0.4}}, 8.0);
  CHECK(s.max_degree() == 0);
  CHECK(check_residual(s, symbolic_residual(sys, s)).cancelled);
}

TEST_CASE("causality: terms free of mode 2 do not depend on its coefficient") {
  auto sys = sys2::augmented();
  ExpSeries s1 = expand_orbit(sys, {{0.8}, {0.3}}, 6.0);
  ExpSeries s2 = expand_orbit(sys, {{0.8}, {-1.7}}, 6.0);
  for (const auto& [k, polys] : s1.terms)
    if (k[1] == 0) {
      REQUIRE(s2.terms.count(k) == 1);
      CHECK(s2.terms.at(k) == polys);
    }
}

TEST_CASE("invalid expansion requests") {
  auto sys = sys2::resonant();
  CHECK_THROWS_AS(expand_orbit(sys, {{0.5}}, 6.0), Error);
  CHECK_THROWS_AS(expand_orbit(sys, {{0.5}, {0.1, 0.2}}, 6.0), Error);
  CHECK_THROWS_AS(expand_orbit(sys, {{0.5}, {0.1}}, 0.0), Error);
}

TEST_CASE("free coefficient fit") {
  auto sys = sys2::augmented();
  SUBCASE("recovers the coefficients of a sampled orbit") {
    ExpSeries s = expand_orbit(sys, {{0.45}, {-0.2}}, 6.0);
    std::vector<double> ts;
    std::vector<Eigen::VectorXd> xs;
    for (double t = 3.0; t <= 6.0; t += 0.25) {
      ts.push_back(t);
      xs.push_back(s.eval(t));
    }
    CoefficientFit f = fit_free_coefficients(sys, ts, xs, 6.0, 1e-14);
    CHECK(std::fabs(f.d[0][0] - 0.45) < 1e-8);
    CHECK(std::fabs(f.d[1][0] + 0.2) < 1e-8);
  }
  SUBCASE("fixed point gives zero") {
    std::vector<double> ts{2.0, 3.0, 4.0};
    std::vector<Eigen::VectorXd> xs(3, Eigen::VectorXd::Zero(2));
    CoefficientFit f = fit_free_coefficients(sys, ts, xs, 6.0);
    CHECK(f.d[0][0] == 0.0);
    CHECK(f.d[1][0] == 0.0);
  }
}

TEST_CASE("Fowler expansion around P") {
  SUBCASE("pure power with a = b = 0 is the fixed point") {
    auto spec = PotentialSpec::pure_power(4.0);
    auto t = derive_exponents(spec, 13);
    auto fx = fowler_expand(t, spec, 0.0, 0.0, 0.0, default_theta(t));
    CHECK(fx.psi.empty());
    CHECK_FALSE(fx.hasZeta);
    for (double s : {0.0, 2.0, 7.0}) CHECK(fx.eval_y1(s) == doctest::Approx(t.P1plus).epsilon(1e-15));
  }
  SUBCASE("psi vanishes when gamma exceeds |lambda1|") {
    // the u^{7.5} correction decays at rate 4.5 in the q = 4 frame
    KParams one;
    one.kInf = 1.0;
    auto spec = PotentialSpec::two_power(4.0, 0.0, one, 8.5, 0.0, one);
    auto t = derive_exponents(spec, 13);
    REQUIRE(std::fabs(t.lambda1) < 4.5);
    auto fx = fowler_expand(t, spec, 0.2, 0.1, 0.0, default_theta(t));
    CHECK(fx.hasZeta);
    CHECK(fx.psi.empty());
  }
  SUBCASE("|lambda1| / gamma integer puts a secular term into psi") {
    // n = 13, q = 4: lambda1 = -4 exactly; the u^5 correction decays at rate 2
    KParams one;
    one.kInf = 1.0;
    auto spec = PotentialSpec::two_power(4.0, 0.0, one, 6.0, 0.0, one);
    auto t = derive_exponents(spec, 13);
    auto fx = fowler_expand(t, spec, 0.2, 0.1, 0.0, default_theta(t));
    int secular = 0;
    for (const auto& v : fx.psi)
      if (std::fabs(v.rate - 4.0) < 1e-9 && v.poly.size() == 2 && v.poly[1] != 0.0) secular++;
    CHECK(secular == 1);
    bool resonantLogged = false;
    for (const auto& e : fx.resonanceLog) resonantLogged |= e.resonant && std::fabs(e.rate - 4.0) < 1e-9;
    CHECK(resonantLogged);
  }
  SUBCASE("psi is bit-identical under change of (a, b)") {
    auto spec = PotentialSpec::weighted(5.0, 0.0, weight(1.0, 1.0));
    auto t = derive_exponents(spec, 13);
    auto f1 = fowler_expand(t, spec, 0.3, -0.2, 0.0, default_theta(t));
    auto f2 = fowler_expand(t, spec, -1.1, 2.5, 0.0, default_theta(t));
    REQUIRE(!f1.psi.empty());
    REQUIRE(f1.psi.size() == f2.psi.size());
    for (size_t i = 0; i < f1.psi.size(); ++i) {
      CHECK(f1.psi[i].chi == f2.psi[i].chi);
      CHECK(f1.psi[i].poly == f2.psi[i].poly);
    }
  }
  SUBCASE("Q1 rates lie strictly between |lambda1| and |lambda2|") {
    auto spec = PotentialSpec::weighted(5.0, 0.0, weight(1.0, 1.0));
    auto t = derive_exponents(spec, 13);
    auto fx = fowler_expand(t, spec, 0.3, -0.2, 0.0, default_theta(t));
    REQUIRE(!fx.q1.empty());
    for (const auto& v : fx.q1) {
      CHECK(v.rate > std::fabs(t.lambda1));
      CHECK(v.rate < std::fabs(t.lambda2));
    }
    for (const auto& v : fx.psi) CHECK(v.rate <= std::fabs(t.lambda1) + 1e-9);
  }
  SUBCASE("focus regime is refused") {
    auto spec = PotentialSpec::pure_power(3.0);
    auto t = derive_exponents(spec, 13);
    CHECK_THROWS_AS(fowler_expand(t, spec, 0.1, 0.1, 0.0, 10.0), Error);
  }
}

TEST_CASE("property: expansions of random diagonal systems cancel below theta") {
  gen::Gen g(41);
  for (int k = 0; k < 25; ++k) {
    double r1 = g.uniform(0.5, 2.0);
    double r2 = r1 * g.uniform(1.05, 3.5);
    auto sys = StableSystem::make({{r1}, {r2}},
                                  PolyMap::direct(2, {{{g.uniform(-1, 1), {0, 2}}},
                                                      {{g.uniform(-1, 1), {2, 0}}, {g.uniform(-1, 1), {1, 1}}}}));
    double theta = 3.0 * r2;
    ExpSeries s = expand_orbit(sys, {{g.uniform(-1, 1)}, {g.uniform(-1, 1)}}, theta);
    ResidualCheck rc = check_residual(s, symbolic_residual(sys, s));
    CHECK(rc.cancelled);
    CHECK(rc.firstRate > theta);
    if (condition_R2(sys, theta)) CHECK(s.max_degree() == 0);
  }
}

TEST_CASE("truncated augmented series against the closed form") {
  auto sys = sys2::augmented();
  double a = 1.0, c = 0.5;
  ExpSeries s = expand_orbit(sys, {{a}, {c}}, 6.0);
  auto err = [&](double t) {
    return static_cast<double>(abs(sys2::eval_big(s, 1, t) - sys2::augmented_x2(a, c, t)));
  };
  double slope = -(std::log(err(15.0)) - std::log(err(5.0))) / 10.0;
  CHECK(slope >= 5.9);
  CHECK(slope < 7.5);
}

}  // TEST_SUITE
