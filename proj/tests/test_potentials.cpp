#include <cmath>

#include "doctest.h"
#include "fowlerlab/error.hpp"
#include "fowlerlab/exponents.hpp"
#include "fowlerlab/potentials.hpp"
#include "gen.hpp"

using namespace fl;

namespace {

KParams weight(double kInf, double amp, double eta, double gamma) {
  KParams k;
  k.kInf = kInf;
  k.amp = amp;
  k.eta = eta;
  k.gamma = gamma;
  return k;
}

const HypothesisItem& item(const HypothesisReport& r, const char* name) { return r.get(name); }

}  // namespace

TEST_SUITE("potentials") {

TEST_CASE("f evaluation") {
  FValue v = f_eval(PotentialSpec::pure_power(4.0), 2.0, 123.0);
  CHECK(v.value == doctest::Approx(8.0));
  CHECK(v.du == doctest::Approx(12.0));
  CHECK(f_eval(PotentialSpec::henon(4.0, 2.0), 1.0, 3.0).value == doctest::Approx(9.0));
  auto w = PotentialSpec::weighted(4.0, 0.0, weight(1, 1, 1, 1));
  CHECK(f_eval(w, 1.0, 1.0).value == doctest::Approx(2.0));
  CHECK_THROWS_AS(f_eval(w, 1.0, 0.0), Error);
}

TEST_CASE("spec validation and names") {
  CHECK_THROWS_AS(PotentialSpec::pure_power(2.0).validate(), Error);
  CHECK_THROWS_AS(PotentialSpec::henon(4.0, -2.5).validate(), Error);
  CHECK_THROWS_AS(PotentialSpec::weighted(4.0, 0.0, weight(1, 1, 2.5, 1)).validate(), Error);
  CHECK_THROWS_AS(PotentialSpec::two_power(5, 0, weight(1, 0, 0, 1), 4, 0, weight(1, 0, 0, 1)).validate(), Error);
  CHECK(family_from_name("henon") == Family::Henon);
  CHECK(family_from_name("TwoPower") == Family::TwoPower);
  CHECK_THROWS_AS(family_from_name("cubic"), Error);
}

TEST_CASE("g in Fowler variables") {
  auto pp = PotentialSpec::pure_power(4.0);
  for (double s : {-3.0, 0.0, 2.5}) CHECK(g_eval(pp, 1.7, s, 4.0, GMode::Value) == doctest::Approx(std::pow(1.7, 3)));
  auto h = PotentialSpec::henon(4.0, 2.0);
  CHECK(frame_ls(h) == doctest::Approx(3.0));
  for (double s : {-1.0, 0.4, 3.0}) CHECK(g_eval(h, 1.3, s, 3.0, GMode::Value) == doctest::Approx(std::pow(1.3, 3)));
  CHECK(g_eval(h, 0.0, 0.7, 3.0, GMode::Value) == 0.0);
  // wrong frame has no autonomous limit
  CHECK_THROWS_AS(g_eval(h, 1.0, 0.0, 4.0, GMode::LimitPlusInf), Error);
}

TEST_CASE("analytic partial derivatives against central differences") {
  auto w = PotentialSpec::weighted(5.0, 0.5, weight(1.0, 0.7, 0.8, 1.3));
  double l = frame_ls(w);
  for (double y : {0.3, 1.1}) {
    for (double s : {-1.5, 0.2, 2.0}) {
      double h = 1e-5;
      double dy = (g_eval(w, y + h, s, l, GMode::Value) - g_eval(w, y - h, s, l, GMode::Value)) / (2 * h);
      double ds = (g_eval(w, y, s + h, l, GMode::Value) - g_eval(w, y, s - h, l, GMode::Value)) / (2 * h);
      CHECK(g_eval(w, y, s, l, GMode::Dy1) == doctest::Approx(dy).epsilon(1e-7));
      CHECK(g_eval(w, y, s, l, GMode::Ds) == doctest::Approx(ds).epsilon(1e-6).scale(1e-6));
    }
  }
}

TEST_CASE("hypotheses") {
  SUBCASE("pure power passes everything with the scriptG = 0 branch") {
    auto r = check_hypotheses(PotentialSpec::pure_power(4.0), 13);
    CHECK(r.all_pass());
    CHECK(r.meta.scriptGZero);
    CHECK(r.items.size() == 7);
  }
  SUBCASE("two-power without weights fails K") {
    auto tp = PotentialSpec::two_power(4, 0, weight(1, 0, 0, 1), 5, 0, weight(1, 0, 0, 1));
    auto r = check_hypotheses(tp, 13);
    CHECK(item(r, "K").verdict == Verdict::Fail);
    CHECK_FALSE(r.all_pass());
  }
  SUBCASE("weighted power has K vacuously") {
    auto r = check_hypotheses(PotentialSpec::weighted(5.0, 0.0, weight(1, 1, 1, 1)), 13);
    CHECK(item(r, "K").verdict == Verdict::Pass);
    CHECK(r.all_pass());
    CHECK_FALSE(r.meta.scriptGZero);
  }
  SUBCASE("increasing weight breaks G3 with a witness") {
    auto r = check_hypotheses(PotentialSpec::weighted(5.0, 0.0, weight(1, -0.5, 0, 1)), 13);
    const auto& g3 = item(r, "G3");
    CHECK(g3.verdict == Verdict::Fail);
    CHECK(std::isfinite(g3.witnessS));
    CHECK(g3.witnessY1 > 0.0);
  }
}

TEST_CASE("fixed point identity for weighted power") {
  auto w = PotentialSpec::weighted(5.0, 0.0, weight(2.0, 1.0, 1.0, 1.0));
  auto t = derive_exponents(w, 13);
  double gInf = g_eval(w, t.P1plus, 0.0, t.l_s, GMode::LimitPlusInf);
  CHECK(std::fabs(t.B * t.P1plus - gInf) < 1e-10 * gInf);
  CHECK(std::fabs(t.dgPlus - (t.qBar - 1.0) * t.B) < 1e-10 * t.B);
}

TEST_CASE("perturbed potentials") {
  auto w = PotentialSpec::weighted(5.0, 0.0, weight(1, 1, 1, 1));
  Potential base(w);
  auto sup = Potential::perturbed(w, 1, true, 13, {});
  auto sub = Potential::perturbed(w, 1, false, 13, {});
  double l = frame_ls(w);
  SUBCASE("identical for r >= 1") {
    for (double r : {1.0, 1.5, 40.0}) {
      CHECK(sup.f(0.8, r).value == base.f(0.8, r).value);
      CHECK(sub.f(0.8, r).value == base.f(0.8, r).value);
    }
  }
  SUBCASE("super minus base equals h scriptG / 2 at r = 0.5") {
    double s = std::log(0.5), y = 1.2;
    double diff = g_potential(sup, y, s, l) - g_potential(base, y, s, l);
    double oracle = bump(0.5) * g_eval(w, y, s, l, GMode::ScriptG) / 2.0;
    CHECK(diff > 0.0);
    CHECK(diff == doctest::Approx(oracle).epsilon(1e-10));
  }
  SUBCASE("amplitude shrinks like 1/k") {
    double s = std::log(0.3), y = 1.0;
    double d1 = g_potential(Potential::perturbed(w, 1, true, 13, {}), y, s, l) - g_potential(base, y, s, l);
    double d8 = g_potential(Potential::perturbed(w, 8, true, 13, {}), y, s, l) - g_potential(base, y, s, l);
    CHECK(d8 == doctest::Approx(d1 / 8.0).epsilon(1e-10));
  }
  SUBCASE("pure power uses the scaled branch") {
    auto pp = PotentialSpec::pure_power(4.0);
    auto p = Potential::perturbed(pp, 2, true, 13, {});
    CHECK_FALSE(p.scriptGBranch());
    CHECK(p.mu() > 0.0);
    CHECK(p.mu() <= 1.0);
    double r = 0.4;
    CHECK(p.f(1.0, r).value == doctest::Approx((1.0 + p.mu() * bump(r) / 2.0) * 1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(Potential::perturbed(w, 0, true, 13, {}), Error);
}

TEST_CASE("property: Fowler covariance and ordering of perturbations") {
  gen::Gen g(21);
  auto w = PotentialSpec::weighted(5.0, 0.3, weight(1.0, 0.8, 0.7, 1.2));
  double l = frame_ls(w), m = m_of(l);
  Potential base(w);
  auto sup = Potential::perturbed(w, 1, true, 13, {});
  auto sub = Potential::perturbed(w, 1, false, 13, {});
  for (int k = 0; k < 200; ++k) {
    double y = g.uniform(0.01, 5.0), s = g.uniform(-6.0, 6.0);
    double lhs = g_eval(w, y, s, l, GMode::Value) * std::exp(-(m + 2.0) * s);
    double rhs = f_eval(w, y * std::exp(-m * s), std::exp(s)).value;
    CHECK(std::fabs(lhs - rhs) <= 1e-13 * std::fabs(rhs));
    double gs = g_potential(sup, y, s, l), g0 = g_potential(base, y, s, l), gb = g_potential(sub, y, s, l);
    CHECK(gs >= g0);
    CHECK(g0 >= gb);
  }
}

}  // TEST_SUITE
