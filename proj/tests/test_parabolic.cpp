#include <cmath>

#include "doctest.h"
#include "fowlerlab/error.hpp"
#include "fowlerlab/parabolic.hpp"
#include "gen.hpp"

using namespace fl;

namespace {

RadialField field_of(const std::vector<double>& grid, double (*f)(double, double), double lam) {
  RadialField F;
  F.r = grid;
  for (double r : grid) F.u.push_back(f(r, lam));
  return F;
}

NormSpec stability_norm(const ExponentTable& t) { return {t.m_s + std::fabs(t.lambda1), false}; }

}  // namespace

TEST_SUITE("parabolic") {

TEST_CASE("grid construction") {
  auto g = build_grid(1e3, 10, 1e-3);
  CHECK(g.size() == 62);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == doctest::Approx(1e-3));
  CHECK(g.back() == 1e3);
  for (size_t i = 1; i + 1 < g.size(); ++i) CHECK(g[i + 1] > g[i]);
  CHECK(g[11] == doctest::Approx(1e-2).epsilon(1e-12));
  CHECK_THROWS_AS(build_grid(1e-3, 10, 1e-3), Error);
  CHECK_THROWS_AS(build_grid(1e3, 7, 1e-3), Error);
}

TEST_CASE("weighted norms") {
  auto g = build_grid(1e3, 16, 1e-3);
  double lam = 3.0;
  auto inv = field_of(g, [](double r, double l) { return 1.0 / (1.0 + std::pow(r, l)); }, lam);
  CHECK(weighted_norm(inv, {lam, false}) == doctest::Approx(1.0).epsilon(1e-14));
  auto zero = field_of(g, [](double, double) { return 0.0; }, lam);
  CHECK(weighted_norm(zero, {lam, false}) == 0.0);
  CHECK(weighted_norm(inv, {lam, false}, &inv) == 0.0);
  // the tail value decides for a slower decay: (1 + R^2) R^{-1} at R = 1e3
  auto slow = field_of(g, [](double r, double) { return 1.0 / (1.0 + r); }, 0.0);
  CHECK(weighted_norm(slow, {2.0, false}) == doctest::Approx((1.0 + 1e6) / (1.0 + 1e3)).epsilon(1e-12));
  // lambda = 0 is the plain sup norm
  CHECK(weighted_norm(slow, {0.0, false}) == doctest::Approx(1.0));
  CHECK(weighted_norm(inv, {lam, true}) == doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-12));
  RadialField other = inv;
  other.r.pop_back();
  other.u.pop_back();
  CHECK_THROWS_AS(weighted_norm(inv, {lam, false}, &other), Error);
}

TEST_CASE("the zero solution stays at zero") {
  auto g = build_grid(100, 16, 1e-3);
  RadialField z;
  z.r = g;
  z.u.assign(g.size(), 0.0);
  auto ev = evolve(PotentialSpec::pure_power(4.0), 13, z, 1.0);
  for (double v : ev.final.u) CHECK(v == 0.0);
  CHECK(ev.trace.termination == Termination::Completed);
}

TEST_CASE("steady state preservation") {
  auto spec = PotentialSpec::pure_power(4.0);
  Potential pot(spec);
  double drift[2];
  int k = 0;
  for (double R : {1e3, 2e3}) {
    auto U = profile_on_grid(pot, 13, 1.0, build_grid(R, 128));
    auto ev = evolve(pot, 13, U, 10.0);
    double d = 0.0;
    for (size_t i = 0; i < U.u.size(); ++i) d = std::max(d, std::fabs(ev.final.u[i] - U.u[i]));
    drift[k++] = d;
  }
  CHECK(drift[0] < 5e-3);
  CHECK(drift[1] < 5e-3);
  CHECK(std::fabs(drift[1] - drift[0]) < 0.1 * drift[0]);
}

TEST_CASE("discrete steady states") {
  auto spec = PotentialSpec::pure_power(4.0);
  Potential pot(spec);
  auto cfg = experiment_scheme();
  auto g = build_grid(1e3, 48);
  auto guess = profile_on_grid(pot, 13, 1.0, g);
  auto U = discrete_steady(pot, 13, guess, cfg);
  CHECK(U.u[0] == guess.u[0]);
  // absolute, with stencil weights up to 1/h^2 near r = 1e-3
  CHECK(discrete_residual(pot, 13, U, cfg) < 1e-6);
  CHECK(discrete_residual(pot, 13, U, cfg) < 1e-3 * discrete_residual(pot, 13, guess, cfg));
  auto ev = evolve(pot, 13, U, 2.0, cfg);
  for (size_t i = 0; i < U.u.size(); ++i) CHECK(std::fabs(ev.final.u[i] - U.u[i]) < 1e-10);
}

TEST_CASE("gluing profiles") {
  auto spec = PotentialSpec::pure_power(4.0);
  Potential pot(spec);
  auto cfg = experiment_scheme();
  auto g = build_grid(1e3, 48);
  auto U1 = discrete_steady(pot, 13, profile_on_grid(pot, 13, 1.0, g), cfg);
  auto U2 = discrete_steady(pot, 13, profile_on_grid(pot, 13, 2.0, g), cfg);
  RadialField U2s = U2;
  for (double& v : U2s.u) v *= 0.9;
  SUBCASE("identical profiles give neither") {
    CHECK(glue_profiles(U1, U1, 1e-3, 1e3).kind == GlueKind::Neither);
  }
  SUBCASE("lower inside, lower outside: supersolution") {
    auto gl = glue_profiles(U1, U2s, 1e-3, 1e3);
    CHECK(gl.kind == GlueKind::Supersolution);
    CHECK(gl.jump > 0.0);
    CHECK(gl.R == doctest::Approx(4.861).epsilon(1e-3));
    for (size_t i = 0; i < g.size(); ++i) CHECK(gl.field.u[i] <= std::max(U1.u[i], U2s.u[i]));
  }
  SUBCASE("upper inside, upper outside: subsolution") {
    auto gl = glue_profiles(U2s, U1, 1e-3, 1e3);
    CHECK(gl.kind == GlueKind::Subsolution);
    CHECK(gl.jump < 0.0);
  }
  SUBCASE("no sign change in the bracket") {
    CHECK_THROWS_AS(glue_profiles(U1, U2, 1e-3, 1e3), Error);
  }
}

TEST_CASE("comparison principle on ordered data") {
  auto spec = PotentialSpec::pure_power(4.0);
  Potential pot(spec);
  auto cfg = experiment_scheme();
  auto g = build_grid(1e3, 48);
  auto lo = discrete_steady(pot, 13, profile_on_grid(pot, 13, 1.0, g), cfg);
  auto hi = discrete_steady(pot, 13, profile_on_grid(pot, 13, 2.0, g), cfg);
  for (double& v : lo.u) v *= 0.9;
  for (double& v : hi.u) v *= 0.95;
  std::vector<RadialField> a, b;
  evolve(pot, 13, lo, 10.0, cfg, [&](const RadialField& f) { a.push_back(f); });
  evolve(pot, 13, hi, 10.0, cfg, [&](const RadialField& f) { b.push_back(f); });
  REQUIRE(a.size() == b.size());
  int violations = 0;
  for (size_t k = 0; k < a.size(); ++k)
    for (size_t i = 0; i < g.size(); ++i) violations += a[k].u[i] > b[k].u[i] + 1e-12;
  CHECK(violations == 0);
}

TEST_CASE("a glued supersolution decreases monotonically") {
  auto spec = PotentialSpec::pure_power(4.0);
  Potential pot(spec);
  auto cfg = experiment_scheme();
  auto g = build_grid(1e3, 48);
  auto U1 = discrete_steady(pot, 13, profile_on_grid(pot, 13, 1.0, g), cfg);
  auto U2 = discrete_steady(pot, 13, profile_on_grid(pot, 13, 2.0, g), cfg);
  for (double& v : U2.u) v *= 0.9;
  auto ev = evolve(pot, 13, glue_profiles(U1, U2, 1e-3, 1e3).field, 10.0, cfg);
  int violations = 0;
  for (const auto& s : ev.trace.samples) violations += !s.nonincreasing;
  CHECK(violations == 0);
  CHECK(ev.final.u[0] < 1.0);
}

TEST_CASE("stability sandwich") {
  auto spec = PotentialSpec::pure_power(4.0);
  auto t = derive_exponents(spec, 13);
  auto st = run_stability_experiment(spec, 13, 1.0, 0.5, stability_norm(t), 10.0);
  CHECK(st.verdict == Verdict::Pass);
  CHECK(st.violations == 0);
  CHECK(st.maxDistance <= std::max(st.zBarMinus, st.zBarPlus));
  CHECK(st.trace.termination == Termination::Completed);
  CHECK_THROWS_AS(run_stability_experiment(spec, 13, 1.0, 0.0, stability_norm(t), 1.0), Error);
  CHECK_THROWS_AS(run_stability_experiment(spec, 13, 1.0, 1.5, stability_norm(t), 1.0), Error);
  auto focus = PotentialSpec::pure_power(3.0);
  CHECK_THROWS_AS(run_stability_experiment(focus, 13, 1.0, 0.5, {1.0, false}, 1.0), Error);
}

TEST_CASE("weak asymptotic experiment") {
  auto spec = PotentialSpec::pure_power(4.0);
  auto t = derive_exponents(spec, 13);
  GridOptions grid;
  grid.Rmax = 100.0;
  SUBCASE("gap shrinks below the critical weight") {
    auto w = run_weak_asymptotic_experiment(spec, 13, 1.0, {t.m_s + std::fabs(t.lambda2) - 0.5, false}, 10.0, grid);
    CHECK(w.verdict == Verdict::Pass);
    CHECK(w.shrink >= 2.0);
    CHECK(w.eLower < 1.0);
    CHECK(w.eUpper > 1.0);
  }
  SUBCASE("the plain sup norm also decreases") {
    auto w = run_weak_asymptotic_experiment(spec, 13, 1.0, {0.0, false}, 10.0, grid);
    CHECK(w.verdict == Verdict::Pass);
    CHECK(w.gaps.back() < w.gaps.front());
  }
  SUBCASE("inadmissible exponents and the focus regime are refused") {
    CHECK_THROWS_AS(
        run_weak_asymptotic_experiment(spec, 13, 1.0, {t.m_s + std::fabs(t.lambda2), false}, 1.0, grid), Error);
    CHECK_THROWS_AS(run_weak_asymptotic_experiment(PotentialSpec::pure_power(3.0), 13, 1.0, {0.0, false}, 1.0, grid),
                    Error);
  }
}

TEST_CASE("blow-up of large data in the focus regime") {
  auto spec = PotentialSpec::pure_power(3.0);
  Potential pot(spec);
  auto U = profile_on_grid(pot, 13, 1.0, build_grid(1e3, 48));
  for (double& v : U.u) v *= 3.0;
  auto ev = evolve(pot, 13, U, 10.0);
  CHECK(ev.trace.termination == Termination::Blowup);
  CHECK(ev.trace.tBlowup > 0.0);
  CHECK(ev.trace.tBlowup < 10.0);
}

TEST_CASE("property: scaled ground states are sub- or supersolutions in time") {
  // u0 = c U with c < 1 rises toward the ground state, c > 1 falls while it stays bounded
  gen::Gen g(71);
  auto spec = PotentialSpec::pure_power(4.0);
  Potential pot(spec);
  auto cfg = experiment_scheme();
  auto grid = build_grid(100, 24);
  auto U = discrete_steady(pot, 13, profile_on_grid(pot, 13, 1.0, grid), cfg);
  for (int k = 0; k < 4; ++k) {
    double c = g.uniform(0.3, 0.95);
    RadialField f = U;
    for (double& v : f.u) v *= c;
    auto ev = evolve(pot, 13, f, 2.0, cfg);
    for (size_t i = 0; i < f.u.size(); ++i) CHECK(ev.final.u[i] <= U.u[i] + 1e-12);
    for (size_t i = 0; i < f.u.size(); ++i) CHECK(ev.final.u[i] >= -1e-14);
  }
}

}  // TEST_SUITE
