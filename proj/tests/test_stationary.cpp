#include <cmath>
#include <vector>

#include "doctest.h"
#include "fowlerlab/error.hpp"
#include "fowlerlab/stationary.hpp"
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

std::vector<double> log_radii(double lo, double hi, int perDecade) {
  int n = static_cast<int>(std::round(std::log10(hi / lo) * perDecade));
  std::vector<double> r;
  for (int i = 0; i <= n; ++i) r.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / n));
  return r;
}

double value_at(const GroundState& gs, double r) {
  for (size_t i = 0; i < gs.r.size(); ++i)
    if (std::fabs(gs.r[i] - r) <= 1e-12 * r) return gs.U[i];
  FAIL("radius not sampled");
  return 0.0;
}

}  // namespace

TEST_SUITE("stationary") {

TEST_CASE("shot agrees with an independent high-order integration") {
  ShootOptions o;
  o.tol = 1e-12;
  o.radii = {1.0, 10.0, 100.0};
  // scipy DOP853, rtol 1e-13, same series start
  auto pp = shoot(PotentialSpec::pure_power(4.0), 13, 1.0, 100.0, o);
  CHECK(value_at(pp, 1.0) == doctest::Approx(0.9633664731907301).epsilon(1e-9));
  CHECK(value_at(pp, 10.0) == doctest::Approx(0.3111876692048714).epsilon(1e-9));
  CHECK(value_at(pp, 100.0) == doctest::Approx(0.031622682327924936).epsilon(1e-9));
  auto h = shoot(PotentialSpec::henon(4.0, 2.0), 13, 1.0, 100.0, o);
  CHECK(value_at(h, 1.0) == doctest::Approx(0.9836558159041103).epsilon(1e-9));
  CHECK(value_at(h, 10.0) == doctest::Approx(0.04241842438921511).epsilon(1e-9));
  CHECK(value_at(h, 100.0) == doctest::Approx(0.000424263963947248).epsilon(1e-9));
  auto f = shoot(PotentialSpec::pure_power(3.0), 13, 1.0, 100.0, o);
  CHECK(value_at(f, 10.0) == doctest::Approx(0.17258448784794594).epsilon(1e-9));
  CHECK(value_at(f, 100.0) == doctest::Approx(0.0017999775469563556).epsilon(1e-8));
}

TEST_CASE("scaling symmetry of the pure power") {
  // U(r, 4) = 4 U(4^{(q-2)/2} r, 1) for q = 4
  auto spec = PotentialSpec::pure_power(4.0);
  std::vector<double> radii = log_radii(1e-3, 1e3, 8);
  ShootOptions o1, o4;
  o1.tol = o4.tol = 1e-12;
  for (double r : radii) o1.radii.push_back(4.0 * r);
  o4.radii = radii;
  auto g1 = shoot(spec, 13, 1.0, 4.0e3, o1);
  auto g4 = shoot(spec, 13, 4.0, 1.0e3, o4);
  REQUIRE(g1.U.size() == g4.U.size());
  double worst = 0.0;
  for (size_t i = 0; i < g1.U.size(); ++i) worst = std::max(worst, std::fabs(4.0 * g1.U[i] / g4.U[i] - 1.0));
  CHECK(worst < 1e-6);
}

TEST_CASE("series start and small data") {
  auto spec = PotentialSpec::pure_power(4.0);
  double alpha = 0.7;
  for (double r : {1e-3, 1e-4}) {
    PhysicalPoint p = series_start(spec, 13, alpha, r);
    CHECK((p.U - alpha) / (r * r) == doctest::Approx(-std::pow(alpha, 3) / 26.0).epsilon(1e-7));
  }
  auto gs = shoot(spec, 13, 1e-3, 1e3);
  for (double u : gs.U) CHECK(u <= 1e-3 * (1.0 + 1e-10));
  CHECK_THROWS_AS(shoot(spec, 13, 0.0, 10.0), Error);
  CHECK_THROWS_AS(shoot(spec, 13, -1.0, 10.0), Error);
}

TEST_CASE("slow decay of supercritical ground states") {
  auto spec = PotentialSpec::pure_power(4.0);
  auto t = derive_exponents(spec, 13);
  for (double a : {0.5, 1.0, 4.0}) {
    auto gs = shoot(spec, 13, a, 1e3);
    CHECK(classify_decay(gs, t) == Decay::Slow);
    CHECK(std::fabs(gs.U.back() * std::pow(gs.r.back(), t.m_s) / t.P1plus - 1.0) < 0.01);
  }
}

TEST_CASE("decay classification of synthetic and subcritical profiles") {
  auto spec = PotentialSpec::pure_power(4.0);
  auto t = derive_exponents(spec, 13);
  GroundState fast;
  fast.alpha = 1.0;
  for (double r : log_radii(1.0, 1e4, 16)) {
    fast.r.push_back(r);
    fast.U.push_back(std::pow(r, -11.0));
    fast.dU.push_back(-11.0 * std::pow(r, -12.0));
  }
  CHECK(classify_decay(fast, t) == Decay::Fast);
  // q below 2* = 26/11: every regular solution changes sign
  auto sub = shoot(PotentialSpec::pure_power(2.2), 13, 1.0, 1e4);
  CHECK(sub.decay == Decay::CrossedZero);
  CHECK(sub.rZero > 0.0);
  CHECK(classify_decay(sub, t) == Decay::CrossedZero);
}

TEST_CASE("Fowler coordinates") {
  PhysicalPoint p{2.5, 0.3, -0.11};
  PhasePoint q = to_fowler(p, 4.0);
  PhysicalPoint back = to_physical(q);
  CHECK(back.r == doctest::Approx(p.r).epsilon(1e-15));
  CHECK(back.U == doctest::Approx(p.U).epsilon(1e-15));
  CHECK(back.dU == doctest::Approx(p.dU).epsilon(1e-14));
  PhasePoint q2 = change_frame(q, 3.0);
  CHECK(q2.y1 == doctest::Approx(q.y1 * std::exp((m_of(3.0) - m_of(4.0)) * q.s)).epsilon(1e-15));
  PhysicalPoint back2 = to_physical(q2);
  CHECK(back2.U == doctest::Approx(p.U).epsilon(1e-14));
  CHECK(back2.dU == doctest::Approx(p.dU).epsilon(1e-13));
}

TEST_CASE("Fowler trajectory of a ground state") {
  auto spec = PotentialSpec::henon(4.0, 1.0);
  auto t = derive_exponents(spec, 13);
  Potential pot(spec);
  ShootOptions o;
  o.tol = 1e-12;
  o.radii = log_radii(1e-4, 1e2, 400);
  auto gs = shoot(spec, 13, 1.0, 1e2, o);
  auto ph = gs.fowler(t.l_s);
  // y2 = dy1/ds and the second equation, by central differences
  double worst1 = 0.0, worst2 = 0.0;
  for (size_t i = 1; i + 1 < ph.size(); ++i) {
    double h = ph[i + 1].s - ph[i].s;
    double dy1 = (ph[i + 1].y1 - ph[i - 1].y1) / (2 * h);
    double dy2 = (ph[i + 1].y2 - ph[i - 1].y2) / (2 * h);
    double scale = t.B * t.P1plus;
    worst1 = std::max(worst1, std::fabs(dy1 - ph[i].y2) / scale);
    double rhs = t.B * ph[i].y1 - t.A * ph[i].y2 - g_potential(pot, ph[i].y1, ph[i].s, t.l_s);
    worst2 = std::max(worst2, std::fabs(dy2 - rhs) / scale);
  }
  CHECK(worst1 < 1e-5);
  CHECK(worst2 < 1e-5);
  // leaves the origin along y2 = m(l_u) y1
  CHECK(ph.front().y2 / ph.front().y1 == doctest::Approx(t.m_u).epsilon(0.02));
}

TEST_CASE("singular orbit") {
  SUBCASE("pure power: constant in the Fowler frame") {
    auto spec = PotentialSpec::pure_power(4.0);
    auto t = derive_exponents(spec, 13);
    auto so = singular_orbit(spec, 13);
    CHECK(so.singular);
    for (const auto& p : so.fowler(t.l_s)) CHECK(std::fabs(p.y1 - t.P1plus) < 1e-8);
  }
  SUBCASE("weighted power: both limits") {
    auto spec = PotentialSpec::weighted(5.0, 0.0, weight(1, 1, 1, 1));
    auto t = derive_exponents(spec, 13);
    SingularOptions o;
    o.sEnd = std::log(1e3);
    auto so = singular_orbit(spec, 13, o);
    CHECK(std::fabs(so.U.front() * std::pow(so.r.front(), t.m_u) / t.P1minus - 1.0) < 0.01);
    CHECK(std::fabs(so.U.back() * std::pow(so.r.back(), t.m_s) / t.P1plus - 1.0) < 0.01);
  }
  SUBCASE("offset against the unstable direction leaves the positive cone") {
    SingularOptions o;
    o.eps = -1e-6;
    CHECK_THROWS_AS(singular_orbit(PotentialSpec::weighted(5.0, 0.0, weight(1, 1, 1, 1)), 13, o), Error);
  }
}

TEST_CASE("tail fits") {
  auto spec = PotentialSpec::pure_power(4.0);
  auto t = derive_exponents(spec, 13);
  auto tmpl = make_tail_template(t, spec, default_theta(t));
  SUBCASE("synthetic profile built from the model") {
    double a = -12.5, b = 40.0;
    GroundState gs;
    gs.alpha = 1.0;
    gs.decay = Decay::Slow;
    gs.l = t.l_s;
    std::vector<double> s;
    for (double r : log_radii(5.0, 500.0, 64)) s.push_back(std::log(r));
    std::vector<double> rest = tmpl.rest(a, b, s);
    for (size_t i = 0; i < s.size(); ++i) {
      double y1 = tmpl.P + tmpl.psi(s[i]) + a * std::exp(t.lambda1 * s[i]) + b * std::exp(t.lambda2 * s[i]) + rest[i];
      double r = std::exp(s[i]);
      gs.r.push_back(r);
      gs.U.push_back(y1 * std::pow(r, -t.m_s));
      gs.dU.push_back(0.0);
    }
    TailFit f = fit_tail(gs, t, tmpl, 10.0, 400.0);
    CHECK(f.A == doctest::Approx(a).epsilon(1e-8));
    CHECK(f.B == doctest::Approx(b).epsilon(1e-8));
  }
  SUBCASE("singular orbit has vanishing coefficients") {
    SingularOptions o;
    o.sEnd = std::log(2e3);
    auto so = singular_orbit(spec, 13, o);
    TailFit f = fit_tail(so, t, tmpl, 10.0, 1e3);
    CHECK(std::fabs(f.A) < 1e-6);
    CHECK(std::fabs(f.B) < 1e-5);
  }
  SUBCASE("shot ground state") {
    auto gs = shoot(spec, 13, 1.0, 300.0, {1e-11});
    TailFit f = fit_tail(gs, t, tmpl, 20.0, 200.0);
    CHECK(f.residual < 1e-4 * t.P1plus);
    // measured A(1) = -995.71 on the standard window
    CHECK(f.A == doctest::Approx(-995.71).epsilon(1e-4));
  }
  SUBCASE("a window that is too short is rejected") {
    auto gs = shoot(spec, 13, 1.0, 300.0);
    CHECK_THROWS_AS(fit_tail(gs, t, tmpl, 100.0, 101.0), Error);
  }
}

TEST_CASE("property: tail coefficient is continuous and increasing in alpha") {
  auto spec = PotentialSpec::pure_power(4.0);
  auto t = derive_exponents(spec, 13);
  auto tmpl = make_tail_template(t, spec, default_theta(t));
  gen::Gen g(31);
  for (int k = 0; k < 4; ++k) {
    double a = g.log_uniform(0.5, 4.0), h = 1e-3 * a;
    double len = std::max(1.0, std::pow(a - h, -1.0));
    double r1 = 20.0 * len, r2 = 200.0 * len;
    std::vector<double> A;
    for (double x : {a - h, a, a + h}) A.push_back(fit_tail(shoot(spec, 13, x, r2 * 1.01, {1e-11}), t, tmpl, r1, r2).A);
    CHECK(A[0] < A[1]);
    CHECK(A[1] < A[2]);
    double jump = std::fabs(A[2] - 2 * A[1] + A[0]);
    CHECK(jump < 0.05 * std::fabs(A[2] - A[0]));
  }
}

}  // TEST_SUITE
