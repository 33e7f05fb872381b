#include "fowlerlab/exponents.hpp"

#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>

#include "fowlerlab/error.hpp"

namespace fl {

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Focus: return "focus";
    case Regime::Node: return "node";
    case Regime::DegenerateNode: return "degenerate-node";
  }
  return "?";
}

double A_of(int n, double l) { return n - 2.0 - 2.0 * m_of(l); }

double B_of(int n, double l) {
  double m = m_of(l);
  return m * (n - 2.0 - m);
}

double sigma_star_paper(int n) {
  if (n <= 10) return std::numeric_limits<double>::infinity();
  double nn = n;
  return ((nn - 2) * (nn - 2) - 4 * nn + 8 * std::sqrt(nn - 1)) / ((nn - 2) * (nn - 10));
}

SigmaRoots sigma_roots(int n, double deltaBar) {
  // In m = 2/(l-2): 4m^2 - 4(n-4-deltaBar) m + (n-2)(n-10-4 deltaBar) = 0.
  double b = n - 4.0 - deltaBar;
  double c = (n - 2.0) * (n - 10.0 - 4.0 * deltaBar);
  double disc = b * b - c;
  SigmaRoots out{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity()};
  if (disc < 0.0) return out;
  double sq = std::sqrt(disc);
  double mPlus = 0.5 * (b + sq);
  double mMinus = c / (4.0 * mPlus);  // product of roots is c/4
  if (mPlus > 0.0) out.lower = 2.0 + 2.0 / mPlus;
  if (mMinus > 0.0) out.upper = 2.0 + 2.0 / mMinus;
  return out;
}

double p1_fixed_point(const std::function<double(double)>& gLimit, double B) {
  require(B > 0.0, "p1_fixed_point: B must be positive");
  auto h = [&](double y) { return gLimit(y) / y - B; };
  double lo = 1.0, hi = 1.0;
  while (h(lo) >= 0.0) {
    lo *= 0.5;
    if (lo < 1e-150) fail(ErrorCode::Numerical, "fixed point not bracketed");
  }
  while (h(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e150 || !std::isfinite(h(hi))) fail(ErrorCode::Numerical, "fixed point not bracketed");
  }
  boost::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(52);
  auto [a, b] = boost::math::tools::toms748_solve(h, lo, hi, tol, iters);
  double y = 0.5 * (a + b);
  // Newton polish on gLimit(y) - B y with a centered difference slope.
  for (int i = 0; i < 3; ++i) {
    double F = gLimit(y) - B * y;
    double dy = 1e-6 * y;
    double dF = (gLimit(y + dy) - gLimit(y - dy)) / (2 * dy) - B;
    if (dF == 0.0) break;
    double next = y - F / dF;
    if (!(next > 0.0)) break;
    if (std::fabs(gLimit(next) - B * next) >= std::fabs(F)) break;
    y = next;
  }
  if (std::fabs(gLimit(y) - B * y) > 1e-12 * B * y) fail(ErrorCode::Numerical, "fixed point residual too large");
  return y;
}

Regime classify_regime(double discriminant) {
  if (std::fabs(discriminant) <= 1e-12) return Regime::DegenerateNode;
  return discriminant < 0.0 ? Regime::Focus : Regime::Node;
}

Regime classify_regime(const ExponentTable& t) { return classify_regime(t.discriminant); }

ExponentTable derive_exponents(const PotentialSpec& spec, int n) {
  require(n >= 3, "dimension n must be at least 3");
  spec.validate();
  ExponentTable t;
  t.n = n;
  t.twoStar = 2.0 * n / (n - 2.0);
  t.sigmaStarPaper = sigma_star_paper(n);
  t.l_s = frame_ls(spec);
  t.l_u = frame_lu(spec);
  if (t.l_s <= t.twoStar + 1e-12)
    fail(ErrorCode::Domain, "subcritical configuration: l_s = " + std::to_string(t.l_s) +
                                " is not above 2* = " + std::to_string(t.twoStar));
  t.m_s = m_of(t.l_s);
  t.m_u = m_of(t.l_u);
  t.A = A_of(n, t.l_s);
  t.B = B_of(n, t.l_s);
  t.A_u = A_of(n, t.l_u);
  t.B_u = B_of(n, t.l_u);

  DominantTerm dom = dominant_plus(spec);
  t.qBar = dom.q;
  t.deltaBar = dom.delta;
  SigmaRoots sr = sigma_roots(n, dom.delta);
  t.sigmaStarLower = sr.lower;
  t.sigmaStarUpper = sr.upper;

  t.P1plus = p1_fixed_point([&](double y) { return g_eval(spec, y, 0.0, t.l_s, GMode::LimitPlusInf); }, t.B);
  t.dgPlus = g_limit_dy1(spec, t.P1plus, t.l_s, true);
  t.discriminant = t.A * t.A - 4.0 * (t.dgPlus - t.B);
  t.regime = classify_regime(t.discriminant);

  if (t.B_u > 0.0) {
    t.P1minus = p1_fixed_point([&](double y) { return g_eval(spec, y, 0.0, t.l_u, GMode::LimitMinusInf); }, t.B_u);
    t.dgMinus = g_limit_dy1(spec, t.P1minus, t.l_u, false);
    t.discriminantMinus = t.A_u * t.A_u - 4.0 * (t.dgMinus - t.B_u);
    t.regimeMinus = classify_regime(t.discriminantMinus);
  }

  // lambda^2 + A lambda + (dg(P1+) - B) = 0
  double c = t.dgPlus - t.B;
  if (t.regime == Regime::Focus) {
    t.lambda1 = t.lambda2 = -0.5 * t.A;
    t.lambdaImag = 0.5 * std::sqrt(-t.discriminant);
  } else if (t.regime == Regime::DegenerateNode) {
    t.lambda1 = t.lambda2 = -0.5 * t.A;
  } else {
    double sq = std::sqrt(t.discriminant);
    // Stable evaluation: the larger-magnitude root first, the other from the product.
    t.lambda2 = -0.5 * (t.A + sq);
    t.lambda1 = c / t.lambda2;
  }
  return t;
}

}  // namespace fl
