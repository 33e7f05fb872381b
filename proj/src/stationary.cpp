#include "fowlerlab/stationary.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "fowlerlab/dopri.hpp"
#include "fowlerlab/error.hpp"
#include "json.hpp"

namespace fl {

namespace {

const double kLn10 = std::log(10.0);

// Output radii: r0 followed by the decade-aligned points 10^{j/ppd} in (r0, rMax], and rMax.
std::vector<double> output_radii(double r0, double rMax, int ppd) {
  std::vector<double> out{r0};
  long j = static_cast<long>(std::floor(ppd * std::log10(r0))) + 1;
  for (;; ++j) {
    double r = std::pow(10.0, static_cast<double>(j) / ppd);
    if (r >= rMax * (1.0 - 1e-14)) break;
    if (r > r0 * (1.0 + 1e-14)) out.push_back(r);
  }
  out.push_back(rMax);
  return out;
}

double fowler_g(const Potential& pot, double y1, double s, double m) {
  return pot.f(y1 * std::exp(-m * s), std::exp(s)).value * std::exp((m + 2.0) * s);
}

}  // namespace

const char* decay_name(Decay d) {
  switch (d) {
    case Decay::Fast: return "fast";
    case Decay::Slow: return "slow";
    case Decay::CrossedZero: return "crossed-zero";
    case Decay::Inconclusive: return "inconclusive";
  }
  return "?";
}

PhasePoint to_fowler(const PhysicalPoint& p, double l) {
  double m = m_of(l);
  double s = std::log(p.r);
  double rm = std::pow(p.r, m);
  return {p.U * rm, rm * (m * p.U + p.r * p.dU), l, s};
}

PhysicalPoint to_physical(const PhasePoint& p) {
  double m = m_of(p.l);
  double r = std::exp(p.s);
  double e = std::exp(-m * p.s);
  return {r, p.y1 * e, e * (p.y2 - m * p.y1) / r};
}

PhasePoint change_frame(const PhasePoint& p, double lNew) {
  double dm = m_of(lNew) - m_of(p.l);
  double e = std::exp(dm * p.s);
  return {p.y1 * e, e * (p.y2 + dm * p.y1), lNew, p.s};
}

std::vector<double> GroundState::s() const {
  std::vector<double> out(r.size());
  for (size_t i = 0; i < r.size(); ++i) out[i] = std::log(r[i]);
  return out;
}

std::vector<PhasePoint> GroundState::fowler(double frame) const {
  std::vector<PhasePoint> out;
  out.reserve(r.size());
  for (size_t i = 0; i < r.size(); ++i) out.push_back(to_fowler({r[i], U[i], dU[i]}, frame));
  return out;
}

std::string GroundState::csv(double m) const {
  std::ostringstream os;
  os << std::setprecision(17) << "r,U,dU,Urm\n";
  for (size_t i = 0; i < r.size(); ++i) os << r[i] << ',' << U[i] << ',' << dU[i] << ',' << U[i] * std::pow(r[i], m) << '\n';
  return os.str();
}

std::string GroundState::json() const {
  nlohmann::json j;
  j["alpha"] = singular ? nlohmann::json("infinity") : nlohmann::json(alpha);
  j["singular"] = singular;
  j["decay"] = decay_name(decay);
  if (decay == Decay::CrossedZero) j["rZero"] = rZero;
  j["frame"] = l;
  j["points"] = r.size();
  j["rMin"] = r.empty() ? 0.0 : r.front();
  j["rMax"] = r.empty() ? 0.0 : r.back();
  if (fitResidual >= 0.0) {
    j["tailA"] = tailA;
    j["tailB"] = tailB;
    j["fitResidual"] = fitResidual;
  }
  return j.dump(2);
}

double default_start_radius(const PotentialSpec& spec, double alpha) {
  return 1e-6 * std::max(1.0, std::pow(alpha, -(spec.q - 2.0) / 2.0));
}

PhysicalPoint series_start(const PotentialSpec& spec, int n, double alpha, double r0) {
  double U = alpha, dU = 0.0;
  for (const auto& t : spec.terms()) {
    // Leading behaviour of k(r) r^delta at the origin: c0 r^{delta - eta}.
    double eta = t.k.singular_at_origin() ? t.k.eta : 0.0;
    double c0 = t.k.singular_at_origin() ? t.k.amp : t.k.kInf + t.k.amp;
    double p = 2.0 + t.delta - eta;
    require(p > 0.0, "series start needs 2 + delta - eta > 0");
    double C = c0 * std::pow(alpha, t.q - 1.0) / (p * (n - 2.0 + p));
    U -= C * std::pow(r0, p);
    dU -= C * p * std::pow(r0, p - 1.0);
  }
  return {r0, U, dU};
}

GroundState shoot(const Potential& pot, int n, double alpha, double rMax, const ShootOptions& opts) {
  if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "shoot: alpha must be positive");
  require(n >= 3, "shoot: dimension must be at least 3");
  const PotentialSpec& spec = pot.spec();
  double r0 = opts.r0 > 0.0 ? opts.r0 : default_start_radius(spec, alpha);
  require(rMax > r0, "shoot: rMax must exceed the start radius");
  require(opts.pointsPerDecade >= 1, "shoot: pointsPerDecade must be positive");

  const double ls = frame_ls(spec);
  const double m = m_of(ls);
  const double A = A_of(n, ls), B = B_of(n, ls);

  PhysicalPoint start = series_start(spec, n, alpha, r0);
  PhasePoint p0 = to_fowler(start, ls);

  std::vector<double> radii = opts.radii.empty() ? output_radii(r0, rMax, opts.pointsPerDecade) : opts.radii;
  if (!opts.radii.empty()) {
    require(std::is_sorted(radii.begin(), radii.end()), "shoot: radii must be increasing");
    require(radii.front() >= r0 * (1 - 1e-14) && radii.back() <= rMax * (1 + 1e-14), "shoot: radii outside [r0, rMax]");
  }
  std::vector<double> sOut(radii.size());
  for (size_t i = 0; i < radii.size(); ++i) sOut[i] = std::log(radii[i]);
  if (opts.radii.empty()) sOut.front() = p0.s;

  DopriOptions dop;
  dop.rtol = opts.tol;
  dop.atol = opts.tol * std::fabs(p0.y1) * 1e-3;
  dop.stateNorm = true;
  Dopri5 solver(2, [&](double s, const double* y, double* dy) {
    dy[0] = y[1];
    dy[1] = B * y[0] - A * y[1] - fowler_g(pot, y[0], s, m);
  }, dop);
  auto res = solver.integrate(p0.s, {p0.y1, p0.y2}, std::log(rMax), sOut,
                              [](double, const double* y) { return y[0]; });

  GroundState gs;
  gs.alpha = alpha;
  gs.l = ls;
  for (size_t i = 0; i < res.times.size(); ++i) {
    PhysicalPoint q = to_physical({res.states[i][0], res.states[i][1], ls, res.times[i]});
    if (i == 0 && opts.radii.empty()) {
      q = start;
    }
    gs.r.push_back(q.r);
    gs.U.push_back(q.U);
    gs.dU.push_back(q.dU);
  }
  if (res.eventHit) {
    gs.decay = Decay::CrossedZero;
    gs.rZero = std::exp(res.tEnd);
    return gs;
  }
  ExponentTable table;
  try {
    table = derive_exponents(spec, n);
    gs.decay = classify_decay(gs, table);
  } catch (const Error&) {
    gs.decay = Decay::Inconclusive;
  }
  return gs;
}

GroundState shoot(const PotentialSpec& spec, int n, double alpha, double rMax, const ShootOptions& opts) {
  return shoot(Potential(spec), n, alpha, rMax, opts);
}

GroundState singular_orbit(const PotentialSpec& spec, int n, const SingularOptions& opts) {
  ExponentTable t = derive_exponents(spec, n);
  HypothesisMeta meta = hypothesis_meta(spec, n);
  Potential pot(spec);
  const double ls = t.l_s, lu = t.l_u;
  const double ms = m_of(ls), mu = m_of(lu);
  double eps = opts.eps == 0.0 ? 1e-6 * (t.P1minus > 0.0 ? t.P1minus : t.P1plus) : opts.eps;
  if (eps < 0.0) fail(ErrorCode::Domain, "eps < 0 leaves the physical half-space z > 0; use a positive offset");

  GroundState gs;
  gs.singular = true;
  gs.alpha = std::numeric_limits<double>::quiet_NaN();
  gs.l = ls;
  gs.decay = Decay::Slow;

  const bool autonomous = std::fabs(ls - lu) <= 1e-12 && meta.scriptGZero;
  if (autonomous) {
    // The fixed point itself: U(r) = P r^{-m}.
    double rStart = std::exp(-opts.sEnd);
    for (double r : output_radii(rStart, std::exp(opts.sEnd), opts.pointsPerDecade)) {
      gs.r.push_back(r);
      gs.U.push_back(t.P1plus * std::pow(r, -ms));
      gs.dU.push_back(-ms * t.P1plus * std::pow(r, -ms - 1.0));
    }
    return gs;
  }
  if (!(t.B_u > 0.0) || !(t.P1minus > 0.0)) fail(ErrorCode::Domain, "no positive fixed point P1- in the l_u frame");
  const double varpi = meta.varpiMinus;
  if (!(varpi > 0.0)) fail(ErrorCode::Domain, "g has no decaying correction at s -> -infinity");

  // Unstable direction of the 3D system at (P-, 0): eigenvalue varpi.
  const double P = t.P1minus;
  double zc = 1e-6;
  double sc = std::log(zc) / varpi;
  double cu = (fowler_g(pot, P, sc, mu) - g_eval(spec, P, 0.0, lu, GMode::LimitMinusInf)) / zc;
  Eigen::Matrix2d M;
  M << 0.0, 1.0, t.B_u - t.dgMinus, -t.A_u;
  Eigen::Vector2d vy = (M - varpi * Eigen::Matrix2d::Identity()).lu().solve(Eigen::Vector2d(0.0, cu));
  double vnorm = std::sqrt(vy.squaredNorm() + 1.0);
  double z0 = eps / vnorm;
  double sStart = std::log(z0) / varpi;
  double y1 = P + z0 * vy[0], y2 = z0 * vy[1];
  if (!(y1 > 0.0)) fail(ErrorCode::Domain, "eps too large: start point leaves y1 > 0; reduce eps");

  std::vector<double> radii = output_radii(std::exp(sStart), std::exp(opts.sEnd), opts.pointsPerDecade);
  std::vector<double> sU, sS;
  for (double r : radii) (std::log(r) <= 0.0 ? sU : sS).push_back(std::log(r));
  sU.front() = sStart;

  DopriOptions dop;
  dop.rtol = opts.tol;
  dop.atol = opts.tol * 1e-3 * P;
  auto rhs_for = [&](double m, double A, double B) {
    return [&pot, m, A, B](double s, const double* y, double* dy) {
      dy[0] = y[1];
      dy[1] = B * y[0] - A * y[1] - fowler_g(pot, y[0], s, m);
    };
  };
  auto positive = [](double, const double* y) { return y[0]; };

  auto push = [&](const std::vector<double>& ts, const std::vector<std::vector<double>>& st, double l) {
    for (size_t i = 0; i < ts.size(); ++i) {
      PhysicalPoint q = to_physical({st[i][0], st[i][1], l, ts[i]});
      gs.r.push_back(q.r);
      gs.U.push_back(q.U);
      gs.dU.push_back(q.dU);
    }
  };

  double sSwitch = std::min(0.0, opts.sEnd);
  Dopri5 inner(2, rhs_for(mu, t.A_u, t.B_u), dop);
  auto a = inner.integrate(sStart, {y1, y2}, sSwitch, sU, positive);
  if (a.eventHit) fail(ErrorCode::Domain, "singular orbit left y1 > 0; reduce eps");
  push(a.times, a.states, lu);
  if (opts.sEnd > sSwitch) {
    PhasePoint mid = change_frame({a.yEnd[0], a.yEnd[1], lu, sSwitch}, ls);
    Dopri5 outer(2, rhs_for(ms, t.A, t.B), dop);
    std::vector<double> sOut;
    for (double s : sS)
      if (s > sSwitch) sOut.push_back(s);
    auto b = outer.integrate(sSwitch, {mid.y1, mid.y2}, opts.sEnd, sOut, positive);
    if (b.eventHit) fail(ErrorCode::Domain, "singular orbit crossed y1 = 0; reduce eps");
    push(b.times, b.states, ls);
  }
  return gs;
}

Decay classify_decay(const GroundState& gs, const ExponentTable& table, std::string* note) {
  auto say = [&](const std::string& s) {
    if (note) *note = s;
  };
  if (gs.decay == Decay::CrossedZero) return Decay::CrossedZero;
  require(gs.r.size() >= 2, "classify_decay: profile too short");
  for (double u : gs.U)
    if (u <= 0.0) {
      say("profile reaches zero");
      return Decay::CrossedZero;
    }
  double rEnd = gs.r.back();
  size_t i0 = 0;
  while (i0 + 1 < gs.r.size() && gs.r[i0] < rEnd / 10.0 * (1.0 - 1e-12)) ++i0;
  if (gs.r[i0] > rEnd / 9.0) fail(ErrorCode::InvalidArgument, "inconclusive: increase rMax (profile spans less than a decade)");

  auto drift = [&](double p) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (size_t i = i0; i < gs.r.size(); ++i) {
      double v = gs.U[i] * std::pow(gs.r[i], p);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return std::make_pair((hi - lo) / std::max(std::fabs(hi), 1e-300), hi);
  };
  auto [fastDrift, fastVal] = drift(table.n - 2.0);
  if (fastDrift < 0.01 && fastVal > 0.0) {
    say("U r^{n-2} settled");
    return Decay::Fast;
  }
  double y = gs.U.back() * std::pow(rEnd, table.m_s);
  if (std::fabs(y / table.P1plus - 1.0) < 0.02) {
    say("U r^{m} near P1+");
    return Decay::Slow;
  }
  fail(ErrorCode::Numerical, "inconclusive: increase rMax");
}

TailFit fit_tail(const GroundState& gs, const ExponentTable& table, const TailTemplate& tmpl, double r1, double r2) {
  require(r2 > r1 && r1 > 0.0, "fit_tail: window must satisfy 0 < r1 < r2");
  if (gs.decay != Decay::Slow) fail(ErrorCode::InvalidArgument, "fit_tail needs a slow-decay ground state");
  if (table.regime == Regime::Focus) fail(ErrorCode::Domain, "fit_tail: complex spectrum (focus) not supported");
  std::vector<double> s, w;
  const double m = m_of(gs.l);
  for (size_t i = 0; i < gs.r.size(); ++i)
    if (gs.r[i] >= r1 * (1 - 1e-12) && gs.r[i] <= r2 * (1 + 1e-12)) {
      double si = std::log(gs.r[i]);
      s.push_back(si);
      w.push_back(gs.U[i] * std::pow(gs.r[i], m) - tmpl.P - tmpl.psi(si));
    }
  const int K = static_cast<int>(s.size());
  if (K < 4) fail(ErrorCode::InvalidArgument, "fit_tail: fewer than 4 samples in the window");

  Eigen::MatrixXd X(K, 2);
  for (int k = 0; k < K; ++k) {
    if (tmpl.degenerate) {
      X(k, 0) = s[k] * std::exp(tmpl.lambda1 * s[k]);
      X(k, 1) = std::exp(tmpl.lambda1 * s[k]);
    } else {
      X(k, 0) = std::exp(tmpl.lambda1 * s[k]);
      X(k, 1) = std::exp(tmpl.lambda2 * s[k]);
    }
  }
  Eigen::Vector2d colScale(X.col(0).norm(), X.col(1).norm());
  Eigen::MatrixXd Xs = X;
  Xs.col(0) /= colScale[0];
  Xs.col(1) /= colScale[1];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  TailFit out;
  out.condition = svd.singularValues()[0] / svd.singularValues()[1];
  if (!(out.condition <= 1e8)) fail(ErrorCode::Numerical, "fit_tail: ill-conditioned basis on the window; widen it");

  // Damped Gauss-Newton on (a, b); the nonlinear part is polynomial in both.
  auto residual = [&](double a, double b, Eigen::VectorXd* restOut) {
    std::vector<double> r = tmpl.rest(a, b, s);
    Eigen::VectorXd e(K);
    for (int k = 0; k < K; ++k) e[k] = w[k] - X(k, 0) * a - X(k, 1) * b - r[k];
    if (restOut) *restOut = Eigen::Map<Eigen::VectorXd>(r.data(), K);
    return e;
  };
  Eigen::VectorXd rest;
  Eigen::VectorXd e0 = residual(0.0, 0.0, &rest);
  Eigen::VectorXd c0 = svd.solve(e0);
  double a = c0[0] / colScale[0], b = c0[1] / colScale[1];
  Eigen::VectorXd e = residual(a, b, &rest);
  double cost = e.squaredNorm();
  double damp = 1e-3;
  for (int it = 0; it < 100; ++it) {
    out.iterations = it + 1;
    double ha = 1e-6 * std::max(std::fabs(a), 1e-3 / colScale[0] * e0.norm() + 1e-12);
    double hb = 1e-6 * std::max(std::fabs(b), 1e-3 / colScale[1] * e0.norm() + 1e-12);
    Eigen::MatrixXd J(K, 2);
    J.col(0) = (residual(a + ha, b, nullptr) - residual(a - ha, b, nullptr)) / (2 * ha);
    J.col(1) = (residual(a, b + hb, nullptr) - residual(a, b - hb, nullptr)) / (2 * hb);
    Eigen::Matrix2d H = J.transpose() * J;
    Eigen::Vector2d g = J.transpose() * e;
    bool accepted = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::Matrix2d Hd = H;
      Hd.diagonal() *= 1.0 + damp;
      Eigen::Vector2d step = Hd.ldlt().solve(-g);
      Eigen::VectorXd rn;
      Eigen::VectorXd en = residual(a + step[0], b + step[1], &rn);
      double cn = en.squaredNorm();
      if (std::isfinite(cn) && cn <= cost) {
        double rel = std::fabs(step[0]) / (std::fabs(a) + 1e-300) + std::fabs(step[1]) / (std::fabs(b) + 1e-300);
        bool flat = cost - cn <= 1e-15 * cost;
        a += step[0];
        b += step[1];
        e = en;
        rest = rn;
        cost = cn;
        damp = std::max(damp * 0.1, 1e-12);
        accepted = true;
        if (rel < 1e-13 || flat) it = 1000;
        break;
      }
      damp *= 10.0;
    }
    if (!accepted) break;
  }
  out.iterations = std::min(out.iterations, 100);
  double ss = 0.0, mx = 0.0;
  for (int k = 0; k < K; ++k) {
    double model = X(k, 0) * a + X(k, 1) * b + rest[k];
    double e = w[k] - model;
    ss += e * e;
    mx = std::max(mx, std::fabs(e));
  }
  out.A = a;
  out.B = b;
  out.residual = std::sqrt(ss / K);
  out.maxMisfit = mx;
  return out;
}

}  // namespace fl
