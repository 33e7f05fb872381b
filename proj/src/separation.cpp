#include "fowlerlab/separation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fowlerlab/error.hpp"
#include "json.hpp"

namespace fl {

namespace {

constexpr double kInfD = std::numeric_limits<double>::infinity();

ShootOptions shoot_opts(const SeparationOptions& o) {
  ShootOptions s;
  s.tol = o.tol;
  s.pointsPerDecade = o.pointsPerDecade;
  return s;
}

PairResult compare(const GroundState& low, const GroundState& high, const SeparationOptions& opts) {
  PairResult p;
  CommonSamples c = common_samples(low, high, opts.rMin, opts.rMax);
  if (c.r.empty()) fail(ErrorCode::InvalidArgument, "profiles share no radii in the comparison range");
  p.minGap = kInfD;
  bool identical = true;
  for (size_t i = 0; i < c.r.size(); ++i) {
    double scale = std::max(std::fabs(c.u1[i]), std::fabs(c.u2[i]));
    double gap = (c.u2[i] - c.u1[i]) / std::max(scale, 1e-300);
    if (c.u2[i] != c.u1[i]) identical = false;
    if (gap < p.minGap) {
      p.minGap = gap;
      p.rAtMin = c.r[i];
    }
    if (!p.crossed && gap <= opts.gapFloor) {
      p.crossed = gap < 0.0;
      if (p.crossed) p.firstCrossing = c.r[i];
    }
  }
  p.degenerate = identical;
  if (identical)
    p.verdict = Verdict::Untested;
  else
    p.verdict = p.minGap > opts.gapFloor ? Verdict::Pass : Verdict::Fail;
  return p;
}

void finish(SeparationReport& rep) {
  bool anyFail = false, anyPass = false;
  for (const auto& p : rep.pairs) {
    if (p.verdict == Verdict::Fail) anyFail = true;
    if (p.verdict == Verdict::Pass) anyPass = true;
  }
  rep.verdict = anyFail ? Verdict::Fail : (anyPass ? Verdict::Pass : Verdict::Untested);
}

}  // namespace

std::string SeparationReport::json() const {
  nlohmann::json j;
  j["property"] = property;
  j["verdict"] = verdict_name(verdict);
  j["violations"] = violations;
  j["worstValue"] = worstValue;
  j["worstR"] = worstR;
  j["note"] = note;
  j["values"] = values;
  nlohmann::json ps = nlohmann::json::array();
  for (const auto& p : pairs) {
    nlohmann::json e;
    e["alphaLow"] = p.alphaLow;
    e["alphaHigh"] = p.againstSingular ? nlohmann::json("infinity") : nlohmann::json(p.alphaHigh);
    e["minGap"] = std::isfinite(p.minGap) ? nlohmann::json(p.minGap) : nlohmann::json(nullptr);
    e["rAtMin"] = p.rAtMin;
    e["degenerate"] = p.degenerate;
    e["crossed"] = p.crossed;
    if (p.crossed) e["firstCrossing"] = p.firstCrossing;
    e["verdict"] = p.degenerate ? "degenerate pair" : verdict_name(p.verdict);
    ps.push_back(e);
  }
  j["pairs"] = ps;
  return j.dump(2);
}

CommonSamples common_samples(const GroundState& a, const GroundState& b, double rMin, double rMax) {
  CommonSamples c;
  size_t i = 0, j = 0;
  while (i < a.r.size() && j < b.r.size()) {
    double ra = a.r[i], rb = b.r[j];
    if (ra == rb) {
      if (ra >= rMin && ra <= rMax) {
        c.r.push_back(ra);
        c.u1.push_back(a.U[i]);
        c.u2.push_back(b.U[j]);
      }
      ++i;
      ++j;
    } else if (ra < rb) {
      ++i;
    } else {
      ++j;
    }
  }
  return c;
}

SeparationReport verify_ordering(const PotentialSpec& spec, int n, const std::vector<double>& alphas,
                                 const SeparationOptions& opts) {
  require(alphas.size() >= 2, "verify_ordering: need at least two heights");
  require(std::is_sorted(alphas.begin(), alphas.end()), "verify_ordering: heights must be nondecreasing");
  SeparationReport rep;
  rep.property = "ordering";
  std::vector<GroundState> shots;
  for (double a : alphas) shots.push_back(shoot(spec, n, a, opts.rMax, shoot_opts(opts)));
  for (size_t i = 0; i + 1 < shots.size(); ++i) {
    PairResult p = compare(shots[i], shots[i + 1], opts);
    p.alphaLow = alphas[i];
    p.alphaHigh = alphas[i + 1];
    if (p.verdict == Verdict::Fail) {
      rep.violations++;
      if (p.minGap < rep.worstValue || rep.violations == 1) {
        rep.worstValue = p.minGap;
        rep.worstR = p.rAtMin;
      }
    }
    rep.values.push_back(p.minGap);
    rep.pairs.push_back(p);
  }
  finish(rep);
  if (rep.violations) {
    double first = kInfD;
    for (const auto& p : rep.pairs)
      if (p.crossed) first = std::min(first, p.firstCrossing);
    if (std::isfinite(first)) rep.note = "first crossing at r = " + std::to_string(first);
  }
  return rep;
}

SeparationReport verify_phase_bounds(const GroundState& gs, const ExponentTable& table, const PotentialSpec& spec,
                                     double tol) {
  SeparationReport rep;
  rep.property = "phase-bounds";
  const double P = table.P1plus;
  const double abs = tol * P;
  bool allAtBound = !gs.r.empty();
  Potential pot(spec);
  for (const auto& ph : gs.fowler(table.l_s)) {
    double g = g_potential(pot, ph.y1, ph.s, table.l_s);
    double worst = 0.0;
    if (ph.y2 < -abs) worst = std::max(worst, -ph.y2);
    if (ph.y1 <= 0.0) worst = std::max(worst, -ph.y1 + abs);
    if (ph.y1 > P + abs) worst = std::max(worst, ph.y1 - P);
    if (g > table.B * ph.y1 + abs * table.B) worst = std::max(worst, g - table.B * ph.y1);
    if (std::fabs(ph.y1 - P) > abs) allAtBound = false;
    if (worst > 0.0) {
      rep.violations++;
      if (worst > rep.worstValue) {
        rep.worstValue = worst;
        rep.worstR = std::exp(ph.s);
      }
    }
  }
  if (allAtBound) {
    rep.verdict = Verdict::Untested;
    rep.note = "at bound: trajectory sits on the fixed point (singular orbit, not a ground state)";
    return rep;
  }
  rep.verdict = rep.violations ? Verdict::Fail : Verdict::Pass;
  if (rep.violations) rep.note = "worst violation at r = " + std::to_string(rep.worstR);
  return rep;
}

SeparationReport verify_singular_majorant(const PotentialSpec& spec, int n, const std::vector<double>& alphas,
                                          const SeparationOptions& opts) {
  SeparationReport rep;
  rep.property = "singular-majorant";
  SingularOptions so;
  so.pointsPerDecade = opts.pointsPerDecade;
  so.sEnd = std::log(opts.rMax) + 1e-9;
  so.tol = opts.tol;
  GroundState sing = singular_orbit(spec, n, so);
  ExponentTable t = derive_exponents(spec, n);

  for (double a : alphas) {
    GroundState gs = shoot(spec, n, a, opts.rMax, shoot_opts(opts));
    PairResult p = compare(gs, sing, opts);
    p.alphaLow = a;
    p.againstSingular = true;
    if (p.verdict == Verdict::Fail) rep.violations++;
    rep.pairs.push_back(p);
    rep.values.push_back(p.minGap);
  }
  // U(r, inf) r^{m(l_s)} must be nondecreasing.
  double prev = -kInfD;
  int monoViol = 0;
  double tolAbs = 1e-9 * t.P1plus;
  for (size_t i = 0; i < sing.r.size(); ++i) {
    if (sing.r[i] < opts.rMin || sing.r[i] > opts.rMax) continue;
    double v = sing.U[i] * std::pow(sing.r[i], t.m_s);
    if (v < prev - tolAbs) {
      monoViol++;
      if (prev - v > rep.worstValue) {
        rep.worstValue = prev - v;
        rep.worstR = sing.r[i];
      }
    }
    prev = std::max(prev, v);
  }
  rep.violations += monoViol;
  finish(rep);
  if (monoViol) {
    rep.verdict = Verdict::Fail;
    rep.note = "U(r, inf) r^m decreases somewhere";
  }
  return rep;
}

std::vector<CoefficientSample> tail_coefficients(const PotentialSpec& spec, int n, const std::vector<double>& alphas,
                                                 double window0, double theta, double tol) {
  ExponentTable t = derive_exponents(spec, n);
  double th = theta > 0.0 ? theta : default_theta(t);
  TailTemplate tmpl = make_tail_template(t, spec, th);
  std::vector<CoefficientSample> out;
  for (double a : alphas) {
    double len = std::pow(a, -(spec.q - 2.0) / (2.0 + spec.delta));
    double r1 = window0 * std::max(1.0, len), r2 = 10.0 * r1;
    ShootOptions so;
    so.tol = tol;
    GroundState gs = shoot(spec, n, a, r2 * 1.01, so);
    out.push_back({a, fit_tail(gs, t, tmpl, r1, r2)});
  }
  return out;
}

SeparationReport verify_coefficient_monotonicity(const std::vector<CoefficientSample>& fits) {
  SeparationReport rep;
  rep.property = "tail-coefficient-monotonicity";
  for (const auto& f : fits) rep.values.push_back(f.fit.A);
  for (size_t i = 0; i + 1 < fits.size(); ++i) {
    PairResult p;
    p.alphaLow = fits[i].alpha;
    p.alphaHigh = fits[i + 1].alpha;
    double gap = fits[i + 1].fit.A - fits[i].fit.A;
    p.minGap = gap;
    double noise = fits[i].fit.residual + fits[i + 1].fit.residual;
    if (fits[i].alpha == fits[i + 1].alpha) {
      p.degenerate = true;
    } else if (std::fabs(gap) <= noise) {
      fail(ErrorCode::Numerical, "inconclusive: refine fits (coefficient gap below fit residual)");
    } else {
      p.verdict = gap > 0.0 ? Verdict::Pass : Verdict::Fail;
      if (gap <= 0.0) rep.violations++;
    }
    rep.pairs.push_back(p);
  }
  finish(rep);
  return rep;
}

SeparationReport verify_distance_halving(const PotentialSpec& spec, int n, double alpha, double delta,
                                         const SeparationOptions& opts) {
  ExponentTable t = derive_exponents(spec, n);
  SeparationReport rep;
  rep.property = "distance-halving";
  if (t.regime == Regime::Focus) fail(ErrorCode::Domain, "distance halving needs a node or degenerate-node regime");
  const double lam = t.m_s + std::fabs(t.lambda1);
  const bool logw = t.regime == Regime::DegenerateNode;
  ShootOptions so = shoot_opts(opts);
  so.r0 = default_start_radius(spec, std::max(alpha, alpha + delta));
  so.r0 = std::min(so.r0, default_start_radius(spec, std::min(alpha, alpha + delta)));
  GroundState base = shoot(spec, n, alpha, opts.rMax, so);
  double prev = -1.0;
  for (int k = 0; k < 4; ++k) {
    double beta = alpha + delta / std::pow(2.0, k);
    GroundState other = shoot(spec, n, beta, opts.rMax, so);
    double d = 0.0;
    for (size_t i = 0; i < std::min(base.r.size(), other.r.size()); ++i) {
      double r = base.r[i];
      if (r < opts.rMin || r > opts.rMax) continue;
      double w = 1.0 + std::pow(r, lam);
      if (logw) w /= std::log(2.0 + r);
      d = std::max(d, w * std::fabs(other.U[i] - base.U[i]));
    }
    rep.values.push_back(d);
    if (prev >= 0.0) {
      double ratio = d / prev;
      if (ratio > 0.5 + 1e-9) {
        rep.violations++;
        rep.worstValue = std::max(rep.worstValue, ratio);
      }
    }
    prev = d;
  }
  rep.verdict = rep.violations ? Verdict::Fail : Verdict::Pass;
  return rep;
}

}  // namespace fl
