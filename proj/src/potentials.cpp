#include "fowlerlab/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fowlerlab/error.hpp"
#include "fowlerlab/exponents.hpp"

namespace fl {

namespace {

constexpr double kRateTol = 1e-12;

double signed_pow(double u, double q) {
  // |u|^(q-2) u
  if (u == 0.0) return 0.0;
  return std::copysign(std::pow(std::fabs(u), q - 1.0), u);
}

double r_pow(double r, double delta) {
  if (r == 0.0) {
    if (delta < 0.0) fail(ErrorCode::Domain, "f is singular at r = 0 (negative weight exponent)");
    return delta == 0.0 ? 1.0 : 0.0;
  }
  return std::pow(r, delta);
}

// Exponents (in e^{s}) of the expansion of one term of g at s -> +inf or -inf.
struct TermRates {
  double leading;
  double leadCoeff;
  std::vector<double> subleading;  // exponents strictly after the leading one
  std::vector<double> subCoeff;
};

TermRates rates_plus(const PowerTerm& t, double l) {
  double E = t.delta + 2.0 - m_of(l) * (t.q - 2.0);
  TermRates out{};
  if (t.k.kInf > 0.0) {
    out.leading = E;
    out.leadCoeff = t.k.kInf;
    if (t.k.amp > 0.0) {
      out.subleading.push_back(E - t.k.gamma);
      out.subCoeff.push_back(t.k.amp);
    }
  } else {
    out.leading = E - t.k.gamma;
    out.leadCoeff = t.k.amp;
    if (t.k.eta != t.k.gamma) {
      out.subleading.push_back(E - t.k.gamma - 1.0);
      out.subCoeff.push_back(t.k.amp * (t.k.eta - t.k.gamma));
    }
  }
  return out;
}

TermRates rates_minus(const PowerTerm& t, double l) {
  double E = t.delta + 2.0 - m_of(l) * (t.q - 2.0);
  TermRates out{};
  if (t.k.singular_at_origin()) {
    out.leading = E - t.k.eta;
    out.leadCoeff = t.k.amp;
    if (t.k.eta != t.k.gamma) {
      out.subleading.push_back(E - t.k.eta + 1.0);
      out.subCoeff.push_back(t.k.amp * (t.k.eta - t.k.gamma));
    }
    if (t.k.kInf > 0.0) {
      out.subleading.push_back(E);
      out.subCoeff.push_back(t.k.kInf);
    }
  } else {
    out.leading = E;
    out.leadCoeff = t.k.kInf + t.k.amp;
    if (t.k.amp > 0.0) {
      out.subleading.push_back(E + 1.0);
      out.subCoeff.push_back(-t.k.amp * t.k.gamma);
    }
  }
  return out;
}

// Limit coefficients; throws when a term diverges or no term survives.
std::vector<std::pair<double, double>> limit_terms(const PotentialSpec& spec, double l, bool plus) {
  std::vector<std::pair<double, double>> out;  // (q, coeff)
  for (const auto& t : spec.terms()) {
    TermRates r = plus ? rates_plus(t, l) : rates_minus(t, l);
    double lead = plus ? r.leading : -r.leading;
    if (std::fabs(lead) <= kRateTol) {
      out.emplace_back(t.q, r.leadCoeff);
    } else if (lead > 0.0) {
      fail(ErrorCode::Domain, "non-convergent frame: g has no autonomous limit at l = " + std::to_string(l));
    }
  }
  if (out.empty()) fail(ErrorCode::Domain, "non-convergent frame: limit of g vanishes at l = " + std::to_string(l));
  return out;
}

}  // namespace

double KParams::value(double r) const {
  if (amp == 0.0) return kInf;
  if (r == 0.0) {
    if (eta > 0.0) fail(ErrorCode::Domain, "k(r) blows up at r = 0 (eta > 0)");
    return kInf + amp;
  }
  return kInf + amp * std::pow(r, -eta) * std::pow(1.0 + r, eta - gamma);
}

double KParams::derivative(double r) const {
  if (amp == 0.0) return 0.0;
  if (r == 0.0) {
    if (eta > 0.0) fail(ErrorCode::Domain, "k'(r) blows up at r = 0 (eta > 0)");
    return -amp * gamma;
  }
  double base = std::pow(r, -eta) * std::pow(1.0 + r, eta - gamma);
  return amp * base * (-eta / r + (eta - gamma) / (1.0 + r));
}

const char* family_name(Family f) {
  switch (f) {
    case Family::PurePower: return "PurePower";
    case Family::Henon: return "Henon";
    case Family::WeightedPower: return "WeightedPower";
    case Family::TwoPower: return "TwoPower";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "PurePower" || name == "pure_power") return Family::PurePower;
  if (name == "Henon" || name == "henon") return Family::Henon;
  if (name == "WeightedPower" || name == "weighted_power") return Family::WeightedPower;
  if (name == "TwoPower" || name == "two_power") return Family::TwoPower;
  fail(ErrorCode::InvalidArgument, "unknown potential family '" + name + "'");
}

PotentialSpec PotentialSpec::pure_power(double q) {
  PotentialSpec s;
  s.family = Family::PurePower;
  s.q = q;
  return s;
}

PotentialSpec PotentialSpec::henon(double q, double delta) {
  PotentialSpec s;
  s.family = Family::Henon;
  s.q = q;
  s.delta = delta;
  return s;
}

PotentialSpec PotentialSpec::weighted(double q, double delta, KParams k) {
  PotentialSpec s;
  s.family = Family::WeightedPower;
  s.q = q;
  s.delta = delta;
  s.k = k;
  return s;
}

PotentialSpec PotentialSpec::two_power(double q1, double delta1, KParams k1, double q2, double delta2, KParams k2) {
  PotentialSpec s;
  s.family = Family::TwoPower;
  s.q = q1;
  s.delta = delta1;
  s.k = k1;
  s.q2 = q2;
  s.delta2 = delta2;
  s.k2 = k2;
  return s;
}

void PotentialSpec::validate() const {
  auto check_term = [](const PowerTerm& t, const char* which) {
    std::string w(which);
    require(t.q > 2.0, w + ": q must exceed 2");
    require(t.delta > -2.0, w + ": delta must exceed -2");
    require(t.k.eta >= 0.0, w + ": eta must be nonnegative");
    require(t.k.eta < 2.0 + t.delta, w + ": eta must be below 2 + delta");
    require(t.k.gamma > 0.0, w + ": gamma must be positive");
    require(t.k.kInf >= 0.0, w + ": kInf must be nonnegative");
    require(t.k.kInf > 0.0 || t.k.amp > 0.0, w + ": k vanishes identically");
  };
  auto ts = terms();
  check_term(ts[0], "term 1");
  if (family == Family::TwoPower) {
    check_term(ts[1], "term 2");
    require(q < q2, "TwoPower requires q1 < q2");
  }
  if (family == Family::WeightedPower) require(k.kInf > 0.0, "WeightedPower requires kInf > 0");
}

std::vector<PowerTerm> PotentialSpec::terms() const {
  switch (family) {
    case Family::PurePower: return {{q, 0.0, KParams{1.0, 0.0, 0.0, 1.0}}};
    case Family::Henon: return {{q, delta, KParams{1.0, 0.0, 0.0, 1.0}}};
    case Family::WeightedPower: return {{q, delta, k}};
    case Family::TwoPower: return {{q, delta, k}, {q2, delta2, k2}};
  }
  return {};
}

std::string PotentialSpec::describe() const {
  std::ostringstream os;
  os << family_name(family) << "(q=" << q;
  if (family != Family::PurePower) os << ", delta=" << delta;
  if (family == Family::WeightedPower || family == Family::TwoPower)
    os << ", k=[" << k.kInf << "," << k.amp << "," << k.eta << "," << k.gamma << "]";
  if (family == Family::TwoPower)
    os << ", q2=" << q2 << ", delta2=" << delta2 << ", k2=[" << k2.kInf << "," << k2.amp << "," << k2.eta << ","
       << k2.gamma << "]";
  os << ")";
  return os.str();
}

FValue f_eval(const PotentialSpec& spec, double u, double r) {
  require(r >= 0.0, "f_eval: r must be nonnegative");
  FValue out{0.0, 0.0};
  for (const auto& t : spec.terms()) {
    double c = t.k.value(r) * r_pow(r, t.delta);
    out.value += c * signed_pow(u, t.q);
    out.du += c * (t.q - 1.0) * std::pow(std::fabs(u), t.q - 2.0);
  }
  return out;
}

double m_of(double l) {
  require(l > 2.0, "Fowler parameter l must exceed 2");
  return 2.0 / (l - 2.0);
}

double g_eval(const PotentialSpec& spec, double y1, double s, double l, GMode mode) {
  double m = m_of(l);
  switch (mode) {
    case GMode::Value:
    case GMode::Dy1:
    case GMode::Ds: {
      double r = std::exp(s);
      double out = 0.0;
      for (const auto& t : spec.terms()) {
        double E = t.delta + 2.0 - m * (t.q - 2.0);
        double eE = std::exp(E * s);
        double k = t.k.value(r);
        if (mode == GMode::Value) {
          out += k * eE * signed_pow(y1, t.q);
        } else if (mode == GMode::Dy1) {
          out += k * eE * (t.q - 1.0) * std::pow(std::fabs(y1), t.q - 2.0);
        } else {
          out += (t.k.derivative(r) * r + E * k) * eE * signed_pow(y1, t.q);
        }
      }
      return out;
    }
    case GMode::LimitPlusInf:
    case GMode::LimitMinusInf: {
      double out = 0.0;
      for (auto [q, c] : limit_terms(spec, l, mode == GMode::LimitPlusInf)) out += c * signed_pow(y1, q);
      return out;
    }
    case GMode::ScriptG:
      return g_eval(spec, y1, s, l, GMode::Value) - g_eval(spec, y1, s, l, GMode::LimitPlusInf);
  }
  return 0.0;
}

double g_limit_dy1(const PotentialSpec& spec, double y1, double l, bool plusInf) {
  double out = 0.0;
  for (auto [q, c] : limit_terms(spec, l, plusInf)) out += c * (q - 1.0) * std::pow(std::fabs(y1), q - 2.0);
  return out;
}

double frame_ls(const PotentialSpec& spec) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : spec.terms()) best = std::min(best, 2.0 * (t.q + t.delta) / (2.0 + t.delta));
  return best;
}

double frame_lu(const PotentialSpec& spec) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& t : spec.terms()) {
    double eta = t.k.singular_at_origin() ? t.k.eta : 0.0;
    best = std::max(best, 2.0 * (t.q + t.delta - eta) / (2.0 + t.delta - eta));
  }
  return best;
}

DominantTerm dominant_plus(const PotentialSpec& spec) {
  double l = frame_ls(spec);
  for (const auto& t : spec.terms()) {
    TermRates r = rates_plus(t, l);
    if (std::fabs(r.leading) <= kRateTol) return {t.q, t.delta, r.leadCoeff};
  }
  fail(ErrorCode::Internal, "no dominant term at +inf");
}

DominantTerm dominant_minus(const PotentialSpec& spec) {
  double l = frame_lu(spec);
  for (const auto& t : spec.terms()) {
    TermRates r = rates_minus(t, l);
    if (std::fabs(r.leading) <= kRateTol) {
      double eta = t.k.singular_at_origin() ? t.k.eta : 0.0;
      return {t.q, t.delta - eta, r.leadCoeff};
    }
  }
  fail(ErrorCode::Internal, "no dominant term at -inf");
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Untested: return "untested";
  }
  return "?";
}

bool HypothesisReport::all_pass() const {
  return std::all_of(items.begin(), items.end(), [](const HypothesisItem& i) { return i.verdict == Verdict::Pass; });
}

const HypothesisItem& HypothesisReport::get(const std::string& name) const {
  for (const auto& i : items)
    if (i.name == name) return i;
  fail(ErrorCode::NotFound, "no hypothesis named " + name);
}

HypothesisMeta hypothesis_meta(const PotentialSpec& spec, int n) {
  (void)n;
  HypothesisMeta meta;
  double ls = frame_ls(spec), lu = frame_lu(spec);
  double vp = std::numeric_limits<double>::infinity();
  double vm = std::numeric_limits<double>::infinity();
  for (const auto& t : spec.terms()) {
    TermRates p = rates_plus(t, ls);
    if (std::fabs(p.leading) > kRateTol) vp = std::min(vp, -p.leading);
    for (double e : p.subleading) vp = std::min(vp, -e);
    TermRates mi = rates_minus(t, lu);
    if (std::fabs(mi.leading) > kRateTol) vm = std::min(vm, mi.leading);
    for (double e : mi.subleading) vm = std::min(vm, e);
  }
  meta.scriptGZero = !std::isfinite(vp);
  meta.varpiPlus = meta.scriptGZero ? 0.0 : vp;
  meta.varpiMinus = std::isfinite(vm) ? vm : 0.0;
  if (!meta.scriptGZero) {
    double m = m_of(ls);
    double B = m * (n - 2.0 - m);
    double P = p1_fixed_point([&](double y) { return g_eval(spec, y, 0.0, ls, GMode::LimitPlusInf); }, B);
    meta.gamma = vp;
    for (const auto& t : spec.terms()) {
      TermRates p = rates_plus(t, ls);
      if (std::fabs(p.leading + vp) <= kRateTol) meta.c += p.leadCoeff * signed_pow(P, t.q);
      for (size_t i = 0; i < p.subleading.size(); ++i)
        if (std::fabs(p.subleading[i] + vp) <= kRateTol) meta.c += p.subCoeff[i] * signed_pow(P, t.q);
    }
  }
  return meta;
}

HypothesisReport check_hypotheses(const PotentialSpec& spec, int n, const HypothesisLattice& lat) {
  spec.validate();
  require(lat.ny >= 4 && lat.ns >= 4, "hypothesis lattice too small");
  HypothesisReport rep;
  rep.meta = hypothesis_meta(spec, n);
  const double ls = frame_ls(spec), lu = frame_lu(spec);
  const double twoStar = 2.0 * n / (n - 2.0);

  auto add = [&](const std::string& name, Verdict v, const std::string& note, double y = 0.0, double s = 0.0) {
    rep.items.push_back({name, v, note, y, s});
  };

  double Bs = B_of(n, ls);
  double Pplus = 1.0;
  bool limitsOk = true;
  try {
    Pplus = p1_fixed_point([&](double y) { return g_eval(spec, y, 0.0, ls, GMode::LimitPlusInf); }, Bs);
  } catch (const Error&) {
    limitsOk = false;
  }

  std::vector<double> ys(lat.ny), ss(lat.ns);
  for (int i = 0; i < lat.ny; ++i) ys[i] = 2.0 * Pplus * (i + 1) / lat.ny;
  for (int j = 0; j < lat.ns; ++j) ss[j] = -lat.sMax + 2.0 * lat.sMax * j / (lat.ns - 1);

  // G0 on every s-slice of a frame: dg > 0 and strictly increasing in y.
  auto g0_frame = [&](double l, double& wy, double& ws) -> bool {
    for (double s : ss) {
      double prev = 0.0;
      for (double y : ys) {
        double d = g_eval(spec, y, s, l, GMode::Dy1);
        if (!(d > 0.0) || !(d > prev)) {
          wy = y;
          ws = s;
          return false;
        }
        prev = d;
      }
    }
    return true;
  };

  {
    double wy = 0, ws = 0;
    bool ok = g0_frame(ls, wy, ws);
    add("G0", ok ? Verdict::Pass : Verdict::Fail, ok ? "" : "dg/dy1 not positive increasing", wy, ws);
  }

  auto limit_check = [&](const std::string& name, double l, bool plus) {
    double wy = 0, ws = 0;
    try {
      double B = B_of(n, l);
      auto lim = [&](double y) { return g_eval(spec, y, 0.0, l, plus ? GMode::LimitPlusInf : GMode::LimitMinusInf); };
      double P = p1_fixed_point(lim, B);
      double A = A_of(n, l);
      double dg = g_limit_dy1(spec, P, l, plus);
      double disc = A * A - 4.0 * (dg - B);
      if (disc < -1e-12) {
        add(name, Verdict::Fail, "frame below the node threshold (focus)", P, 0.0);
        return;
      }
      if (!g0_frame(l, wy, ws)) {
        add(name, Verdict::Fail, "G0 fails on an s-slice", wy, ws);
        return;
      }
      double varpi = plus ? rep.meta.varpiPlus : rep.meta.varpiMinus;
      if (varpi > 0.0) {
        double S = lat.sMax;
        for (double y : ys) {
          double sgn = plus ? 1.0 : -1.0;
          double d1 = std::fabs(g_eval(spec, y, sgn * S / 2, l, GMode::Value) - lim(y));
          double d2 = std::fabs(g_eval(spec, y, sgn * S, l, GMode::Value) - lim(y));
          double bound = 4.0 * d1 * std::exp(-varpi * S / 2) + 1e-12 * std::fabs(lim(y));
          if (d2 > bound) {
            add(name, Verdict::Fail, "slow convergence to the limit", y, sgn * S);
            return;
          }
        }
      }
      add(name, Verdict::Pass, "");
    } catch (const Error& e) {
      add(name, Verdict::Fail, e.what());
    }
  };
  limit_check("G1", lu, false);
  limit_check("G2", ls, true);

  // G3: g and dg/dy1 non-increasing in s in the l_s frame.
  {
    bool ok = true;
    double wy = 0, ws = 0;
    for (double y : ys) {
      double gPrev = g_eval(spec, y, ss[0], ls, GMode::Value);
      double dPrev = g_eval(spec, y, ss[0], ls, GMode::Dy1);
      for (size_t j = 1; j < ss.size() && ok; ++j) {
        double g = g_eval(spec, y, ss[j], ls, GMode::Value);
        double d = g_eval(spec, y, ss[j], ls, GMode::Dy1);
        double tol = 1e-12 * std::max(std::fabs(gPrev), std::fabs(dPrev));
        if (g > gPrev + tol || d > dPrev + tol) {
          ok = false;
          wy = y;
          ws = ss[j];
        }
        gPrev = g;
        dPrev = d;
      }
      if (!ok) break;
    }
    add("G3", ok ? Verdict::Pass : Verdict::Fail, ok ? "" : "g increases in s", wy, ws);
  }

  // G4: leading correction c e^{-gamma s} at P1+.
  if (!limitsOk) {
    add("G4", Verdict::Fail, "no fixed point at +inf");
  } else if (rep.meta.scriptGZero) {
    add("G4", Verdict::Pass, "scriptG identically zero");
  } else {
    double gam = rep.meta.gamma;
    double gInf = g_eval(spec, Pplus, 0.0, ls, GMode::LimitPlusInf);
    double S = lat.sMax;
    double c1 = (g_eval(spec, Pplus, S / 2, ls, GMode::Value) - gInf) * std::exp(gam * S / 2);
    double c2 = (g_eval(spec, Pplus, S, ls, GMode::Value) - gInf) * std::exp(gam * S);
    // rounding of g - gInf, amplified by e^{gamma S}
    double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::fabs(gInf) * std::exp(gam * S);
    bool ok = rep.meta.c != 0.0 && std::fabs(c2 - rep.meta.c) <= 0.05 * std::fabs(rep.meta.c) &&
              std::fabs(c2 - rep.meta.c) <= std::fabs(c1 - rep.meta.c) + 1e-12 * std::fabs(rep.meta.c) + noise;
    add("G4", ok ? Verdict::Pass : Verdict::Fail, ok ? "" : "correction not of the form c e^{-gamma s}", Pplus, S);
  }

  // K
  if (spec.family == Family::TwoPower) {
    double lhs = (2.0 + spec.delta2) / (spec.q2 - 2.0) * (spec.q2 - spec.q) + spec.delta;
    add("K", lhs < 0.0 ? Verdict::Pass : Verdict::Fail, "condition value " + std::to_string(lhs));
  } else {
    add("K", Verdict::Pass, "single-power potential");
  }

  // A-: G(y1, s; 2*) decreasing in s, strictly somewhere.
  {
    Potential pot(spec);
    bool ok = true, strict = false;
    double wy = 0, ws = 0;
    for (double y : ys) {
      double prev = pot.primitive_g(y, ss[0], twoStar);
      for (size_t j = 1; j < ss.size(); ++j) {
        double G = pot.primitive_g(y, ss[j], twoStar);
        if (G > prev + 1e-12 * std::fabs(prev)) {
          ok = false;
          wy = y;
          ws = ss[j];
          break;
        }
        if (G < prev) strict = true;
        prev = G;
      }
      if (!ok) break;
    }
    ok = ok && strict;
    add("A-", ok ? Verdict::Pass : Verdict::Fail, ok ? "" : "primitive not decreasing in s", wy, ws);
  }
  return rep;
}

double bump(double r) {
  r = std::fabs(r);
  if (r >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - r * r));
}

double bump_derivative(double r) {
  double a = std::fabs(r);
  if (a >= 1.0) return 0.0;
  double d = 1.0 - r * r;
  return bump(r) * (-2.0 * r / (d * d));
}

Potential::Potential(PotentialSpec spec) : spec_(std::move(spec)) { ls_ = frame_ls(spec_); }

FValue Potential::f(double u, double r) const {
  if (sign_ == 0 || r >= 1.0) return f_eval(spec_, u, r);
  double h = bump(r);
  FValue base = f_eval(spec_, u, r);
  if (!scriptG_) {
    double fac = 1.0 + sign_ * mu_ * h / k_;
    return {base.value * fac, base.du * fac};
  }
  DominantTerm dom = dominant_plus(spec_);
  double w = r_pow(r, dom.delta) * dom.coeff;
  double finf = w * signed_pow(u, dom.q);
  double finfDu = w * (dom.q - 1.0) * std::pow(std::fabs(u), dom.q - 2.0);
  double fac = sign_ * h / (2.0 * k_);
  return {base.value + fac * (base.value - finf), base.du + fac * (base.du - finfDu)};
}

double Potential::primitive_g(double y1, double s, double l) const {
  // g(y, s; l) = f(y e^{-ms}, e^s) e^{(m+2)s}, and each summand is a power of y.
  double m = m_of(l);
  double r = std::exp(s);
  double h = (sign_ != 0 && r < 1.0) ? bump(r) : 0.0;
  double out = 0.0;
  for (const auto& t : spec_.terms()) {
    double E = t.delta + 2.0 - m * (t.q - 2.0);
    double k = t.k.value(r);
    if (sign_ != 0 && !scriptG_) k *= 1.0 + sign_ * mu_ * h / k_;
    if (sign_ != 0 && scriptG_) k *= 1.0 + sign_ * h / (2.0 * k_);
    out += k * std::exp(E * s) * std::pow(y1, t.q) / t.q;
  }
  if (sign_ != 0 && scriptG_ && h > 0.0) {
    DominantTerm dom = dominant_plus(spec_);
    double E = dom.delta + 2.0 - m * (dom.q - 2.0);
    out -= sign_ * h / (2.0 * k_) * dom.coeff * std::exp(E * s) * std::pow(y1, dom.q) / dom.q;
  }
  return out;
}

Potential Potential::perturbed(const PotentialSpec& spec, int k, bool super, int n, const HypothesisLattice& lattice) {
  require(k >= 1, "perturbation level k must be at least 1");
  Potential p(spec);
  p.k_ = k;
  p.sign_ = super ? 1 : -1;
  HypothesisMeta meta = hypothesis_meta(spec, n);
  p.scriptG_ = !meta.scriptGZero;
  if (p.scriptG_) return p;

  // Largest mu = 2^-j keeping A- for the sub-perturbation at level 1.
  const double twoStar = 2.0 * n / (n - 2.0);
  std::vector<double> ss(lattice.ns);
  for (int j = 0; j < lattice.ns; ++j) ss[j] = -lattice.sMax + 2.0 * lattice.sMax * j / (lattice.ns - 1);
  Potential sub(spec);
  sub.k_ = 1;
  sub.sign_ = -1;
  sub.scriptG_ = false;
  for (double mu = 1.0; mu > 1e-9; mu *= 0.5) {
    sub.mu_ = mu;
    bool ok = true;
    double prev = sub.primitive_g(1.0, ss[0], twoStar);
    for (size_t j = 1; j < ss.size() && ok; ++j) {
      double G = sub.primitive_g(1.0, ss[j], twoStar);
      if (G > prev * (1.0 + 1e-12)) ok = false;
      prev = G;
    }
    // The bump varies fastest near r = 1; sample it densely as well.
    for (int j = 0; j < 400 && ok; ++j) {
      double s0 = std::log(0.05 + 0.95 * j / 400.0), s1 = std::log(0.05 + 0.95 * (j + 1) / 400.0);
      if (sub.primitive_g(1.0, s1, twoStar) > sub.primitive_g(1.0, s0, twoStar) * (1.0 + 1e-12)) ok = false;
    }
    if (ok) {
      p.mu_ = mu;
      return p;
    }
  }
  fail(ErrorCode::Numerical, "no admissible mu found for the perturbed potential");
}

double g_potential(const Potential& pot, double y1, double s, double l) {
  double m = m_of(l);
  return pot.f(y1 * std::exp(-m * s), std::exp(s)).value * std::exp((m + 2.0) * s);
}

}  // namespace fl
