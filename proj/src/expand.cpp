#include "fowlerlab/expand.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "fowlerlab/error.hpp"
#include "json.hpp"

namespace fl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void poly_trim(Poly& p) {
  while (!p.empty() && p.back() == 0.0) p.pop_back();
}

bool poly_zero(const Poly& p) {
  return std::all_of(p.begin(), p.end(), [](double c) { return c == 0.0; });
}

void poly_axpy(Poly& y, const Poly& x, double a) {
  if (a == 0.0) return;
  if (y.size() < x.size()) y.resize(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Poly poly_mul(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  Poly out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

double poly_eval(const Poly& p, double t) {
  double v = 0.0;
  for (size_t i = p.size(); i-- > 0;) v = v * t + p[i];
  return v;
}

// q' = p with q(0) = 0
Poly poly_integrate(const Poly& p) {
  Poly q(p.size() + 1, 0.0);
  for (size_t j = 0; j < p.size(); ++j) q[j + 1] = p[j] / (j + 1.0);
  poly_trim(q);
  return q;
}

// q' + D q = p
Poly poly_shift_solve(const Poly& p, double D) {
  Poly q(p.size(), 0.0);
  for (size_t j = p.size(); j-- > 0;) {
    double next = j + 1 < p.size() ? (j + 1.0) * q[j + 1] : 0.0;
    q[j] = (p[j] - next) / D;
  }
  return q;
}

double key_rate(const Key& k, const std::vector<double>& rates) {
  double r = 0.0;
  for (size_t i = 0; i < k.size(); ++i) r += k[i] * rates[i];
  return r;
}

Rate key_rate_exact(const Key& k, const std::vector<Rate>& rates) {
  Rate r = Rate::from(0.0);
  for (size_t i = 0; i < k.size(); ++i)
    if (k[i] != 0) r = r + rates[i].times(k[i]);
  return r;
}

bool above(double rate, double theta) { return rate > theta * (1.0 + 1e-12) + 1e-12; }

Key unit_key(int m, int i) {
  Key k(m, 0);
  k[i] = 1;
  return k;
}

std::vector<double> plain_rates(const StableSystem& sys) {
  std::vector<double> r;
  for (const auto& m : sys.modes) r.push_back(m.rate);
  return r;
}

double series_scale(const ExpSeries& s) {
  double sc = 0.0;
  for (const auto& [k, polys] : s.terms)
    for (const auto& p : polys)
      for (double c : p) sc = std::max(sc, std::fabs(c));
  return sc;
}

}  // namespace

Rate Rate::from(double v) {
  Rate r;
  r.value = v;
  if (!std::isfinite(v) || v < 0.0) return r;
  double x = v;
  long long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  for (int it = 0; it < 40; ++it) {
    double a = std::floor(x);
    if (a > 1e9) break;
    long long ai = static_cast<long long>(a);
    long long h2 = ai * h1 + h0, k2 = ai * k1 + k0;
    if (k2 > 100000) break;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    if (std::fabs(v - static_cast<double>(h1) / static_cast<double>(k1)) <= 1e-13 * std::max(1.0, v)) {
      r.exact = true;
      r.q = boost::rational<long long>(h1, k1);
      return r;
    }
    double frac = x - a;
    if (frac < 1e-15) break;
    x = 1.0 / frac;
  }
  return r;
}

Rate Rate::operator+(const Rate& o) const {
  Rate r;
  r.value = value + o.value;
  r.exact = exact && o.exact;
  if (r.exact) r.q = q + o.q;
  return r;
}

Rate Rate::times(int k) const {
  Rate r;
  r.value = value * k;
  r.exact = exact;
  if (exact) r.q = q * static_cast<long long>(k);
  return r;
}

bool rates_equal(const Rate& a, const Rate& b) {
  if (a.exact && b.exact) return a.q == b.q;
  return std::fabs(a.value - b.value) <= kResonanceTol;
}

// ---------------------------------------------------------------- PolyMap

PolyMap PolyMap::direct(int dim, std::vector<std::vector<Monomial>> perCoordinate) {
  require(static_cast<int>(perCoordinate.size()) == dim, "PolyMap::direct: one monomial list per coordinate");
  PolyMap N;
  N.W = Eigen::MatrixXd::Identity(dim, dim);
  N.V = Eigen::MatrixXd::Identity(dim, dim);
  N.outputs = std::move(perCoordinate);
  return N;
}

Eigen::VectorXd PolyMap::eval(const Eigen::VectorXd& x) const {
  Eigen::VectorXd w = W * x;
  Eigen::VectorXd out(outputs.size());
  for (size_t o = 0; o < outputs.size(); ++o) {
    double acc = 0.0;
    for (const auto& mono : outputs[o]) {
      double t = mono.coeff;
      for (size_t f = 0; f < mono.powers.size(); ++f)
        if (mono.powers[f]) t *= std::pow(w[f], mono.powers[f]);
      acc += t;
    }
    out[o] = acc;
  }
  if (outputs.empty()) return Eigen::VectorXd::Zero(V.rows());
  return V * out;
}

int PolyMap::max_degree() const {
  int d = 0;
  for (const auto& ch : outputs)
    for (const auto& m : ch) {
      int s = 0;
      for (int p : m.powers) s += p;
      d = std::max(d, s);
    }
  return d;
}

// ---------------------------------------------------------------- StableSystem

StableSystem StableSystem::make(std::vector<Mode> modes, PolyMap N) {
  StableSystem sys;
  int dim = 0;
  for (const auto& m : modes) dim += m.size;
  sys.modes = std::move(modes);
  sys.L = Eigen::MatrixXd::Zero(dim, dim);
  int o = 0;
  for (const auto& m : sys.modes) {
    for (int i = 0; i < m.size; ++i) sys.L(o + i, o + i) = -m.rate;
    if (m.size == 2) sys.L(o, o + 1) = m.coupling;
    o += m.size;
  }
  if (N.W.size() == 0 && N.outputs.empty()) {
    N.W = Eigen::MatrixXd::Zero(0, dim);
    N.V = Eigen::MatrixXd::Zero(dim, 0);
  }
  sys.N = std::move(N);
  sys.validate();
  return sys;
}

int StableSystem::mode_of(int coord) const {
  int o = 0;
  for (size_t i = 0; i < modes.size(); ++i) {
    if (coord < o + modes[i].size) return static_cast<int>(i);
    o += modes[i].size;
  }
  fail(ErrorCode::InvalidArgument, "coordinate out of range");
}

int StableSystem::offset(int mode) const {
  int o = 0;
  for (int i = 0; i < mode; ++i) o += modes[i].size;
  return o;
}

std::vector<Rate> StableSystem::rates() const {
  std::vector<Rate> r;
  for (const auto& m : modes) r.push_back(Rate::from(m.rate));
  return r;
}

void StableSystem::validate() const {
  require(!modes.empty(), "stable system needs at least one mode");
  for (size_t i = 0; i < modes.size(); ++i) {
    require(modes[i].rate > 0.0, "mode rates must be positive (exponential stability)");
    if (modes[i].size != 1 && modes[i].size != 2)
      fail(ErrorCode::InvalidArgument, "Jordan blocks larger than 2 are not supported");
    if (i > 0) require(modes[i].rate >= modes[i - 1].rate - kResonanceTol, "mode rates must be nondecreasing");
  }
  int d = dim();
  require(N.W.cols() == d || N.outputs.empty(), "nonlinearity: W must have one column per coordinate");
  require(N.V.rows() == d || N.outputs.empty(), "nonlinearity: V must have one row per coordinate");
  require(static_cast<size_t>(N.V.cols()) == N.outputs.size() || N.outputs.empty(),
          "nonlinearity: V must have one column per output channel");
  for (const auto& ch : N.outputs)
    for (const auto& m : ch) {
      require(static_cast<int>(m.powers.size()) == N.W.rows(), "monomial arity must match the number of forms");
      int deg = 0;
      for (int p : m.powers) {
        require(p >= 0, "monomial powers must be nonnegative");
        deg += p;
      }
      require(deg >= 2, "nonlinearity must vanish to second order at the origin");
    }
}

std::vector<int> sweep_ladder(const std::vector<double>& rates) {
  std::vector<int> k(rates.size(), 0);
  if (rates.empty()) return k;
  k[0] = 1;
  int cum = 1;
  for (size_t i = 1; i < rates.size(); ++i) {
    int K = static_cast<int>(std::floor(rates[i] / rates[0] + 1e-9));
    k[i] = std::max(0, K - cum);
    cum += k[i];
  }
  return k;
}

// ---------------------------------------------------------------- ScalarSeries

void ScalarSeries::add(const Key& k, const Poly& p, double scale) {
  if (scale == 0.0 || p.empty()) return;
  poly_axpy(terms[k], p, scale);
}

void ScalarSeries::add(const ScalarSeries& o, double scale) {
  for (const auto& [k, p] : o.terms) add(k, p, scale);
}

void ScalarSeries::prune() {
  for (auto it = terms.begin(); it != terms.end();) {
    poly_trim(it->second);
    if (it->second.empty())
      it = terms.erase(it);
    else
      ++it;
  }
}

double ScalarSeries::eval(double t, const std::vector<double>& rates) const {
  double v = 0.0;
  for (const auto& [k, p] : terms) v += poly_eval(p, t) * std::exp(-key_rate(k, rates) * t);
  return v;
}

ScalarSeries multiply(const ScalarSeries& a, const ScalarSeries& b, TruncationInfo* trunc) {
  ScalarSeries out;
  std::vector<double> rv;
  if (trunc)
    for (const auto& r : trunc->rates) rv.push_back(r.value);
  for (const auto& [ka, pa] : a.terms)
    for (const auto& [kb, pb] : b.terms) {
      Key k(ka.size());
      for (size_t i = 0; i < k.size(); ++i) k[i] = ka[i] + kb[i];
      if (trunc) {
        double r = key_rate(k, rv);
        if (above(r, trunc->theta)) {
          trunc->droppedMin = std::min(trunc->droppedMin, r);
          continue;
        }
      }
      poly_axpy(out.terms[k], poly_mul(pa, pb), 1.0);
    }
  out.prune();
  return out;
}

ScalarSeries series_multiply(const ScalarSeries& a, const ScalarSeries& b, double theta, const std::vector<Rate>& rates) {
  TruncationInfo tr{theta, rates};
  return multiply(a, b, &tr);
}

// ---------------------------------------------------------------- ExpSeries

ExpSeries ExpSeries::zero(const StableSystem& sys, double theta) {
  ExpSeries s;
  s.dim = sys.dim();
  s.rates = plain_rates(sys);
  s.theta = theta;
  return s;
}

double ExpSeries::rate_of(const Key& k) const { return key_rate(k, rates); }

ScalarSeries ExpSeries::component(int coord) const {
  ScalarSeries out;
  for (const auto& [k, polys] : terms)
    if (!polys[coord].empty()) out.terms[k] = polys[coord];
  return out;
}

void ExpSeries::set_component(int coord, const ScalarSeries& s) {
  for (auto& [k, polys] : terms) polys[coord].clear();
  for (const auto& [k, p] : s.terms) {
    auto& polys = terms[k];
    if (polys.empty()) polys.resize(dim);
    polys[coord] = p;
  }
  prune();
}

void ExpSeries::add(const ExpSeries& o, double scale) {
  for (const auto& [k, polys] : o.terms) {
    auto& mine = terms[k];
    if (mine.empty()) mine.resize(dim);
    for (int c = 0; c < dim; ++c) poly_axpy(mine[c], polys[c], scale);
  }
  remainderExponent = std::min(remainderExponent, o.remainderExponent);
}

void ExpSeries::prune() {
  for (auto it = terms.begin(); it != terms.end();) {
    bool empty = true;
    for (auto& p : it->second) {
      poly_trim(p);
      if (!p.empty()) empty = false;
    }
    if (empty)
      it = terms.erase(it);
    else
      ++it;
  }
}

int ExpSeries::max_degree() const {
  int d = 0;
  for (const auto& [k, polys] : terms)
    for (const auto& p : polys)
      if (!p.empty()) d = std::max(d, static_cast<int>(p.size()) - 1);
  return d;
}

Eigen::VectorXd ExpSeries::eval(double t) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  for (const auto& [k, polys] : terms) {
    double e = std::exp(-rate_of(k) * t);
    for (int c = 0; c < dim; ++c)
      if (!polys[c].empty()) x[c] += poly_eval(polys[c], t) * e;
  }
  return x;
}

ExpSeries ExpSeries::derivative() const {
  ExpSeries d = *this;
  d.terms.clear();
  for (const auto& [k, polys] : terms) {
    double mu = rate_of(k);
    std::vector<Poly> out(dim);
    for (int c = 0; c < dim; ++c) {
      const Poly& p = polys[c];
      Poly q(p.size(), 0.0);
      for (size_t j = 0; j < p.size(); ++j) {
        q[j] -= mu * p[j];
        if (j > 0) q[j - 1] += j * p[j];
      }
      out[c] = q;
    }
    d.terms[k] = out;
  }
  d.prune();
  return d;
}

std::string ExpSeries::to_json() const {
  nlohmann::json j;
  j["dim"] = dim;
  j["rates"] = rates;
  j["theta"] = theta;
  j["remainderExponent"] = std::isfinite(remainderExponent) ? nlohmann::json(remainderExponent) : nlohmann::json(nullptr);
  j["freeCoeffs"] = freeCoeffs;
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& [k, polys] : terms) {
    int deg = 0;
    for (const auto& p : polys) deg = std::max(deg, static_cast<int>(p.size()) - 1);
    ts.push_back({{"chi", k}, {"rate", rate_of(k)}, {"degree", deg}, {"coefficients", polys}});
  }
  j["terms"] = ts;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : resonanceLog)
    log.push_back({{"chi", e.chi},
                   {"coord", e.coord},
                   {"rate", e.rate},
                   {"gap", e.gap},
                   {"resonant", e.resonant},
                   {"illConditioned", e.illConditioned}});
  j["resonanceLog"] = log;
  return j.dump(2);
}

ExpSeries series_add(const ExpSeries& a, const ExpSeries& b) {
  ExpSeries out = a;
  out.add(b);
  out.prune();
  return out;
}

ExpSeries series_scale(const ExpSeries& a, double c) {
  ExpSeries out = a;
  for (auto& [k, polys] : out.terms)
    for (auto& p : polys)
      for (double& v : p) v *= c;
  out.prune();
  return out;
}

ExpSeries substitute(const StableSystem& sys, const ExpSeries& x, double theta, double* droppedMin) {
  ExpSeries out = ExpSeries::zero(sys, x.theta);
  const PolyMap& N = sys.N;
  if (N.outputs.empty()) {
    if (droppedMin) *droppedMin = kInf;
    return out;
  }
  const int m = static_cast<int>(sys.modes.size());
  TruncationInfo tr{theta, sys.rates()};
  const int nf = static_cast<int>(N.W.rows());

  std::vector<ScalarSeries> forms(nf);
  for (int f = 0; f < nf; ++f) {
    for (const auto& [k, polys] : x.terms) {
      Poly acc;
      for (int c = 0; c < x.dim; ++c)
        if (N.W(f, c) != 0.0) poly_axpy(acc, polys[c], N.W(f, c));
      poly_trim(acc);
      if (!acc.empty()) forms[f].terms[k] = acc;
    }
  }
  ScalarSeries unit;
  unit.terms[Key(m, 0)] = Poly{1.0};
  std::vector<std::vector<ScalarSeries>> powers(nf, std::vector<ScalarSeries>{unit});
  auto power = [&](int f, int p) -> const ScalarSeries& {
    while (static_cast<int>(powers[f].size()) <= p) {
      ScalarSeries next = multiply(powers[f].back(), forms[f], &tr);
      powers[f].push_back(std::move(next));
    }
    return powers[f][p];
  };

  std::vector<ScalarSeries> channels(N.outputs.size());
  for (size_t o = 0; o < N.outputs.size(); ++o) {
    for (const auto& mono : N.outputs[o]) {
      ScalarSeries term = unit;
      bool zero = false;
      for (int f = 0; f < nf && !zero; ++f) {
        if (mono.powers[f] == 0) continue;
        const ScalarSeries& pf = power(f, mono.powers[f]);
        if (pf.empty()) zero = true;
        else
          term = multiply(term, pf, &tr);
        if (term.empty()) zero = true;
      }
      if (!zero) channels[o].add(term, mono.coeff);
    }
  }
  for (int c = 0; c < sys.dim(); ++c) {
    ScalarSeries comp;
    for (size_t o = 0; o < channels.size(); ++o)
      if (N.V(c, o) != 0.0) comp.add(channels[o], N.V(c, o));
    comp.prune();
    for (const auto& [k, p] : comp.terms) {
      auto& polys = out.terms[k];
      if (polys.empty()) polys.resize(sys.dim());
      polys[c] = p;
    }
  }
  out.prune();
  if (droppedMin) *droppedMin = tr.droppedMin;
  return out;
}

ExpSeries apply_linear(const StableSystem& sys, const ExpSeries& x) {
  ExpSeries out = x;
  for (auto& [k, polys] : out.terms) {
    const auto& src = x.terms.at(k);
    for (int r = 0; r < x.dim; ++r) {
      Poly acc;
      for (int c = 0; c < x.dim; ++c)
        if (sys.L(r, c) != 0.0) poly_axpy(acc, src[c], sys.L(r, c));
      polys[r] = acc;
    }
  }
  out.prune();
  return out;
}

// ---------------------------------------------------------------- resolvent

namespace {

void add_seed(ExpSeries& out, const StableSystem& sys, int mode, const std::vector<double>& d) {
  const Mode& md = sys.modes[mode];
  int o = sys.offset(mode);
  Key k = unit_key(static_cast<int>(sys.modes.size()), mode);
  auto& polys = out.terms[k];
  if (polys.empty()) polys.resize(sys.dim());
  if (md.size == 1) {
    poly_axpy(polys[o], Poly{d[0]}, 1.0);
  } else {
    poly_axpy(polys[o], Poly{d[0], md.coupling * d[1]}, 1.0);
    poly_axpy(polys[o + 1], Poly{d[1]}, 1.0);
  }
}

}  // namespace

ExpSeries linear_seed(const StableSystem& sys, int mode, const std::vector<double>& d, double theta,
                      std::vector<ResonanceEvent>* log) {
  (void)log;
  require(mode >= 0 && mode < static_cast<int>(sys.modes.size()), "linear_seed: mode out of range");
  require(static_cast<int>(d.size()) == sys.modes[mode].size, "linear_seed: free coefficient size mismatch");
  ExpSeries out = ExpSeries::zero(sys, theta);
  if (above(sys.modes[mode].rate, theta)) {
    bool nonzero = std::any_of(d.begin(), d.end(), [](double v) { return v != 0.0; });
    if (nonzero) out.remainderExponent = sys.modes[mode].rate;
    return out;
  }
  add_seed(out, sys, mode, d);
  out.prune();
  return out;
}

ExpSeries resolve_forcing(const StableSystem& sys, const ExpSeries& forcing, int stage, bool includeHomogeneous,
                          std::vector<ResonanceEvent>* log) {
  const int m = static_cast<int>(sys.modes.size());
  const auto rates = sys.rates();
  ExpSeries out = ExpSeries::zero(sys, forcing.theta);
  ExpSeries homog = ExpSeries::zero(sys, forcing.theta);
  for (const auto& [key, F] : forcing.terms) {
    Rate mu = key_rate_exact(key, rates);
    for (int b = 0; b < m; ++b) {
      const Mode& md = sys.modes[b];
      int o = sys.offset(b);
      bool any = !poly_zero(F[o]) || (md.size == 2 && !poly_zero(F[o + 1]));
      if (!any) continue;
      double gap = mu.value - md.rate;
      bool resonant = rates_equal(mu, rates[b]);
      if (b <= stage && (resonant || gap < 0.0)) {
        std::ostringstream os;
        os << "divergent tail integral: forcing at rate " << mu.value << " on mode " << b + 1 << " with rate "
           << md.rate << " (stage " << stage + 1 << ")";
        fail(ErrorCode::Numerical, os.str());
      }
      bool ill = !resonant && std::fabs(gap) < kNearResonance;
      if (log && (resonant || ill)) log->push_back({key, o, mu.value, gap, resonant, ill});

      auto& polys = out.terms[key];
      if (polys.empty()) polys.resize(sys.dim());
      Poly qv, qu;
      if (resonant) {
        if (md.size == 2) {
          qv = poly_integrate(F[o + 1]);
          Poly pu = F[o];
          poly_axpy(pu, qv, md.coupling);
          qu = poly_integrate(pu);
        } else {
          qu = poly_integrate(F[o]);
        }
      } else {
        double D = md.rate - mu.value;
        if (md.size == 2) {
          qv = poly_shift_solve(F[o + 1], D);
          Poly pu = F[o];
          if (pu.size() < qv.size()) pu.resize(qv.size(), 0.0);
          poly_axpy(pu, qv, md.coupling);
          qu = poly_shift_solve(pu, D);
        } else {
          qu = poly_shift_solve(F[o], D);
        }
        if (includeHomogeneous && b > stage) {
          std::vector<double> d0;
          d0.push_back(qu.empty() ? 0.0 : -qu[0]);
          if (md.size == 2) d0.push_back(qv.empty() ? 0.0 : -qv[0]);
          add_seed(homog, sys, b, d0);
        }
      }
      poly_axpy(polys[o], qu, 1.0);
      if (md.size == 2) poly_axpy(polys[o + 1], qv, 1.0);
    }
  }
  for (auto it = homog.terms.begin(); it != homog.terms.end();) {
    if (above(homog.rate_of(it->first), forcing.theta)) {
      out.remainderExponent = std::min(out.remainderExponent, homog.rate_of(it->first));
      it = homog.terms.erase(it);
    } else {
      ++it;
    }
  }
  out.add(homog);
  out.prune();
  return out;
}

bool condition_R2(const StableSystem& sys, double theta) {
  const int m = static_cast<int>(sys.modes.size());
  const auto rates = sys.rates();
  // Enumerate nonnegative combinations of modes below i with |chi| >= 2 and rate <= min(theta, rate_i).
  for (int i = 1; i < m; ++i) {
    double cap = std::min(theta, sys.modes[i].rate) + 1e-9;
    if (sys.modes[i].rate > theta + 1e-12) break;
    Key chi(m, 0);
    bool violated = false;
    std::function<void(int, double, int)> rec = [&](int j, double r, int order) {
      if (violated) return;
      if (j == i) {
        if (order >= 2 && rates_equal(key_rate_exact(chi, rates), rates[i])) violated = true;
        return;
      }
      for (int c = 0; r + c * sys.modes[j].rate <= cap; ++c) {
        chi[j] = c;
        rec(j + 1, r + c * sys.modes[j].rate, order + c);
        if (violated) break;
      }
      chi[j] = 0;
    };
    rec(0, 0.0, 0);
    if (violated) return false;
  }
  return true;
}

ExpSeries expand_orbit(const StableSystem& sys, const std::vector<std::vector<double>>& freeCoeffs, double theta) {
  sys.validate();
  require(theta > 0.0, "expand_orbit: theta must be positive");
  const int m = static_cast<int>(sys.modes.size());
  require(static_cast<int>(freeCoeffs.size()) == m, "expand_orbit: one free-coefficient vector per mode");
  for (int i = 0; i < m; ++i)
    require(static_cast<int>(freeCoeffs[i].size()) == sys.modes[i].size,
            "expand_orbit: free coefficients of a mode must match its block size");

  const auto ladder = sweep_ladder(plain_rates(sys));
  ExpSeries A = ExpSeries::zero(sys, theta);
  ExpSeries Nprev = ExpSeries::zero(sys, theta);
  std::vector<ResonanceEvent> log;
  double seedDropped = kInf;

  for (int i = 0; i < m; ++i) {
    ExpSeries seed = linear_seed(sys, i, freeCoeffs[i], theta);
    seedDropped = std::min(seedDropped, seed.remainderExponent);
    seed.remainderExponent = kInf;
    A.add(seed);
    A.prune();
    const bool last = i + 1 == m;
    const int sweeps = last ? -1 : ladder[i + 1];
    for (int j = 0; sweeps < 0 || j < sweeps; ++j) {
      ExpSeries Ncur = substitute(sys, A, theta);
      ExpSeries M = Ncur;
      M.add(Nprev, -1.0);
      M.prune();
      Nprev = std::move(Ncur);
      if (M.empty()) break;
      ExpSeries inc = resolve_forcing(sys, M, i, false, &log);
      inc.remainderExponent = kInf;
      A.add(inc);
      A.prune();
      if (j > 100000) fail(ErrorCode::Internal, "expansion sweeps did not terminate");
    }
  }
  double dropped = kInf;
  substitute(sys, A, theta, &dropped);
  A.remainderExponent = std::min(dropped, seedDropped);
  A.freeCoeffs = freeCoeffs;
  A.resonanceLog = std::move(log);

  bool diagonal = std::all_of(sys.modes.begin(), sys.modes.end(), [](const Mode& md) { return md.size == 1; });
  if (diagonal && condition_R2(sys, theta) && A.max_degree() > 0)
    fail(ErrorCode::Internal, "secular term produced although no resonance is present");
  return A;
}

ExpSeries symbolic_residual(const StableSystem& sys, const ExpSeries& s, double resTheta) {
  double cut = resTheta > 0.0 ? resTheta : 2.0 * s.theta;
  ExpSeries r = s.derivative();
  r.add(apply_linear(sys, s), -1.0);
  r.add(substitute(sys, s, cut), -1.0);
  r.freeCoeffs.clear();
  r.resonanceLog.clear();
  r.remainderExponent = kInf;
  r.prune();
  return r;
}

ResidualCheck check_residual(const ExpSeries& series, const ExpSeries& residual, double tol) {
  ResidualCheck out{true, 0.0, series_scale(series), kInf};
  double floor = tol * std::max(out.scale, std::numeric_limits<double>::min());
  for (const auto& [k, polys] : residual.terms) {
    double big = 0.0;
    for (const auto& p : polys)
      for (double c : p) big = std::max(big, std::fabs(c));
    double rate = residual.rate_of(k);
    if (big > floor) out.firstRate = std::min(out.firstRate, rate);
    if (!above(rate, series.theta)) {
      out.worst = std::max(out.worst, out.scale > 0.0 ? big / out.scale : big);
      if (big > floor) out.cancelled = false;
    }
  }
  return out;
}

ExpSeries surviving_terms(const ExpSeries& series, const ExpSeries& residual, double tol) {
  ExpSeries out = residual;
  double floor = tol * series_scale(series);
  for (auto it = out.terms.begin(); it != out.terms.end();) {
    double big = 0.0;
    for (const auto& p : it->second)
      for (double c : p) big = std::max(big, std::fabs(c));
    if (big <= floor)
      it = out.terms.erase(it);
    else
      ++it;
  }
  return out;
}

// ---------------------------------------------------------------- coefficient fit

CoefficientFit fit_free_coefficients(const StableSystem& sys, const std::vector<double>& times,
                                     const std::vector<Eigen::VectorXd>& states, double theta, double residualFloor) {
  require(!times.empty() && times.size() == states.size(), "fit_free_coefficients: need matching samples");
  const int m = static_cast<int>(sys.modes.size());
  const int dim = sys.dim();
  const int K = static_cast<int>(times.size());

  auto unpack = [&](const Eigen::VectorXd& v) {
    std::vector<std::vector<double>> d(m);
    int i = 0;
    for (int b = 0; b < m; ++b)
      for (int j = 0; j < sys.modes[b].size; ++j) d[b].push_back(v[i++]);
    return d;
  };
  auto residual = [&](const Eigen::VectorXd& v) {
    ExpSeries s = expand_orbit(sys, unpack(v), theta);
    Eigen::VectorXd r(K * dim);
    for (int k = 0; k < K; ++k) r.segment(k * dim, dim) = s.eval(times[k]) - states[k];
    return r;
  };

  // Initial guess: the purely linear fit of the samples.
  Eigen::MatrixXd Jlin(K * dim, dim);
  Eigen::VectorXd rhs(K * dim);
  for (int col = 0; col < dim; ++col) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e[col] = 1.0;
    auto d = unpack(e);
    ExpSeries s = ExpSeries::zero(sys, kInf);
    for (int b = 0; b < m; ++b) s.add(linear_seed(sys, b, d[b], kInf));
    for (int k = 0; k < K; ++k) Jlin.block(k * dim, col, dim, 1) = s.eval(times[k]);
  }
  for (int k = 0; k < K; ++k) rhs.segment(k * dim, dim) = states[k];
  Eigen::VectorXd x = Jlin.colPivHouseholderQr().solve(rhs);

  Eigen::VectorXd r = residual(x);
  double cost = r.squaredNorm();
  double lambda = 1e-6;
  int it = 0;
  for (; it < 60; ++it) {
    Eigen::MatrixXd J(K * dim, dim);
    for (int c = 0; c < dim; ++c) {
      double h = 1e-7 * std::max(1.0, std::fabs(x[c]));
      Eigen::VectorXd xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      J.col(c) = (residual(xp) - residual(xm)) / (2.0 * h);
    }
    Eigen::MatrixXd H = J.transpose() * J;
    Eigen::VectorXd g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 20; ++tries) {
      Eigen::MatrixXd Hd = H;
      Hd.diagonal() *= (1.0 + lambda);
      Eigen::VectorXd step = Hd.ldlt().solve(-g);
      Eigen::VectorXd xn = x + step;
      Eigen::VectorXd rn = residual(xn);
      double cn = rn.squaredNorm();
      if (cn <= cost) {
        double rel = step.norm() / std::max(1e-300, x.norm());
        x = xn;
        r = rn;
        bool flat = cost - cn <= 1e-30 + 1e-16 * cost;
        cost = cn;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = true;
        if (rel < 1e-14 || flat) it = 1000;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  double rms = std::sqrt(cost / (K * dim));
  if (rms > residualFloor) {
    std::ostringstream os;
    os << "window too early: fit residual " << rms << " above floor " << residualFloor
       << "; move the window later or raise theta";
    fail(ErrorCode::Numerical, os.str());
  }
  return {unpack(x), rms, std::min(it, 60)};
}

// ---------------------------------------------------------------- Fowler specialisation

namespace {

double binom_general(double p, int k) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c *= (p - i) / (i + 1.0);
  return c;
}

struct GMonomial {
  double coeff;
  int zetaPower;
  double yPower;
};

// g(y1, s; l_s) = sum coeff * zeta^j * y1^p with zeta = e^{-gamma s}.
std::vector<GMonomial> g_monomials(const PotentialSpec& spec, double ls, double gamma, bool hasZeta, double theta) {
  std::vector<GMonomial> out;
  double m = m_of(ls);
  auto push = [&](double coeff, double rho, double p) {
    if (coeff == 0.0) return;
    if (!hasZeta) {
      if (std::fabs(rho) > 1e-9)
        fail(ErrorCode::Internal, "autonomous potential with a decaying correction");
      out.push_back({coeff, 0, p});
      return;
    }
    double jr = rho / gamma;
    int j = static_cast<int>(std::lround(jr));
    if (std::fabs(jr - j) > 1e-9) {
      std::ostringstream os;
      os << "correction rate " << rho << " is not an integer multiple of gamma = " << gamma
         << "; the expansion needs commensurate rates";
      fail(ErrorCode::Domain, os.str());
    }
    if (above(j * gamma, theta)) return;
    out.push_back({coeff, j, p});
  };
  for (const auto& t : spec.terms()) {
    double E = t.delta + 2.0 - m * (t.q - 2.0);
    double p = t.q - 1.0;
    if (t.k.kInf != 0.0) push(t.k.kInf, -E, p);
    if (t.k.amp != 0.0) {
      // amp r^{-gamma} (1 + 1/r)^{eta - gamma} expanded in e^{-s}
      double beta = t.k.eta - t.k.gamma;
      for (int i = 0;; ++i) {
        double rho = t.k.gamma + i - E;
        if (hasZeta && above(rho, theta + 1e-9)) break;
        double c = binom_general(beta, i);
        if (c == 0.0) break;
        push(t.k.amp * c, rho, p);
        if (!hasZeta) break;
        if (i > 10000) break;
      }
    }
  }
  return out;
}

struct Block {
  double rate;
  int size;
  double coupling;
  std::vector<Eigen::VectorXd> basis;  // physical columns
  std::string tag;                     // "xi1", "xi2", "zeta", "jordan", "xi1+zeta", "xi2+zeta"
};

}  // namespace

double default_theta(const ExponentTable& table) { return 3.0 * std::fabs(table.lambda2); }

StableSystem fowler_system(const ExponentTable& table, const PotentialSpec& spec, double theta, Eigen::MatrixXd* Tout,
                           double* gammaOut) {
  if (table.regime == Regime::Focus)
    fail(ErrorCode::Domain, "complex spectrum (focus regime) is not supported by the expansion");
  require(theta > 0.0, "theta must be positive");
  HypothesisMeta meta = hypothesis_meta(spec, table.n);
  const bool hasZeta = !meta.scriptGZero;
  const double gamma = hasZeta ? meta.gamma : 0.0;
  if (gammaOut) *gammaOut = gamma;
  const double P = table.P1plus;
  const int dim = hasZeta ? 3 : 2;

  auto mons = g_monomials(spec, table.l_s, gamma, hasZeta, theta);
  const double L1 = std::fabs(table.lambda1), L2 = std::fabs(table.lambda2);
  double rmin = hasZeta ? std::min(L1, gamma) : L1;
  int K = static_cast<int>(std::floor(theta / rmin + 1e-9)) + 1;
  int J = 0;
  for (const auto& g : mons) J = std::max(J, g.zetaPower);

  // Taylor coefficients h[k][j] of g(P + n1, zeta).
  std::vector<std::vector<double>> h(K + 1, std::vector<double>(J + 1, 0.0));
  for (const auto& g : mons)
    for (int k = 0; k <= K; ++k) {
      double c = binom_general(g.yPower, k);
      if (c == 0.0) continue;
      h[k][g.zetaPower] += g.coeff * c * std::pow(P, g.yPower - k);
    }
  const double dg = h[1][0];
  const double c1 = J >= 1 ? h[0][1] : 0.0;

  Eigen::MatrixXd Lp = Eigen::MatrixXd::Zero(dim, dim);
  Lp(0, 1) = 1.0;
  Lp(1, 0) = table.B - dg;
  Lp(1, 1) = -table.A;
  if (hasZeta) {
    Lp(1, 2) = -c1;
    Lp(2, 2) = -gamma;
  }

  auto vec = [&](std::initializer_list<double> v) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    int i = 0;
    for (double c : v)
      if (i < dim) x[i++] = c;
    return x;
  };

  std::vector<Block> blocks;
  const bool degenerate = table.regime == Regime::DegenerateNode;
  if (degenerate) {
    double lam = table.lambda1;
    blocks.push_back({L1, 2, 1.0, {vec({1.0, lam, 0.0}), vec({0.0, 1.0, 0.0})}, "jordan"});
  } else {
    blocks.push_back({L1, 1, 1.0, {vec({1.0, table.lambda1, 0.0})}, "xi1"});
    blocks.push_back({L2, 1, 1.0, {vec({1.0, table.lambda2, 0.0})}, "xi2"});
  }
  if (hasZeta) {
    Rate rg = Rate::from(gamma);
    int hit = -1;
    for (size_t b = 0; b < blocks.size(); ++b)
      if (rates_equal(rg, Rate::from(blocks[b].rate))) hit = static_cast<int>(b);
    if (hit < 0) {
      double den = table.B - dg + table.A * gamma - gamma * gamma;
      double v0 = c1 / den;
      blocks.push_back({gamma, 1, 1.0, {vec({v0, -gamma * v0, 1.0})}, "zeta"});
    } else {
      if (blocks[hit].size != 1)
        fail(ErrorCode::Domain, "gamma coincides with a degenerate eigenvalue: Jordan block of size 3 not supported");
      double lamk = -blocks[hit].rate;
      double c = c1 / (gamma - table.A - lamk);
      blocks[hit].size = 2;
      blocks[hit].coupling = c;
      blocks[hit].basis.push_back(vec({0.0, c, 1.0}));
      blocks[hit].tag += "+zeta";
    }
  }
  std::stable_sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) { return a.rate < b.rate; });

  Eigen::MatrixXd T(dim, dim);
  std::vector<Mode> modes;
  int col = 0;
  for (const auto& b : blocks) {
    for (const auto& v : b.basis) T.col(col++) = v;
    modes.push_back({b.rate, b.size, b.coupling});
  }
  Eigen::MatrixXd Ti = T.inverse();

  PolyMap N;
  N.W = Eigen::MatrixXd(hasZeta ? 2 : 1, dim);
  N.W.row(0) = T.row(0);
  if (hasZeta) N.W.row(1) = T.row(2);
  std::vector<Monomial> ch;
  for (int k = 0; k <= K; ++k)
    for (int j = 0; j <= J; ++j) {
      if (k + j < 2 || h[k][j] == 0.0) continue;
      std::vector<int> pw{k};
      if (hasZeta) pw.push_back(j);
      ch.push_back({-h[k][j], pw});
    }
  N.outputs.push_back(ch);
  N.V = Ti.col(1);

  StableSystem sys = StableSystem::make(modes, N);
  Eigen::MatrixXd check = Ti * Lp * T - sys.L;
  if (check.norm() > 1e-8 * std::max(1.0, Lp.norm()))
    fail(ErrorCode::Internal, "modal transform does not reproduce the linearization");
  if (Tout) *Tout = T;
  return sys;
}

namespace {

struct FowlerRun {
  ExpSeries modal;
  ScalarSeries n1;
};

FowlerRun fowler_run(const StableSystem& sys, const Eigen::MatrixXd& T, const ExponentTable& table, double gamma,
                     bool hasZeta, double a, double b, double tau, double theta) {
  const bool degenerate = table.regime == Regime::DegenerateNode;
  std::vector<std::vector<double>> d;
  int col = 0;
  for (const auto& md : sys.modes) {
    // Identify the block from its physical basis.
    std::vector<double> blk;
    for (int j = 0; j < md.size; ++j, ++col) {
      Eigen::VectorXd v = T.col(col);
      bool zetaCol = hasZeta && v[2] != 0.0;
      if (zetaCol) {
        blk.push_back(std::exp(-gamma * tau));
      } else if (degenerate) {
        double lam = table.lambda1;
        blk.push_back(j == 0 ? (b + a * tau) * std::exp(lam * tau) : a * std::exp(lam * tau));
      } else {
        bool first = std::fabs(v[1] - table.lambda1) <= std::fabs(v[1] - table.lambda2);
        blk.push_back(first ? a * std::exp(table.lambda1 * tau) : b * std::exp(table.lambda2 * tau));
      }
    }
    d.push_back(blk);
  }
  FowlerRun run;
  run.modal = expand_orbit(sys, d, theta);
  for (int c = 0; c < sys.dim(); ++c)
    if (T(0, c) != 0.0) run.n1.add(run.modal.component(c), T(0, c));
  run.n1.prune();
  return run;
}

nlohmann::json terms_json(const std::vector<FowlerTermView>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& t : v) a.push_back({{"chi", t.chi}, {"rate", t.rate}, {"poly", t.poly}});
  return a;
}

double eval_views(const std::vector<FowlerTermView>& v, double t) {
  double s = 0.0;
  for (const auto& term : v) s += poly_eval(term.poly, t) * std::exp(-term.rate * t);
  return s;
}

}  // namespace

FowlerExpansion fowler_expand(const ExponentTable& table, const PotentialSpec& spec, double a, double b, double tau,
                              double theta) {
  FowlerExpansion fx;
  Eigen::MatrixXd T;
  double gamma = 0.0;
  StableSystem sys = fowler_system(table, spec, theta, &T, &gamma);
  fx.P = table.P1plus;
  fx.lambda1 = table.lambda1;
  fx.lambda2 = table.lambda2;
  fx.gamma = gamma;
  fx.hasZeta = sys.dim() == 3;
  fx.degenerate = table.regime == Regime::DegenerateNode;
  fx.a = a;
  fx.b = b;
  fx.tau = tau;
  fx.theta = theta;
  fx.T = T;

  FowlerRun run = fowler_run(sys, T, table, gamma, fx.hasZeta, a, b, tau, theta);
  fx.modal = run.modal;
  fx.resonanceLog = run.modal.resonanceLog;
  fx.remainderExponent = run.modal.remainderExponent;
  const std::vector<double> rates = run.modal.rates;
  const double L1 = std::fabs(table.lambda1), L2 = std::fabs(table.lambda2);
  const double tol = 1e-9;

  // Psi: the part that survives with a = b = 0, restricted to rates up to |lambda1|.
  ScalarSeries psi;
  if (fx.hasZeta) {
    FowlerRun base = fowler_run(sys, T, table, gamma, true, 0.0, 0.0, tau, theta);
    for (const auto& [k, p] : base.n1.terms)
      if (key_rate(k, rates) <= L1 + tol) psi.terms[k] = p;
  }
  ScalarSeries rest = run.n1;
  rest.add(psi, -1.0);
  rest.prune();

  for (const auto& [k, p] : psi.terms) fx.psi.push_back({k, key_rate(k, rates), p});
  for (const auto& [k, p] : rest.terms) {
    double r = key_rate(k, rates);
    int order = 0;
    for (int c : k) order += c;
    FowlerTermView v{k, r, p};
    bool linearKey = order == 1 && (std::fabs(r - L1) <= tol || std::fabs(r - L2) <= tol);
    if (linearKey) {
      fx.linear.push_back(v);
    } else if (r <= L1 + tol) {
      fail(ErrorCode::Internal, "expansion produced a term slower than the leading linear mode");
    } else if (!fx.degenerate && r < L2 - tol) {
      fx.q1.push_back(v);
    } else {
      fx.q2.push_back(v);
    }
  }
  return fx;
}

double FowlerExpansion::eval_y1(double s) const {
  double t = s - tau;
  return P + eval_views(psi, t) + eval_views(linear, t) + eval_views(q1, t) + eval_views(q2, t);
}

double FowlerExpansion::eval_psi(double s) const { return eval_views(psi, s - tau); }

double FowlerExpansion::eval_nonlinear(double s) const {
  double t = s - tau;
  return eval_views(q1, t) + eval_views(q2, t);
}

std::string FowlerExpansion::to_json() const {
  nlohmann::json j;
  j["P"] = P;
  j["lambda1"] = lambda1;
  j["lambda2"] = lambda2;
  j["gamma"] = gamma;
  j["degenerate"] = degenerate;
  j["a"] = a;
  j["b"] = b;
  j["tau"] = tau;
  j["theta"] = theta;
  j["remainderExponent"] = std::isfinite(remainderExponent) ? nlohmann::json(remainderExponent) : nlohmann::json(nullptr);
  j["psi"] = terms_json(psi);
  j["linear"] = terms_json(linear);
  j["q1"] = terms_json(q1);
  j["q2"] = terms_json(q2);
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : resonanceLog)
    log.push_back({{"chi", e.chi}, {"coord", e.coord}, {"rate", e.rate}, {"gap", e.gap}, {"resonant", e.resonant},
                   {"illConditioned", e.illConditioned}});
  j["resonanceLog"] = log;
  return j.dump(2);
}

TailTemplate make_tail_template(const ExponentTable& table, const PotentialSpec& spec, double theta) {
  TailTemplate tt;
  tt.P = table.P1plus;
  tt.lambda1 = table.lambda1;
  tt.lambda2 = table.lambda2;
  tt.degenerate = table.regime == Regime::DegenerateNode;
  auto base = std::make_shared<FowlerExpansion>(fowler_expand(table, spec, 0.0, 0.0, 0.0, theta));
  tt.psi = [base](double s) { return base->eval_psi(s); };
  tt.rest = [table, spec, theta](double a, double b, const std::vector<double>& s) {
    FowlerExpansion fx = fowler_expand(table, spec, a, b, 0.0, theta);
    std::vector<double> out(s.size());
    for (size_t i = 0; i < s.size(); ++i) out[i] = fx.eval_nonlinear(s[i]);
    return out;
  };
  return tt;
}

}  // namespace fl
