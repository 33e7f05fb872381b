#include "fowlerlab/parabolic.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "fowlerlab/error.hpp"
#include "fowlerlab/expand.hpp"
#include "json.hpp"

namespace fl {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

// Discrete radial Laplacian with its constraint rows.
struct Operator {
  int N = 0;                    // number of nodes
  bool slaved0 = false;         // node 0 fixed by quadratic extrapolation
  bool dirichlet = true;        // last node frozen
  std::vector<double> w0;       // extrapolation weights for nodes 1..3
  std::vector<Eigen::Triplet<double>> L;  // free rows only
  std::vector<bool> free;
  double kappa = 1.0;

  bool is_free(int i) const { return free[i]; }
};

bool singular_at_origin(const Potential& pot) {
  try {
    FValue v = pot.f(1.0, 0.0);
    return !std::isfinite(v.value) || !std::isfinite(v.du);
  } catch (const Error&) {
    return true;
  }
}

Operator make_operator(const Potential& pot, int n, const std::vector<double>& r, const SchemeConfig& cfg) {
  const int N = static_cast<int>(r.size());
  require(N >= 5 && r[0] == 0.0, "grid must start at 0 and hold at least 5 nodes");
  Operator op;
  op.N = N;
  op.slaved0 = singular_at_origin(pot);
  op.dirichlet = cfg.outer == OuterBoundary::Dirichlet;
  op.free.assign(N, true);
  if (op.slaved0) {
    op.free[0] = false;
    double r1 = r[1], r2 = r[2], r3 = r[3];
    op.w0 = {r2 * r3 / ((r1 - r2) * (r1 - r3)), r1 * r3 / ((r2 - r1) * (r2 - r3)),
             r1 * r2 / ((r3 - r1) * (r3 - r2))};
  } else {
    double c = 2.0 * n / (r[1] * r[1]);
    op.L.emplace_back(0, 0, -c);
    op.L.emplace_back(0, 1, c);
  }
  // On the geometric part the stencil maps r^{-m} to -c_h r^{-m-2} with one constant c_h; rescaling by
  // B/c_h makes the slow-decay tail P r^{-m} exact, so the discrete tail constant is P itself.
  const double m = m_of(frame_ls(pot.spec()));
  double kappa = 1.0;
  if (cfg.tailExact && N > 4) {
    int i = N / 2;
    double hm = r[i] - r[i - 1], hp = r[i + 1] - r[i], ri = r[i];
    double a = (2.0 - (n - 1) * hp / ri) / (hm * (hm + hp));
    double c = (2.0 + (n - 1) * hm / ri) / (hp * (hm + hp));
    double lap = a * std::pow(r[i - 1], -m) - (a + c) * std::pow(ri, -m) + c * std::pow(r[i + 1], -m);
    double ch = -lap * std::pow(ri, m + 2.0);
    kappa = m * (n - 2.0 - m) / ch;
  }
  op.kappa = kappa;
  for (int i = 1; i < N - 1; ++i) {
    double hm = r[i] - r[i - 1], hp = r[i + 1] - r[i], ri = r[i];
    double a = kappa * (2.0 - (n - 1) * hp / ri) / (hm * (hm + hp));
    double c = kappa * (2.0 + (n - 1) * hm / ri) / (hp * (hm + hp));
    op.L.emplace_back(i, i - 1, a);
    op.L.emplace_back(i, i, -(a + c));
    op.L.emplace_back(i, i + 1, c);
  }
  if (op.dirichlet) {
    op.free[N - 1] = false;
  } else {
    // Ghost node at the next geometric radius carrying u_N (r_{N+1}/r_N)^{-m}, which is du/dr = -(m/r) u
    // for power laws.
    double mr = cfg.robinM > 0.0 ? cfg.robinM : m;
    double R = r[N - 1], hm = R - r[N - 2], rho = R / r[N - 2], hp = R * (rho - 1.0);
    double a = kappa * (2.0 - (n - 1) * hp / R) / (hm * (hm + hp));
    double c = kappa * (2.0 + (n - 1) * hm / R) / (hp * (hm + hp));
    op.L.emplace_back(N - 1, N - 2, a);
    op.L.emplace_back(N - 1, N - 1, -(a + c) + c * std::pow(rho, -mr));
  }
  return op;
}

void add_constraints(const Operator& op, std::vector<Eigen::Triplet<double>>& t) {
  if (op.slaved0) {
    t.emplace_back(0, 0, 1.0);
    for (int k = 0; k < 3; ++k) t.emplace_back(0, k + 1, -op.w0[k]);
  }
  if (op.dirichlet) t.emplace_back(op.N - 1, op.N - 1, 1.0);
}

Vec apply_L(const Operator& op, const Vec& u) {
  SpMat L(op.N, op.N);
  L.setFromTriplets(op.L.begin(), op.L.end());
  return L * u;
}

double eps_of(const Vec& u) { return 1e-11 * std::max(1.0, u.cwiseAbs().maxCoeff()); }

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<long>(v.size())); }
std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double weight(double r, const NormSpec& norm) {
  // lambda = 0 is the plain sup norm rather than twice it.
  double w = norm.lambdaExp == 0.0 ? 1.0 : 1.0 + std::pow(r, norm.lambdaExp);
  if (norm.logCorrected) w /= std::log(2.0 + r);
  return w;
}

void require_same_grid(const RadialField& a, const RadialField& b) {
  require(a.r == b.r, "fields must share the grid");
}

}  // namespace

SchemeConfig experiment_scheme() {
  SchemeConfig c;
  c.outer = OuterBoundary::Dirichlet;
  return c;
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::Blowup: return "blowup";
    case Termination::Steady: return "steady";
  }
  return "?";
}

const char* glue_kind_name(GlueKind k) {
  switch (k) {
    case GlueKind::Supersolution: return "supersolution";
    case GlueKind::Subsolution: return "subsolution";
    case GlueKind::Neither: return "neither";
  }
  return "?";
}

std::string RadialField::csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "r,u\n";
  for (size_t i = 0; i < r.size(); ++i) os << r[i] << ',' << u[i] << '\n';
  return os.str();
}

std::string EvolutionTrace::csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "t,maxU,minU,nonincreasing,nondecreasing";
  size_t nn = samples.empty() ? 0 : samples.front().norms.size();
  for (size_t k = 0; k < nn; ++k) os << ",norm" << k;
  os << '\n';
  for (const auto& s : samples) {
    os << s.t << ',' << s.maxU << ',' << s.minU << ',' << s.nonincreasing << ',' << s.nondecreasing;
    for (double v : s.norms) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

std::vector<double> build_grid(double Rmax, int pointsPerDecade, double rMin) {
  require(pointsPerDecade >= 8, "build_grid: at least 8 points per decade");
  require(rMin > 0.0 && Rmax > rMin, "build_grid: need Rmax > rMin > 0");
  double decades = std::log10(Rmax / rMin);
  int intervals = static_cast<int>(std::ceil(decades * pointsPerDecade - 1e-9));
  std::vector<double> g{0.0};
  for (int j = 0; j <= intervals; ++j) g.push_back(rMin * std::pow(Rmax / rMin, static_cast<double>(j) / intervals));
  g.back() = Rmax;
  return g;
}

double weighted_norm(const RadialField& field, const NormSpec& norm, const RadialField* reference) {
  if (reference) require_same_grid(field, *reference);
  double out = 0.0;
  for (size_t i = 0; i < field.r.size(); ++i) {
    double psi = field.u[i] - (reference ? reference->u[i] : 0.0);
    out = std::max(out, weight(field.r[i], norm) * std::fabs(psi));
  }
  return out;
}

Evolution evolve(const PotentialSpec& spec, int n, const RadialField& phi, double T, const SchemeConfig& cfg,
                 const SampleObserver& observer) {
  return evolve(Potential(spec), n, phi, T, cfg, observer);
}

Evolution evolve(const Potential& pot, int n, const RadialField& phi, double T, const SchemeConfig& cfg,
                 const SampleObserver& observer) {
  require(phi.r.size() == phi.u.size(), "evolve: field size mismatch");
  require(T >= 0.0 && cfg.sampleEvery > 0.0, "evolve: bad horizon or sampling");
  for (double v : phi.u) require(std::isfinite(v) && v >= 0.0, "evolve: initial datum must be finite and nonnegative");
  const Operator op = make_operator(pot, n, phi.r, cfg);
  const int N = op.N;

  Vec u = to_vec(phi.u);
  if (op.slaved0) u[0] = op.w0[0] * u[1] + op.w0[1] * u[2] + op.w0[2] * u[3];

  Evolution ev;
  RadialField cur{phi.r, to_std(u), 0.0};
  Vec prevSample = u;

  auto record = [&](double t) {
    cur.u = to_std(u);
    cur.t = t;
    TraceSample s;
    s.t = t;
    s.maxU = u.maxCoeff();
    s.minU = u.minCoeff();
    double e = eps_of(prevSample);
    s.nonincreasing = ((u - prevSample).array() <= e).all();
    s.nondecreasing = ((prevSample - u).array() <= e).all();
    for (const auto& nrm : cfg.norms) s.norms.push_back(weighted_norm(cur, nrm));
    ev.trace.samples.push_back(s);
    prevSample = u;
    if (observer) observer(cur);
  };
  record(0.0);

  std::map<double, std::unique_ptr<Eigen::SparseLU<SpMat>>> cache;
  auto factor = [&](double dt) -> Eigen::SparseLU<SpMat>& {
    auto it = cache.find(dt);
    if (it != cache.end()) return *it->second;
    if (cache.size() > 4) cache.clear();
    std::vector<Eigen::Triplet<double>> t;
    for (const auto& e : op.L) t.emplace_back(e.row(), e.col(), -dt * e.value());
    for (int i = 0; i < N; ++i)
      if (op.is_free(i)) t.emplace_back(i, i, 1.0);
    add_constraints(op, t);
    SpMat M(N, N);
    M.setFromTriplets(t.begin(), t.end());
    auto lu = std::make_unique<Eigen::SparseLU<SpMat>>();
    lu->compute(M);
    if (lu->info() != Eigen::Success) fail(ErrorCode::Numerical, "evolve: factorization failed");
    return *cache.emplace(dt, std::move(lu)).first->second;
  };

  double t = 0.0;
  const double snap = 1e-12 * std::max(1.0, T);
  Vec rhs(N), react(N);
  int k = 1;
  while (T - t > snap) {
    double target = std::min(T, k * cfg.sampleEvery);
    while (target - t > snap) {
      double fuMax = 0.0;
      for (int i = 0; i < N; ++i) {
        if (!op.is_free(i)) {
          react[i] = 0.0;
          continue;
        }
        FValue fv = pot.f(u[i], phi.r[i]);
        react[i] = fv.value;
        fuMax = std::max(fuMax, std::fabs(fv.du));
      }
      double dt = std::min(cfg.dtMax, target - t);
      if (fuMax > 0.0) dt = std::min(dt, cfg.reactionCfl / fuMax);
      if (dt < cfg.dtMin) {
        ev.trace.termination = Termination::Blowup;
        ev.trace.tBlowup = t;
        ev.trace.lastStableT = t;
        cur.u = to_std(u);
        cur.t = t;
        ev.final = cur;
        return ev;
      }
      for (int i = 0; i < N; ++i) rhs[i] = op.is_free(i) ? u[i] + dt * react[i] : 0.0;
      if (op.dirichlet) rhs[N - 1] = u[N - 1];
      Vec next = factor(dt).solve(rhs);
      double tNext = (target - (t + dt) <= snap) ? target : t + dt;
      double mx = next.cwiseAbs().maxCoeff();
      if (!std::isfinite(mx) || mx > cfg.ceiling) {
        ev.trace.termination = Termination::Blowup;
        ev.trace.tBlowup = tNext;
        ev.trace.lastStableT = t;
        cur.u = to_std(u);
        cur.t = t;
        ev.final = cur;
        return ev;
      }
      double rate = (next - u).cwiseAbs().maxCoeff() / dt;
      u = next;
      t = tNext;
      if (cfg.steadyTol > 0.0 && rate < cfg.steadyTol) {
        record(t);
        ev.trace.termination = Termination::Steady;
        ev.trace.lastStableT = t;
        ev.final = cur;
        return ev;
      }
    }
    record(t);
    ++k;
  }
  ev.trace.lastStableT = t;
  ev.final = cur;
  return ev;
}

RadialField profile_on_grid(const Potential& pot, int n, double alpha, const std::vector<double>& grid, double tol) {
  require(grid.size() >= 2 && grid[0] == 0.0, "profile_on_grid: grid must start at 0");
  ShootOptions so;
  so.tol = tol;
  so.radii.assign(grid.begin() + 1, grid.end());
  so.r0 = std::min(default_start_radius(pot.spec(), alpha), 0.5 * grid[1]);
  GroundState gs = shoot(pot, n, alpha, grid.back(), so);
  if (gs.U.size() != grid.size() - 1)
    fail(ErrorCode::Numerical, "profile_on_grid: shot stopped before the end of the grid");
  RadialField f;
  f.r = grid;
  f.u.push_back(alpha);
  f.u.insert(f.u.end(), gs.U.begin(), gs.U.end());
  if (singular_at_origin(pot)) {
    const double r1 = grid[1], r2 = grid[2], r3 = grid[3];
    f.u[0] = r2 * r3 / ((r1 - r2) * (r1 - r3)) * f.u[1] + r1 * r3 / ((r2 - r1) * (r2 - r3)) * f.u[2] +
             r1 * r2 / ((r3 - r1) * (r3 - r2)) * f.u[3];
  }
  return f;
}

double discrete_residual(const Potential& pot, int n, const RadialField& u, const SchemeConfig& cfg) {
  Operator op = make_operator(pot, n, u.r, cfg);
  Vec x = to_vec(u.u);
  Vec Lx = apply_L(op, x);
  double out = 0.0;
  for (int i = 0; i < op.N; ++i)
    if (op.is_free(i)) out = std::max(out, std::fabs(Lx[i] + pot.f(x[i], u.r[i]).value));
  return out;
}

RadialField discrete_steady(const Potential& pot, int n, const RadialField& guess, const SchemeConfig& cfg) {
  // The outer value barely constrains the height mode (it decays like r^{lambda1 - m}), so the centre value
  // is pinned instead and the outer value follows from the discrete equations.
  SchemeConfig dir = cfg;
  dir.outer = OuterBoundary::Dirichlet;
  Operator op = make_operator(pot, n, guess.r, dir);
  const int N = op.N;
  Vec u = to_vec(guess.u);
  const double centre = u[0];
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 60; ++it) {
    Vec F = apply_L(op, u);
    std::vector<Eigen::Triplet<double>> t = op.L;
    for (int i = 0; i < N; ++i) {
      if (!op.is_free(i)) continue;
      FValue fv = pot.f(u[i], guess.r[i]);
      F[i] += fv.value;
      t.emplace_back(i, i, fv.du);
    }
    if (op.slaved0) {
      t.emplace_back(0, 0, 1.0);
      for (int k = 0; k < 3; ++k) t.emplace_back(0, k + 1, -op.w0[k]);
      F[0] = u[0] - (op.w0[0] * u[1] + op.w0[1] * u[2] + op.w0[2] * u[3]);
    }
    t.emplace_back(N - 1, 0, 1.0);
    F[N - 1] = u[0] - centre;
    SpMat J(N, N);
    J.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<SpMat> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) fail(ErrorCode::Numerical, "discrete_steady: singular Jacobian");
    Vec du = lu.solve(F);
    u -= du;
    if (!u.allFinite()) fail(ErrorCode::Numerical, "discrete_steady: Newton diverged");
    double step = du.cwiseAbs().maxCoeff(), scale = std::max(1.0, u.cwiseAbs().maxCoeff());
    // Converged, or stalled at the rounding floor.
    if (step <= 1e-14 * scale || (step > 0.5 * prev && step <= 1e-10 * scale)) return RadialField{guess.r, to_std(u), guess.t};
    prev = step;
  }
  fail(ErrorCode::Numerical, "discrete_steady: Newton did not converge");
}

Glued glue_profiles(const RadialField& U1, const RadialField& U2, double rLo, double rHi) {
  require_same_grid(U1, U2);
  require(rLo < rHi, "glue_profiles: empty bracket");
  const auto& r = U1.r;
  const int N = static_cast<int>(r.size());
  Glued g;
  g.field = U1;
  std::vector<int> idx;
  for (int i = 0; i < N; ++i)
    if (r[i] >= rLo && r[i] <= rHi) idx.push_back(i);
  require(idx.size() >= 2, "glue_profiles: bracket holds fewer than two nodes");
  bool identical = true;
  for (int i : idx) identical = identical && U1.u[i] == U2.u[i];
  if (identical) {
    g.R = r[idx.front()];
    g.kind = GlueKind::Neither;
    return g;
  }
  int j = -1;
  for (size_t k = 0; k + 1 < idx.size(); ++k) {
    double d0 = U1.u[idx[k]] - U2.u[idx[k]], d1 = U1.u[idx[k + 1]] - U2.u[idx[k + 1]];
    if (d0 == 0.0 || (d0 < 0.0) != (d1 < 0.0)) {
      j = idx[k];
      break;
    }
  }
  if (j < 0) fail(ErrorCode::InvalidArgument, "glue_profiles: no junction radius in the search bracket");

  // Local cubic through four nodes around [r_j, r_{j+1}].
  int lo = std::clamp(j - 1, 1, N - 4);
  auto cubic = [&](const std::vector<double>& v, double x, bool deriv) {
    double out = 0.0;
    for (int a = lo; a < lo + 4; ++a) {
      double num = 1.0, den = 1.0, dnum = 0.0;
      for (int b = lo; b < lo + 4; ++b) {
        if (b == a) continue;
        den *= r[a] - r[b];
        double term = 1.0;
        for (int c = lo; c < lo + 4; ++c)
          if (c != a && c != b) term *= x - r[c];
        dnum += term;
        num *= x - r[b];
      }
      out += v[a] * (deriv ? dnum : num) / den;
    }
    return out;
  };
  auto D = [&](double x) { return cubic(U1.u, x, false) - cubic(U2.u, x, false); };
  double a = r[j], b = r[j + 1];
  double da = D(a);
  if (da == 0.0) {
    b = a;
  } else {
    while ((b - a) > 1e-10 * b) {
      double mid = 0.5 * (a + b);
      double dm = D(mid);
      if ((dm < 0.0) == (da < 0.0)) {
        a = mid;
        da = dm;
      } else {
        b = mid;
      }
    }
  }
  g.R = 0.5 * (a + b);
  double d1 = cubic(U1.u, g.R, true), d2 = cubic(U2.u, g.R, true);
  g.jump = d1 - d2;
  double tol = 1e-8 * (std::fabs(d1) + std::fabs(d2));
  g.kind = g.jump > tol ? GlueKind::Supersolution : (g.jump < -tol ? GlueKind::Subsolution : GlueKind::Neither);
  for (int i = 0; i < N; ++i) g.field.u[i] = r[i] < g.R ? U1.u[i] : U2.u[i];
  return g;
}

std::string StabilityResult::json() const {
  nlohmann::json j;
  j["verdict"] = verdict_name(verdict);
  j["delta"] = delta;
  j["zLowMinus"] = zLowMinus;
  j["zLowPlus"] = zLowPlus;
  j["zBarMinus"] = zBarMinus;
  j["zBarPlus"] = zBarPlus;
  j["maxDistance"] = maxDistance;
  j["violations"] = violations;
  if (violations) j["witness"] = {{"t", witnessT}, {"r", witnessR}};
  j["termination"] = termination_name(trace.termination);
  j["note"] = note;
  return j.dump(2);
}

StabilityResult run_stability_experiment(const PotentialSpec& spec, int n, double alpha, double d,
                                         const NormSpec& norm, double T, const GridOptions& gopt,
                                         const SchemeConfig& cfg) {
  require(d > 0.0, "stability experiment: sandwich width d must be positive");
  require(alpha - d > 0.0, "stability experiment: need alpha > d");
  ExponentTable tab = derive_exponents(spec, n);
  if (tab.regime == Regime::Focus)
    fail(ErrorCode::Domain, "stability experiment: focus regime, ground states intersect and no sandwich exists");
  Potential pot(spec);
  auto grid = build_grid(gopt.Rmax, gopt.pointsPerDecade, gopt.rMin);
  RadialField U = discrete_steady(pot, n, profile_on_grid(pot, n, alpha, grid), cfg);
  RadialField Um = discrete_steady(pot, n, profile_on_grid(pot, n, alpha - d, grid), cfg);
  RadialField Up = discrete_steady(pot, n, profile_on_grid(pot, n, alpha + d, grid), cfg);

  StabilityResult res;
  const double inf = std::numeric_limits<double>::infinity();
  res.zLowMinus = res.zLowPlus = inf;
  for (size_t i = 0; i < grid.size(); ++i) {
    double w = weight(grid[i], norm);
    double zp = (Up.u[i] - U.u[i]) * w, zm = (Um.u[i] - U.u[i]) * w;
    if (zp <= 0.0 || zm >= 0.0)
      fail(ErrorCode::Domain, "stability experiment: profiles are not ordered, sandwich unavailable");
    res.zLowPlus = std::min(res.zLowPlus, zp);
    res.zBarPlus = std::max(res.zBarPlus, zp);
    res.zLowMinus = std::min(res.zLowMinus, -zm);
    res.zBarMinus = std::max(res.zBarMinus, -zm);
  }
  res.delta = std::min(res.zLowMinus, res.zLowPlus);
  RadialField phi = U;
  for (size_t i = 0; i < grid.size(); ++i) phi.u[i] += 0.5 * res.delta / weight(grid[i], norm);

  const double bound = std::max(res.zBarMinus, res.zBarPlus);
  const double distTol = 1e-9 * bound;
  auto observer = [&](const RadialField& f) {
    double e = 1e-12 * std::max(1.0, *std::max_element(f.u.begin(), f.u.end()));
    for (size_t i = 0; i < grid.size(); ++i) {
      if (f.u[i] <= Um.u[i] - e || f.u[i] >= Up.u[i] + e) {
        if (res.violations == 0) {
          res.witnessT = f.t;
          res.witnessR = grid[i];
        }
        res.violations++;
      }
    }
    double dist = weighted_norm(f, norm, &U);
    res.distances.push_back(dist);
    res.maxDistance = std::max(res.maxDistance, dist);
  };
  Evolution ev = evolve(pot, n, phi, T, cfg, observer);
  res.trace = ev.trace;
  bool distOk = res.maxDistance <= bound + distTol;
  res.verdict = (res.violations == 0 && distOk && ev.trace.termination != Termination::Blowup) ? Verdict::Pass
                                                                                                  : Verdict::Fail;
  if (res.violations)
    res.note = "sandwich violated first at t = " + std::to_string(res.witnessT) + ", r = " + std::to_string(res.witnessR);
  else if (!distOk)
    res.note = "weighted distance exceeded the sandwich bound";
  return res;
}

std::string WeakAsymptoticResult::json() const {
  nlohmann::json j;
  j["verdict"] = verdict_name(verdict);
  j["eUpper"] = eUpper;
  j["eLower"] = eLower;
  j["eUpperGrid"] = eUpperGrid;
  j["eLowerGrid"] = eLowerGrid;
  j["targetA"] = targetA;
  j["times"] = times;
  j["gaps"] = gaps;
  j["shrink"] = shrink;
  j["upperViolations"] = upperViolations;
  j["lowerViolations"] = lowerViolations;
  j["gapIncreases"] = gapIncreases;
  j["noiseFloor"] = noiseFloor;
  j["constant"] = constant;
  j["note"] = note;
  return j.dump(2);
}

namespace {

double tail_A(const Potential& pot, int n, double e, const ExponentTable& tab, const TailTemplate& tmpl,
              double window0) {
  const auto& spec = pot.spec();
  double len = std::pow(e, -(spec.q - 2.0) / (2.0 + spec.delta));
  double r1 = window0 * std::max(1.0, len), r2 = 10.0 * r1;
  ShootOptions so;
  so.tol = 1e-11;
  GroundState gs = shoot(pot, n, e, r2 * 1.01, so);
  return fit_tail(gs, tab, tmpl, r1, r2).A;
}

// Height e with A(e) = target for the given potential.
double match_height(const Potential& pot, int n, double alpha, double target, const ExponentTable& tab,
                    const TailTemplate& tmpl, double window0) {
  auto F = [&](double e) { return tail_A(pot, n, e, tab, tmpl, window0) - target; };
  double lo = alpha / 1.5, hi = alpha * 1.5;
  double flo = F(lo), fhi = F(hi);
  for (int k = 0; k < 8 && (flo > 0.0) == (fhi > 0.0); ++k) {
    if (flo > 0.0) {
      hi = lo;
      fhi = flo;
      lo /= 2.0;
      flo = F(lo);
    } else {
      lo = hi;
      flo = fhi;
      hi *= 2.0;
      fhi = F(hi);
    }
  }
  if ((flo > 0.0) == (fhi > 0.0)) fail(ErrorCode::Numerical, "coefficient matching failed to bracket: increase k or alpha-range");
  for (int it = 0; it < 200 && (hi - lo) > 1e-12 * hi; ++it) {
    // Illinois-style false position, falling back to bisection.
    double mid = hi - fhi * (hi - lo) / (fhi - flo);
    if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
    double fm = F(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (fhi > 0.0)) {
      hi = mid;
      fhi = fm;
      flo *= 0.5;
    } else {
      lo = mid;
      flo = fm;
      fhi *= 0.5;
    }
  }
  return 0.5 * (lo + hi);
}

// Height whose discrete steady profile takes the value target at the outer node. The tail coefficient of the
// discrete profile differs from the continuous one at the O(h^2) level, and high weights amplify that.
template <class Steady>
double match_outer_value(const Steady& steady, const Potential& pot, double e0, double target, RadialField& out) {
  auto F = [&](double e, RadialField* keep) {
    RadialField f = steady(pot, e);
    double v = f.u.back() - target;
    if (keep) *keep = std::move(f);
    return v;
  };
  double lo = e0 * (1.0 - 0.02), hi = e0 * (1.0 + 0.02);
  double flo = F(lo, nullptr), fhi = F(hi, nullptr);
  for (int k = 0; k < 8 && (flo > 0.0) == (fhi > 0.0); ++k) {
    double w = hi - lo;
    if ((flo > 0.0) == (fhi > flo)) {
      lo = std::max(0.5 * lo, lo - w);
      flo = F(lo, nullptr);
    } else {
      hi += w;
      fhi = F(hi, nullptr);
    }
  }
  if ((flo > 0.0) == (fhi > 0.0)) fail(ErrorCode::Numerical, "coefficient matching failed to bracket: increase k or alpha-range");
  for (int it = 0; it < 200 && (hi - lo) > 1e-15 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = F(mid, nullptr);
    if (fm == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  double e = 0.5 * (lo + hi);
  F(e, &out);
  return e;
}

}  // namespace

WeakAsymptoticResult run_weak_asymptotic_experiment(const PotentialSpec& spec, int n, double alpha,
                                                    const NormSpec& norm, double T, const GridOptions& gopt,
                                                    const SchemeConfig& cfg, const WeakAsymptoticOptions& opts) {
  ExponentTable tab = derive_exponents(spec, n);
  if (tab.regime == Regime::Focus)
    fail(ErrorCode::Domain, "weak asymptotic experiment: focus regime is outside the hypotheses");
  const double lim = tab.m_s + std::fabs(tab.regime == Regime::DegenerateNode ? tab.lambda1 : tab.lambda2);
  if (tab.regime == Regime::DegenerateNode ? norm.lambdaExp > lim : norm.lambdaExp >= lim)
    fail(ErrorCode::InvalidArgument, "weak asymptotic experiment: norm exponent outside the admissible range");

  Potential pot(spec);
  Potential sup = Potential::perturbed(spec, opts.k, true, n, opts.lattice);
  Potential sub = Potential::perturbed(spec, opts.k, false, n, opts.lattice);
  TailTemplate tmpl = make_tail_template(tab, spec, default_theta(tab));

  WeakAsymptoticResult res;
  res.targetA = tail_A(pot, n, alpha, tab, tmpl, opts.window0);
  res.eUpper = match_height(sup, n, alpha, res.targetA, tab, tmpl, opts.window0);
  res.eLower = match_height(sub, n, alpha, res.targetA, tab, tmpl, opts.window0);

  auto grid = build_grid(gopt.Rmax, gopt.pointsPerDecade, gopt.rMin);
  RadialField ref = discrete_steady(pot, n, profile_on_grid(pot, n, alpha, grid), cfg);
  auto steady = [&](const Potential& p, double e) { return discrete_steady(p, n, profile_on_grid(p, n, e, grid), cfg); };
  RadialField upper0, lower0;
  if (opts.discreteMatch) {
    res.eUpperGrid = match_outer_value(steady, sup, res.eUpper, ref.u.back(), upper0);
    res.eLowerGrid = match_outer_value(steady, sub, res.eLower, ref.u.back(), lower0);
  } else {
    upper0 = steady(sup, res.eUpper);
    lower0 = steady(sub, res.eLower);
    res.eUpperGrid = res.eUpper;
    res.eLowerGrid = res.eLower;
  }
  double scale = *std::max_element(upper0.u.begin(), upper0.u.end());
  res.constant = discrete_residual(pot, n, upper0, cfg) <= 1e-12 * scale &&
                 discrete_residual(pot, n, lower0, cfg) <= 1e-12 * scale;

  std::vector<RadialField> ups, los;
  Evolution eu = evolve(pot, n, upper0, T, cfg, [&](const RadialField& f) { ups.push_back(f); });
  Evolution el = evolve(pot, n, lower0, T, cfg, [&](const RadialField& f) { los.push_back(f); });
  res.upper = eu.trace;
  res.lower = el.trace;
  for (const auto& s : eu.trace.samples) res.upperViolations += s.nonincreasing ? 0 : 1;
  for (const auto& s : el.trace.samples) res.lowerViolations += s.nondecreasing ? 0 : 1;
  // Rounding in u is amplified by the weight; increases below this floor are not counted.
  RadialField absUpper = upper0;
  for (double& v : absUpper.u) v = std::fabs(v);
  res.noiseFloor = 100.0 * std::numeric_limits<double>::epsilon() * weighted_norm(absUpper, norm);
  size_t ns = std::min(ups.size(), los.size());
  for (size_t k = 0; k < ns; ++k) {
    res.times.push_back(ups[k].t);
    res.gaps.push_back(weighted_norm(ups[k], norm, &los[k]));
    if (k > 0 && res.gaps[k] > res.gaps[k - 1] + res.noiseFloor) res.gapIncreases++;
  }
  res.shrink = res.gaps.empty() || res.gaps.back() == 0.0 ? std::numeric_limits<double>::infinity()
                                                          : res.gaps.front() / res.gaps.back();
  bool blow = eu.trace.termination == Termination::Blowup || el.trace.termination == Termination::Blowup;
  res.verdict = (!blow && res.upperViolations == 0 && res.lowerViolations == 0 && res.gapIncreases == 0)
                    ? Verdict::Pass
                    : Verdict::Fail;
  if (res.constant) res.note = "initial data already solve the problem: monotonicity degenerates to constancy";
  return res;
}

}  // namespace fl
