#include "fowlerlab/fowlerlab.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "fowlerlab/error.hpp"
#include "fowlerlab/expand.hpp"
#include "fowlerlab/parabolic.hpp"
#include "fowlerlab/separation.hpp"
#include "fowlerlab/serialize.hpp"
#include "fowlerlab/stationary.hpp"
#include "json.hpp"

using nlohmann::json;

struct fl_potential {
  fl::Potential pot;
};

struct fl_ground_state {
  fl::GroundState gs;
  fl::PotentialSpec spec;
  int n;
};

struct fl_field {
  fl::RadialField field;
};

namespace {

thread_local std::string g_lastError;

fl_status set_error(fl_status s, const std::string& what) {
  g_lastError = what;
  return s;
}

template <class F>
fl_status guarded(F&& body) {
  try {
    body();
    return FL_OK;
  } catch (const fl::Error& e) {
    return set_error(static_cast<fl_status>(static_cast<int>(e.code())), e.what());
  } catch (const json::exception& e) {
    return set_error(FL_ERR_INVALID_ARGUMENT, std::string("json: ") + e.what());
  } catch (const std::bad_alloc&) {
    return set_error(FL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(FL_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(FL_ERR_INTERNAL, "unknown failure");
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  if (!p) fl::fail(fl::ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

json parse_options(const char* text) {
  if (!text || !*text) return json::object();
  json j = json::parse(text);
  if (!j.is_object()) fl::fail(fl::ErrorCode::InvalidArgument, "options must be a JSON object");
  return j;
}

fl::ShootOptions shoot_options(const json& j) {
  fl::ShootOptions o;
  o.tol = j.value("tol", o.tol);
  o.pointsPerDecade = j.value("pointsPerDecade", o.pointsPerDecade);
  o.r0 = j.value("r0", o.r0);
  return o;
}

fl::GridOptions grid_options(const json& j) {
  fl::GridOptions g;
  g.Rmax = j.value("Rmax", g.Rmax);
  g.pointsPerDecade = j.value("pointsPerDecade", g.pointsPerDecade);
  g.rMin = j.value("rMin", g.rMin);
  return g;
}

fl::SchemeConfig scheme_options(const json& j, fl::SchemeConfig c) {
  if (j.contains("outer")) {
    std::string o = j["outer"].get<std::string>();
    if (o == "robin")
      c.outer = fl::OuterBoundary::Robin;
    else if (o == "dirichlet")
      c.outer = fl::OuterBoundary::Dirichlet;
    else
      fl::fail(fl::ErrorCode::InvalidArgument, "scheme.outer must be 'robin' or 'dirichlet'");
  }
  c.robinM = j.value("robinM", c.robinM);
  c.dtMax = j.value("dtMax", c.dtMax);
  c.reactionCfl = j.value("reactionCfl", c.reactionCfl);
  c.dtMin = j.value("dtMin", c.dtMin);
  c.ceiling = j.value("ceiling", c.ceiling);
  c.sampleEvery = j.value("sampleEvery", c.sampleEvery);
  c.steadyTol = j.value("steadyTol", c.steadyTol);
  c.tailExact = j.value("tailExact", c.tailExact);
  if (j.contains("norms")) {
    c.norms.clear();
    for (const auto& e : j["norms"]) c.norms.push_back({e.value("lambdaExp", 0.0), e.value("logCorrected", false)});
  }
  return c;
}

json report(const fl::SeparationReport& r) { return json::parse(r.json()); }

}  // namespace

extern "C" {

const char* fl_version(void) { return "0.1.0"; }

const char* fl_last_error(void) { return g_lastError.c_str(); }

const char* fl_status_name(fl_status status) {
  switch (status) {
    case FL_OK: return "ok";
    case FL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FL_ERR_DOMAIN: return "domain error";
    case FL_ERR_NUMERICAL: return "numerical failure";
    case FL_ERR_NOT_FOUND: return "not found";
    case FL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void fl_free_string(char* s) { std::free(s); }

fl_status fl_potential_from_json(const char* spec_json, fl_potential** out) {
  return guarded([&] {
    need(spec_json, "spec_json");
    need(out, "out");
    *out = new fl_potential{fl::Potential(fl::spec_from_json(json::parse(spec_json)))};
  });
}

fl_status fl_potential_perturbed(const fl_potential* base, int k, int super, int n, fl_potential** out) {
  return guarded([&] {
    need(base, "base");
    need(out, "out");
    *out = new fl_potential{fl::Potential::perturbed(base->pot.spec(), k, super != 0, n, {})};
  });
}

void fl_potential_free(fl_potential* p) { delete p; }

fl_status fl_potential_to_json(const fl_potential* p, char** out) {
  return guarded([&] {
    need(p, "potential");
    need(out, "json");
    json j = fl::spec_to_json(p->pot.spec());
    if (p->pot.sign() != 0) {
      j["perturbation"] = {{"level", p->pot.level()},
                           {"sign", p->pot.sign() > 0 ? "super" : "sub"},
                           {"mu", p->pot.mu()},
                           {"scriptGBranch", p->pot.scriptGBranch()}};
    }
    *out = dup(j.dump(2));
  });
}

fl_status fl_potential_f(const fl_potential* p, double u, double r, double* value, double* du) {
  return guarded([&] {
    need(p, "potential");
    fl::FValue v = p->pot.f(u, r);
    if (value) *value = v.value;
    if (du) *du = v.du;
  });
}

fl_status fl_potential_g(const fl_potential* p, double y1, double s, double l, double* value) {
  return guarded([&] {
    need(p, "potential");
    need(value, "value");
    *value = fl::g_potential(p->pot, y1, s, l);
  });
}

fl_status fl_exponents(const fl_potential* p, int n, char** out) {
  return guarded([&] {
    need(p, "potential");
    need(out, "json");
    *out = dup(fl::exponents_to_json(fl::derive_exponents(p->pot.spec(), n)).dump(2));
  });
}

fl_status fl_sigma_star(int n, double delta_bar, double* closed_formula, double* lower, double* upper) {
  return guarded([&] {
    fl::SigmaRoots roots = fl::sigma_roots(n, delta_bar);
    if (closed_formula) *closed_formula = fl::sigma_star_paper(n);
    if (lower) *lower = roots.lower;
    if (upper) *upper = roots.upper;
  });
}

fl_status fl_check_hypotheses(const fl_potential* p, int n, const char* lattice_json, char** out, int* all_pass) {
  return guarded([&] {
    need(p, "potential");
    json o = parse_options(lattice_json);
    fl::HypothesisLattice lat;
    lat.ny = o.value("ny", lat.ny);
    lat.ns = o.value("ns", lat.ns);
    lat.sMax = o.value("sMax", lat.sMax);
    fl::HypothesisReport rep = fl::check_hypotheses(p->pot.spec(), n, lat);
    if (out) *out = dup(fl::hypotheses_to_json(rep).dump(2));
    if (all_pass) *all_pass = rep.all_pass() ? 1 : 0;
  });
}

fl_status fl_shoot(const fl_potential* p, int n, double alpha, double r_max, const char* options_json,
                   fl_ground_state** out) {
  return guarded([&] {
    need(p, "potential");
    need(out, "out");
    fl::GroundState gs = fl::shoot(p->pot, n, alpha, r_max, shoot_options(parse_options(options_json)));
    *out = new fl_ground_state{std::move(gs), p->pot.spec(), n};
  });
}

fl_status fl_singular_orbit(const fl_potential* p, int n, const char* options_json, fl_ground_state** out) {
  return guarded([&] {
    need(p, "potential");
    need(out, "out");
    json o = parse_options(options_json);
    fl::SingularOptions so;
    so.eps = o.value("eps", so.eps);
    so.sEnd = o.value("sEnd", so.sEnd);
    so.tol = o.value("tol", so.tol);
    so.pointsPerDecade = o.value("pointsPerDecade", so.pointsPerDecade);
    *out = new fl_ground_state{fl::singular_orbit(p->pot.spec(), n, so), p->pot.spec(), n};
  });
}

void fl_ground_state_free(fl_ground_state* gs) { delete gs; }

size_t fl_ground_state_size(const fl_ground_state* gs) { return gs ? gs->gs.r.size() : 0; }

fl_status fl_ground_state_samples(const fl_ground_state* gs, double* r, double* u, double* du, size_t capacity) {
  return guarded([&] {
    need(gs, "ground state");
    size_t n = gs->gs.r.size();
    if (capacity < n) fl::fail(fl::ErrorCode::InvalidArgument, "capacity smaller than the number of samples");
    for (size_t i = 0; i < n; ++i) {
      if (r) r[i] = gs->gs.r[i];
      if (u) u[i] = gs->gs.U[i];
      if (du) du[i] = gs->gs.dU[i];
    }
  });
}

fl_status fl_ground_state_json(const fl_ground_state* gs, char** out) {
  return guarded([&] {
    need(gs, "ground state");
    need(out, "json");
    *out = dup(gs->gs.json());
  });
}

fl_status fl_ground_state_csv(const fl_ground_state* gs, char** out) {
  return guarded([&] {
    need(gs, "ground state");
    need(out, "csv");
    *out = dup(gs->gs.csv(fl::m_of(fl::frame_ls(gs->spec))));
  });
}

fl_status fl_classify_decay(const fl_ground_state* gs, fl_decay* decay, char** note) {
  return guarded([&] {
    need(gs, "ground state");
    need(decay, "decay");
    std::string text;
    fl::Decay d = fl::classify_decay(gs->gs, fl::derive_exponents(gs->spec, gs->n), &text);
    *decay = static_cast<fl_decay>(static_cast<int>(d));
    if (note) *note = dup(text);
  });
}

fl_status fl_fit_tail(fl_ground_state* gs, double r1, double r2, double theta, double* a, double* b,
                      double* residual) {
  return guarded([&] {
    need(gs, "ground state");
    fl::ExponentTable t = fl::derive_exponents(gs->spec, gs->n);
    double th = theta > 0.0 ? theta : fl::default_theta(t);
    fl::TailFit fit = fl::fit_tail(gs->gs, t, fl::make_tail_template(t, gs->spec, th), r1, r2);
    gs->gs.tailA = fit.A;
    gs->gs.tailB = fit.B;
    gs->gs.fitResidual = fit.residual;
    if (a) *a = fit.A;
    if (b) *b = fit.B;
    if (residual) *residual = fit.residual;
  });
}

fl_status fl_separation(const fl_potential* p, int n, const double* alphas, size_t count, const char* options_json,
                        char** out, int* all_pass) {
  return guarded([&] {
    need(p, "potential");
    need(alphas, "alphas");
    json o = parse_options(options_json);
    const fl::PotentialSpec& spec = p->pot.spec();
    std::vector<double> as(alphas, alphas + count);
    fl::SeparationOptions so;
    so.rMin = o.value("rMin", so.rMin);
    so.rMax = o.value("rMax", so.rMax);
    so.gapFloor = o.value("gapFloor", so.gapFloor);
    so.pointsPerDecade = o.value("pointsPerDecade", so.pointsPerDecade);
    so.tol = o.value("tol", so.tol);
    fl::ExponentTable t = fl::derive_exponents(spec, n);

    json j;
    j["regime"] = fl::regime_name(t.regime);
    j["alphas"] = as;
    bool pass = true;
    auto take = [&](const char* key, const fl::SeparationReport& r) {
      j[key] = report(r);
      pass = pass && r.verdict != fl::Verdict::Fail;
    };
    take("ordering", fl::verify_ordering(spec, n, as, so));
    take("singularMajorant", fl::verify_singular_majorant(spec, n, as, so));
    json bounds = json::array();
    fl::ShootOptions sh;
    sh.tol = so.tol;
    sh.pointsPerDecade = so.pointsPerDecade;
    std::vector<fl::GroundState> shots;
    for (double a : as) {
      shots.push_back(fl::shoot(spec, n, a, so.rMax, sh));
      fl::SeparationReport r = fl::verify_phase_bounds(shots.back(), t, spec);
      pass = pass && r.verdict != fl::Verdict::Fail;
      json e = report(r);
      e["alpha"] = a;
      bounds.push_back(e);
    }
    j["phaseBounds"] = bounds;
    if (t.regime != fl::Regime::Focus) {
      auto fits = fl::tail_coefficients(spec, n, as, o.value("window0", 20.0), o.value("theta", 0.0), so.tol);
      take("coefficientMonotonicity", fl::verify_coefficient_monotonicity(fits));
      double mid = as[as.size() / 2];
      take("distanceHalving", fl::verify_distance_halving(spec, n, mid, o.value("halvingDelta", -0.1 * mid), so));
    } else {
      j["note"] = "focus regime: tail coefficients are not defined, coefficient checks skipped";
    }
    if (o.value("curves", false)) {
      json curves = json::array();
      for (size_t i = 0; i + 1 < shots.size(); ++i) {
        fl::CommonSamples c = fl::common_samples(shots[i], shots[i + 1], so.rMin, so.rMax);
        std::vector<double> gap(c.r.size());
        for (size_t k = 0; k < c.r.size(); ++k) gap[k] = c.u2[k] - c.u1[k];
        curves.push_back({{"alphaLow", as[i]}, {"alphaHigh", as[i + 1]}, {"r", c.r}, {"gap", gap}});
      }
      j["curves"] = curves;
    }
    j["allPass"] = pass;
    if (out) *out = dup(j.dump(2));
    if (all_pass) *all_pass = pass ? 1 : 0;
  });
}

fl_status fl_fowler_expansion(const fl_potential* p, int n, double a, double b, double tau, double theta,
                              char** out) {
  return guarded([&] {
    need(p, "potential");
    need(out, "json");
    fl::ExponentTable t = fl::derive_exponents(p->pot.spec(), n);
    double th = theta > 0.0 ? theta : fl::default_theta(t);
    *out = dup(fl::fowler_expand(t, p->pot.spec(), a, b, tau, th).to_json());
  });
}

fl_status fl_field_create(const double* r, const double* u, size_t count, fl_field** out) {
  return guarded([&] {
    need(r, "r");
    need(u, "u");
    need(out, "out");
    fl::RadialField f;
    f.r.assign(r, r + count);
    f.u.assign(u, u + count);
    fl::require(count >= 5 && f.r[0] == 0.0, "field grid must start at 0 and hold at least 5 nodes");
    for (size_t i = 1; i < count; ++i) fl::require(f.r[i] > f.r[i - 1], "field grid must be increasing");
    *out = new fl_field{std::move(f)};
  });
}

fl_status fl_field_from_profile(const fl_potential* p, int n, double alpha, const char* grid_json, fl_field** out) {
  return guarded([&] {
    need(p, "potential");
    need(out, "out");
    fl::GridOptions g = grid_options(parse_options(grid_json));
    auto grid = fl::build_grid(g.Rmax, g.pointsPerDecade, g.rMin);
    *out = new fl_field{fl::profile_on_grid(p->pot, n, alpha, grid)};
  });
}

void fl_field_free(fl_field* f) { delete f; }

size_t fl_field_size(const fl_field* f) { return f ? f->field.r.size() : 0; }

fl_status fl_field_values(const fl_field* f, double* r, double* u, size_t capacity) {
  return guarded([&] {
    need(f, "field");
    size_t n = f->field.r.size();
    if (capacity < n) fl::fail(fl::ErrorCode::InvalidArgument, "capacity smaller than the field size");
    for (size_t i = 0; i < n; ++i) {
      if (r) r[i] = f->field.r[i];
      if (u) u[i] = f->field.u[i];
    }
  });
}

fl_status fl_field_csv(const fl_field* f, char** out) {
  return guarded([&] {
    need(f, "field");
    need(out, "csv");
    *out = dup(f->field.csv());
  });
}

fl_status fl_weighted_norm(const fl_field* f, double lambda_exp, int log_corrected, const fl_field* reference,
                           double* out) {
  return guarded([&] {
    need(f, "field");
    need(out, "out");
    *out = fl::weighted_norm(f->field, {lambda_exp, log_corrected != 0}, reference ? &reference->field : nullptr);
  });
}

fl_status fl_evolve(const fl_potential* p, int n, const fl_field* phi, double horizon, const char* scheme_json,
                    fl_field** final_field, char** trace_csv, fl_termination* termination) {
  return guarded([&] {
    need(p, "potential");
    need(phi, "phi");
    fl::SchemeConfig cfg = scheme_options(parse_options(scheme_json), fl::SchemeConfig{});
    fl::Evolution ev = fl::evolve(p->pot, n, phi->field, horizon, cfg);
    if (trace_csv) *trace_csv = dup(ev.trace.csv());
    if (termination) *termination = static_cast<fl_termination>(static_cast<int>(ev.trace.termination));
    if (final_field) *final_field = new fl_field{std::move(ev.final)};
  });
}

namespace {

fl::NormSpec natural_norm(const json& o, const fl::ExponentTable& t, bool weak) {
  bool degenerate = t.regime == fl::Regime::DegenerateNode;
  double lam = t.m_s + std::fabs(t.lambda1);
  if (weak && !degenerate) lam = t.m_s + std::fabs(t.lambda2) - 0.5;
  return {o.value("lambdaExp", lam), o.value("logCorrected", degenerate)};
}

}  // namespace

fl_status fl_stability_experiment(const fl_potential* p, int n, const char* params_json, char** out,
                                  char** trace_csv, int* pass) {
  return guarded([&] {
    need(p, "potential");
    json o = parse_options(params_json);
    const auto& spec = p->pot.spec();
    fl::ExponentTable t = fl::derive_exponents(spec, n);
    fl::SchemeConfig cfg = scheme_options(o.value("scheme", json::object()), fl::experiment_scheme());
    fl::StabilityResult r = fl::run_stability_experiment(spec, n, o.value("alpha", 1.0), o.value("d", 0.5),
                                                         natural_norm(o, t, false), o.value("T", 10.0),
                                                         grid_options(o.value("grid", json::object())), cfg);
    if (out) {
      json j = json::parse(r.json());
      j["distances"] = r.distances;
      std::vector<double> times;
      for (const auto& s : r.trace.samples) times.push_back(s.t);
      j["times"] = times;
      j["bound"] = std::max(r.zBarMinus, r.zBarPlus);
      *out = dup(j.dump(2));
    }
    if (trace_csv) *trace_csv = dup(r.trace.csv());
    if (pass) *pass = r.verdict == fl::Verdict::Pass ? 1 : 0;
  });
}

fl_status fl_weak_asymptotic_experiment(const fl_potential* p, int n, const char* params_json, char** out,
                                        char** upper_csv, char** lower_csv, int* pass) {
  return guarded([&] {
    need(p, "potential");
    json o = parse_options(params_json);
    const auto& spec = p->pot.spec();
    fl::ExponentTable t = fl::derive_exponents(spec, n);
    fl::SchemeConfig cfg = scheme_options(o.value("scheme", json::object()), fl::experiment_scheme());
    fl::WeakAsymptoticOptions wo;
    wo.k = o.value("k", wo.k);
    wo.window0 = o.value("window0", wo.window0);
    wo.discreteMatch = o.value("discreteMatch", wo.discreteMatch);
    fl::WeakAsymptoticResult r = fl::run_weak_asymptotic_experiment(
        spec, n, o.value("alpha", 1.0), natural_norm(o, t, true), o.value("T", 10.0),
        grid_options(o.value("grid", json::object())), cfg, wo);
    if (out) *out = dup(r.json());
    if (upper_csv) *upper_csv = dup(r.upper.csv());
    if (lower_csv) *lower_csv = dup(r.lower.csv());
    if (pass) *pass = r.verdict == fl::Verdict::Pass ? 1 : 0;
  });
}

}  // extern "C"
