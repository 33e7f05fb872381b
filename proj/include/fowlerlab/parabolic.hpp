#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fowlerlab/exponents.hpp"
#include "fowlerlab/potentials.hpp"
#include "fowlerlab/stationary.hpp"

namespace fl {

struct RadialField {
  std::vector<double> r;  // r[0] = 0, then geometric
  std::vector<double> u;
  double t = 0.0;
  std::string csv() const;
};

// Node 0 plus geometric nodes rMin .. Rmax (both included).
std::vector<double> build_grid(double Rmax, int pointsPerDecade = 48, double rMin = 1e-3);

struct NormSpec {
  double lambdaExp = 0.0;
  bool logCorrected = false;
};

// sup over nodes of (1 + r^lambda)|psi| (divided by ln(2 + r) when log corrected), psi = field - reference.
double weighted_norm(const RadialField& field, const NormSpec& norm, const RadialField* reference = nullptr);

enum class OuterBoundary { Dirichlet, Robin };

struct SchemeConfig {
  OuterBoundary outer = OuterBoundary::Robin;  // Dirichlet freezes the initial boundary value
  double robinM = 0.0;        // m in du/dr = -(m/r) u; 0 takes m(l_s)
  bool tailExact = true;      // rescale the stencil so that r^{-m(l_s)} is reproduced exactly
  double dtMax = 0.01;
  double reactionCfl = 0.05;  // dt <= cfl / max |f_u|
  double dtMin = 1e-14;
  double ceiling = 1e8;
  double sampleEvery = 0.1;
  double steadyTol = 0.0;     // stop when max |du/dt| drops below; 0 disables
  std::vector<NormSpec> norms;
};

// Frozen outer value: the pinned discrete profiles are then exact steady states of the scheme, which the
// comparison arguments of the experiments rely on.
SchemeConfig experiment_scheme();

enum class Termination { Completed, Blowup, Steady };
const char* termination_name(Termination t);

struct TraceSample {
  double t = 0.0;
  std::vector<double> norms;
  double maxU = 0.0;
  double minU = 0.0;
  bool nonincreasing = true;  // relative to the previous sample
  bool nondecreasing = true;
};

struct EvolutionTrace {
  std::vector<TraceSample> samples;
  Termination termination = Termination::Completed;
  double tBlowup = 0.0;
  double lastStableT = 0.0;
  std::string csv() const;
};

struct Evolution {
  EvolutionTrace trace;
  RadialField final;
};

// Callback invoked at t = 0 and at every sample time.
using SampleObserver = std::function<void(const RadialField&)>;

Evolution evolve(const Potential& pot, int n, const RadialField& phi, double T, const SchemeConfig& cfg = {},
                 const SampleObserver& observer = {});
Evolution evolve(const PotentialSpec& spec, int n, const RadialField& phi, double T, const SchemeConfig& cfg = {},
                 const SampleObserver& observer = {});

// Shot ground state sampled on the grid (node 0 carries alpha).
RadialField profile_on_grid(const Potential& pot, int n, double alpha, const std::vector<double>& grid,
                            double tol = 1e-11);
// Steady state of the discrete scheme with the centre value of guess, by Newton iteration from guess. It is
// exact for the Dirichlet scheme whose outer value is the returned one.
RadialField discrete_steady(const Potential& pot, int n, const RadialField& guess, const SchemeConfig& cfg = {});
// max over free nodes of |(Delta_h u + f(u))_i|.
double discrete_residual(const Potential& pot, int n, const RadialField& u, const SchemeConfig& cfg = {});

enum class GlueKind { Supersolution, Subsolution, Neither };
const char* glue_kind_name(GlueKind k);

struct Glued {
  RadialField field;
  double R = 0.0;
  double jump = 0.0;  // U1'(R) - U2'(R)
  GlueKind kind = GlueKind::Neither;
};

// U1 inside R, U2 outside; R is the sign change of U1 - U2 in [rLo, rHi].
Glued glue_profiles(const RadialField& U1, const RadialField& U2, double rLo, double rHi);

struct GridOptions {
  double Rmax = 1e3;
  int pointsPerDecade = 48;
  double rMin = 1e-3;
};

struct StabilityResult {
  Verdict verdict = Verdict::Untested;
  EvolutionTrace trace;
  double delta = 0.0;
  double zLowMinus = 0.0, zLowPlus = 0.0;  // inf_r |z(r, -d)|, inf_r z(r, d)
  double zBarMinus = 0.0, zBarPlus = 0.0;  // sup_r |z(r, -d)|, sup_r z(r, d)
  double maxDistance = 0.0;                // largest weighted distance to U(., alpha)
  int violations = 0;
  double witnessT = 0.0, witnessR = 0.0;
  std::vector<double> distances;           // per sample
  std::string note;
  std::string json() const;
};

StabilityResult run_stability_experiment(const PotentialSpec& spec, int n, double alpha, double d,
                                         const NormSpec& norm, double T, const GridOptions& grid = {},
                                         const SchemeConfig& cfg = experiment_scheme());

struct WeakAsymptoticResult {
  Verdict verdict = Verdict::Untested;
  EvolutionTrace upper, lower;
  double eUpper = 0.0, eLower = 0.0;  // heights of the perturbed ground states from tail fits
  double eUpperGrid = 0.0, eLowerGrid = 0.0;  // after matching the discrete tails
  double targetA = 0.0;
  std::vector<double> times, gaps;    // ||u_upper - u_lower|| per sample
  double shrink = 0.0;                // gaps.front() / gaps.back()
  int upperViolations = 0, lowerViolations = 0, gapIncreases = 0;
  double noiseFloor = 0.0;            // weighted rounding level of the data
  bool constant = false;              // initial data already a solution
  std::string note;
  std::string json() const;
};

struct WeakAsymptoticOptions {
  int k = 1;
  double window0 = 20.0;  // tail-fit window start in natural length units
  bool discreteMatch = true;  // refine the heights so the discrete profiles share the outer value of U(., alpha)
  HypothesisLattice lattice;
};

WeakAsymptoticResult run_weak_asymptotic_experiment(const PotentialSpec& spec, int n, double alpha,
                                                    const NormSpec& norm, double T, const GridOptions& grid = {},
                                                    const SchemeConfig& cfg = experiment_scheme(),
                                                    const WeakAsymptoticOptions& opts = {});

}  // namespace fl
