#pragma once

#include <string>
#include <vector>

#include "fowlerlab/stationary.hpp"

namespace fl {

struct PairResult {
  double alphaLow = 0.0;
  double alphaHigh = 0.0;      // ignored when againstSingular
  bool againstSingular = false;
  double minGap = 0.0;         // smallest relative gap (U_high - U_low) / max(U_low, U_high)
  double rAtMin = 0.0;
  bool degenerate = false;     // identical data, gap identically zero
  bool crossed = false;
  double firstCrossing = 0.0;  // first radius where the order is lost
  Verdict verdict = Verdict::Untested;
};

struct SeparationReport {
  std::string property;
  std::vector<PairResult> pairs;
  int violations = 0;
  double worstValue = 0.0;
  double worstR = 0.0;
  std::vector<double> values;  // property-specific sequence (coefficients, distances, ...)
  Verdict verdict = Verdict::Untested;
  std::string note;
  std::string json() const;
};

struct SeparationOptions {
  double gapFloor = 1e-10;   // relative to the local magnitude
  double rMin = 1e-3;        // comparisons restricted to [rMin, rMax]
  double rMax = 100.0;
  int pointsPerDecade = 32;
  double tol = 1e-11;        // shooting tolerance
};

SeparationReport verify_ordering(const PotentialSpec& spec, int n, const std::vector<double>& alphas,
                                 const SeparationOptions& opts = {});
SeparationReport verify_phase_bounds(const GroundState& gs, const ExponentTable& table, const PotentialSpec& spec,
                                     double tol = 1e-9);
SeparationReport verify_singular_majorant(const PotentialSpec& spec, int n, const std::vector<double>& alphas,
                                          const SeparationOptions& opts = {});

struct CoefficientSample {
  double alpha;
  TailFit fit;
};

// Fits the tail of each shot on a window scaled with the natural length alpha^{-(q-2)/2}.
std::vector<CoefficientSample> tail_coefficients(const PotentialSpec& spec, int n, const std::vector<double>& alphas,
                                                 double window0 = 20.0, double theta = 0.0, double tol = 1e-11);
SeparationReport verify_coefficient_monotonicity(const std::vector<CoefficientSample>& fits);
// sup_r w(r) |U(r, beta) - U(r, alpha)| with w = 1 + r^{m + |lambda1|} (divided by ln(2 + r) in the
// degenerate case) for beta - alpha = delta, delta/2, delta/4, delta/8.
SeparationReport verify_distance_halving(const PotentialSpec& spec, int n, double alpha, double delta,
                                         const SeparationOptions& opts = {});

// Equal radii shared by two profiles on the aligned output grid, within [rMin, rMax].
struct CommonSamples {
  std::vector<double> r, u1, u2;
};
CommonSamples common_samples(const GroundState& a, const GroundState& b, double rMin, double rMax);

}  // namespace fl
