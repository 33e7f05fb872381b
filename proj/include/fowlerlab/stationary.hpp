#pragma once

#include <string>
#include <vector>

#include "fowlerlab/expand.hpp"
#include "fowlerlab/exponents.hpp"
#include "fowlerlab/potentials.hpp"

namespace fl {

enum class Decay { Fast, Slow, CrossedZero, Inconclusive };
const char* decay_name(Decay d);

struct PhasePoint {
  double y1;
  double y2;
  double l;  // frame
  double s;  // log-radius
};

struct PhysicalPoint {
  double r;
  double U;
  double dU;
};

// y1 = U e^{m s}, y2 = dy1/ds.
PhasePoint to_fowler(const PhysicalPoint& p, double l);
PhysicalPoint to_physical(const PhasePoint& p);
// Same orbit seen with Fowler parameter lNew: y1 picks up e^{(m' - m) s}.
PhasePoint change_frame(const PhasePoint& p, double lNew);

struct GroundState {
  double alpha = 0.0;     // meaningful only when singular == false
  bool singular = false;  // the alpha = infinity orbit
  std::vector<double> r, U, dU;
  Decay decay = Decay::Inconclusive;
  double rZero = 0.0;     // first zero when decay == CrossedZero
  double l = 0.0;         // Fowler frame used for y1/y2 (l_s)
  double tailA = 0.0, tailB = 0.0, fitResidual = -1.0;

  std::vector<double> s() const;
  std::vector<PhasePoint> fowler(double frame) const;
  std::string csv(double m) const;
  std::string json() const;
};

struct ShootOptions {
  double tol = 1e-10;
  int pointsPerDecade = 32;
  double r0 = 0.0;             // 0 selects 1e-6 max(1, alpha^{-(q-2)/2})
  std::vector<double> radii;   // explicit increasing output radii, replaces the geometric grid
};

double default_start_radius(const PotentialSpec& spec, double alpha);
// Leading behaviour U ~ alpha - C r^{2+delta-eta} near the origin, with its derivative.
PhysicalPoint series_start(const PotentialSpec& spec, int n, double alpha, double r0);

GroundState shoot(const Potential& pot, int n, double alpha, double rMax, const ShootOptions& opts = {});
GroundState shoot(const PotentialSpec& spec, int n, double alpha, double rMax, const ShootOptions& opts = {});

struct SingularOptions {
  double eps = 0.0;    // offset along the unstable direction; 0 selects 1e-6 P1-
  double sEnd = 10.0;
  double tol = 1e-11;
  int pointsPerDecade = 32;
};

GroundState singular_orbit(const PotentialSpec& spec, int n, const SingularOptions& opts = {});

Decay classify_decay(const GroundState& gs, const ExponentTable& table, std::string* note = nullptr);

struct TailFit {
  double A = 0.0, B = 0.0;
  double residual = 0.0;   // RMS of the model misfit in y1 units
  double maxMisfit = 0.0;
  double condition = 0.0;
  int iterations = 0;
};

TailFit fit_tail(const GroundState& gs, const ExponentTable& table, const TailTemplate& tmpl, double r1, double r2);

}  // namespace fl
