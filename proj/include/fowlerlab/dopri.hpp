#pragma once

#include <functional>
#include <vector>

namespace fl {

// Explicit Dormand-Prince 5(4) with the standard 4th-order dense output.
struct DopriOptions {
  double rtol = 1e-10;
  double atol = 1e-14;
  double h0 = 0.0;        // 0 selects an initial step automatically
  double hMinRel = 1e-13; // step collapse threshold relative to max(1, |t|)
  long maxSteps = 2000000;
  bool stateNorm = false; // scale every component by the largest one (for components that decay to 0)
};

struct DopriStats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
};

class Dopri5 {
 public:
  using Rhs = std::function<void(double t, const double* y, double* dydt)>;
  using Event = std::function<double(double t, const double* y)>;

  Dopri5(int dim, Rhs rhs, DopriOptions opts = {});

  struct Result {
    std::vector<double> times;             // requested output times actually reached
    std::vector<std::vector<double>> states;
    double tEnd = 0.0;                     // where integration stopped
    std::vector<double> yEnd;
    bool eventHit = false;
    DopriStats stats;
  };

  // Integrates from t0 to t1 (either direction). Output times must be monotone in the
  // direction of integration. Integration stops early at the first sign change of
  // the event function, located on the dense output.
  Result integrate(double t0, const std::vector<double>& y0, double t1, const std::vector<double>& outputTimes,
                   const Event& event = nullptr) const;

 private:
  int dim_;
  Rhs rhs_;
  DopriOptions opts_;
};

}  // namespace fl
