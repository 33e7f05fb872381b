#include "fowlerlab/dopri.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fowlerlab/error.hpp"

namespace fl {

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

struct Dense {
  double t0, h;
  std::vector<double> r1, r2, r3, r4, r5;
  void eval(double t, std::vector<double>& y) const {
    double th = (t - t0) / h, th1 = 1.0 - th;
    y.resize(r1.size());
    for (size_t i = 0; i < r1.size(); ++i)
      y[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
  }
};

}  // namespace

Dopri5::Dopri5(int dim, Rhs rhs, DopriOptions opts) : dim_(dim), rhs_(std::move(rhs)), opts_(opts) {
  require(dim > 0, "Dopri5: dimension must be positive");
}

Dopri5::Result Dopri5::integrate(double t0, const std::vector<double>& y0, double t1,
                                 const std::vector<double>& outputTimes, const Event& event) const {
  require(static_cast<int>(y0.size()) == dim_, "Dopri5: state size mismatch");
  const int n = dim_;
  const double dir = t1 >= t0 ? 1.0 : -1.0;
  Result res;
  std::vector<double> y = y0, y1(n), k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), err(n);
  size_t nextOut = 0;
  while (nextOut < outputTimes.size() && dir * (outputTimes[nextOut] - t0) < 0.0) ++nextOut;
  auto emit_exact = [&](double t, const std::vector<double>& state) {
    while (nextOut < outputTimes.size() && outputTimes[nextOut] == t) {
      res.times.push_back(t);
      res.states.push_back(state);
      ++nextOut;
    }
  };
  emit_exact(t0, y);

  double t = t0;
  rhs_(t, y.data(), k1.data());
  res.stats.evaluations++;

  auto scale = [&](double a, double b) { return opts_.atol + opts_.rtol * std::max(std::fabs(a), std::fabs(b)); };

  double h = opts_.h0;
  if (h <= 0.0) {
    double d0 = 0, d1n = 0;
    for (int i = 0; i < n; ++i) {
      double sc = scale(y[i], y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1n += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    d1n = std::sqrt(d1n / n);
    h = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h = std::min(h, std::fabs(t1 - t0));
  }
  h = std::fabs(h);

  double evPrev = event ? event(t, y.data()) : 0.0;
  Dense dense;
  dense.r1.resize(n);
  dense.r2.resize(n);
  dense.r3.resize(n);
  dense.r4.resize(n);
  dense.r5.resize(n);

  long steps = 0;
  while (dir * (t1 - t) > 0.0) {
    if (++steps > opts_.maxSteps) fail(ErrorCode::Numerical, "step budget exhausted at t = " + std::to_string(t));
    double hMin = opts_.hMinRel * std::max(1.0, std::fabs(t));
    if (h < hMin) {
      std::ostringstream os;
      os << "stiff segment: step size collapsed at t = " << t;
      fail(ErrorCode::Numerical, os.str());
    }
    bool last = false;
    if (dir * (t + dir * h - t1) >= 0.0) {
      h = std::fabs(t1 - t);
      last = true;
    }
    double hs = dir * h;
    for (int i = 0; i < n; ++i) tmp[i] = y[i] + hs * a21 * k1[i];
    rhs_(t + c2 * hs, tmp.data(), k2.data());
    for (int i = 0; i < n; ++i) tmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
    rhs_(t + c3 * hs, tmp.data(), k3.data());
    for (int i = 0; i < n; ++i) tmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs_(t + c4 * hs, tmp.data(), k4.data());
    for (int i = 0; i < n; ++i) tmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs_(t + c5 * hs, tmp.data(), k5.data());
    for (int i = 0; i < n; ++i)
      tmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    rhs_(t + hs, tmp.data(), k6.data());
    for (int i = 0; i < n; ++i)
      y1[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    rhs_(t + hs, y1.data(), k7.data());
    res.stats.evaluations += 6;

    double en = 0.0;
    bool finite = true;
    double big = 0.0;
    if (opts_.stateNorm)
      for (int i = 0; i < n; ++i) big = std::max({big, std::fabs(y[i]), std::fabs(y1[i])});
    for (int i = 0; i < n; ++i) {
      err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      double r = err[i] / (opts_.stateNorm ? scale(big, big) : scale(y[i], y1[i]));
      en += r * r;
      if (!std::isfinite(y1[i])) finite = false;
    }
    en = std::sqrt(en / n);
    if (!finite || !std::isfinite(en)) en = 1e10;

    if (en > 1.0) {
      res.stats.rejected++;
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      continue;
    }
    res.stats.accepted++;

    for (int i = 0; i < n; ++i) {
      double ydiff = y1[i] - y[i];
      double bspl = hs * k1[i] - ydiff;
      dense.r1[i] = y[i];
      dense.r2[i] = ydiff;
      dense.r3[i] = bspl;
      dense.r4[i] = ydiff - hs * k7[i] - bspl;
      dense.r5[i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
    }
    dense.t0 = t;
    dense.h = hs;
    double tNew = last ? t1 : t + hs;

    double tStop = tNew;
    bool hit = false;
    if (event) {
      double evNew = event(tNew, y1.data());
      if ((evPrev > 0.0 && evNew <= 0.0) || (evPrev < 0.0 && evNew >= 0.0)) {
        double lo = t, hi = tNew;
        std::vector<double> ym;
        for (int it = 0; it < 100; ++it) {
          double mid = 0.5 * (lo + hi);
          dense.eval(mid, ym);
          double ev = event(mid, ym.data());
          if ((evPrev > 0.0 && ev > 0.0) || (evPrev < 0.0 && ev < 0.0))
            lo = mid;
          else
            hi = mid;
        }
        tStop = hi;
        hit = true;
      }
      evPrev = evNew;
    }

    std::vector<double> yo;
    while (nextOut < outputTimes.size() && dir * (outputTimes[nextOut] - tStop) <= 0.0) {
      dense.eval(outputTimes[nextOut], yo);
      res.times.push_back(outputTimes[nextOut]);
      res.states.push_back(yo);
      ++nextOut;
    }
    if (hit) {
      dense.eval(tStop, res.yEnd);
      res.tEnd = tStop;
      res.eventHit = true;
      return res;
    }

    y.swap(y1);
    k1.swap(k7);
    t = tNew;
    double fac = en == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
    h *= fac;
  }
  res.tEnd = t;
  res.yEnd = y;
  return res;
}

}  // namespace fl
