#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "fowlerlab/expand.hpp"

namespace sys2 {

using Big = boost::multiprecision::cpp_bin_float_50;

// x1' = -x1, x2' = -2 x2 + x1^2
inline fl::StableSystem resonant() {
  fl::PolyMap N = fl::PolyMap::direct(2, {{}, {{1.0, {2, 0}}}});
  return fl::StableSystem::make({{1.0}, {2.0}}, N);
}

// x1' = -x1, x2' = -2 x2 + x1^2 + x1 x2: same resonance, infinite series
inline fl::StableSystem augmented() {
  fl::PolyMap N = fl::PolyMap::direct(2, {{}, {{1.0, {2, 0}}, {1.0, {1, 1}}}});
  return fl::StableSystem::make({{1.0}, {2.0}}, N);
}

// Closed-form x2 of the augmented system with x1 = a e^{-t}:
// x2 = e^{-2t - u} (c + a^2 t - a^2 sum_k u^k / (k k!)), u = a e^{-t}.
inline Big augmented_x2(double a, double c, double t) {
  Big A(a), u = A * exp(Big(-t)), term = 1, sum = 0;
  for (int k = 1; k < 200; ++k) {
    term *= u / k;
    Big add = term / k;
    sum += add;
    if (abs(add) < Big(1e-60) * abs(sum)) break;
  }
  return exp(-2 * Big(t) - u) * (Big(c) + A * A * Big(t) - A * A * sum);
}

// Series component evaluated in 50 digits from its double coefficients.
inline Big eval_big(const fl::ExpSeries& s, int coord, double t) {
  Big v = 0, T(t);
  for (const auto& [k, polys] : s.terms) {
    const auto& p = polys[coord];
    Big pv = 0;
    for (size_t j = p.size(); j-- > 0;) pv = pv * T + Big(p[j]);
    Big rate = 0;
    for (size_t i = 0; i < k.size(); ++i) rate += Big(k[i]) * Big(s.rates[i]);
    v += pv * exp(-rate * T);
  }
  return v;
}

}  // namespace sys2
