#pragma once

#include <functional>
#include <string>

#include "fowlerlab/potentials.hpp"

namespace fl {

enum class Regime { Focus, Node, DegenerateNode };
const char* regime_name(Regime r);

struct ProblemDims {
  int n;
  double l;
};

// m(l) = 2/(l-2), A(l) = n-2-2m, B(l) = m(n-2-m)
double A_of(int n, double l);
double B_of(int n, double l);

struct ExponentTable {
  int n = 0;
  double twoStar = 0.0;
  double sigmaStarPaper = 0.0;  // closed formula, +inf for n <= 10
  double sigmaStarLower = 0.0;  // discriminant roots in l, NaN when absent
  double sigmaStarUpper = 0.0;  // +inf when no node threshold exists
  double l_s = 0.0;
  double l_u = 0.0;
  double m_s = 0.0;
  double m_u = 0.0;
  double A = 0.0;
  double B = 0.0;
  double A_u = 0.0;
  double B_u = 0.0;
  double P1plus = 0.0;
  double P1minus = 0.0;
  double dgPlus = 0.0;   // d/dy1 g(P1+, +inf)
  double dgMinus = 0.0;  // d/dy1 g(P1-, -inf)
  double discriminant = 0.0;
  double discriminantMinus = 0.0;
  double lambda1 = 0.0;  // real parts when regime is focus
  double lambda2 = 0.0;
  double lambdaImag = 0.0;
  Regime regime = Regime::Node;
  Regime regimeMinus = Regime::Node;
  double qBar = 0.0;
  double deltaBar = 0.0;
};

double sigma_star_paper(int n);

// Roots in l of A(l)^2 - 2(2+deltaBar)(l-2)B(l) = 0; lower may be NaN, upper may be +inf.
struct SigmaRoots {
  double lower;
  double upper;
};
SigmaRoots sigma_roots(int n, double deltaBar);

// Unique y > 0 with gLimit(y) = B y.
double p1_fixed_point(const std::function<double(double)>& gLimit, double B);

Regime classify_regime(double discriminant);
Regime classify_regime(const ExponentTable& table);

ExponentTable derive_exponents(const PotentialSpec& spec, int n);

}  // namespace fl
