#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace fl {

// k(r) = kInf + amp * r^-eta * (1 + r)^(eta - gamma)
struct KParams {
  double kInf = 1.0;
  double amp = 0.0;
  double eta = 0.0;
  double gamma = 1.0;

  double value(double r) const;
  double derivative(double r) const;
  bool singular_at_origin() const { return amp > 0.0 && eta > 0.0; }
};

enum class Family { PurePower, Henon, WeightedPower, TwoPower };

const char* family_name(Family f);
Family family_from_name(const std::string& name);

// One summand k(r) r^delta |u|^(q-2) u of f.
struct PowerTerm {
  double q;
  double delta;
  KParams k;
};

struct PotentialSpec {
  Family family = Family::PurePower;
  double q = 4.0;
  double delta = 0.0;
  KParams k;
  double q2 = 0.0;
  double delta2 = 0.0;
  KParams k2;

  static PotentialSpec pure_power(double q);
  static PotentialSpec henon(double q, double delta);
  static PotentialSpec weighted(double q, double delta, KParams k);
  static PotentialSpec two_power(double q1, double delta1, KParams k1, double q2, double delta2, KParams k2);

  void validate() const;
  std::vector<PowerTerm> terms() const;
  std::string describe() const;
};

struct FValue {
  double value;
  double du;
};

FValue f_eval(const PotentialSpec& spec, double u, double r);

enum class GMode { Value, Dy1, Ds, LimitMinusInf, LimitPlusInf, ScriptG };

double m_of(double l);
double g_eval(const PotentialSpec& spec, double y1, double s, double l, GMode mode);
// d/dy1 of the s -> +inf or -inf limit.
double g_limit_dy1(const PotentialSpec& spec, double y1, double l, bool plusInf);

// Fowler parameters where g has an autonomous limit at s -> +inf (l_s) and s -> -inf (l_u).
double frame_ls(const PotentialSpec& spec);
double frame_lu(const PotentialSpec& spec);

// Exponent and weight exponent of the term dominating the s -> +inf limit.
struct DominantTerm {
  double q;
  double delta;
  double coeff;
};
DominantTerm dominant_plus(const PotentialSpec& spec);
DominantTerm dominant_minus(const PotentialSpec& spec);

// Convergence rates of g towards its autonomous limits, and the G4 data.
struct HypothesisMeta {
  double varpiPlus = 0.0;
  double varpiMinus = 0.0;
  double gamma = 0.0;  // leading decay rate of g(P+, s) - g(P+, inf)
  double c = 0.0;      // its coefficient
  bool scriptGZero = false;
};

enum class Verdict { Pass, Fail, Untested };
const char* verdict_name(Verdict v);

struct HypothesisItem {
  std::string name;
  Verdict verdict = Verdict::Untested;
  std::string note;
  double witnessY1 = 0.0;
  double witnessS = 0.0;
};

struct HypothesisReport {
  std::vector<HypothesisItem> items;
  HypothesisMeta meta;
  bool all_pass() const;
  const HypothesisItem& get(const std::string& name) const;
};

struct HypothesisLattice {
  int ny = 200;
  int ns = 200;
  double sMax = 12.0;
};

HypothesisMeta hypothesis_meta(const PotentialSpec& spec, int n);
HypothesisReport check_hypotheses(const PotentialSpec& spec, int n, const HypothesisLattice& lattice = {});

// Smooth cutoff equal to 1 at 0 and supported in [0, 1).
double bump(double r);
double bump_derivative(double r);

// f-level evaluator used by the solvers; perturbed potentials are realized this way.
class Potential {
 public:
  explicit Potential(PotentialSpec spec);
  const PotentialSpec& spec() const { return spec_; }
  FValue f(double u, double r) const;
  // G(y1, s; l) = int_0^y1 g(a, s; l) da in closed form.
  double primitive_g(double y1, double s, double l) const;

  // f * (1 + factor(r)) + extra(u, r); factor and extra default to zero.
  static Potential perturbed(const PotentialSpec& spec, int k, bool super, int n, const HypothesisLattice& lattice);
  double mu() const { return mu_; }
  int sign() const { return sign_; }
  int level() const { return k_; }
  bool scriptGBranch() const { return scriptG_; }

 private:
  PotentialSpec spec_;
  int k_ = 0;
  int sign_ = 0;
  double mu_ = 0.0;
  bool scriptG_ = false;
  double ls_ = 0.0;
};

// g of a perturbed potential in its l_s frame, for the hypothesis-style comparisons.
double g_potential(const Potential& pot, double y1, double s, double l);

}  // namespace fl
