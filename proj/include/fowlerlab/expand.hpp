#pragma once

#include <Eigen/Dense>
#include <boost/rational.hpp>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fowlerlab/exponents.hpp"
#include "fowlerlab/potentials.hpp"

namespace fl {

// Decay rate with an exact rational shadow when the input was recognisably rational.
struct Rate {
  double value = 0.0;
  bool exact = false;
  boost::rational<long long> q{0};

  static Rate from(double v);
  Rate operator+(const Rate& o) const;
  Rate times(int k) const;
};

bool rates_equal(const Rate& a, const Rate& b);
constexpr double kResonanceTol = 1e-9;
constexpr double kNearResonance = 1e-6;

struct Mode {
  double rate;            // decay rate, e^{-rate t}
  int size = 1;           // 1 or 2
  double coupling = 1.0;  // 2-blocks: u' = -rate u + coupling v, v' = -rate v
};

struct Monomial {
  double coeff;
  std::vector<int> powers;  // over the linear forms
};

// N(x) = V * [ sum of monomials in (W x) ] per output channel.
struct PolyMap {
  Eigen::MatrixXd W;
  std::vector<std::vector<Monomial>> outputs;
  Eigen::MatrixXd V;

  static PolyMap direct(int dim, std::vector<std::vector<Monomial>> perCoordinate);
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;
  int max_degree() const;
};

struct StableSystem {
  std::vector<Mode> modes;
  Eigen::MatrixXd L;  // block diagonal in modal coordinates
  PolyMap N;

  static StableSystem make(std::vector<Mode> modes, PolyMap N);
  int dim() const { return static_cast<int>(L.rows()); }
  int mode_of(int coord) const;
  int offset(int mode) const;
  std::vector<Rate> rates() const;
  void validate() const;
};

// Ladder of Definition-style sweep counts: k_1 = 1 and sum_{j<=i} k_j = floor(rate_i / rate_1).
std::vector<int> sweep_ladder(const std::vector<double>& rates);

using Poly = std::vector<double>;
using Key = std::vector<int>;

// Scalar multi-exponential series: sum over keys chi of poly_chi(t) e^{-(chi . rates) t}.
class ScalarSeries {
 public:
  std::map<Key, Poly> terms;

  void add(const Key& k, const Poly& p, double scale = 1.0);
  void add(const ScalarSeries& o, double scale = 1.0);
  void prune();
  bool empty() const { return terms.empty(); }
  double eval(double t, const std::vector<double>& rates) const;
};

struct TruncationInfo {
  double theta;
  std::vector<Rate> rates;
  double droppedMin = std::numeric_limits<double>::infinity();
};

ScalarSeries multiply(const ScalarSeries& a, const ScalarSeries& b, TruncationInfo* trunc);

struct ResonanceEvent {
  Key chi;
  int coord;
  double rate;
  double gap;
  bool resonant;       // exact or within tolerance: secular integration
  bool illConditioned; // near-resonant but solved as non-resonant
};

class ExpSeries {
 public:
  int dim = 0;
  std::vector<double> rates;       // mode rates
  std::map<Key, std::vector<Poly>> terms;
  double theta = 0.0;
  double remainderExponent = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> freeCoeffs;
  std::vector<ResonanceEvent> resonanceLog;

  static ExpSeries zero(const StableSystem& sys, double theta);
  double rate_of(const Key& k) const;
  ScalarSeries component(int coord) const;
  void set_component(int coord, const ScalarSeries& s);
  void add(const ExpSeries& o, double scale = 1.0);
  void prune();
  bool empty() const { return terms.empty(); }
  int max_degree() const;
  Eigen::VectorXd eval(double t) const;
  ExpSeries derivative() const;
  std::string to_json() const;
};

// Arithmetic on whole series.
ExpSeries series_add(const ExpSeries& a, const ExpSeries& b);
ExpSeries series_scale(const ExpSeries& a, double c);
ScalarSeries series_multiply(const ScalarSeries& a, const ScalarSeries& b, double theta, const std::vector<Rate>& rates);
// Substitutes the series into N, truncating at theta (infinite theta keeps all products).
ExpSeries substitute(const StableSystem& sys, const ExpSeries& x, double theta, double* droppedMin = nullptr);
ExpSeries apply_linear(const StableSystem& sys, const ExpSeries& x);

// Particular solution of X' = L X + F term by term; modes 0..stage are resolved with -int_t^inf.
ExpSeries resolve_forcing(const StableSystem& sys, const ExpSeries& forcing, int stage,
                          bool includeHomogeneous = true, std::vector<ResonanceEvent>* log = nullptr);

// Linear solution seeded on one mode: coordinates of the mode start at d.
ExpSeries linear_seed(const StableSystem& sys, int mode, const std::vector<double>& d, double theta,
                      std::vector<ResonanceEvent>* log = nullptr);

ExpSeries expand_orbit(const StableSystem& sys, const std::vector<std::vector<double>>& freeCoeffs, double theta);

// d/dt S - L S - N(S). N is truncated at resTheta (default 2 theta) so the first
// dropped products remain visible.
ExpSeries symbolic_residual(const StableSystem& sys, const ExpSeries& s, double resTheta = 0.0);

struct ResidualCheck {
  bool cancelled;
  double worst;       // largest surviving coefficient with rate <= theta, relative to scale
  double scale;       // largest coefficient of the series itself
  double firstRate;   // smallest rate present in the residual above the noise floor
};
ResidualCheck check_residual(const ExpSeries& series, const ExpSeries& residual, double tol = 1e-10);
// Residual terms whose coefficients exceed tol * scale.
ExpSeries surviving_terms(const ExpSeries& series, const ExpSeries& residual, double tol = 1e-10);

// Condition R2 on the rate lattice up to theta: no mode rate equals a nontrivial
// nonnegative combination of the lower ones.
bool condition_R2(const StableSystem& sys, double theta);

struct CoefficientFit {
  std::vector<std::vector<double>> d;
  double rms;
  int iterations;
};
CoefficientFit fit_free_coefficients(const StableSystem& sys, const std::vector<double>& times,
                                     const std::vector<Eigen::VectorXd>& states, double theta,
                                     double residualFloor = 1e-8);

// Specialisation around the stable fixed point of the Fowler system in the l_s frame.
struct FowlerTermView {
  Key chi;
  double rate;
  Poly poly;  // coefficients of the y1 deviation, polynomial in t = s - tau
};

struct FowlerExpansion {
  double P = 0.0;
  double lambda1 = 0.0, lambda2 = 0.0, gamma = 0.0;
  bool degenerate = false;
  bool hasZeta = false;
  double a = 0.0, b = 0.0, tau = 0.0, theta = 0.0;
  std::vector<FowlerTermView> psi, q1, q2, linear;
  std::vector<ResonanceEvent> resonanceLog;
  double remainderExponent = 0.0;
  ExpSeries modal;                  // full modal series (time t = s - tau)
  Eigen::MatrixXd T;                // physical (n1, y2, zeta) = T * modal

  double eval_y1(double s) const;   // P + all terms
  double eval_psi(double s) const;
  double eval_nonlinear(double s) const;  // everything except P, psi and the two linear terms
  std::string to_json() const;
};

StableSystem fowler_system(const ExponentTable& table, const PotentialSpec& spec, double theta, Eigen::MatrixXd* T,
                           double* gammaOut);
FowlerExpansion fowler_expand(const ExponentTable& table, const PotentialSpec& spec, double a, double b, double tau,
                              double theta);
double default_theta(const ExponentTable& table);

// Tail model used by the ground-state fit: y1(s) = P + psi(s) + linear + rest(a, b, s).
struct TailTemplate {
  double P = 0.0;
  double lambda1 = 0.0, lambda2 = 0.0;
  bool degenerate = false;
  std::function<double(double s)> psi;
  std::function<std::vector<double>(double a, double b, const std::vector<double>& s)> rest;
};
TailTemplate make_tail_template(const ExponentTable& table, const PotentialSpec& spec, double theta);

}  // namespace fl
