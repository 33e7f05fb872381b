/* C interface to the fowlerlab core.
 *
 * Every call returns an fl_status. On failure fl_last_error() describes the problem; the message is
 * thread local and stays valid until the next failing call on the same thread. Strings handed out
 * through char** parameters are owned by the caller and released with fl_free_string. Handles are
 * released with their matching *_free function; passing NULL to a *_free function is a no-op.
 *
 * Option arguments are JSON objects given as strings; NULL or "" selects the defaults.
 */
#ifndef FOWLERLAB_H
#define FOWLERLAB_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define FL_API __declspec(dllexport)
#else
#define FL_API __attribute__((visibility("default")))
#endif

typedef enum fl_status {
  FL_OK = 0,
  FL_ERR_INVALID_ARGUMENT = 1,
  FL_ERR_DOMAIN = 2,
  FL_ERR_NUMERICAL = 3,
  FL_ERR_NOT_FOUND = 4,
  FL_ERR_INTERNAL = 5
} fl_status;

typedef enum fl_decay { FL_DECAY_FAST = 0, FL_DECAY_SLOW = 1, FL_DECAY_CROSSED_ZERO = 2, FL_DECAY_INCONCLUSIVE = 3 } fl_decay;

typedef enum fl_termination { FL_COMPLETED = 0, FL_BLOWUP = 1, FL_STEADY = 2 } fl_termination;

typedef struct fl_potential fl_potential;
typedef struct fl_ground_state fl_ground_state;
typedef struct fl_field fl_field;

FL_API const char* fl_version(void);
FL_API const char* fl_last_error(void);
FL_API const char* fl_status_name(fl_status status);
FL_API void fl_free_string(char* s);

/* Potentials. Spec JSON: {"family": "PurePower"|"Henon"|"WeightedPower"|"TwoPower", "q", "delta",
 * "k": {"kInf", "amp", "eta", "gamma"}, "q2", "delta2", "k2": {...}}. */
FL_API fl_status fl_potential_from_json(const char* spec_json, fl_potential** out);
/* Perturbed copy of level k (k >= 1); super != 0 selects the upper perturbation. */
FL_API fl_status fl_potential_perturbed(const fl_potential* base, int k, int super, int n, fl_potential** out);
FL_API void fl_potential_free(fl_potential* p);
FL_API fl_status fl_potential_to_json(const fl_potential* p, char** json);
FL_API fl_status fl_potential_f(const fl_potential* p, double u, double r, double* value, double* du);
/* g(y1, s; l) of the potential, perturbation included. */
FL_API fl_status fl_potential_g(const fl_potential* p, double y1, double s, double l, double* value);

/* Exponents and hypotheses. lattice_json: {"ny", "ns", "sMax"}. */
FL_API fl_status fl_exponents(const fl_potential* p, int n, char** json);
FL_API fl_status fl_sigma_star(int n, double delta_bar, double* closed_formula, double* lower, double* upper);
FL_API fl_status fl_check_hypotheses(const fl_potential* p, int n, const char* lattice_json, char** json,
                                     int* all_pass);

/* Stationary solutions. shoot options: {"tol", "pointsPerDecade", "r0"};
 * singular options: {"eps", "sEnd", "tol", "pointsPerDecade"}. */
FL_API fl_status fl_shoot(const fl_potential* p, int n, double alpha, double r_max, const char* options_json,
                          fl_ground_state** out);
FL_API fl_status fl_singular_orbit(const fl_potential* p, int n, const char* options_json, fl_ground_state** out);
FL_API void fl_ground_state_free(fl_ground_state* gs);
FL_API size_t fl_ground_state_size(const fl_ground_state* gs);
FL_API fl_status fl_ground_state_samples(const fl_ground_state* gs, double* r, double* u, double* du, size_t capacity);
FL_API fl_status fl_ground_state_json(const fl_ground_state* gs, char** json);
/* Columns r, U, dU and U r^m with m = m(l_s). */
FL_API fl_status fl_ground_state_csv(const fl_ground_state* gs, char** csv);
FL_API fl_status fl_classify_decay(const fl_ground_state* gs, fl_decay* decay, char** note);
/* Least-squares tail coefficients on [r1, r2]; theta <= 0 picks the default truncation. The fit is stored
 * in the handle and reported by fl_ground_state_json. */
FL_API fl_status fl_fit_tail(fl_ground_state* gs, double r1, double r2, double theta, double* a, double* b,
                             double* residual);

/* Separation checks over an increasing list of heights. options: {"rMin", "rMax", "gapFloor",
 * "pointsPerDecade", "tol", "window0", "halvingDelta", "curves"}. */
FL_API fl_status fl_separation(const fl_potential* p, int n, const double* alphas, size_t count,
                               const char* options_json, char** json, int* all_pass);

/* Fowler expansion of the tail with free coefficients (a, b) and shift tau; theta <= 0 picks 3|lambda2|. */
FL_API fl_status fl_fowler_expansion(const fl_potential* p, int n, double a, double b, double tau, double theta,
                                     char** json);

/* Radial fields. grid options: {"Rmax", "pointsPerDecade", "rMin"}. */
FL_API fl_status fl_field_create(const double* r, const double* u, size_t count, fl_field** out);
FL_API fl_status fl_field_from_profile(const fl_potential* p, int n, double alpha, const char* grid_json,
                                       fl_field** out);
FL_API void fl_field_free(fl_field* f);
FL_API size_t fl_field_size(const fl_field* f);
FL_API fl_status fl_field_values(const fl_field* f, double* r, double* u, size_t capacity);
FL_API fl_status fl_field_csv(const fl_field* f, char** csv);
FL_API fl_status fl_weighted_norm(const fl_field* f, double lambda_exp, int log_corrected, const fl_field* reference,
                                  double* out);

/* Evolution. scheme options: {"outer": "robin"|"dirichlet", "robinM", "dtMax", "reactionCfl", "dtMin",
 * "ceiling", "sampleEvery", "steadyTol", "tailExact", "norms": [{"lambdaExp", "logCorrected"}]}. */
FL_API fl_status fl_evolve(const fl_potential* p, int n, const fl_field* phi, double horizon, const char* scheme_json,
                           fl_field** final_field, char** trace_csv, fl_termination* termination);

/* Experiments. params: {"alpha", "d", "T", "lambdaExp", "logCorrected", "grid": {...}, "scheme": {...}};
 * the weak asymptotic run also reads "k" and "window0". Missing norm data select the natural weight. */
FL_API fl_status fl_stability_experiment(const fl_potential* p, int n, const char* params_json, char** json,
                                         char** trace_csv, int* pass);
FL_API fl_status fl_weak_asymptotic_experiment(const fl_potential* p, int n, const char* params_json, char** json,
                                               char** upper_csv, char** lower_csv, int* pass);

#ifdef __cplusplus
}
#endif

#endif /* FOWLERLAB_H */
