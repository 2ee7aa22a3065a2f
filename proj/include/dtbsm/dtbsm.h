/*
 * dtbsm C API.
 *
 * Every fallible call returns a dtbsm_status. On failure the out-parameters
 * are left untouched and dtbsm_last_error() describes the problem for the
 * calling thread. Strings returned through `char**` are heap allocated and
 * must be released with dtbsm_string_free(); MDP handles with
 * dtbsm_mdp_free(). JSON layouts are documented in README.md.
 */
#ifndef DTBSM_DTBSM_H
#define DTBSM_DTBSM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DTBSM_BUILDING_LIBRARY)
#    define DTBSM_API __declspec(dllexport)
#  else
#    define DTBSM_API __declspec(dllimport)
#  endif
#else
#  define DTBSM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dtbsm_status {
  DTBSM_OK = 0,
  DTBSM_ERR_INVALID_ARGUMENT = 1,
  DTBSM_ERR_PARSE = 2,
  DTBSM_ERR_IO = 3,
  DTBSM_ERR_ROW_NOT_STOCHASTIC = 4,
  DTBSM_ERR_BAD_GAMMA = 5,
  DTBSM_ERR_NON_FINITE_ENTRY = 6,
  DTBSM_ERR_ACTION_OUT_OF_RANGE = 7,
  DTBSM_ERR_SHAPE_MISMATCH = 8,
  DTBSM_ERR_GAMMA_MISMATCH = 9,
  DTBSM_ERR_NOT_A_DISTRIBUTION = 10,
  DTBSM_ERR_COST_SHAPE_MISMATCH = 11,
  DTBSM_ERR_NO_SAMPLES = 12,
  DTBSM_ERR_SAMPLER_OUT_OF_RANGE = 13,
  DTBSM_ERR_COVERAGE = 14,
  DTBSM_ERR_STATE_SPACE_TOO_LARGE = 15,
  DTBSM_ERR_INFEASIBLE_DEMAND = 16,
  DTBSM_ERR_INVARIANT_VIOLATION = 17,
  DTBSM_ERR_INTERNAL = 18
} dtbsm_status;

/* Message for the last failed call on this thread ("" if none). */
DTBSM_API const char* dtbsm_last_error(void);
/* Stable identifier such as "ParseError". */
DTBSM_API const char* dtbsm_status_name(dtbsm_status status);
DTBSM_API void dtbsm_string_free(char* s);

/* ---- MDPs ---------------------------------------------------------------- */

typedef struct dtbsm_mdp dtbsm_mdp;

DTBSM_API dtbsm_status dtbsm_mdp_from_json(const char* json, dtbsm_mdp** out);
DTBSM_API dtbsm_status dtbsm_mdp_load(const char* path, dtbsm_mdp** out);
DTBSM_API dtbsm_status dtbsm_mdp_to_json(const dtbsm_mdp* mdp, char** out);
DTBSM_API void dtbsm_mdp_free(dtbsm_mdp* mdp);
DTBSM_API size_t dtbsm_mdp_num_states(const dtbsm_mdp* mdp);
DTBSM_API size_t dtbsm_mdp_num_actions(const dtbsm_mdp* mdp);
DTBSM_API double dtbsm_mdp_gamma(const dtbsm_mdp* mdp);

/* ---- Dynamic programming ------------------------------------------------- */

/* V* by value iteration to certified residual `tol` (<= 0 uses 1e-10) and the
 * greedy policy. Any output may be NULL; `residual` receives the certificate. */
DTBSM_API dtbsm_status dtbsm_solve(const dtbsm_mdp* mdp, double tol, char** values_json,
                                   char** policy_json, double* residual);

/* V^pi for a policy given as {"policy": [...]} or a bare array. */
DTBSM_API dtbsm_status dtbsm_evaluate(const dtbsm_mdp* mdp, const char* policy_json, double tol,
                                      char** values_json);

/* ---- Metrics and bounds -------------------------------------------------- */

/* Truncated DT-BSM. steps > 0 runs exactly that many iterations, otherwise
 * iterates until the apriori error is at most delta (<= 0 uses 1e-9). */
DTBSM_API dtbsm_status dtbsm_bsm(const dtbsm_mdp* real, const dtbsm_mdp* twin, double delta,
                                 size_t steps, char** metric_json);

DTBSM_API dtbsm_status dtbsm_dtv(const dtbsm_mdp* real, const dtbsm_mdp* twin, char** metric_json);

/* Both transfer bounds for `policy_json`, or for the twin-optimal policy when
 * it is NULL. `within_bound` (optional) receives 1 when
 * actual_regret <= min(bound_tv, bound_bsm) + 1e-6. */
DTBSM_API dtbsm_status dtbsm_bound(const dtbsm_mdp* real, const dtbsm_mdp* twin,
                                   const char* policy_json, double delta, int skip_bsm,
                                   char** report_json, int* within_bound);

/* Property suites (value bound, quadrilateral inequality, TV domination,
 * convergence envelope) on one pair. `all_passed` is optional. */
DTBSM_API dtbsm_status dtbsm_check(const dtbsm_mdp* real, const dtbsm_mdp* twin, size_t samples,
                                   uint64_t seed, char** report_json, int* all_passed);

/* W1 for {"p": [...], "q": [...], "cost": [[...]]}. */
DTBSM_API dtbsm_status dtbsm_wasserstein(const char* problem_json, char** solution_json);

/* ---- Sampling ------------------------------------------------------------ */

DTBSM_API dtbsm_status dtbsm_required_samples(double epsilon, double alpha, double gamma,
                                              double r_max, size_t num_states, uint64_t* k,
                                              int* degenerate);

/* Empirical d_TV. Rewards always come from the MDPs; next-state draws come
 * from the trace CSV when its path is non-NULL, otherwise from the MDP. k = 0
 * derives K from (epsilon, alpha); otherwise the certified epsilon for k is
 * reported. */
DTBSM_API dtbsm_status dtbsm_sample(const dtbsm_mdp* real, const dtbsm_mdp* twin,
                                    const char* real_trace_path, const char* twin_trace_path,
                                    double epsilon, double alpha, uint64_t k, uint64_t seed,
                                    char** result_json);

/* ---- Generators ---------------------------------------------------------- */

/* Admission-control MDP from key-value config text (NULL: built-in defaults). */
DTBSM_API dtbsm_status dtbsm_gen_admission(const char* config_text, dtbsm_mdp** out);
DTBSM_API dtbsm_status dtbsm_gen_random(size_t num_states, size_t num_actions, double gamma,
                                        double sparsity, uint64_t seed, dtbsm_mdp** out);
DTBSM_API dtbsm_status dtbsm_perturb(const dtbsm_mdp* mdp, double reward_noise,
                                     double transition_noise, uint64_t seed, dtbsm_mdp** out);

/* ---- Experiments --------------------------------------------------------- */

/* Runs the sweep described by the spec file. A NULL seed_override keeps the
 * spec's seed. Returns the CSV, the summary JSON and the spec's resolved
 * output path (any output may be NULL). `bound_violations` is optional. */
DTBSM_API dtbsm_status dtbsm_experiment(const char* spec_path, const uint64_t* seed_override, char** csv,
                                        char** summary_json, char** output_path,
                                        size_t* bound_violations);

#ifdef __cplusplus
}
#endif

#endif /* DTBSM_DTBSM_H */
