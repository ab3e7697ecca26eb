#ifndef JCA_H
#define JCA_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum JcaRegime {
  JCA_REGIME_ABUNDANT = 0,
  JCA_REGIME_BORDERLINE = 1,
  JCA_REGIME_SCARCE = 2,
} JcaRegime;

typedef enum JcaStatus {
  JCA_STATUS_OK = 0,
  JCA_STATUS_NULL_POINTER = 1,
  JCA_STATUS_INVALID_UTF8 = 2,
  JCA_STATUS_PARSE_ERROR = 3,
  JCA_STATUS_VALIDATION_ERROR = 4,
  JCA_STATUS_IO_ERROR = 5,
  JCA_STATUS_ENGINE_ERROR = 6,
  JCA_STATUS_NOT_FOUND = 7,
  JCA_STATUS_INVALID_ARGUMENT = 8,
  JCA_STATUS_PANIC = 99,
} JcaStatus;

typedef enum JcaUtilityKind {
  /**
   * Parameters `a`, `b`.
   */
  JCA_UTILITY_KIND_SIGMOIDAL = 0,
  /**
   * Parameters `k`, `r_max`.
   */
  JCA_UTILITY_KIND_LOGARITHMIC = 1,
} JcaUtilityKind;

typedef struct JcaScenario JcaScenario;

typedef struct JcaTrace JcaTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *jca_last_error(void);

/**
 * Parses and validates a scenario from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum JcaStatus jca_scenario_from_json(const char *json, struct JcaScenario **out);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum JcaStatus jca_scenario_load(const char *path, struct JcaScenario **out);

/**
 * The built-in two-carrier, twelve-UE scenario.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum JcaStatus jca_scenario_table1(double r1, double r2, struct JcaScenario **out);

/**
 * # Safety
 * `s` must come from a `jca_scenario_*` constructor and not be used again.
 */
void jca_scenario_free(struct JcaScenario *s);

/**
 * # Safety
 * `s` must be a live scenario handle.
 */
enum JcaStatus jca_scenario_set_capacity(struct JcaScenario *s, uint32_t carrier, double capacity);

/**
 * Sets the bid decay from `off`, `exp:h1,h2` or `rat:h3`.
 *
 * # Safety
 * `s` must be a live scenario handle and `policy` a NUL-terminated string.
 */
enum JcaStatus jca_scenario_set_decay(struct JcaScenario *s, const char *policy);

/**
 * # Safety
 * `s` must be a live scenario handle.
 */
enum JcaStatus jca_scenario_set_delta(struct JcaScenario *s, double delta);

/**
 * # Safety
 * `s` must be a live scenario handle.
 */
enum JcaStatus jca_scenario_set_max_iterations(struct JcaScenario *s, uint64_t max_iterations);

/**
 * # Safety
 * `s` must be a live scenario handle and `out` a valid pointer.
 */
enum JcaStatus jca_scenario_regime(const struct JcaScenario *s, enum JcaRegime *out);

/**
 * Runs the distributed iteration to convergence or the iteration cap.
 *
 * # Safety
 * `s` must be a live scenario handle and `out` a valid pointer.
 */
enum JcaStatus jca_run(const struct JcaScenario *s, struct JcaTrace **out);

/**
 * # Safety
 * `t` must come from [`jca_run`] and not be used again.
 */
void jca_trace_free(struct JcaTrace *t);

/**
 * # Safety
 * `t` must be a live trace handle and `out` a valid pointer.
 */
enum JcaStatus jca_trace_converged(const struct JcaTrace *t, bool *out);

/**
 * # Safety
 * `t` must be a live trace handle and `out` a valid pointer.
 */
enum JcaStatus jca_trace_iterations(const struct JcaTrace *t, uint64_t *out);

/**
 * Final price of a carrier.
 *
 * # Safety
 * `t` must be a live trace handle and `out` a valid pointer.
 */
enum JcaStatus jca_trace_price(const struct JcaTrace *t, uint32_t carrier, double *out);

/**
 * Final rate of one UE on one carrier.
 *
 * # Safety
 * `t` must be a live trace handle and `out` a valid pointer.
 */
enum JcaStatus jca_trace_rate(const struct JcaTrace *t, uint32_t ue, uint32_t carrier, double *out);

/**
 * Final total rate of one UE across carriers.
 *
 * # Safety
 * `t` must be a live trace handle and `out` a valid pointer.
 */
enum JcaStatus jca_trace_total_rate(const struct JcaTrace *t, uint32_t ue, double *out);

/**
 * Writes the per-iteration trace CSV.
 *
 * # Safety
 * `t` must be a live trace handle and `path` a NUL-terminated string.
 */
enum JcaStatus jca_trace_write_csv(const struct JcaTrace *t, const char *path);

/**
 * Normalized utility `U(r)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum JcaStatus jca_utility_evaluate(enum JcaUtilityKind kind,
                                    double p1,
                                    double p2,
                                    double r,
                                    double *out);

/**
 * Rate at which the log-utility slope equals `price`, clamped to `[1e-6, r_cap]`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum JcaStatus jca_utility_inverse_log_slope(enum JcaUtilityKind kind,
                                             double p1,
                                             double p2,
                                             double price,
                                             double r_cap,
                                             double *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *jca_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JCA_H */
