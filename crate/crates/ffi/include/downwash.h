#ifndef DOWNWASH_H
#define DOWNWASH_H

/* Generated by cbindgen from downwash-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DwFeatureMode {
  DW_FEATURE_MODE_FULL = 0,
  DW_FEATURE_MODE_NEAR_HOVER = 1,
} DwFeatureMode;

/**
 * Result code of every fallible call.
 */
typedef enum DwStatus {
  DW_STATUS_OK = 0,
  DW_STATUS_NULL_POINTER = 1,
  DW_STATUS_INVALID_ARGUMENT = 2,
  DW_STATUS_PARSE = 3,
  DW_STATUS_NUMERICAL = 4,
  DW_STATUS_IO = 5,
  DW_STATUS_PANIC = 6,
} DwStatus;

/**
 * Opaque trained model.
 */
typedef struct DwModel DwModel;

/**
 * Relative state of the pair, NED, SI units. `delta_p = p_leader - p_follower`.
 */
typedef struct DwInteractionState {
  double delta_p[3];
  double v_leader[3];
  double v_follower[3];
} DwInteractionState;

/**
 * Ground-truth field parameters; see `dw_field_params_default`.
 */
typedef struct DwFieldParams {
  double a_down;
  double a_lift;
  double a_rad;
  double sigma_r;
  double z_near;
  double z_far;
  double eps_sym;
  double leader_speed_gain;
} DwFieldParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, static NUL-terminated string.
 */
const char *dw_version(void);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *dw_last_error_message(void);

/**
 * Parses a model artifact from a JSON string.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DwStatus dw_model_from_json(const char *json, struct DwModel **out);

/**
 * Loads a model artifact from a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DwStatus dw_model_load(const char *path, struct DwModel **out);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must come from a `dw_model_*` constructor and not be used again.
 */
void dw_model_free(struct DwModel *model);

/**
 * Predicted force on the follower, inertial frame, m/s².
 *
 * # Safety
 * Pointers must be valid; `r_ma` is null or points to 9 doubles; `out`
 * points to 3 doubles.
 */
enum DwStatus dw_model_predict(const struct DwModel *model,
                               const struct DwInteractionState *state,
                               const double *r_ma,
                               double *out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum DwStatus dw_model_parameter_count(const struct DwModel *model, size_t *out);

/**
 * Invariant features of `state`: 6 values in full mode, 5 near hover.
 * `written` receives the count.
 *
 * # Safety
 * `out` must hold `out_len` doubles; other pointers must be valid; `r_ma`
 * may be null.
 */
enum DwStatus dw_feature_map(const struct DwInteractionState *state,
                             const double *r_ma,
                             enum DwFeatureMode mode,
                             double *out,
                             size_t out_len,
                             size_t *written);

/**
 * Fills `out` with the default field parameters.
 *
 * # Safety
 * `out` must be valid.
 */
enum DwStatus dw_field_params_default(struct DwFieldParams *out);

/**
 * Ground-truth field force, inertial frame. `params` may be null for
 * defaults.
 *
 * # Safety
 * `out` points to 3 doubles; other pointers valid or null as documented.
 */
enum DwStatus dw_field_force(const struct DwInteractionState *state,
                             const double *r_ma,
                             const struct DwFieldParams *params,
                             double *out);

/**
 * LQR gain `K` (4x7, row-major) for diagonal weights; null weights use
 * the defaults.
 *
 * # Safety
 * `q_diag` is null or 7 doubles, `r_diag` null or 4 doubles, `out_k` 28
 * doubles.
 */
enum DwStatus dw_lqr_gains(const double *q_diag, const double *r_diag, double *out_k);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOWNWASH_H */
