#ifndef DYNIDENT_H
#define DYNIDENT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum DynidentStatus {
  DYNIDENT_STATUS_OK = 0,
  DYNIDENT_STATUS_INVALID_ARGUMENT = 1,
  DYNIDENT_STATUS_NUMERIC_DOMAIN = 2,
  DYNIDENT_STATUS_DIVERGENCE = 3,
  DYNIDENT_STATUS_UNSUPPORTED = 4,
  DYNIDENT_STATUS_ILL_CONDITIONED = 5,
  DYNIDENT_STATUS_ESTIMATION_FAILURE = 6,
  DYNIDENT_STATUS_DEGENERATE_LABELS = 7,
  DYNIDENT_STATUS_TRAINING_DIVERGED = 8,
  DYNIDENT_STATUS_CONFIG = 9,
  DYNIDENT_STATUS_IO = 10,
  DYNIDENT_STATUS_FORMAT = 11,
  DYNIDENT_STATUS_NULL_POINTER = 12,
  DYNIDENT_STATUS_BUFFER_TOO_SMALL = 13,
  DYNIDENT_STATUS_PANIC = 14,
} DynidentStatus;

// Estimation method selector for [`dynident_fit`].
typedef enum DynidentMethod {
  DYNIDENT_METHOD_CLOSED_FORM = 0,
  DYNIDENT_METHOD_DERIVATIVE_MATCHING = 1,
  DYNIDENT_METHOD_TRAJECTORY_MATCHING = 2,
} DynidentMethod;

// Trained multiview identifier.
typedef struct DynidentModel DynidentModel;

// Catalog system. Borrowed from the static catalog; freeing only drops the handle.
typedef struct DynidentSystem DynidentSystem;

// Integrated or loaded trajectory.
typedef struct DynidentTrajectory DynidentTrajectory;

// Output of [`dynident_aipw_ate`].
typedef struct DynidentAte {
  double ate_hat;
  double se_hat;
  double clipped_fraction;
  // 1 when enough propensities were clipped to make the estimate suspect.
  int32_t positivity_warning;
} DynidentAte;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the next call
// that fails on the same thread; do not free.
const char *dynident_last_error(void);

// Library version as a static NUL-terminated string.
const char *dynident_version(void);

// Releases a string returned by this library. Accepts null.
//
// # Safety
// `s` must come from this library and not have been freed.
void dynident_string_free(char *s);

// Looks up a catalog system by id (for example `"ode27"`).
//
// # Safety
// `id` must be a NUL-terminated string; `out` must be writable.
enum DynidentStatus dynident_system_lookup(const char *id, struct DynidentSystem **out);

// # Safety
// `sys` must be null or a handle from [`dynident_system_lookup`] not yet freed.
void dynident_system_free(struct DynidentSystem *sys);

// State dimension `d` and parameter count `N`.
//
// # Safety
// `sys` must be a live handle; the outputs must be writable.
enum DynidentStatus dynident_system_dims(const struct DynidentSystem *sys,
                                         size_t *state_dim,
                                         size_t *param_dim);

// Evaluates `f(x; θ)` into `out` (capacity `out_len`, at least `d`).
//
// # Safety
// Pointers must be valid for the given lengths.
enum DynidentStatus dynident_field_eval(const struct DynidentSystem *sys,
                                        const double *theta,
                                        size_t theta_len,
                                        const double *x,
                                        size_t x_len,
                                        double *out,
                                        size_t out_len);

// Integrates with RK4 on the uniform grid of `n_points` over `[0, t_max]`. A null `x0`
// uses the catalog initial state.
//
// # Safety
// Pointers must be valid for the given lengths; `out` must be writable.
enum DynidentStatus dynident_integrate(const struct DynidentSystem *sys,
                                       const double *theta,
                                       size_t theta_len,
                                       const double *x0,
                                       size_t x0_len,
                                       double t_max,
                                       size_t n_points,
                                       struct DynidentTrajectory **out);

// Parses one JSON-lines trajectory record.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum DynidentStatus dynident_trajectory_from_json(const char *json,
                                                  struct DynidentTrajectory **out);

// Serializes a trajectory as one JSON record. Free the string with
// [`dynident_string_free`].
//
// # Safety
// `traj` must be a live handle; `out` must be writable.
enum DynidentStatus dynident_trajectory_to_json(const struct DynidentTrajectory *traj, char **out);

// Number of grid points `T` and state dimension `d`.
//
// # Safety
// `traj` must be a live handle; the outputs must be writable.
enum DynidentStatus dynident_trajectory_shape(const struct DynidentTrajectory *traj,
                                              size_t *n_points,
                                              size_t *state_dim);

// Copies the states, row-major `T × d`, into `out` (capacity `out_len`).
//
// # Safety
// `traj` must be a live handle; `out` must be valid for `out_len` values.
enum DynidentStatus dynident_trajectory_states(const struct DynidentTrajectory *traj,
                                               double *out,
                                               size_t out_len);

// # Safety
// `traj` must be null or a live handle.
void dynident_trajectory_free(struct DynidentTrajectory *traj);

// Estimates `θ` from a trajectory. `method` is a [`DynidentMethod`] value. `theta0` may be null (box midpoint); it is ignored by
// the closed form. Writes `N` values to `theta_out` and the final loss to `loss_out`
// when that is not null.
//
// # Safety
// Handles must be live; pointers valid for the given lengths.
enum DynidentStatus dynident_fit(const struct DynidentSystem *sys,
                                 const struct DynidentTrajectory *traj,
                                 int32_t method,
                                 const double *theta0,
                                 size_t theta0_len,
                                 double *theta_out,
                                 size_t theta_out_len,
                                 double *loss_out);

// AIPW average treatment effect. `x` is row-major `n × p`; `t` holds 0 or 1.
//
// # Safety
// Pointers must be valid for the given lengths; `out` must be writable.
enum DynidentStatus dynident_aipw_ate(const double *y,
                                      const uint8_t *t,
                                      const double *x,
                                      size_t n,
                                      size_t p,
                                      struct DynidentAte *out);

// Loads a model file written by `dynident train-mv`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DynidentStatus dynident_model_load(const char *path, struct DynidentModel **out);

// Latent dimension of a model.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum DynidentStatus dynident_model_latent_dim(const struct DynidentModel *model, size_t *out);

// Encodes a trajectory into `out` (capacity `out_len`, at least the latent dimension).
//
// # Safety
// Handles must be live; `out` valid for `out_len` values.
enum DynidentStatus dynident_model_encode(const struct DynidentModel *model,
                                          const struct DynidentTrajectory *traj,
                                          double *out,
                                          size_t out_len);

// # Safety
// `model` must be null or a live handle.
void dynident_model_free(struct DynidentModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNIDENT_H */
