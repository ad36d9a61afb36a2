#ifndef WAVENET_NDT_H
#define WAVENET_NDT_H

/* Generated by cbindgen from wavenet-ndt-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum WndtStatus {
  WNDT_STATUS_OK = 0,
  /**
   * A pointer argument that must not be null was null.
   */
  WNDT_STATUS_NULL_POINTER = 1,
  /**
   * Invalid argument values or inconsistent buffer lengths.
   */
  WNDT_STATUS_INVALID_ARGUMENT = 2,
  /**
   * File could not be read or written.
   */
  WNDT_STATUS_IO = 3,
  /**
   * File exists but has the wrong format or version.
   */
  WNDT_STATUS_FORMAT = 4,
  /**
   * Numerical failure (evanescent mode, singular wavenumber, ...).
   */
  WNDT_STATUS_NUMERIC = 5,
  /**
   * Unexpected internal failure.
   */
  WNDT_STATUS_INTERNAL = 6,
} WndtStatus;

/**
 * Opaque trained-model handle.
 */
typedef struct WndtModel WndtModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the library, static storage.
 */
const char *wndt_version(void);

/**
 * Message for the most recent error on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *wndt_last_error_message(void);

/**
 * Load a model checkpoint from a NUL-terminated path into a new handle.
 *
 * # Safety
 * `path` must point to a valid NUL-terminated string and `out_model`
 * to a writable pointer slot.
 */
enum WndtStatus wndt_model_load(const char *path, struct WndtModel **out_model);

/**
 * Release a handle returned by [`wndt_model_load`]. Null is a no-op.
 *
 * # Safety
 * `model` must be a pointer previously returned by `wndt_model_load`
 * that has not been freed.
 */
void wndt_model_free(struct WndtModel *model);

/**
 * Number of profile points the model expects, 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t wndt_model_input_len(const struct WndtModel *model);

/**
 * Run the network on a dimensionless pre-reconstruction profile.
 * `input` and `output` are arrays of `len` doubles; `len` must equal
 * [`wndt_model_input_len`].
 *
 * # Safety
 * `model` must be a live handle; `input`/`output` must point to `len`
 * readable/writable doubles.
 */
enum WndtStatus wndt_model_predict(const struct WndtModel *model,
                                   const double *input,
                                   double *output,
                                   size_t len);

/**
 * Born-model reflection spectrum of a depth profile (meters).
 * `depths` has `point_count` entries; `xi`, `out_re`, `out_im` have
 * `bin_count` entries.
 *
 * # Safety
 * All pointers must reference buffers of the stated lengths.
 */
enum WndtStatus wndt_forward_reflection(const double *depths,
                                        double origin,
                                        double spacing,
                                        size_t point_count,
                                        double half_thickness_b,
                                        double shear_speed,
                                        uint32_t mode_index,
                                        const double *xi,
                                        size_t bin_count,
                                        double *out_re,
                                        double *out_im);

/**
 * Wavenumber-space inversion of a reflection spectrum onto a spatial
 * grid. Writes `point_count` depths (meters, mean-free) to
 * `out_depths`. The spectrum must cover the grid's Fourier bins
 * `xi = pi j / (point_count * spacing)`, j = 1..point_count/2.
 *
 * # Safety
 * All pointers must reference buffers of the stated lengths.
 */
enum WndtStatus wndt_wnst_invert(const double *xi,
                                 const double *re,
                                 const double *im,
                                 size_t bin_count,
                                 double half_thickness_b,
                                 double shear_speed,
                                 uint32_t mode_index,
                                 double origin,
                                 double spacing,
                                 size_t point_count,
                                 double *out_depths);

/**
 * One analytic + network reconstruction in a single call, mirroring the
 * CLI's `reconstruct` command. The spectrum is inverted on the grid and
 * written to `out_wnst` (meters). When `model` is non-null, the network
 * post-processes the inversion (normalized by the plate half thickness)
 * and the rescaled result is written to `out_convnet`.
 *
 * # Safety
 * All non-null pointers must reference buffers of the stated lengths.
 */
enum WndtStatus wndt_reconstruct(const struct WndtModel *model,
                                 const double *xi,
                                 const double *re,
                                 const double *im,
                                 size_t bin_count,
                                 double half_thickness_b,
                                 double shear_speed,
                                 uint32_t mode_index,
                                 double origin,
                                 double spacing,
                                 size_t point_count,
                                 double *out_wnst,
                                 double *out_convnet);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVENET_NDT_H */
