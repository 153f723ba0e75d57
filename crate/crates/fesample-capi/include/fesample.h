/* C interface to the fesample free-energy estimators. */

#pragma once

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible entry point.
typedef enum FesStatus {
  // Success; outputs are valid.
  FES_STATUS_OK = 0,
  // A required pointer argument was null.
  FES_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  FES_STATUS_INVALID_UTF8 = 2,
  // File could not be read or written.
  FES_STATUS_IO = 3,
  // Input text could not be parsed as a model.
  FES_STATUS_PARSE = 4,
  // The model or a parameter is structurally invalid.
  FES_STATUS_INVALID_INPUT = 5,
  // The request needs an exact enumeration larger than the guard allows.
  FES_STATUS_TOO_LARGE = 6,
  // The computation failed (solver or estimator error).
  FES_STATUS_FAILED = 7,
  // A panic was caught at the boundary; state is unchanged.
  FES_STATUS_INTERNAL_ERROR = 8,
} FesStatus;

// Opaque model handle (an Ising model or a binary Markov random field).
typedef struct FesModel FesModel;

// Message describing the most recent error on the calling thread, or an
// empty string. The pointer stays valid until the next failing call on the
// same thread.
const char *fes_last_error(void);

// Library version as a static NUL-terminated string.
const char *fes_version(void);

// Load a model from a file holding either edge-list text or model JSON.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be a valid
// pointer. On success `*out` owns the model and must be released with
// [`fes_model_free`].
enum FesStatus fes_model_from_file(const char *path, struct FesModel **out);

// Parse a model from in-memory text (edge list or JSON).
//
// # Safety
// `text` must be a valid NUL-terminated string; `out` must be a valid
// pointer. On success `*out` owns the model and must be released with
// [`fes_model_free`].
enum FesStatus fes_model_from_text(const char *text, struct FesModel **out);

// Release a model handle. Null is a no-op.
//
// # Safety
// `model` must be null or an unfreed pointer from a `fes_model_*`
// constructor; it must not be used afterwards.
void fes_model_free(struct FesModel *model);

// Number of vertices, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
size_t fes_model_n(const struct FesModel *model);

// True for an Ising model, false for a general Markov random field (or a
// null handle).
//
// # Safety
// `model` must be null or a live model handle.
bool fes_model_is_ising(const struct FesModel *model);

// Exact free energy by enumeration (closed form where available). Fails
// with `FES_STATUS_TOO_LARGE` when the model exceeds `enum_guard` vertices
// and no closed form applies.
//
// # Safety
// `model` must be a live model handle; `out` must be a valid pointer.
enum FesStatus fes_free_energy_exact(const struct FesModel *model, size_t enum_guard, double *out);

// Mean-field variational lower bound on the free energy (Ising only).
// `restarts` of 0 selects the default multistart schedule.
//
// # Safety
// `model` must be a live model handle; `out` must be a valid pointer.
enum FesStatus fes_mean_field(const struct FesModel *model,
                              size_t restarts,
                              uint64_t seed,
                              double *out);

// Median-boosted sample estimate of the free energy from `repeats`
// independent `q`-vertex samples, using exact enumeration on each sample.
// `repeats` must be odd; `repeats` of 0 selects the default of 11.
//
// # Safety
// `model` must be a live model handle; `out` must be a valid pointer.
enum FesStatus fes_estimate(const struct FesModel *model,
                            size_t q,
                            size_t repeats,
                            uint64_t seed,
                            double *out);

// Magnetization estimate from three exact free-energy queries at field
// shifts `{−ν, 0, +ν}` (Ising only). Writes the estimate and the
// derivative bracket it was read from.
//
// # Safety
// `model` must be a live model handle; `out_value`, `out_lower`, and
// `out_upper` must be valid pointers.
enum FesStatus fes_magnetization(const struct FesModel *model,
                                 double nu,
                                 size_t enum_guard,
                                 double *out_value,
                                 double *out_lower,
                                 double *out_upper);
