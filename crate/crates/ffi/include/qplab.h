#ifndef QPLAB_H
#define QPLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every entry point.
typedef enum QplStatus {
  QPL_STATUS_OK = 0,
  // A required pointer argument was NULL.
  QPL_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  QPL_STATUS_INVALID_UTF8 = 2,
  // Malformed or out-of-domain input (bad JSON, invalid parameters,
  // refused or unsupported requests).
  QPL_STATUS_CONFIG = 3,
  // A numerical routine failed.
  QPL_STATUS_NUMERICAL = 4,
  // The problem exceeds a size limit.
  QPL_STATUS_SIZE = 5,
  // The output buffer is too small; the required length was written.
  QPL_STATUS_BUFFER_TOO_SMALL = 6,
  // Internal panic; the handle involved should be freed.
  QPL_STATUS_PANIC = 7,
} QplStatus;

// Boundary conditions for finite sections.
typedef enum QplBoundary {
  QPL_BOUNDARY_DIRICHLET = 0,
  QPL_BOUNDARY_PERIODIC = 1,
  QPL_BOUNDARY_ANTIPERIODIC = 2,
} QplBoundary;

// Opaque operator handle.
typedef struct QplOperator QplOperator;

// Opaque kicked-rotor handle: a Floquet operator and its current state.
typedef struct QplRotor QplRotor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread (empty after a
// success). The pointer stays valid until the next qplab call on the same
// thread.
const char *qpl_last_error(void);

// Library version as a static NUL-terminated string.
const char *qpl_version(void);

// Parses an operator from its JSON description.
//
// # Safety
// `json` must be NULL or a NUL-terminated string; `out_op` must be NULL
// or point to writable storage for a handle.
enum QplStatus qpl_operator_from_json(const char *json, struct QplOperator **out_op);

// Creates the almost Mathieu operator `Δ + λ cos 2π(θ + nω)`.
//
// # Safety
// `out_op` must be NULL or point to writable storage for a handle.
enum QplStatus qpl_operator_almost_mathieu(double coupling,
                                           double omega,
                                           double theta,
                                           struct QplOperator **out_op);

// Releases an operator handle.
//
// # Safety
// `op` must be NULL or a handle from this library that was not freed yet.
void qpl_operator_free(struct QplOperator *op);

// θ-averaged Lyapunov exponent at `energy` from `samples` phases and
// products of length `k`.
//
// # Safety
// `op` must be NULL or a live handle; `gamma` must be NULL or writable.
enum QplStatus qpl_lyapunov(const struct QplOperator *op,
                            double energy,
                            size_t k,
                            size_t samples,
                            double *gamma);

// Sorted eigenvalues of the finite section on `[−N, N]`.
//
// `*len` always receives the number of eigenvalues. When `capacity` is
// smaller (including a NULL `values` with zero capacity), nothing is copied
// and `QPL_STATUS_BUFFER_TOO_SMALL` is returned.
//
// # Safety
// `op` must be NULL or a live handle; `values` must be NULL or point to
// `capacity` writable doubles; `len` must be NULL or writable.
enum QplStatus qpl_spectrum(const struct QplOperator *op,
                            size_t half_width,
                            enum QplBoundary boundary,
                            double *values,
                            size_t capacity,
                            size_t *len);

// Scaled Hausdorff distance between `σ(H_λ)` and `(λ/2)σ(H_{4/λ})`.
//
// # Safety
// `distance` must be NULL or writable.
enum QplStatus qpl_duality_distance(double coupling,
                                    double omega,
                                    size_t half_width,
                                    size_t samples,
                                    double *distance);

// Creates a kicked rotor on momenta `[−N, N]`, starting from `δ₀`.
//
// # Safety
// `out_rotor` must be NULL or point to writable storage for a handle.
enum QplStatus qpl_rotor_new(double kappa,
                             double a,
                             double b,
                             size_t half_width,
                             struct QplRotor **out_rotor);

// Releases a rotor handle.
//
// # Safety
// `rotor` must be NULL or a handle from this library that was not freed yet.
void qpl_rotor_free(struct QplRotor *rotor);

// Advances the rotor by `periods` Floquet steps.
//
// # Safety
// `rotor` must be NULL or a live handle not used concurrently.
enum QplStatus qpl_rotor_step(struct QplRotor *rotor, size_t periods);

// Current `⟨n²⟩`, norm, period count and boundary flag of the rotor state.
// Any of the out pointers may be NULL.
//
// # Safety
// `rotor` must be NULL or a live handle; non-NULL out pointers must be
// writable.
enum QplStatus qpl_rotor_moments(const struct QplRotor *rotor,
                                 double *second_moment,
                                 double *norm,
                                 size_t *periods,
                                 bool *flagged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QPLAB_H */
