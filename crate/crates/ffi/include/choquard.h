#ifndef CHOQUARD_H
#define CHOQUARD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ChoquardExistence {
  CHOQUARD_EXISTENCE_YES = 0,
  CHOQUARD_EXISTENCE_NO = 1,
  CHOQUARD_EXISTENCE_UNDETERMINED = 2,
} ChoquardExistence;

// Result of every fallible call.
typedef enum ChoquardStatus {
  CHOQUARD_STATUS_OK = 0,
  CHOQUARD_STATUS_NULL_POINTER = 1,
  CHOQUARD_STATUS_INVALID_UTF8 = 2,
  // Parameters fail to parse or violate the baseline bounds.
  CHOQUARD_STATUS_INVALID_PARAMS = 3,
  // The operation does not apply to these parameters.
  CHOQUARD_STATUS_PRECONDITION = 4,
  // A numerical method missed its tolerance.
  CHOQUARD_STATUS_NUMERICAL = 5,
  // Any other failure, including a caught panic.
  CHOQUARD_STATUS_INTERNAL = 6,
} ChoquardStatus;

// Opaque, validated parameter tuple `(N, m, p, q, alpha, beta)`.
typedef struct ChoquardParams ChoquardParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses `"N,m,p,q,alpha,beta"` (decimals or fractions such as `20/9`).
//
// # Safety
// `tuple` must be a NUL-terminated string and `out` a valid pointer. On success `*out`
// holds a handle to release with [`choquard_params_free`]; on failure it is set to null.
enum ChoquardStatus choquard_params_new(const char *tuple, struct ChoquardParams **out);

// Built-in parameter set by name, e.g. `"thm2-case1"`.
//
// # Safety
// Same contract as [`choquard_params_new`].
enum ChoquardStatus choquard_params_preset(const char *name, struct ChoquardParams **out);

// Releases a handle. Null is accepted.
//
// # Safety
// `params` must come from this library and must not be used afterwards.
void choquard_params_free(struct ChoquardParams *params);

// Exact existence verdict.
//
// # Safety
// `params` must be a live handle and `out` a valid pointer.
enum ChoquardStatus choquard_classify(const struct ChoquardParams *params,
                                      enum ChoquardExistence *out);

// `sigma = (m+alpha+beta)/(p+q-m+1)`.
//
// # Safety
// `params` must be a live handle and `out` a valid pointer.
enum ChoquardStatus choquard_sigma(const struct ChoquardParams *params, double *out);

// Open interval of admissible decay exponents.
//
// # Safety
// `params` must be a live handle; `lower` and `upper` valid pointers.
enum ChoquardStatus choquard_gamma_range(const struct ChoquardParams *params,
                                         double *lower,
                                         double *upper);

// Weighted m-Laplacian of `kappa r^{-gamma} (log 5/r)^{-tau}` at `r`.
//
// # Safety
// `params` must be a live handle and `out` a valid pointer.
enum ChoquardStatus choquard_closed_form(const struct ChoquardParams *params,
                                         double kappa,
                                         double gamma,
                                         double tau,
                                         double r,
                                         double *out);

// Derived exponents as JSON.
//
// # Safety
// `params` must be a live handle and `out` a valid pointer; free the result with
// [`choquard_string_free`].
enum ChoquardStatus choquard_derive_json(const struct ChoquardParams *params, char **out);

// Full verification report as JSON with default thresholds. A NaN `gamma` selects
// the default decay exponent of the pointwise check. `*passed` is set to 1 when no
// check failed.
//
// # Safety
// `params` must be a live handle; `out` and `passed` valid pointers. Free the string
// with [`choquard_string_free`].
enum ChoquardStatus choquard_verify_json(const struct ChoquardParams *params,
                                         double gamma,
                                         char **out,
                                         int32_t *passed);

// Releases a string returned by this library. Null is accepted.
//
// # Safety
// `s` must come from this library and must not be used afterwards.
void choquard_string_free(char *s);

// Message of the last failed call on this thread; empty after a success. The pointer
// stays valid until the next call into this library on the same thread.
const char *choquard_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHOQUARD_H */
