#ifndef OPE_H
#define OPE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OpeStatus {
  OPE_STATUS_OK = 0,
  OPE_STATUS_NULL_POINTER = 1,
  OPE_STATUS_INVALID_UTF8 = 2,
  OPE_STATUS_PARSE_ERROR = 3,
  OPE_STATUS_DOMAIN_VIOLATION = 4,
  OPE_STATUS_COINCIDENT_POINTS = 5,
  OPE_STATUS_INVALID_ARGUMENT = 6,
  OPE_STATUS_LIMIT_EXCEEDED = 7,
  OPE_STATUS_INTERNAL = 8,
  OPE_STATUS_PANIC = 9,
  OPE_STATUS_SINGULAR_INPUT = 10,
} OpeStatus;

// Free OPE coefficient compiled for evaluation.
typedef struct OpeCoefficient OpeCoefficient;

// Theory handle.
typedef struct OpeTheory OpeTheory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on this thread.
const char *ope_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ope_version(void);

// Massive covariance `C(x)` with mass scale `mu`.
//
// # Safety
// `x` points to 4 doubles; `out` is writable.
enum OpeStatus ope_covariance(const double *x, double mu, double *out);

// Derivative `∂^u C(x)` for the multi-index `u` (4 entries).
//
// # Safety
// `u` points to 4 unsigned ints, `x` to 4 doubles; `out` is writable.
enum OpeStatus ope_covariance_deriv(const uint32_t *u, const double *x, double mu, double *out);

// Large-momentum exponent `g^(s)(dim, r, w)`.
double ope_gs(uint32_t s, double dim, uint32_t r, uint32_t w);

// Creates a theory from a preset name (`scalar`, `qed_free`, `dirac`).
//
// # Safety
// `name` is a NUL-terminated string; `out` is writable.
enum OpeStatus ope_theory_new(const char *name, struct OpeTheory **out);

// # Safety
// `t` is null or a handle from [`ope_theory_new`] not yet freed.
void ope_theory_free(struct OpeTheory *t);

// Free-theory coefficient of `B` in the product of `n` operators.
//
// # Safety
// `theory` is a live handle; `ops` points to `n` NUL-terminated strings;
// `b` is NUL-terminated; `out` is writable.
enum OpeStatus ope_coefficient_new(const struct OpeTheory *theory,
                                   const char *const *ops,
                                   size_t n,
                                   const char *b,
                                   double mu,
                                   struct OpeCoefficient **out);

// Number of monomials in the coefficient.
//
// # Safety
// `c` is a live handle.
size_t ope_coefficient_term_count(const struct OpeCoefficient *c);

// Evaluates at one point per operator, stored as `4·npoints` doubles; the
// last operator sits at the expansion point.
//
// # Safety
// `c` is a live handle; `points` holds `4·npoints` doubles; `out` is writable.
enum OpeStatus ope_coefficient_evaluate(const struct OpeCoefficient *c,
                                        const double *points,
                                        size_t npoints,
                                        double *out);

// # Safety
// `c` is null or a handle from [`ope_coefficient_new`] not yet freed.
void ope_coefficient_free(struct OpeCoefficient *c);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPE_H */
