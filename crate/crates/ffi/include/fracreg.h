#ifndef FRACREG_H
#define FRACREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FracregStatus {
  FRACREG_STATUS_OK = 0,
  FRACREG_STATUS_NULL_POINTER = 1,
  FRACREG_STATUS_INVALID_ARGUMENT = 2,
  FRACREG_STATUS_DOMAIN = 3,
  FRACREG_STATUS_DIMENSION = 4,
  FRACREG_STATUS_CONFIG = 5,
  FRACREG_STATUS_REGION = 6,
  FRACREG_STATUS_FACTORIZATION = 7,
  FRACREG_STATUS_EMBEDDING = 8,
  FRACREG_STATUS_RESOURCE = 9,
  FRACREG_STATUS_IO = 10,
  FRACREG_STATUS_JSON = 11,
  FRACREG_STATUS_PANIC = 12,
} FracregStatus;

typedef enum FracregGeneratorKind {
  FRACREG_GENERATOR_KIND_CIRCULANT = 0,
  FRACREG_GENERATOR_KIND_CHOLESKY = 1,
} FracregGeneratorKind;

// Path sampler bound to one step count and Hurst index.
typedef struct FracregGenerator FracregGenerator;

// Open interval `(lower, upper)` of admissible bandwidth exponents.
typedef struct FracregRegion {
  double lower;
  double upper;
  bool nonempty;
} FracregRegion;

// Statistic, bracket and conditional variance of one path pair, raw and normalized.
typedef struct FracregStatistic {
  double s_n;
  double bracket;
  double a_n;
  double s_n_normalized;
  double bracket_normalized;
} FracregStatistic;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// Valid until the next call into this library on the same thread.
const char *fracreg_last_error_message(void);

// Library version as a static string.
const char *fracreg_version(void);

// # Safety
// `out` must be null or valid for one write.
enum FracregStatus fracreg_fbm_covariance(double t, double s, double h, double *out);

// # Safety
// `out` must be null or valid for one write.
enum FracregStatus fracreg_fgn_autocovariance(uint64_t lag, double h, double *out);

// # Safety
// `out` must be null or valid for one write.
enum FracregStatus fracreg_heat_kernel(double x, double eps, double *out);

// `∫K² = 1/(2√π)`.
double fracreg_kernel_l2_norm(void);

// # Safety
// `out` must be null or valid for one write.
enum FracregStatus fracreg_c1_constant(double h1, double *out);

// # Safety
// `out` must be null or valid for one write.
enum FracregStatus fracreg_expected_local_time(double h, double *out);

// # Safety
// `out` must be null or valid for one write.
enum FracregStatus fracreg_admissible_region(double h1, double h2, struct FracregRegion *out);

// Order-`order` chaos partial sum of `p_eps` at `z`.
//
// # Safety
// `out` must be null or valid for one write.
enum FracregStatus fracreg_chaos_eval(double z,
                                      double eps,
                                      double phi_norm_sq,
                                      size_t order,
                                      double *out);

// Exact `E Σ K²(n^α(B_i − x0))`.
//
// # Safety
// `out` must be null or valid for one write.
enum FracregStatus fracreg_exact_diagonal(double h1,
                                          double h2,
                                          double alpha,
                                          size_t n,
                                          double *out);

// Exact off-diagonal part of `E S_n²`; O(n²).
//
// # Safety
// `out` must be null or valid for one write.
enum FracregStatus fracreg_exact_offdiagonal(double h1,
                                             double h2,
                                             double alpha,
                                             size_t n,
                                             double *out);

// Statistic of two paths of `len = n + 1` points each, starting at zero.
//
// # Safety
// `path1` and `path2` must each be null or point to `len` readable doubles;
// `out` must be null or valid for one write.
enum FracregStatus fracreg_compute_statistic(double h1,
                                             double h2,
                                             double alpha,
                                             double x0,
                                             const double *path1,
                                             const double *path2,
                                             size_t len,
                                             struct FracregStatistic *out);

// Builds a generator for `n`-step paths. `kind` is a
// [`FracregGeneratorKind`] value.
//
// # Safety
// `out` must be null or valid for one write. The handle written there must
// be released with [`fracreg_generator_free`].
enum FracregStatus fracreg_generator_new(int32_t kind,
                                         size_t n,
                                         double h,
                                         struct FracregGenerator **out);

// # Safety
// `generator` must be null or a handle from [`fracreg_generator_new`] not yet freed.
void fracreg_generator_free(struct FracregGenerator *generator);

// Step count `n` of the generator, or 0 for a null handle.
//
// # Safety
// `generator` must be null or a live handle.
size_t fracreg_generator_steps(const struct FracregGenerator *generator);

// Samples the path of `replicate` under `master_seed` into `out`, which
// holds `len = n + 1` doubles. Same inputs give the same path.
//
// # Safety
// `generator` must be null or a live handle; `out` must be null or valid
// for `len` writes.
enum FracregStatus fracreg_generator_sample(const struct FracregGenerator *generator,
                                            uint64_t master_seed,
                                            uint64_t replicate,
                                            double *out,
                                            size_t len);

// Runs one experiment (`variance`, `bracket`, `limit`, `conditional` or
// `riemann`) from a JSON plan and returns the JSON report. The report
// string must be released with [`fracreg_string_free`].
//
// # Safety
// `experiment` and `plan_json` must be null or NUL-terminated strings;
// `out_json` must be null or valid for one write.
enum FracregStatus fracreg_run_experiment(const char *experiment,
                                          const char *plan_json,
                                          char **out_json);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void fracreg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACREG_H */
