#ifndef DPTR_H
#define DPTR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DptrStatus {
  DPTR_STATUS_OK = 0,
  DPTR_STATUS_NULL_POINTER = 1,
  DPTR_STATUS_CONFIG_ERROR = 2,
  DPTR_STATUS_DATA_ERROR = 3,
  DPTR_STATUS_NUMERIC_ERROR = 4,
  /**
   * Output buffer length does not match the number of experiments.
   */
  DPTR_STATUS_BUFFER_LENGTH = 5,
  DPTR_STATUS_INVALID_UTF8 = 6,
  DPTR_STATUS_PANIC = 7,
} DptrStatus;

typedef enum DptrMethod {
  DPTR_METHOD_IHT = 0,
  DPTR_METHOD_DPTR = 1,
  DPTR_METHOD_DPTR_P = 2,
  DPTR_METHOD_BAYES = 3,
} DptrMethod;

/**
 * Opaque collection of per-experiment estimates.
 */
typedef struct DptrEstimates DptrEstimates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes). Returns the full message length.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null.
 */
size_t dptr_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dptr_version(void);

/**
 * Creates an empty estimates collection with significance level `alpha`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DptrStatus dptr_estimates_new(double alpha, struct DptrEstimates **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `h` must come from [`dptr_estimates_new`] and not be used afterwards.
 */
void dptr_estimates_free(struct DptrEstimates *h);

/**
 * Appends an estimate given its point value, variance `v` (so that the
 * standard error is `sqrt(v / n)`) and sample size. `b <= 0` means no
 * design factor.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum DptrStatus dptr_estimates_push(struct DptrEstimates *h,
                                    double tau_hat,
                                    double v,
                                    double b,
                                    size_t n);

/**
 * Appends the difference-in-means estimate of one two-arm experiment;
 * `treated[i]` is 0 or 1.
 *
 * # Safety
 * `h` must be a live handle; `y` and `treated` must hold `len` values.
 */
enum DptrStatus dptr_estimates_push_dm(struct DptrEstimates *h,
                                       const double *y,
                                       const uint8_t *treated,
                                       size_t len);

/**
 * Number of experiments held.
 *
 * # Safety
 * `h` and `out` must be valid.
 */
enum DptrStatus dptr_estimates_len(const struct DptrEstimates *h, size_t *out);

/**
 * Point estimate, variance and interval bounds of experiment `k` (0-based).
 * Any output pointer may be null.
 *
 * # Safety
 * `h` must be a live handle; non-null outputs must be valid.
 */
enum DptrStatus dptr_estimates_get(const struct DptrEstimates *h,
                                   size_t k,
                                   double *tau_hat,
                                   double *v,
                                   double *lb,
                                   double *ub);

/**
 * Cross-experiment anchor: the mean point estimate.
 *
 * # Safety
 * `h` and `out` must be valid.
 */
enum DptrStatus dptr_anchor(const struct DptrEstimates *h, double *out);

/**
 * Shared data-driven scale for per-experiment sample size `n`.
 *
 * # Safety
 * `h` and `out` must be valid.
 */
enum DptrStatus dptr_shared_beta(const struct DptrEstimates *h, double n, double *out);

/**
 * Personalized scales, one per experiment; every estimate needs a design
 * factor.
 *
 * # Safety
 * `h` must be valid; `out` must hold `len` doubles.
 */
enum DptrStatus dptr_personalized_betas(const struct DptrEstimates *h,
                                        double n,
                                        double *out,
                                        size_t len);

/**
 * Oracle scale for known parameters and design factor `b` (2 for a
 * balanced two-arm design).
 *
 * # Safety
 * `out` must be valid.
 */
enum DptrStatus dptr_oracle_beta(double tau0,
                                 double sigma0_sq,
                                 double sigma_sq,
                                 double n,
                                 double alpha,
                                 double b,
                                 double *out);

/**
 * Roll-out decision per experiment: `mask[k]` is set to 1 when experiment
 * `k` is selected and 0 otherwise. `n` is the per-experiment sample size
 * used by the data-driven scales.
 *
 * # Safety
 * `h` must be valid; `mask` must hold `len` bytes.
 */
enum DptrStatus dptr_decide(const struct DptrEstimates *h,
                            enum DptrMethod method,
                            double n,
                            uint8_t *mask,
                            size_t len);

/**
 * Runs a synthetic simulation from TOML config text and writes its output
 * files under `out_dir` (overriding the config's output directory).
 *
 * # Safety
 * Both strings must be valid NUL-terminated pointers.
 */
enum DptrStatus dptr_simulate_toml(const char *config_toml, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPTR_H */
