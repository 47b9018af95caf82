#ifndef DIRMH_H
#define DIRMH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DirmhFamily {
  DIRMH_FAMILY_NORMAL = 0,
  DIRMH_FAMILY_BERNOULLI = 1,
  DIRMH_FAMILY_POISSON = 2,
} DirmhFamily;

typedef enum DirmhFlavor {
  DIRMH_FLAVOR_DMH = 0,
  DIRMH_FLAVOR_MALA = 1,
  DIRMH_FLAVOR_RWMH = 2,
} DirmhFlavor;

typedef enum DirmhStatus {
  DIRMH_STATUS_OK = 0,
  DIRMH_STATUS_NULL_POINTER = 1,
  DIRMH_STATUS_INVALID_ARGUMENT = 2,
  DIRMH_STATUS_INVALID_START = 3,
  DIRMH_STATUS_DIMENSION_MISMATCH = 4,
  DIRMH_STATUS_BUFFER_TOO_SMALL = 5,
  DIRMH_STATUS_NUMERIC = 6,
  DIRMH_STATUS_IO = 7,
  DIRMH_STATUS_PANIC = 8,
} DirmhStatus;

typedef struct DirmhChain DirmhChain;

typedef struct DirmhTarget DirmhTarget;

// Kernel tuning passed by value. `numeric_step > 0` switches to
// central-difference gradients with that step.
typedef struct DirmhKernel {
  enum DirmhFlavor flavor;
  double h;
  double s;
  double t;
  double numeric_step;
} DirmhKernel;

// Scalar diagnostics; undefined estimates are NaN.
typedef struct DirmhSummary {
  double acceptance_rate;
  double mess;
  double msjd;
  size_t n;
} DirmhSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *dirmh_last_error(void);

enum DirmhStatus dirmh_target_banana(double bananacity, size_t dim, struct DirmhTarget **out);

// Gaussian target; `cov` is `dim × dim`, row-major.
enum DirmhStatus dirmh_target_gaussian(const double *mean,
                                       const double *cov,
                                       size_t dim,
                                       struct DirmhTarget **out);

// GLM posterior over `(β, u)`; `x` is `n × p`, row-major.
enum DirmhStatus dirmh_target_glm(const double *x,
                                  const double *y,
                                  size_t n,
                                  size_t p,
                                  enum DirmhFamily family,
                                  double dispersion,
                                  double v_beta,
                                  double v_u,
                                  struct DirmhTarget **out);

void dirmh_target_free(struct DirmhTarget *target);

// Dimension of the target, or 0 for a null handle.
size_t dirmh_target_dim(const struct DirmhTarget *target);

enum DirmhStatus dirmh_target_log_density(const struct DirmhTarget *target,
                                          const double *x,
                                          size_t len,
                                          double *out);

enum DirmhStatus dirmh_target_grad(const struct DirmhTarget *target,
                                   const double *x,
                                   size_t len,
                                   double *grad);

enum DirmhStatus dirmh_run_chain(const struct DirmhTarget *target,
                                 struct DirmhKernel kernel,
                                 uint64_t seed,
                                 const double *x0,
                                 size_t len,
                                 size_t n_steps,
                                 size_t burn_in,
                                 size_t thin,
                                 struct DirmhChain **out);

// As [`dirmh_run_chain`], with `t` replaced by `exp(2·log_sigma)` and
// `log_sigma` adapted every `batch_size` steps toward `target_rate`.
enum DirmhStatus dirmh_run_adaptive_chain(const struct DirmhTarget *target,
                                          struct DirmhKernel kernel,
                                          uint64_t seed,
                                          const double *x0,
                                          size_t len,
                                          size_t n_steps,
                                          size_t burn_in,
                                          size_t thin,
                                          double log_sigma,
                                          double clamp,
                                          double target_rate,
                                          size_t batch_size,
                                          struct DirmhChain **out);

void dirmh_chain_free(struct DirmhChain *chain);

// Number of stored states, or 0 for a null handle.
size_t dirmh_chain_len(const struct DirmhChain *chain);

size_t dirmh_chain_dim(const struct DirmhChain *chain);

// Fraction of accepted proposals over all steps; NaN for a null handle.
double dirmh_chain_acceptance_rate(const struct DirmhChain *chain);

// Copy the stored states, row-major, into `buf` of length `len × dim`.
enum DirmhStatus dirmh_chain_states(const struct DirmhChain *chain, double *buf, size_t buf_len);

// Number of adaptation batches recorded (0 for non-adaptive chains).
size_t dirmh_chain_batches(const struct DirmhChain *chain);

// Per-batch `log_sigma` in force and the batch's acceptance rate.
enum DirmhStatus dirmh_chain_adaptation(const struct DirmhChain *chain,
                                        double *log_sigma,
                                        double *acceptance,
                                        size_t len);

// Diagnostics of the stored states. `batch_size == 0` selects `⌊√n⌋`.
// `ess` and `iact` must hold `dim` values each; undefined entries are NaN.
enum DirmhStatus dirmh_chain_diagnostics(const struct DirmhChain *chain,
                                         size_t batch_size,
                                         struct DirmhSummary *summary,
                                         double *ess,
                                         double *iact,
                                         size_t dim);

// Monte-Carlo estimate of `E[exp(τ(‖X₁‖ − ‖x‖))]` from `n_mc` single steps.
enum DirmhStatus dirmh_drift_ratio(const struct DirmhTarget *target,
                                   struct DirmhKernel kernel,
                                   const double *x,
                                   size_t len,
                                   double tau,
                                   size_t n_mc,
                                   uint64_t seed,
                                   double *mean,
                                   double *std_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIRMH_H */
