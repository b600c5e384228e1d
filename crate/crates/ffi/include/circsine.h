#ifndef CIRCSINE_H
#define CIRCSINE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsStatus {
  CsStatus_Ok = 0,
  CsStatus_NullPointer = 1,
  CsStatus_InvalidArgument = 2,
  CsStatus_Numerical = 3,
  CsStatus_OutOfRange = 4,
  CsStatus_Panic = 5,
} CsStatus;

/**
 * Hyperbolic Brownian motion started at `i`.
 */
typedef struct CsBrownian CsBrownian;

/**
 * Coupled walk read off a Brownian path, with the path's boundary limit.
 */
typedef struct CsCoupledPair CsCoupledPair;

/**
 * Indexed eigenvalues `lambda_k`, `-window <= k <= window + 1`.
 */
typedef struct CsSpectrum CsSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread. The pointer stays valid until
 * the next failing call on the same thread.
 */
const char *cs_last_error(void);

/**
 * Library version, a static string.
 */
const char *cs_version(void);

/**
 * New Brownian path with base step `2^-level` and extension cap
 * `horizon_cap`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum CsStatus cs_brownian_new(uint64_t seed,
                              uint32_t level,
                              double horizon_cap,
                              struct CsBrownian **out);

/**
 * Point of the path at time `t`.
 *
 * # Safety
 * `bm` must come from [`cs_brownian_new`]; `x` and `y` must be valid for
 * writes.
 */
enum CsStatus cs_brownian_point(struct CsBrownian *bm, double t, double *x, double *y);

/**
 * # Safety
 * `bm` must come from [`cs_brownian_new`] or be null.
 */
void cs_brownian_free(struct CsBrownian *bm);

/**
 * Coupled walk of `n` vertices at `beta` on the path of `bm`; the coupling
 * uniforms come from `seed`.
 *
 * # Safety
 * `bm` must come from [`cs_brownian_new`]; `out` must be valid for writes.
 */
enum CsStatus cs_coupled_pair_new(struct CsBrownian *bm,
                                  uint64_t seed,
                                  uintptr_t n,
                                  double beta,
                                  struct CsCoupledPair **out);

/**
 * Vertex `j` of the walk and its stopping time, `0 <= j < n`.
 *
 * # Safety
 * `pair` must come from [`cs_coupled_pair_new`]; the out pointers must be
 * valid for writes.
 */
enum CsStatus cs_coupled_pair_vertex(const struct CsCoupledPair *pair,
                                     uintptr_t j,
                                     double *x,
                                     double *y,
                                     double *tau);

/**
 * Boundary limit of the path; `is_infinite` is set instead of `value` for
 * the point at infinity.
 *
 * # Safety
 * `pair` must come from [`cs_coupled_pair_new`]; the out pointers must be
 * valid for writes.
 */
enum CsStatus cs_coupled_pair_limit(const struct CsCoupledPair *pair,
                                    double *value,
                                    bool *is_infinite);

/**
 * # Safety
 * `pair` must come from [`cs_coupled_pair_new`] or be null.
 */
void cs_coupled_pair_free(struct CsCoupledPair *pair);

/**
 * Spectrum of the operator of an independent Beta walk of `n` vertices,
 * computed from its transfer matrices.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum CsStatus cs_circ_spectrum(uint64_t seed,
                               uintptr_t n,
                               double beta,
                               uintptr_t window,
                               struct CsSpectrum **out);

/**
 * Window `w` of the index range `-w..=w+1`.
 *
 * # Safety
 * `s` must come from [`cs_circ_spectrum`]; `window` must be valid for writes.
 */
enum CsStatus cs_spectrum_window(const struct CsSpectrum *s, uintptr_t *window);

/**
 * Eigenvalue `lambda_k`, `-window <= k <= window + 1`.
 *
 * # Safety
 * `s` must come from [`cs_circ_spectrum`]; `lambda` must be valid for writes.
 */
enum CsStatus cs_spectrum_lambda(const struct CsSpectrum *s, int64_t k, double *lambda);

/**
 * # Safety
 * `s` must come from [`cs_circ_spectrum`] or be null.
 */
void cs_spectrum_free(struct CsSpectrum *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CIRCSINE_H */
