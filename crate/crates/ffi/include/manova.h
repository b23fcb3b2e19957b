#ifndef MANOVA_H
#define MANOVA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ManovaStatus {
  ManovaStatus_Ok = 0,
  ManovaStatus_NullPointer = 1,
  ManovaStatus_InvalidParams = 2,
  ManovaStatus_Domain = 3,
  ManovaStatus_NonConvergence = 4,
  ManovaStatus_LeftUpperHalfPlane = 5,
  ManovaStatus_Singular = 6,
  ManovaStatus_Eigensolver = 7,
  ManovaStatus_Singularity = 8,
  ManovaStatus_EmptyWindow = 9,
  ManovaStatus_Validation = 10,
  ManovaStatus_ExperimentThreshold = 11,
  ManovaStatus_BufferTooSmall = 12,
  ManovaStatus_Panic = 13,
} ManovaStatus;

typedef enum ManovaLaw {
  ManovaLaw_Manova = 0,
  ManovaLaw_Product = 1,
  ManovaLaw_MarchenkoPastur = 2,
  ManovaLaw_InverseWishart = 3,
} ManovaLaw;

typedef enum ManovaDistribution {
  ManovaDistribution_ComplexGaussian = 0,
  ManovaDistribution_RealGaussian = 1,
  ManovaDistribution_Rademacher = 2,
  ManovaDistribution_Uniform = 3,
  ManovaDistribution_Laplace = 4,
} ManovaDistribution;

/**
 * Which coordinates a spectrum's eigenvalues are reported in.
 */
typedef enum ManovaCoordinates {
  ManovaCoordinates_Manova = 0,
  ManovaCoordinates_Product = 1,
} ManovaCoordinates;

/**
 * Opaque fixed-point solver for the product-matrix Stieltjes transform.
 */
typedef struct ManovaSolver ManovaSolver;

/**
 * Opaque sampled spectrum, held in both coordinate systems.
 */
typedef struct ManovaSpectrum ManovaSpectrum;

typedef struct ManovaEdges {
  double lambda_minus;
  double lambda_plus;
  double mu_minus;
  double mu_plus;
  double a_minus;
  double a_plus;
} ManovaEdges;

typedef struct ManovaComplex {
  double re;
  double im;
} ManovaComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *manova_last_error(void);

/**
 * Support edges of the MANOVA, product and inverse-Wishart laws.
 *
 * # Safety
 * `out` must point to writable memory for one `ManovaEdges`.
 */
enum ManovaStatus manova_support_edges(double a, double b, struct ManovaEdges *out);

/**
 * Limiting density of `law` at `x`.
 *
 * # Safety
 * `out` must point to a writable `double`.
 */
enum ManovaStatus manova_density(enum ManovaLaw law, double a, double b, double x, double *out);

/**
 * Closed-form MANOVA Stieltjes transform at `re + i im`, `im != 0`.
 *
 * # Safety
 * `out` must point to writable memory for one `ManovaComplex`.
 */
enum ManovaStatus manova_stieltjes(double a,
                                   double b,
                                   double re,
                                   double im,
                                   struct ManovaComplex *out);

/**
 * Create a solver. `tol <= 0` selects the default tolerance.
 *
 * # Safety
 * `out` must point to writable memory for one pointer. On success it receives
 * a handle to be released with [`manova_solver_free`].
 */
enum ManovaStatus manova_solver_new(double a, double b, double tol, struct ManovaSolver **out);

/**
 * Product-matrix Stieltjes transform at `re + i im`, `im != 0`.
 *
 * # Safety
 * `solver` must be a live handle from [`manova_solver_new`]; `out` must be writable.
 */
enum ManovaStatus manova_solver_solve(const struct ManovaSolver *solver,
                                      double re,
                                      double im,
                                      struct ManovaComplex *out);

/**
 * Stability margin `1 - |K_hat|` at `re + i im`, `im > 0`.
 *
 * # Safety
 * `solver` must be a live handle from [`manova_solver_new`]; `out` must be writable.
 */
enum ManovaStatus manova_solver_stability_margin(const struct ManovaSolver *solver,
                                                 double re,
                                                 double im,
                                                 double *out);

/**
 * # Safety
 * `solver` must be null or a handle from [`manova_solver_new`] not yet freed.
 */
void manova_solver_free(struct ManovaSolver *solver);

/**
 * Sample one `(X, Y)` pair and compute its spectrum.
 *
 * # Safety
 * `out` must point to writable memory for one pointer. On success it receives
 * a handle to be released with [`manova_spectrum_free`].
 */
enum ManovaStatus manova_spectrum_sample(uintptr_t n,
                                         double a,
                                         double b,
                                         enum ManovaDistribution dist,
                                         uint64_t master_seed,
                                         uint64_t trial_index,
                                         struct ManovaSpectrum **out);

/**
 * Number of eigenvalues, or 0 for a null handle.
 *
 * # Safety
 * `spectrum` must be null or a live handle.
 */
uintptr_t manova_spectrum_len(const struct ManovaSpectrum *spectrum);

/**
 * Copy the ascending eigenvalues into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `spectrum` must be a live handle; `buf` must be writable for `len` doubles.
 */
enum ManovaStatus manova_spectrum_eigenvalues(const struct ManovaSpectrum *spectrum,
                                              enum ManovaCoordinates coords,
                                              double *buf,
                                              uintptr_t len);

/**
 * Empirical Stieltjes transform of the spectrum at `re + i im`.
 *
 * # Safety
 * `spectrum` must be a live handle; `out` must be writable.
 */
enum ManovaStatus manova_spectrum_stieltjes(const struct ManovaSpectrum *spectrum,
                                            enum ManovaCoordinates coords,
                                            double re,
                                            double im,
                                            struct ManovaComplex *out);

/**
 * # Safety
 * `spectrum` must be null or a handle from [`manova_spectrum_sample`] not yet freed.
 */
void manova_spectrum_free(struct ManovaSpectrum *spectrum);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MANOVA_H */
