#ifndef PI3NN_H
#define PI3NN_H

/* Generated by cbindgen from the pi3nn-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of an FFI call. Anything other than `PI3NN_OK` leaves a
 * description in [`pi3nn_last_error`].
 */
typedef enum pi3nn_status {
  PI3NN_OK = 0,
  /**
   * A required pointer argument was null.
   */
  PI3NN_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  PI3NN_INVALID_UTF8 = 2,
  /**
   * Invalid configuration or argument values.
   */
  PI3NN_CONFIG_ERROR = 3,
  /**
   * Input data problems: files, parsing, non-finite values.
   */
  PI3NN_DATA_ERROR = 4,
  /**
   * A constant column made normalization impossible.
   */
  PI3NN_NORMALIZATION_ERROR = 5,
  /**
   * Training produced a non-finite loss.
   */
  PI3NN_DIVERGENCE = 6,
  /**
   * Duplicated ratios made an exceedance count unreachable.
   */
  PI3NN_TIE_ERROR = 7,
  /**
   * The confidence level asks for more exceedances than samples exist.
   */
  PI3NN_INFEASIBLE_GAMMA = 8,
  /**
   * A panic was caught at the FFI boundary.
   */
  PI3NN_PANIC = 9,
} pi3nn_status;

/**
 * Opaque dataset handle.
 */
typedef struct pi3nn_dataset pi3nn_dataset;

/**
 * Opaque handle for a fitted triplet.
 */
typedef struct pi3nn_triplet pi3nn_triplet;

/**
 * Network architecture and training settings for [`pi3nn_fit`].
 */
typedef struct pi3nn_fit_config {
  /**
   * Hidden layer widths; null uses a single layer of 100.
   */
  const size_t *hidden_widths;
  size_t n_hidden;
  double learning_rate;
  size_t epochs;
  /**
   * 0 trains full-batch.
   */
  size_t batch_size;
  double l1;
  double l2;
  uint64_t seed;
  /**
   * Enable the OOD-aware bias initialization.
   */
  bool ood_enabled;
  double ood_factor;
  /**
   * Pretraining epoch budget; 0 reuses `epochs`.
   */
  size_t ood_pretrain_epochs;
} pi3nn_fit_config;

/**
 * One solved confidence level.
 */
typedef struct pi3nn_gamma_solution {
  double gamma;
  double alpha;
  double beta;
} pi3nn_gamma_solution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static C string.
 */
const char *pi3nn_version(void);

/**
 * Message for the most recent failure on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *pi3nn_last_error(void);

/**
 * Build a dataset from a row-major `n x d` input matrix and `n` targets.
 */
enum pi3nn_status pi3nn_dataset_new(const double *x,
                                    size_t n,
                                    size_t d,
                                    const double *y,
                                    struct pi3nn_dataset **out);

/**
 * Load a dataset from a headed CSV file; `target` selects the target column
 * by name or zero-based index.
 */
enum pi3nn_status pi3nn_dataset_from_csv(const char *path,
                                         const char *target,
                                         struct pi3nn_dataset **out);

/**
 * Sample count and input dimensionality of a dataset.
 */
enum pi3nn_status pi3nn_dataset_shape(const struct pi3nn_dataset *ds, size_t *n, size_t *d);

void pi3nn_dataset_free(struct pi3nn_dataset *ds);

/**
 * Defaults: one hidden layer of 100, learning rate 0.01, 1000 full-batch
 * epochs, no penalties, OOD initialization off with factor 10.
 */
struct pi3nn_fit_config pi3nn_fit_config_default(void);

/**
 * Train the three networks and the median shift on `train`.
 */
enum pi3nn_status pi3nn_fit(const struct pi3nn_dataset *train,
                            const struct pi3nn_fit_config *config,
                            struct pi3nn_triplet **out);

void pi3nn_triplet_free(struct pi3nn_triplet *t);

/**
 * The shift added to the mean network to reach the median.
 */
double pi3nn_triplet_median_shift(const struct pi3nn_triplet *t);

enum pi3nn_status pi3nn_triplet_save_json(const struct pi3nn_triplet *t, const char *path);

enum pi3nn_status pi3nn_triplet_load_json(const char *path, struct pi3nn_triplet **out);

/**
 * Solve the scale coefficients for one confidence level against the
 * training set the triplet was fitted on. Never updates parameters.
 */
enum pi3nn_status pi3nn_solve_gamma(const struct pi3nn_triplet *t,
                                    const struct pi3nn_dataset *train,
                                    double gamma,
                                    struct pi3nn_gamma_solution *out);

/**
 * Interval band for a row-major `n x d` input batch in original target
 * units. Each output buffer must hold `n` doubles; pass null to skip one.
 */
enum pi3nn_status pi3nn_predict_interval(const struct pi3nn_triplet *t,
                                         struct pi3nn_gamma_solution sol,
                                         const double *x,
                                         size_t n,
                                         size_t d,
                                         double *lower,
                                         double *upper,
                                         double *point_mean,
                                         double *point_median,
                                         double *width);

/**
 * Confidence scores `min(mean training width / width(x), 1)` for a
 * row-major `n x d` batch; `scores` must hold `n` doubles.
 */
enum pi3nn_status pi3nn_confidence_scores(const struct pi3nn_triplet *t,
                                          struct pi3nn_gamma_solution sol,
                                          const struct pi3nn_dataset *train,
                                          const double *x,
                                          size_t n,
                                          size_t d,
                                          double *scores);

/**
 * Coverage: fraction of targets with `lower[i] <= y[i] <= upper[i]`.
 */
enum pi3nn_status pi3nn_picp(const double *lower,
                             const double *upper,
                             const double *y,
                             size_t n,
                             double *out);

/**
 * Mean interval width of `upper - lower`.
 */
enum pi3nn_status pi3nn_mpiw(const double *lower, const double *upper, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PI3NN_H */
