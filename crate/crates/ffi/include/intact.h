#ifndef INTACT_H
#define INTACT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes returned by every fallible function.
 */
typedef enum {
  INTACT_STATUS_OK = 0,
  INTACT_STATUS_NULL_POINTER = 1,
  INTACT_STATUS_SHAPE_MISMATCH = 2,
  INTACT_STATUS_NON_FINITE_INPUT = 3,
  INTACT_STATUS_EMPTY_VIEW = 4,
  INTACT_STATUS_NON_POSITIVE_SCALE = 5,
  INTACT_STATUS_SINGULAR_SYSTEM = 6,
  INTACT_STATUS_DIVERGENCE_DETECTED = 7,
  INTACT_STATUS_GRAM_NOT_PSD = 8,
  INTACT_STATUS_INDEX_OUT_OF_RANGE = 9,
  INTACT_STATUS_ZERO_REGULARIZER = 10,
  INTACT_STATUS_DEGENERATE_SIGNAL = 11,
  INTACT_STATUS_RANK_DEFICIENT = 12,
  INTACT_STATUS_EMPTY_TRAINING_SET = 13,
  INTACT_STATUS_DIMENSION_MISMATCH = 14,
  INTACT_STATUS_MISSING_INPUT = 15,
  INTACT_STATUS_INVALID_PARAMETER = 16,
  INTACT_STATUS_PARSE_ERROR = 17,
  INTACT_STATUS_IO_ERROR = 18,
  INTACT_STATUS_NEGATIVE_RESIDUAL = 19,
  INTACT_STATUS_INVALID_UTF8 = 20,
  INTACT_STATUS_BUFFER_TOO_SMALL = 21,
  INTACT_STATUS_PANIC = 99,
} IntactStatus;

/*
 Kernel selector for [`intact_kernel_fit`].
 */
typedef enum {
  INTACT_KERNEL_LINEAR = 0,
  INTACT_KERNEL_RBF = 1,
} IntactKernel;

/*
 A validated multi-view dataset.
 */
typedef struct IntactDataset IntactDataset;

/*
 An n×d latent embedding.
 */
typedef struct IntactEmbedding IntactEmbedding;

/*
 A trained model (linear or kernel), with the standardization of its training data if any.
 */
typedef struct IntactModel IntactModel;

/*
 Optimization hyperparameters; see [`intact_hyperparams_default`].
 */
typedef struct {
  /*
   Cauchy scale c (> 0).
   */
  double scale;
  /*
   C1, penalty on the view maps (>= 0).
   */
  double w_penalty;
  /*
   C2, penalty on latent points (>= 0).
   */
  double x_penalty;
  /*
   Latent dimension d (>= 1).
   */
  size_t latent_dim;
  size_t max_outer;
  size_t max_inner;
  double tol_obj;
  double tol_x;
  uint64_t seed;
} IntactHyperparams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failure on this thread, or NULL if the last
 call succeeded. The pointer stays valid until the next library call on
 the same thread.
 */
const char *intact_last_error(void);

/*
 Library defaults: c = 1, C1 = C2 = 1e-4, d = 3, 200 outer / 100 inner
 iterations, tolerances 1e-8, seed 0.
 */
IntactHyperparams intact_hyperparams_default(void);

/*
 Builds a dataset from `n_views` row-major matrices, view v of shape
 `n × dims[v]`. `labels` may be NULL; otherwise it holds `n` entries.
 */
IntactStatus intact_dataset_new(size_t n_views,
                                const double *const *views,
                                const size_t *dims,
                                size_t n,
                                const uint32_t *labels,
                                IntactDataset **out);

/*
 Replaces every view by its column-standardized version (zero mean, unit
 standard deviation).
 */
IntactStatus intact_dataset_standardize(IntactDataset *dataset);

void intact_dataset_free(IntactDataset *dataset);

/*
 Fits the linear model. On success `*out_model` and `*out_embedding` own new handles.
 */
IntactStatus intact_fit(const IntactDataset *dataset,
                        const IntactHyperparams *hyperparams,
                        IntactModel **out_model,
                        IntactEmbedding **out_embedding);

/*
 Fits the kernel model. For `INTACT_KERNEL_RBF`, `gamma <= 0` selects the
 per-view median heuristic.
 */
IntactStatus intact_kernel_fit(const IntactDataset *dataset,
                               const IntactHyperparams *hyperparams,
                               IntactKernel kernel,
                               double gamma,
                               IntactModel **out_model,
                               IntactEmbedding **out_embedding);

size_t intact_model_n_views(const IntactModel *model);

size_t intact_model_latent_dim(const IntactModel *model);

/*
 Feature dimension of view `v`, or 0 if the handle or index is invalid.
 */
size_t intact_model_view_dim(const IntactModel *model, size_t v);

/*
 Embeds one new example. `views[v]` points to `intact_model_view_dim(model, v)`
 values; `out_x` receives `intact_model_latent_dim(model)` values. Inputs are
 standardized first when the model was saved with a standardization record.
 */
IntactStatus intact_model_embed(const IntactModel *model,
                                const double *const *views,
                                double *out_x,
                                size_t out_len);

/*
 Writes the model to a text file.
 */
IntactStatus intact_model_save(const IntactModel *model, const char *path);

/*
 Reads a model file written by [`intact_model_save`] or `intact train`.
 */
IntactStatus intact_model_load(const char *path, IntactModel **out_model);

void intact_model_free(IntactModel *model);

/*
 Number of rows (`n`) and columns (`d`) of an embedding.
 */
IntactStatus intact_embedding_shape(const IntactEmbedding *embedding, size_t *out_n, size_t *out_d);

/*
 Copies the embedding into `out` in row-major order; `len` must be at least `n·d`.
 */
IntactStatus intact_embedding_copy(const IntactEmbedding *embedding, double *out, size_t len);

void intact_embedding_free(IntactEmbedding *embedding);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTACT_H */
