#ifndef PROFWEIGHT_FFI_H
#define PROFWEIGHT_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Simple-model kinds exposed through the C API.
 */
typedef enum {
  PwSimpleLogistic = 0,
  PwSimpleTree = 1,
  PwSimpleMlp = 2,
} PwSimpleKind;

/**
 * Status codes mirroring the CLI exit codes.
 */
typedef enum {
  PwOk = 0,
  PwErr = 1,
  PwErrConfig = 2,
  PwErrData = 3,
  PwErrEmptyProbeSet = 4,
  PwErrDivergence = 5,
  PwErrTheory = 6,
  PwErrNullArgument = 7,
  PwErrPanic = 8,
} PwStatus;

/**
 * Opaque dataset handle.
 */
typedef struct PwDataset PwDataset;

/**
 * Opaque frozen-model handle.
 */
typedef struct PwModel PwModel;

/**
 * Opaque probe-set handle.
 */
typedef struct PwProbes PwProbes;

/**
 * Opaque simple-model handle.
 */
typedef struct PwSimpleModel PwSimpleModel;

/**
 * Opaque weight-vector handle.
 */
typedef struct PwWeights PwWeights;

/**
 * Trainer settings shared by every differentiable model in the C API.
 */
typedef struct {
  double learning_rate;
  size_t batch_size;
  size_t epochs;
  double l2_penalty;
  double momentum;
  uint64_t seed;
} PwSgdConfig;

/**
 * Simple-model spec. `mlp_hidden` may be NULL unless kind is the MLP.
 */
typedef struct {
  PwSimpleKind kind;
  size_t tree_max_depth;
  const size_t *mlp_hidden;
  size_t mlp_hidden_len;
  PwSgdConfig sgd;
} PwSimpleSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the calling thread's most recent error. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *pw_last_error_message(void);

/**
 * Default trainer settings.
 */
PwSgdConfig pw_sgd_default(void);

/**
 * Build a dataset from a row-major feature array and a label array.
 *
 * # Safety
 * `features` must hold `rows * cols` doubles, `labels` must hold `rows`
 * entries below `num_classes`, and `out` must be a valid output slot.
 */
PwStatus pw_dataset_from_arrays(const double *features,
                                size_t rows,
                                size_t cols,
                                const size_t *labels,
                                size_t num_classes,
                                PwDataset **out);

/**
 * Generate the synthetic hard-regions dataset.
 *
 * # Safety
 * `out` must be a valid output slot.
 */
PwStatus pw_dataset_synth_hard_regions(size_t m, double noise_rate, uint64_t seed, PwDataset **out);

/**
 * Load a CSV dataset; the label column is given by index.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid output slot.
 */
PwStatus pw_dataset_load_csv(const char *path,
                             size_t label_column,
                             bool has_header,
                             PwDataset **out);

/**
 * Number of rows.
 *
 * # Safety
 * `dataset` must be a live handle from this library (or NULL).
 */
size_t pw_dataset_len(const PwDataset *dataset);

/**
 * Feature dimension.
 *
 * # Safety
 * `dataset` must be a live handle from this library (or NULL).
 */
size_t pw_dataset_dim(const PwDataset *dataset);

/**
 * Four-way split (complex-train, simple-train, validation, holdout).
 *
 * # Safety
 * All five handle arguments must be valid; each output slot receives a new
 * dataset the caller must free.
 */
PwStatus pw_dataset_split(const PwDataset *dataset,
                          double f_complex,
                          double f_simple,
                          double f_validation,
                          double f_holdout,
                          uint64_t seed,
                          bool sequential,
                          PwDataset **out_complex,
                          PwDataset **out_simple,
                          PwDataset **out_validation,
                          PwDataset **out_holdout);

/**
 * # Safety
 * `dataset` must come from this library and not yet be freed.
 */
void pw_dataset_free(PwDataset *dataset);

/**
 * Build and train the complex model on `d_n`, freezing it. Hidden units
 * are named h1..hk.
 *
 * # Safety
 * `hidden_widths` must hold `num_hidden` entries; `out` must be valid.
 */
PwStatus pw_model_train(const PwDataset *d_n,
                        const size_t *hidden_widths,
                        size_t num_hidden,
                        PwSgdConfig cfg,
                        PwModel **out);

/**
 * Holdout accuracy of the frozen model.
 *
 * # Safety
 * All pointers must be valid.
 */
PwStatus pw_model_accuracy(const PwModel *model, const PwDataset *dataset, double *out);

/**
 * # Safety
 * `model` and `path` must be valid.
 */
PwStatus pw_model_save_json(const PwModel *model, const char *path);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be valid.
 */
PwStatus pw_model_load_json(const char *path, PwModel **out);

/**
 * # Safety
 * `model` must come from this library and not yet be freed.
 */
void pw_model_free(PwModel *model);

/**
 * Train probes on every hidden unit of the frozen model, optionally
 * appending the model's own softmax head as the final probe, then record
 * each probe's error on `eval`.
 *
 * # Safety
 * All pointers must be valid.
 */
PwStatus pw_probes_train(const PwModel *model,
                         const PwDataset *d_n,
                         const PwDataset *eval,
                         PwSgdConfig cfg,
                         bool attach_output_head,
                         PwProbes **out);

/**
 * Number of probes in the set.
 *
 * # Safety
 * `probes` must be a live handle from this library (or NULL).
 */
size_t pw_probes_count(const PwProbes *probes);

/**
 * Copy the recorded probe errors into `errors_out` (length `len`).
 *
 * # Safety
 * `errors_out` must hold at least `len` doubles.
 */
PwStatus pw_probes_errors(const PwProbes *probes, double *errors_out, size_t len);

/**
 * # Safety
 * `probes` and `path` must be valid.
 */
PwStatus pw_probes_save_json(const PwProbes *probes, const char *path);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be valid.
 */
PwStatus pw_probes_load_json(const char *path, PwProbes **out);

/**
 * # Safety
 * `probes` must come from this library and not yet be freed.
 */
void pw_probes_free(PwProbes *probes);

/**
 * Last-layer confidence weights for the true labels.
 *
 * # Safety
 * All pointers must be valid.
 */
PwStatus pw_conf_weights(const PwModel *model, const PwDataset *d_s, PwWeights **out);

/**
 * Run the full profile-average pipeline: select probes by margin `alpha`,
 * average their true-label confidences, and train the simple model under
 * those weights. Both the weight vector and the trained model are
 * returned.
 *
 * # Safety
 * All pointers must be valid; `spec`'s embedded pointers must satisfy
 * their own contracts.
 */
PwStatus pw_profweight_auc(const PwModel *model,
                           const PwProbes *probes,
                           const PwDataset *d_s,
                           PwSimpleSpec spec,
                           double alpha,
                           PwWeights **out_weights,
                           PwSimpleModel **out_model);

/**
 * Number of per-sample weights.
 *
 * # Safety
 * `weights` must be a live handle from this library (or NULL).
 */
size_t pw_weights_len(const PwWeights *weights);

/**
 * Mean weight.
 *
 * # Safety
 * `weights` must be a live handle from this library (or NULL).
 */
double pw_weights_mean(const PwWeights *weights);

/**
 * Copy the weights into `out` (capacity `len`).
 *
 * # Safety
 * `out` must hold at least `len` doubles.
 */
PwStatus pw_weights_copy(const PwWeights *weights, double *out, size_t len);

/**
 * Write the two-column weight CSV.
 *
 * # Safety
 * `weights` and `path` must be valid.
 */
PwStatus pw_weights_save_csv(const PwWeights *weights, const char *path);

/**
 * Read a weight CSV produced by `pw_weights_save_csv`.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be valid.
 */
PwStatus pw_weights_load_csv(const char *path, PwWeights **out);

/**
 * # Safety
 * `weights` must come from this library and not yet be freed.
 */
void pw_weights_free(PwWeights *weights);

/**
 * Train a simple model, optionally with per-sample weights (NULL means
 * uniform).
 *
 * # Safety
 * `weights`, when non-NULL, must hold one entry per dataset row.
 */
PwStatus pw_simple_train(const PwDataset *d_s,
                         const double *weights,
                         PwSimpleSpec spec,
                         PwSimpleModel **out);

/**
 * Accuracy of a simple model on a dataset.
 *
 * # Safety
 * All pointers must be valid.
 */
PwStatus pw_simple_accuracy(const PwSimpleModel *model, const PwDataset *dataset, double *out);

/**
 * Predicted class for one feature vector of length `dim`.
 *
 * # Safety
 * `x` must hold `dim` doubles; `class_out` must be valid.
 */
PwStatus pw_simple_predict(const PwSimpleModel *model,
                           const double *x,
                           size_t dim,
                           size_t *class_out);

/**
 * # Safety
 * `model` and `path` must be valid.
 */
PwStatus pw_simple_save_json(const PwSimpleModel *model, const char *path);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be valid.
 */
PwStatus pw_simple_load_json(const char *path, PwSimpleModel **out);

/**
 * # Safety
 * `model` must come from this library and not yet be freed.
 */
void pw_simple_free(PwSimpleModel *model);

/**
 * Total variation distance between two strictly positive distributions of
 * dimension `n`.
 *
 * # Safety
 * `p` and `q` must hold `n` doubles; `out` must be valid.
 */
PwStatus pw_tv_distance(const double *p, const double *q, size_t n, double *out);

/**
 * Bayes error of the optimal classifier on a uniform two-class mixture.
 *
 * # Safety
 * `p` and `q` must hold `n` doubles; `out` must be valid.
 */
PwStatus pw_bayes_error_discrete(const double *p, const double *q, size_t n, double *out);

/**
 * Grid-verify the ratio-sum identity; writes the number of violating grid
 * points (0 means the check passed).
 *
 * # Safety
 * `p` and `r` must hold `n` doubles; `violations_out` must be valid.
 */
PwStatus pw_lemma_grid_verify(const double *p,
                              const double *r,
                              size_t n,
                              size_t resolution,
                              size_t *violations_out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* PROFWEIGHT_FFI_H */
