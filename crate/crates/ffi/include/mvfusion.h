#ifndef MVFUSION_H
#define MVFUSION_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MvStatus {
  MV_STATUS_OK = 0,
  MV_STATUS_NULL_POINTER = 1,
  MV_STATUS_INVALID_UTF8 = 2,
  MV_STATUS_BUFFER_SIZE = 3,
  MV_STATUS_CONFIG = 10,
  MV_STATUS_RANGE = 11,
  MV_STATUS_PARSE = 12,
  MV_STATUS_DIMENSION = 13,
  MV_STATUS_DATA = 14,
  MV_STATUS_IO = 15,
  MV_STATUS_LABEL = 16,
  MV_STATUS_EMPTY = 17,
  MV_STATUS_DEGENERATE = 20,
  MV_STATUS_SINGULAR = 21,
  MV_STATUS_UNFITTED = 22,
  MV_STATUS_NUMERIC = 23,
  MV_STATUS_PANIC = 99,
} MvStatus;

typedef enum MvMatrixFormat {
  MV_MATRIX_FORMAT_CSV = 0,
  MV_MATRIX_FORMAT_FMAT = 1,
} MvMatrixFormat;

typedef enum MvFuseMode {
  MV_FUSE_MODE_SUM = 0,
  MV_FUSE_MODE_CONCAT = 1,
} MvFuseMode;

typedef enum MvLoss {
  MV_LOSS_HINGE_L1 = 1,
  MV_LOSS_HINGE_L2 = 2,
} MvLoss;

typedef struct MvCca MvCca;

typedef struct MvMatrix MvMatrix;

typedef struct MvMccaPlan MvMccaPlan;

typedef struct MvSvm MvSvm;

/**
 * Training settings; fill with [`mv_svm_config_default`] then adjust.
 */
typedef struct MvSvmConfig {
  double c_penalty;
  enum MvLoss loss;
  size_t batch_size;
  double momentum;
  double weight_decay;
  double lr_initial;
  double lr_decay_factor;
  size_t max_lr_decays;
  size_t patience_epochs;
  size_t max_epochs;
  double plateau_rel_tol;
  uint64_t seed;
} MvSvmConfig;

typedef struct MvClassMetrics {
  double single_accuracy;
  double error_single;
  double total_accuracy;
  double error_total;
  double sensitivity;
  double specificity;
  double precision;
  double fpr;
  bool degenerate;
} MvClassMetrics;

typedef struct MvOverallMetrics {
  double accuracy;
  double error;
  double sensitivity;
  double specificity;
  double precision;
  double fpr;
} MvOverallMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *mv_last_error(void);

/**
 * # Safety
 * `data` must hold `rows * cols` doubles in row-major order; `out` must be writable.
 */
enum MvStatus mv_matrix_new(size_t rows, size_t cols, const double *data, struct MvMatrix **out);

/**
 * # Safety
 * `m` must be a live handle or null.
 */
size_t mv_matrix_rows(const struct MvMatrix *m);

/**
 * # Safety
 * `m` must be a live handle or null.
 */
size_t mv_matrix_cols(const struct MvMatrix *m);

/**
 * Copies the matrix row-major into `out`, which holds `len` doubles.
 *
 * # Safety
 * `m` must be a live handle; `out` must hold `len` writable doubles.
 */
enum MvStatus mv_matrix_copy(const struct MvMatrix *m, double *out, size_t len);

/**
 * # Safety
 * `file` must be a NUL-terminated path; `out` must be writable.
 */
enum MvStatus mv_matrix_load(const char *file, enum MvMatrixFormat format, struct MvMatrix **out);

/**
 * # Safety
 * `m` must be a live handle; `file` a NUL-terminated path.
 */
enum MvStatus mv_matrix_save(const struct MvMatrix *m,
                             const char *file,
                             enum MvMatrixFormat format);

/**
 * Numerical rank; `tol <= 0` selects the default tolerance.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum MvStatus mv_matrix_rank(const struct MvMatrix *m, double tol, size_t *out);

/**
 * # Safety
 * `m` must come from this library and not be used afterwards.
 */
void mv_matrix_free(struct MvMatrix *m);

/**
 * # Safety
 * `x`, `y` must be live handles with equal column counts; `out` writable.
 */
enum MvStatus mv_cca_fit(const struct MvMatrix *x,
                         const struct MvMatrix *y,
                         double ridge_rel,
                         struct MvCca **out);

/**
 * Number of canonical pairs kept, 0 for null.
 *
 * # Safety
 * `t` must be a live handle or null.
 */
size_t mv_cca_rank(const struct MvCca *t);

/**
 * Copies the canonical correlations (non-increasing) into `out`.
 *
 * # Safety
 * `t` must be a live handle; `out` must hold `len` writable doubles.
 */
enum MvStatus mv_cca_correlations(const struct MvCca *t, double *out, size_t len);

/**
 * Projects `x` and `y` and fuses the canonical variates.
 *
 * # Safety
 * All handles must be live; `out` writable.
 */
enum MvStatus mv_cca_fuse(const struct MvCca *t,
                          const struct MvMatrix *x,
                          const struct MvMatrix *y,
                          enum MvFuseMode mode,
                          struct MvMatrix **out);

/**
 * # Safety
 * `t` must be a live handle; `file` a NUL-terminated path.
 */
enum MvStatus mv_cca_save(const struct MvCca *t, const char *file);

/**
 * # Safety
 * `file` must be a NUL-terminated path; `out` writable.
 */
enum MvStatus mv_cca_load(const char *file, struct MvCca **out);

/**
 * # Safety
 * `t` must come from this library and not be used afterwards.
 */
void mv_cca_free(struct MvCca *t);

/**
 * Fits the multi-set fusion on `count` views and returns the plan and the
 * fused training features.
 *
 * # Safety
 * `views` must hold `count` live handles; `plan_out` and `fused_out` writable.
 */
enum MvStatus mv_mcca_fit(const struct MvMatrix *const *views_ptr,
                          size_t count,
                          enum MvFuseMode mode,
                          double ridge_rel,
                          struct MvMccaPlan **plan_out,
                          struct MvMatrix **fused_out);

/**
 * # Safety
 * `plan` must be live; `views` must hold `count` live handles; `out` writable.
 */
enum MvStatus mv_mcca_apply(const struct MvMccaPlan *plan,
                            const struct MvMatrix *const *views_ptr,
                            size_t count,
                            struct MvMatrix **out);

/**
 * Number of fusion stages, 0 for null.
 *
 * # Safety
 * `plan` must be a live handle or null.
 */
size_t mv_mcca_stage_count(const struct MvMccaPlan *plan);

/**
 * Writes stage `stage`'s input set ids (inputs are `0..λ`, stage outputs
 * `λ..`).
 *
 * # Safety
 * `plan` must be live; `left` and `right` writable.
 */
enum MvStatus mv_mcca_stage_pair(const struct MvMccaPlan *plan,
                                 size_t stage,
                                 size_t *left,
                                 size_t *right);

/**
 * # Safety
 * `plan` must come from this library and not be used afterwards.
 */
void mv_mcca_free(struct MvMccaPlan *plan);

/**
 * # Safety
 * `out` must be writable.
 */
enum MvStatus mv_svm_config_default(struct MvSvmConfig *out);

/**
 * One-vs-rest training on the columns of `data`.
 *
 * # Safety
 * `data` must be live; `labels` must hold one entry per column; `cfg` readable; `out` writable.
 */
enum MvStatus mv_svm_train(const struct MvMatrix *data,
                           const size_t *labels,
                           size_t n_labels,
                           size_t classes,
                           const struct MvSvmConfig *cfg,
                           struct MvSvm **out);

/**
 * Predicted class per column of `data` into `labels_out`.
 *
 * # Safety
 * `model` and `data` must be live; `labels_out` must hold `len` writable entries.
 */
enum MvStatus mv_svm_predict(const struct MvSvm *model,
                             const struct MvMatrix *data,
                             size_t *labels_out,
                             size_t len);

/**
 * # Safety
 * `model` must be a live handle or null.
 */
size_t mv_svm_classes(const struct MvSvm *model);

/**
 * # Safety
 * `model` must be live; `file` a NUL-terminated path.
 */
enum MvStatus mv_svm_save(const struct MvSvm *model, const char *file);

/**
 * # Safety
 * `file` must be a NUL-terminated path; `out` writable.
 */
enum MvStatus mv_svm_load(const char *file, struct MvSvm **out);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void mv_svm_free(struct MvSvm *model);

/**
 * Gradient of one sample's hinge term with respect to its input `m`.
 *
 * # Safety
 * `w`, `m` and `out` must each hold `dim` doubles; `cfg` readable.
 */
enum MvStatus mv_svm_grad_input(const double *w,
                                const double *m,
                                size_t dim,
                                double target,
                                const struct MvSvmConfig *cfg,
                                double *out);

/**
 * Per-class metrics into `per_class` (`classes` entries) and the overall
 * row into `overall`; either output may be null.
 *
 * # Safety
 * `actual` and `predicted` must hold `n` entries; non-null outputs writable.
 */
enum MvStatus mv_metrics(const size_t *actual,
                         const size_t *predicted,
                         size_t n,
                         size_t classes,
                         struct MvClassMetrics *per_class,
                         struct MvOverallMetrics *overall);

/**
 * Weight count `depth · k² · channels²` of a conv stack.
 *
 * # Safety
 * `out` must be writable.
 */
enum MvStatus mv_netspec_params(uint64_t filter_size,
                                uint64_t depth,
                                uint64_t channels,
                                uint64_t *out);

/**
 * Receptive field of `count` layers with the given filter sizes and strides.
 *
 * # Safety
 * `filters` and `strides` must hold `count` entries; `out` writable.
 */
enum MvStatus mv_netspec_receptive_field(const uint64_t *filters,
                                         const uint64_t *strides,
                                         size_t count,
                                         uint64_t *out);

/**
 * Replaces `floor(level·h·w)` pixels of a row-major `h × w` patch with
 * uniform draws over `[lo, hi]`, writing the result to `out`.
 *
 * # Safety
 * `pixels` and `out` must each hold `h * w` doubles.
 */
enum MvStatus mv_noise_inject(const double *pixels,
                              size_t h,
                              size_t w,
                              double lo,
                              double hi,
                              double level,
                              uint64_t seed,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVFUSION_H */
