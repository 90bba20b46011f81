#ifndef INSTAFFECT_H
#define INSTAFFECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Samples per audio window (60 ms at 44.1 kHz).
 */
#define IA_AUDIO_WINDOW 2646

typedef enum IaStatus {
  IA_STATUS_OK = 0,
  IA_STATUS_NULL_POINTER = 1,
  IA_STATUS_INVALID_ARGUMENT = 2,
  IA_STATUS_SHAPE = 3,
  IA_STATUS_IO = 4,
  IA_STATUS_FORMAT = 5,
  IA_STATUS_MISSING_ARTIFACT = 6,
  IA_STATUS_NUMERIC = 7,
  IA_STATUS_UNDEFINED = 8,
  IA_STATUS_PANIC = 9,
} IaStatus;

/**
 * Opaque stream CNN.
 */
typedef struct IaNetwork IaNetwork;

/**
 * Opaque frame-to-rating predictor loaded from a pipeline work directory.
 */
typedef struct IaPredictor IaPredictor;

/**
 * Opaque trained SVR.
 */
typedef struct IaSvrModel IaSvrModel;

typedef struct IaEvalReport {
  size_t n;
  double rmse;
  double mae;
  /**
   * Meaningful only when `cc_defined` is true (both series vary).
   */
  double cc;
  bool cc_defined;
  double ccc;
} IaEvalReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *ia_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ia_version(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum IaStatus ia_svr_model_load(const char *path, struct IaSvrModel **out);

/**
 * # Safety
 * `model` must come from [`ia_svr_model_load`]; `out` must be writable.
 */
enum IaStatus ia_svr_model_dim(const struct IaSvrModel *model, size_t *out);

/**
 * Predicts the rating for one feature vector of `len` values, which must
 * equal the model dimension.
 *
 * # Safety
 * `x` must point to `len` readable doubles; `out` must be writable.
 */
enum IaStatus ia_svr_model_predict(const struct IaSvrModel *model,
                                   const double *x,
                                   size_t len,
                                   double *out);

/**
 * # Safety
 * `model` must be null or come from [`ia_svr_model_load`], and is invalid afterwards.
 */
void ia_svr_model_free(struct IaSvrModel *model);

/**
 * Loads a stream CNN written by the `train-cnn` stage.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum IaStatus ia_network_load(const char *path, struct IaNetwork **out);

/**
 * Number of input values per sample (channels times spatial extent).
 *
 * # Safety
 * `net` must come from [`ia_network_load`]; `out` must be writable.
 */
enum IaStatus ia_network_input_len(const struct IaNetwork *net, size_t *out);

/**
 * # Safety
 * `net` must come from [`ia_network_load`]; `out` must be writable.
 */
enum IaStatus ia_network_feature_width(const struct IaNetwork *net, size_t *out);

/**
 * Writes the learned feature vector of one sample into `out`, which must
 * hold exactly the feature width.
 *
 * # Safety
 * `sample` must point to `len` floats and `out` to `out_len` writable doubles.
 */
enum IaStatus ia_network_extract(const struct IaNetwork *net,
                                 const float *sample,
                                 size_t len,
                                 double *out,
                                 size_t out_len);

/**
 * # Safety
 * `net` must be null or come from [`ia_network_load`], and is invalid afterwards.
 */
void ia_network_free(struct IaNetwork *net);

/**
 * Loads the trained artifacts of a pipeline work directory (after `fit-svr`).
 *
 * # Safety
 * `work_dir` must be a NUL-terminated string; `out` must be writable.
 */
enum IaStatus ia_predictor_open(const char *work_dir, struct IaPredictor **out);

/**
 * Predicts the rating of one frame: `frame` holds H*W pixels in [0, 1]
 * (row-major, as the video stream expects) and `audio` the frame's
 * [`IA_AUDIO_WINDOW`] samples in [-1, 1].
 *
 * # Safety
 * `frame` and `audio` must point to `frame_len` and `audio_len` floats;
 * `out` must be writable.
 */
enum IaStatus ia_predictor_predict(const struct IaPredictor *predictor,
                                   const float *frame,
                                   size_t frame_len,
                                   const float *audio,
                                   size_t audio_len,
                                   double *out);

/**
 * # Safety
 * `predictor` must be null or come from [`ia_predictor_open`], and is invalid afterwards.
 */
void ia_predictor_free(struct IaPredictor *predictor);

/**
 * RMSE, MAE, CC and CCC of `n` predictions against `n` ground-truth values.
 *
 * # Safety
 * `pred` and `truth` must point to `n` doubles; `out` must be writable.
 */
enum IaStatus ia_evaluate(const double *pred,
                          const double *truth,
                          size_t n,
                          struct IaEvalReport *out);

/**
 * Mutual information in nats between two level sequences of length `n`,
 * with levels in `[0, bins_a)` and `[0, bins_b)`.
 *
 * # Safety
 * `a` and `b` must point to `n` values; `out` must be writable.
 */
enum IaStatus ia_mutual_information(const size_t *a,
                                    const size_t *b,
                                    size_t n,
                                    size_t bins_a,
                                    size_t bins_b,
                                    double *out);

/**
 * Copies audio window `index` (zero-padded past the end of the signal) into
 * `out`, which must hold [`IA_AUDIO_WINDOW`] samples.
 *
 * # Safety
 * `samples` must point to `n` floats and `out` to `out_len` writable floats.
 */
enum IaStatus ia_audio_window(const float *samples,
                              size_t n,
                              size_t index,
                              float *out,
                              size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INSTAFFECT_H */
