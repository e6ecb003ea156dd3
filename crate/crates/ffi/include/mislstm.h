#ifndef MISLSTM_H
#define MISLSTM_H

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every fallible function.
 */
enum mislstm_status
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  MISLSTM_OK = 0,
  MISLSTM_ERR_INVALID_ARGUMENT = 1,
  MISLSTM_ERR_IO = 2,
  MISLSTM_ERR_DATA = 3,
  MISLSTM_ERR_PANIC = 4,
};
#ifndef __cplusplus
typedef int32_t mislstm_status;
#endif // __cplusplus

/*
 Voting strategies for [`mislstm_pool_vote`].
 */
enum mislstm_vote_method
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  MISLSTM_VOTE_SOFT = 0,
  MISLSTM_VOTE_HARD = 1,
  MISLSTM_VOTE_UALRE = 2,
};
#ifndef __cplusplus
typedef int32_t mislstm_vote_method;
#endif // __cplusplus

/*
 Opaque handle to a loaded checkpoint.
 */
typedef struct mislstm_model mislstm_model;

/*
 Opaque handle to an aligned pool of per-model day logits.
 */
typedef struct mislstm_pool mislstm_pool;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *mislstm_version(void);

/*
 Copy the last error message for this thread into `buf` (truncated to
 `len - 1` bytes, always NUL-terminated). Returns the full message
 length, or -1 when `buf` is null or `len` is 0.
 */
ptrdiff_t mislstm_last_error_message(char *buf, size_t len);

/*
 Load a checkpoint directory (`params.bin` + `meta.json`).

 # Safety
 `checkpoint_dir` must be a valid NUL-terminated path and `out` a valid
 pointer; the returned handle must be freed with `mislstm_model_free`.
 */
mislstm_status mislstm_model_load(const char *checkpoint_dir, struct mislstm_model **out);

/*
 Free a model handle (null is a no-op).

 # Safety
 `model` must come from `mislstm_model_load` and not be used afterwards.
 */
void mislstm_model_free(struct mislstm_model *model);

/*
 Number of subjects the checkpoint was trained with, or -1 on null.

 # Safety
 `model` must be a live handle from `mislstm_model_load`.
 */
int32_t mislstm_model_subject_count(const struct mislstm_model *model);

/*
 Run one preprocessed day through the model.

 `continuous` holds 7x1440 standardized values (row-major), `discrete`
 9x144 scaled counts, `subject` a 0-based id or -1 for an unseen
 participant. `out_logits` receives 13 raw scores in head order
 (Q1 Q2 Q3 | S1 x3 | S2 S3).

 # Safety
 Pointers must reference buffers of the documented sizes.
 */
mislstm_status mislstm_model_predict_day(const struct mislstm_model *model,
                                         const float *continuous,
                                         const float *discrete,
                                         int32_t subject,
                                         float *out_logits);

/*
 Argmax the 13 raw scores of `logits` into 6 class indices.

 # Safety
 `logits` must hold 13 floats and `out_classes` 6 bytes.
 */
mislstm_status mislstm_logits_to_classes(const float *logits, uint8_t *out_classes);

/*
 Build an ensemble pool from a flat logit array laid out as
 `[model][day][13]`. `best_index` selects the reference model.

 # Safety
 `logits` must hold `n_models * n_days * 13` floats; the handle must be
 freed with `mislstm_pool_free`.
 */
mislstm_status mislstm_pool_create(size_t n_models,
                                   size_t n_days,
                                   const float *logits,
                                   size_t best_index,
                                   struct mislstm_pool **out);

/*
 Free a pool handle (null is a no-op).

 # Safety
 `pool` must come from `mislstm_pool_create` and not be used afterwards.
 */
void mislstm_pool_free(struct mislstm_pool *pool);

/*
 Fit per-model, per-head margin thresholds at the given quantile.

 # Safety
 `pool` must be a live handle from `mislstm_pool_create`.
 */
mislstm_status mislstm_pool_fit_thresholds(struct mislstm_pool *pool, double quantile);

/*
 Run one voting strategy over the pool. `out_classes` receives
 `n_days * 6` class indices, day-major. UALRE requires fitted
 thresholds.

 # Safety
 `pool` must be live and `out_classes` sized `n_days * 6`.
 */
mislstm_status mislstm_pool_vote(const struct mislstm_pool *pool,
                                 mislstm_vote_method method,
                                 uint8_t *out_classes);

/*
 Top-two logit margin of one score vector.

 # Safety
 `scores` must hold `len` floats; `out` must be a valid pointer.
 */
mislstm_status mislstm_logit_margin(const float *scores, size_t len, double *out);

/*
 Macro-F1 of predictions against labels (class indices in
 `0..n_classes`).

 # Safety
 `predictions` and `labels` must hold `len` values each.
 */
mislstm_status mislstm_macro_f1(const uint32_t *predictions,
                                const uint32_t *labels,
                                size_t len,
                                uint32_t n_classes,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MISLSTM_H */
