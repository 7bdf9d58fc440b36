#ifndef TTSHIELD_H
#define TTSHIELD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum TtsStatus {
  TTS_STATUS_OK = 0,
  TTS_STATUS_NULL_POINTER = 1,
  TTS_STATUS_INVALID_UTF8 = 2,
  TTS_STATUS_SHAPE = 3,
  TTS_STATUS_DOMAIN = 4,
  TTS_STATUS_ARGUMENT = 5,
  TTS_STATUS_PARSE = 6,
  TTS_STATUS_IO = 7,
  TTS_STATUS_JSON = 8,
  TTS_STATUS_ACCESS = 9,
  TTS_STATUS_TRAINING = 10,
  TTS_STATUS_UNSUPPORTED_EMBEDDING = 11,
  TTS_STATUS_OTHER = 98,
  TTS_STATUS_PANIC = 99,
} TtsStatus;

/**
 * Opaque handle to a trained model or a tensor train.
 */
typedef struct TtsModel TtsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tts_version(void);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next library call on the same thread.
 */
const char *tts_last_error(void);

/**
 * Load a model or tensor train from its JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TtsStatus tts_model_load(const char *json, struct TtsModel **out);

/**
 * Load a model or tensor train from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TtsStatus tts_model_load_file(const char *path, struct TtsModel **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void tts_model_free(struct TtsModel *model);

/**
 * Number of raw input features, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t tts_model_num_features(const struct TtsModel *model);

/**
 * 1 for a tensor train, 0 for a model or a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
int32_t tts_model_is_tt(const struct TtsModel *model);

/**
 * Class-1 probability of `n` raw features.
 *
 * # Safety
 * `x` must hold `n` doubles and `out` be a valid pointer.
 */
enum TtsStatus tts_model_predict(const struct TtsModel *model,
                                 const double *x,
                                 size_t n,
                                 double *out);

/**
 * Probabilities of `rows` row-major samples with `cols` features each.
 *
 * # Safety
 * `x` must hold `rows * cols` doubles and `out` room for `rows`.
 */
enum TtsStatus tts_model_predict_batch(const struct TtsModel *model,
                                       const double *x,
                                       size_t rows,
                                       size_t cols,
                                       double *out);

/**
 * Tensorize a model using `rows` row-major samples as the pivot pool.
 * `bins` discretizes construction queries; 0 queries raw scores.
 *
 * # Safety
 * `data` must hold `rows * cols` doubles and `out` be a valid pointer.
 */
enum TtsStatus tts_tensorize(const struct TtsModel *model,
                             const double *data,
                             size_t rows,
                             size_t cols,
                             uint32_t bins,
                             uint64_t seed,
                             struct TtsModel **out);

/**
 * Gauge-randomized copy of a tensor train.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TtsStatus tts_tt_gauge_randomize(const struct TtsModel *tt,
                                      uint64_t seed,
                                      struct TtsModel **out);

/**
 * JSON document of a handle; release with [`tts_string_free`].
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TtsStatus tts_model_to_json(const struct TtsModel *model, char **out);

/**
 * Release a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void tts_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TTSHIELD_H */
