/* SPDX-License-Identifier: Apache-2.0 */
#ifndef ORDINO_ORDINO_H
#define ORDINO_ORDINO_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ORDINO_BUILDING_LIBRARY)
#    define ORDINO_API __declspec(dllexport)
#  else
#    define ORDINO_API __declspec(dllimport)
#  endif
#else
#  define ORDINO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values are stable across releases. */
typedef enum ordino_status {
  ORDINO_OK = 0,
  ORDINO_PARSE_ERROR = 1,
  ORDINO_UNSUPPORTED_SCORE = 2,
  ORDINO_OUT_OF_RANGE_PITCH = 3,
  ORDINO_LABEL_MISMATCH = 4,
  ORDINO_INSUFFICIENT_DATA = 5,
  ORDINO_EMPTY_SEQUENCE = 6,
  ORDINO_FORMAT_ERROR = 7,
  ORDINO_SIZE_MISMATCH = 8,
  ORDINO_NON_FINITE_VALUE = 9,
  ORDINO_LENGTH_MISMATCH = 10,
  ORDINO_SHAPE_MISMATCH = 11,
  ORDINO_NON_FINITE_GRADIENT = 12,
  ORDINO_WIDTH_MISMATCH = 13,
  ORDINO_COVERAGE_MISMATCH = 14,
  ORDINO_LABEL_OUT_OF_RANGE = 15,
  ORDINO_CONFIG_ERROR = 16,
  ORDINO_DATA_ERROR = 17,
  ORDINO_IO_ERROR = 18,
  ORDINO_INVALID_ARGUMENT = 19,
  ORDINO_INTERNAL = 20
} ordino_status;

ORDINO_API const char* ordino_version(void);
ORDINO_API const char* ordino_status_name(ordino_status status);

/* Message of the most recent failure on the calling thread ("" if none). */
ORDINO_API const char* ordino_last_error(void);

/* Strings returned through char** out-parameters are owned by the caller. */
ORDINO_API void ordino_string_free(char* text);

/* Warnings (degenerate distributions, empty branches, rejected scores) go to stderr. */
ORDINO_API void ordino_set_warnings(int enabled);

/* ---- scores ------------------------------------------------------------ */

typedef struct ordino_score ordino_score;

/* MusicXML (.xml, .musicxml) or compressed (.mxl). */
ORDINO_API ordino_status ordino_score_parse(const char* path, ordino_score** out);
ORDINO_API void ordino_score_free(ordino_score* score);
ORDINO_API size_t ordino_score_note_count(const ordino_score* score);
ORDINO_API int ordino_score_measure_count(const ordino_score* score);
/* hand: 0 = right, 1 = left. onset and duration in beats. */
ORDINO_API ordino_status ordino_score_note(const ordino_score* score, size_t index, int* midi_pitch,
                                           double* onset, double* duration, int* hand, int* measure);
ORDINO_API ordino_status ordino_score_to_json(const ordino_score* score, char** out_json);

/* ---- manifests --------------------------------------------------------- */

typedef struct ordino_manifest ordino_manifest;

ORDINO_API ordino_status ordino_manifest_build(const char* score_dir, const char* labels_jsonl,
                                               int num_classes, ordino_manifest** out);
ORDINO_API ordino_status ordino_manifest_load(const char* path, ordino_manifest** out);
/* Also writes the sibling "<stem>.rejects.jsonl". */
ORDINO_API ordino_status ordino_manifest_save(const ordino_manifest* manifest, const char* path);
ORDINO_API void ordino_manifest_free(ordino_manifest* manifest);
ORDINO_API size_t ordino_manifest_entry_count(const ordino_manifest* manifest);
ORDINO_API size_t ordino_manifest_reject_count(const ordino_manifest* manifest);
ORDINO_API ordino_status ordino_manifest_rejects_json(const ordino_manifest* manifest, char** out_json);
ORDINO_API ordino_status ordino_manifest_tau_c(const ordino_manifest* manifest, double* out);
/* strategy: "length_level" or "composer_level". JSON array of five plans. */
ORDINO_API ordino_status ordino_manifest_splits(const ordino_manifest* manifest, const char* strategy,
                                                uint64_t seed, char** out_json);

/* ---- embeddings -------------------------------------------------------- */

/* Row-major rows x cols floats; free with ordino_embedding_free. */
ORDINO_API ordino_status ordino_embedding_load(const char* path, float** data, uint32_t* rows,
                                               uint32_t* cols);
ORDINO_API void ordino_embedding_free(float* data);
ORDINO_API ordino_status ordino_embedding_save(const char* path, const float* data, uint32_t rows,
                                               uint32_t cols);

/* Writes deterministic pseudo-embeddings for one score into out_dir as
 * <piece_id>.virtuoso.pemb (64 wide), <piece_id>.virtuoso_enc.pemb and
 * <piece_id>.argnn.rh.pemb / .lh.pemb (dim wide). reps_csv selects a subset
 * ("virtuoso,virtuoso_enc,argnn"); NULL means all. Lists written files as JSON. */
ORDINO_API ordino_status ordino_synth_embed(const char* score_path, const char* out_dir, const char* piece_id,
                                            uint32_t dim, uint64_t seed, const char* reps_csv,
                                            char** out_json);

/* ---- models and experiment commands ------------------------------------ */

typedef struct ordino_model ordino_model;

ORDINO_API ordino_status ordino_model_load(const char* bundle_dir, ordino_model** out);
ORDINO_API void ordino_model_free(ordino_model* model);
ORDINO_API int ordino_model_num_classes(const ordino_model* model);
/* embeddings_json: {"virtuoso": "a.pemb", "argnn": ["rh.pemb", "lh.pemb"], ...} or NULL. */
ORDINO_API ordino_status ordino_model_predict(const ordino_model* model, const char* score_path,
                                              const char* embeddings_json, char** out_json);

/* config_json: experiment configuration; relative paths resolve against base_dir. */
ORDINO_API ordino_status ordino_train(const char* config_json, const char* base_dir, char** out_json);
/* Trains folds[0..count) into <out>/fold<k>, `jobs` at a time. */
ORDINO_API ordino_status ordino_train_folds(const char* config_json, const char* base_dir, const int* folds,
                                            size_t count, int jobs, char** out_json);

/* request_json: {"manifest"?, "fold"?, "subset"?: "train"|"val"|"test", "single_thread"?} or NULL. */
ORDINO_API ordino_status ordino_evaluate(const char* bundle_dir, const char* request_json, char** out_json);
ORDINO_API ordino_status ordino_ensemble(const char* const* bundle_dirs, size_t count, const char* request_json,
                                         char** out_json);
ORDINO_API ordino_status ordino_predict(const char* bundle_dir, const char* score_path,
                                        const char* embeddings_json, char** out_json);

/* options_json: {"filter"?, "max_length"?, "hidden"?, "seed"?, "tolerance"?} or NULL.
 * all_passed receives 1 when every case is within tolerance. */
ORDINO_API ordino_status ordino_gradcheck(const char* options_json, char** out_json, int* all_passed);

/* ---- statistics -------------------------------------------------------- */

/* preds[i] == 0 marks an undefined prediction. */
ORDINO_API ordino_status ordino_metrics(const int* truth, const int* preds, size_t count, int num_classes,
                                        char** out_json);
ORDINO_API ordino_status ordino_tau_c(const long* x, const long* y, size_t count, double* out);

#ifdef __cplusplus
}
#endif

#endif /* ORDINO_ORDINO_H */
