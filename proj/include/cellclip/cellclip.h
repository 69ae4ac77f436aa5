/* CellCLIP C API.
 *
 * Every function returns a cellclip_status. On failure the message of the
 * most recent error on the calling thread is available from
 * cellclip_last_error() until the next failing call. Handles are opaque and
 * must be released with their _free function; passing NULL to a _free
 * function is a no-op.
 */
#ifndef CELLCLIP_CELLCLIP_H
#define CELLCLIP_CELLCLIP_H

#include <stddef.h>
#include <stdint.h>

#if defined(CELLCLIP_BUILDING_LIBRARY)
#define CELLCLIP_API __attribute__((visibility("default")))
#else
#define CELLCLIP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cellclip_status {
  CELLCLIP_OK = 0,
  CELLCLIP_ERR_INVALID_ARGUMENT = 1,
  CELLCLIP_ERR_SHAPE = 2,
  CELLCLIP_ERR_NUMERIC = 3,
  CELLCLIP_ERR_IO = 4,
  CELLCLIP_ERR_FORMAT = 5,
  CELLCLIP_ERR_VALIDATION = 6,
  CELLCLIP_ERR_STATE = 7,
  CELLCLIP_ERR_INTERNAL = 99
} cellclip_status;

CELLCLIP_API const char* cellclip_version(void);
CELLCLIP_API const char* cellclip_last_error(void);
CELLCLIP_API const char* cellclip_status_name(cellclip_status status);

/* 0 restores the default (CELLCLIP_THREADS, else 1). */
CELLCLIP_API cellclip_status cellclip_set_threads(size_t threads);

/* ---- run configuration ------------------------------------------------ */

typedef struct cellclip_config cellclip_config;

/* Desk-scale defaults. */
CELLCLIP_API cellclip_status cellclip_config_new(cellclip_config** out);
/* Desk-scale defaults overridden by a "key = value" file. */
CELLCLIP_API cellclip_status cellclip_config_load(const char* path, cellclip_config** out);
CELLCLIP_API void cellclip_config_free(cellclip_config* config);
/* key is prefixed, e.g. "train.epochs". */
CELLCLIP_API cellclip_status cellclip_config_set(cellclip_config* config, const char* key, const char* value);
/* Copies the value (NUL-terminated) into buf when it fits; *needed receives
 * the length including the terminator. */
CELLCLIP_API cellclip_status cellclip_config_get(const cellclip_config* config, const char* key, char* buf,
                                                 size_t capacity, size_t* needed);
/* Sets synth.seed, train.seed and eval.seed. */
CELLCLIP_API cellclip_status cellclip_config_set_seed(cellclip_config* config, uint64_t seed);
CELLCLIP_API cellclip_status cellclip_config_validate(const cellclip_config* config);
CELLCLIP_API cellclip_status cellclip_config_hash(const cellclip_config* config, uint64_t* out);

/* ---- pipeline commands ------------------------------------------------ */

typedef struct cellclip_run cellclip_run;
typedef void (*cellclip_log_fn)(const char* message, void* user);

/* A command context: config (copied), output directory and the argv to
 * record in each manifest. */
CELLCLIP_API cellclip_status cellclip_run_new(const cellclip_config* config, const char* out_dir, int argc,
                                              const char* const* argv, cellclip_run** out);
CELLCLIP_API void cellclip_run_free(cellclip_run* run);
CELLCLIP_API cellclip_status cellclip_run_set_log(cellclip_run* run, cellclip_log_fn fn, void* user);

CELLCLIP_API cellclip_status cellclip_synth(cellclip_run* run);
/* Returns CELLCLIP_ERR_VALIDATION when the dataset has problems; the report
 * is written to <out>/validation.txt and *error_count receives its length. */
CELLCLIP_API cellclip_status cellclip_validate(cellclip_run* run, const char* data_dir, size_t* error_count);
/* resume_checkpoint may be NULL. */
CELLCLIP_API cellclip_status cellclip_train(cellclip_run* run, const char* data_dir, const char* resume_checkpoint);
CELLCLIP_API cellclip_status cellclip_embed(cellclip_run* run, const char* data_dir, const char* checkpoint);
/* subset: "train", "val", "test" or "*" for every treated perturbation. */
CELLCLIP_API cellclip_status cellclip_eval_retrieval(cellclip_run* run, const char* data_dir, const char* embeddings,
                                                     const char* subset);
CELLCLIP_API cellclip_status cellclip_eval_map(cellclip_run* run, const char* data_dir, const char* embeddings);
/* tails: "start:stop:step" or a comma-separated list; NULL uses eval.tails. */
CELLCLIP_API cellclip_status cellclip_eval_genegene(cellclip_run* run, const char* data_dir, const char* embeddings,
                                                    const char* tails);
CELLCLIP_API cellclip_status cellclip_batch_correct(cellclip_run* run, const char* embeddings);
CELLCLIP_API cellclip_status cellclip_report(cellclip_run* run, const char* data_dir, const char* embeddings);

/* Recorded argv of a manifest, one string per element. Free the result with
 * cellclip_strings_free. */
CELLCLIP_API cellclip_status cellclip_manifest_argv(const char* manifest_path, char*** argv, size_t* argc);
CELLCLIP_API void cellclip_strings_free(char** strings, size_t count);

/* ---- trained models --------------------------------------------------- */

typedef struct cellclip_model cellclip_model;

CELLCLIP_API cellclip_status cellclip_model_load(const char* checkpoint, cellclip_model** out);
CELLCLIP_API void cellclip_model_free(cellclip_model* model);
/* Latent width, and the expected channels and per-channel width of a bag. */
CELLCLIP_API cellclip_status cellclip_model_dims(const cellclip_model* model, size_t* output_dim, size_t* channels,
                                                 size_t* input_dim);
/* values: instances × channels × input_dim floats, row-major. out receives
 * output_dim floats with unit norm. */
CELLCLIP_API cellclip_status cellclip_model_embed_bag(const cellclip_model* model, const float* values,
                                                      size_t instances, float* out);
CELLCLIP_API cellclip_status cellclip_model_embed_prompt(const cellclip_model* model, const char* prompt, float* out);

/* ---- metrics ---------------------------------------------------------- */

/* relevance: n flags in rank order (non-zero = relevant). */
CELLCLIP_API cellclip_status cellclip_average_precision(const int* relevance, size_t n, double* out);
/* similarity: n×n row-major, row i's match is column i. */
CELLCLIP_API cellclip_status cellclip_recall_at_k(const double* similarity, size_t n, size_t k, double* out);

#ifdef __cplusplus
}
#endif

#endif /* CELLCLIP_CELLCLIP_H */
