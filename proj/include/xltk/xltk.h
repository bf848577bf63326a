/*
 * C interface to the xltk toxicity classifier: configuration, the batch
 * commands, and single-text inference from a saved model directory.
 *
 * Every function that can fail returns an xltk_status. On failure the
 * message is available from xltk_last_error() on the same thread until the
 * next failing call.
 */
#ifndef XLTK_XLTK_H
#define XLTK_XLTK_H

#include <stddef.h>

#if defined(_WIN32)
#define XLTK_API __declspec(dllexport)
#else
#define XLTK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum xltk_status {
  XLTK_OK = 0,
  XLTK_CHECK_FAILED = 1, /* a command ran but its check did not pass */
  XLTK_ERR_CONFIG = 2,
  XLTK_ERR_IO = 3,
  XLTK_ERR_PARSE = 4,
  XLTK_ERR_SCHEMA = 5,
  XLTK_ERR_DIMENSION = 6,
  XLTK_ERR_INDEX = 7,
  XLTK_ERR_CONTRACT = 8,
  XLTK_ERR_SIZE = 9,
  XLTK_ERR_ARGUMENT = 10, /* null pointer or unknown command */
  XLTK_ERR_INTERNAL = 11
} xltk_status;

typedef struct xltk_config xltk_config;
typedef struct xltk_model xltk_model;

XLTK_API const char* xltk_last_error(void);
XLTK_API const char* xltk_status_name(xltk_status status);

/* Process exit code for a status: 0 ok, 1 check failure, 2 otherwise. */
XLTK_API int xltk_exit_code(xltk_status status);

XLTK_API xltk_status xltk_config_create(xltk_config** out);
XLTK_API void xltk_config_destroy(xltk_config* cfg);
/* Merges a key = value file into cfg. */
XLTK_API xltk_status xltk_config_load(xltk_config* cfg, const char* path);
XLTK_API xltk_status xltk_config_set(xltk_config* cfg, const char* key, const char* value);
/* "key=value" form. */
XLTK_API xltk_status xltk_config_assign(xltk_config* cfg, const char* assignment);
/* *value stays valid until cfg is modified or destroyed. */
XLTK_API xltk_status xltk_config_get(const xltk_config* cfg, const char* key, const char** value);

XLTK_API size_t xltk_config_key_count(void);
/* NULL when index is out of range. */
XLTK_API const char* xltk_config_key_name(size_t index);
XLTK_API const char* xltk_config_key_default(size_t index);
XLTK_API const char* xltk_config_key_help(size_t index);
XLTK_API const char* xltk_config_help(void);

/* command: train, eval, gradcheck, ablate, gate-report or embed-stats.
 * Human-readable progress goes to standard output. */
XLTK_API xltk_status xltk_run(const xltk_config* cfg, const char* command);
/* synthetic > 0 generates a corpus of that many comments first. */
XLTK_API xltk_status xltk_run_split(const xltk_config* cfg, size_t synthetic);

XLTK_API xltk_status xltk_model_load(const char* model_dir, xltk_model** out);
XLTK_API void xltk_model_destroy(xltk_model* model);
/* probs receives six probabilities in label order. */
XLTK_API xltk_status xltk_model_predict(const xltk_model* model, const char* text, double probs[6]);
XLTK_API size_t xltk_model_parameter_count(const xltk_model* model);

XLTK_API size_t xltk_label_count(void);
XLTK_API const char* xltk_label_name(size_t index);

/* Trainable parameters of the architecture cfg describes for the given
 * vocabulary sizes. */
XLTK_API xltk_status xltk_parameter_count_for(const xltk_config* cfg, size_t vocab_size,
                                              size_t char_vocab_size, size_t* count);

/* Test hook: scales the adjoint of the named op by 1.5 ("" clears). */
XLTK_API xltk_status xltk_debug_corrupt_adjoint(const char* op_name);

#ifdef __cplusplus
}
#endif

#endif /* XLTK_XLTK_H */
