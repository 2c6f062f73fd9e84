/* flowgan - invertible-flow generative modeling laboratory.
 *
 * C API over the shared library. All entry points return fg_status;
 * fg_last_error() holds a thread-local message for the most recent
 * failure on the calling thread. Handles are opaque and must be
 * released with the matching *_free call.
 */
#ifndef FLOWGAN_H
#define FLOWGAN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FLOWGAN_API __declspec(dllexport)
#else
#define FLOWGAN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fg_status {
  FG_OK = 0,
  FG_ERR_ARGUMENT = 1,   /* bad pointer/value passed to the API */
  FG_ERR_CONTRACT = 2,   /* shape or usage contract violated */
  FG_ERR_DOMAIN = 3,     /* math domain error (log/sqrt of non-positive) */
  FG_ERR_NUMERIC = 4,    /* non-finite value produced */
  FG_ERR_DIVERGED = 5,   /* training diverged (artifacts preserved) */
  FG_ERR_PARSE = 6,      /* config text malformed or out of range */
  FG_ERR_FORMAT = 7,     /* binary file malformed */
  FG_ERR_IO = 8,         /* filesystem failure */
  FG_ERR_CONFIG = 9,     /* unsatisfiable configuration */
  FG_ERR_UNSUPPORTED = 10
} fg_status;

FLOWGAN_API const char* fg_status_name(fg_status s);
FLOWGAN_API const char* fg_last_error(void);
FLOWGAN_API const char* fg_version(void);

/* ------------------------------------------------------------------ */
/* Experiment configuration (line-oriented key=value text)             */
/* ------------------------------------------------------------------ */
typedef struct fg_config fg_config;

FLOWGAN_API fg_status fg_config_load(const char* path, fg_config** out);
FLOWGAN_API fg_status fg_config_from_string(const char* text, fg_config** out);
FLOWGAN_API fg_status fg_config_set(fg_config* cfg, const char* key, const char* value);
/* Copies the value into buf (NUL-terminated); fails if buf is too small. */
FLOWGAN_API fg_status fg_config_get(const fg_config* cfg, const char* key, char* buf, size_t bufsize);
FLOWGAN_API void fg_config_free(fg_config* cfg);

/* ------------------------------------------------------------------ */
/* Subcommands                                                         */
/* ------------------------------------------------------------------ */
/* name is one of: train, eval-nll, eval-gmm, eval-kde, eval-ais,
 * spectral, sample, score, plot. Artifacts are written to the config's
 * out_dir. */
FLOWGAN_API fg_status fg_run(const char* name, const fg_config* cfg);

/* ------------------------------------------------------------------ */
/* Model handles (loaded from checkpoints)                             */
/* ------------------------------------------------------------------ */
typedef struct fg_model fg_model;

FLOWGAN_API fg_status fg_model_load(const char* checkpoint_path, fg_model** out);
FLOWGAN_API void fg_model_free(fg_model* m);
FLOWGAN_API int fg_model_dim(const fg_model* m);
FLOWGAN_API int64_t fg_model_iteration(const fg_model* m);

/* Exact log-likelihood in nats for n points of width d (row-major x);
 * d must equal fg_model_dim. */
FLOWGAN_API fg_status fg_model_log_likelihood(const fg_model* m, const double* x, int n, int d,
                                              double* out_nats);
/* Seeded ancestral sampling; out must hold n*dim doubles. */
FLOWGAN_API fg_status fg_model_sample(const fg_model* m, int n, uint64_t seed, double* out);

#ifdef __cplusplus
}
#endif

#endif /* FLOWGAN_H */
