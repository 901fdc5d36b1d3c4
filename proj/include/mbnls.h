/* mbnls: multi-bubble blow-up laboratory for the mass-critical NLS with
 * lower-order random perturbations. C API over the simulation core: opaque
 * handles, integer error codes, last-error message per thread.
 */
#ifndef MBNLS_H
#define MBNLS_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct mbnls_config mbnls_config;
typedef struct mbnls_run mbnls_run;

/* Error codes. Values 2-4 mirror the CLI exit codes. */
enum {
    MBNLS_OK = 0,
    MBNLS_ERR_INVALID_ARGUMENT = 1,
    MBNLS_ERR_VALIDATION = 2,
    MBNLS_ERR_DIVERGED = 3,
    MBNLS_ERR_RESOLUTION_STOP = 4,
    MBNLS_ERR_IO = 5,
    MBNLS_ERR_INTERNAL = 6
};

/* Run status values returned by mbnls_run_status. */
enum {
    MBNLS_RUN_COMPLETED = 0,
    MBNLS_RUN_RESOLUTION_STOP = 1,
    MBNLS_RUN_DIVERGED = 2
};

const char* mbnls_version(void);

/* Message for the most recent failing call on this thread ("" if none). */
const char* mbnls_last_error(void);

/* Configuration: parse from YAML text or file; override scalar entries by
 * dotted key (e.g. "noise.seed", "controller.checkpoints", "t_n").
 * Out-params receive freshly allocated handles; free with mbnls_config_free. */
int mbnls_config_parse(const char* yaml_text, mbnls_config** out);
int mbnls_config_load(const char* path, mbnls_config** out);
int mbnls_config_override(mbnls_config* cfg, const char* key, const char* value);

/* Canonical serialization; free the string with mbnls_string_free. */
int mbnls_config_emit(const mbnls_config* cfg, char** out_text);

/* Validates and executes the configured experiment, persisting the run
 * directory under out_dir. Returns MBNLS_OK on a completed run; status codes
 * 3/4 signal a diverged run or a resolution stop before any fit window. */
int mbnls_run_execute(const mbnls_config* cfg, const char* out_dir, mbnls_run** out);

int mbnls_run_status(const mbnls_run* run);
const char* mbnls_run_directory(const mbnls_run* run);
int mbnls_run_summary(const mbnls_run* run, char** out_text);

/* Aggregated report tables over finished run directories. */
int mbnls_report(const char* const* run_dirs, size_t count, char** out_text);

/* Kernel-identity + conservation suite. dim = 0 runs both dimensions.
 * Returns MBNLS_OK when every item passes; the report always comes back. */
int mbnls_selftest(int dim, char** out_text);

void mbnls_config_free(mbnls_config* cfg);
void mbnls_run_free(mbnls_run* run);
void mbnls_string_free(char* text);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MBNLS_H */
