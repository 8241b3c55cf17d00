/* latentshield — C API for the latent shielding toolkit.
 *
 * All functions return LS_OK (0) on success or a negative ls_status code;
 * ls_last_error() describes the most recent failure on the calling thread.
 * Handles are opaque and must be released with their matching *_free call.
 */
#ifndef LATENTSHIELD_H
#define LATENTSHIELD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ls_status {
  LS_OK = 0,
  LS_ERR = -1,          /* unspecified failure */
  LS_ERR_CONFIG = -2,   /* invalid configuration or usage */
  LS_ERR_NUMERIC = -3,  /* non-finite loss / numeric abort */
  LS_ERR_VIOLATION = -4,/* a monitored trace violated its specification */
  LS_ERR_PARSE = -5,    /* specification or trace syntax error */
  LS_ERR_IO = -6        /* file system failure */
} ls_status;

typedef enum ls_monitor_status {
  LS_MON_SAFE = 0,
  LS_MON_UNSAFE = 1,
  LS_MON_SATISFIED = 2
} ls_monitor_status;

typedef struct ls_config ls_config;
typedef struct ls_monitor ls_monitor;

const char* ls_version(void);

/* Message for the last error on this thread; empty string if none. */
const char* ls_last_error(void);

/* ---- configuration ------------------------------------------------------ */

/* Parse an experiment config from a JSON file / string. NULL on error. */
ls_config* ls_config_load(const char* path);
ls_config* ls_config_parse(const char* json_text);

/* Apply `json_value` (bare words fall back to strings) at a dotted path,
 * e.g. ls_config_set(cfg, "trainer.batch_size", "16"). */
int ls_config_set(ls_config* cfg, const char* dotted_key, const char* json_value);

/* Resolved config (defaults merged) as a JSON string; free with
 * ls_string_free. */
char* ls_config_dump(const ls_config* cfg);

void ls_config_free(ls_config* cfg);
void ls_string_free(char* s);

/* ---- experiments --------------------------------------------------------- */

/* Train to completion; writes resolved_config.json, metrics.csv, eval.csv and
 * checkpoint.bin into out_dir. */
int ls_train(const ls_config* cfg, uint64_t seed, const char* out_dir);

/* Evaluate a checkpoint for `episodes` greedy episodes and write the
 * evaluation CSV. shield_on toggles the configured shield at test time. */
int ls_eval(const ls_config* cfg, const char* checkpoint, int episodes, int shield_on,
            uint64_t seed, const char* out_csv);

/* Train and evaluate the latent / unshielded / oracle conditions on the given
 * seeds and write the comparison CSV. Runs are stored under out_dir; threads
 * caps parallel runs (1 = fully sequential, bit-exact). */
int ls_compare(const ls_config* cfg, const uint64_t* seeds, int n_seeds, const char* out_dir,
               const char* out_csv, int threads);

/* Environment frames as PPM files; with a checkpoint, writes observed frames
 * plus open-loop predictions after `context` observed steps. checkpoint may
 * be NULL for plain environment rendering. */
int ls_render(const ls_config* cfg, const char* checkpoint, uint64_t seed, int context,
              int horizon, const char* out_dir);

/* ---- specification monitoring ------------------------------------------- */

/* Create a progression monitor for an scLTL specification. alphabet_csv is a
 * comma-separated list of admissible propositions; NULL admits any. */
ls_monitor* ls_monitor_new(const char* spec, const char* alphabet_csv);

/* Advance one step with the comma-separated true propositions (empty string =
 * empty valuation). Returns an ls_monitor_status value, or a negative
 * ls_status on error. */
int ls_monitor_step(ls_monitor* m, const char* props_csv);

int ls_monitor_free(ls_monitor* m);

/* Run a trace file through a fresh monitor, invoking cb (when non-NULL) with
 * every step's status. Returns LS_OK if the trace never violates,
 * LS_ERR_VIOLATION on the first violation, other codes on parse errors. */
int ls_monitor_run_trace(const char* spec, const char* alphabet_csv, const char* trace_path,
                         void (*cb)(int step, const char* status, void* user), void* user);

/* ---- self check ----------------------------------------------------------- */

#define LS_SELFCHECK_CORRUPT_GRADIENT 1 /* test hook: force a gradient failure */

/* Run the built-in verification suite (gradient checks, KL identities,
 * progression-vs-semantics sweep, shield mock properties). cb receives each
 * check's result when non-NULL. Returns LS_OK iff every check passed. */
int ls_selfcheck(int flags, void (*cb)(const char* name, int ok, const char* detail, void* user),
                 void* user);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* LATENTSHIELD_H */
