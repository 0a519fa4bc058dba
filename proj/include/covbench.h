/* covbench C API: simulation-based-inference coverage benchmark.
 *
 * The library is driven through an opaque session handle. Every call
 * returns a status code; cb_last_error() holds a message for the most
 * recent failure on the session.
 */
#ifndef COVBENCH_H
#define COVBENCH_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CB_API __declspec(dllexport)
#else
#define CB_API __attribute__((visibility("default")))
#endif

typedef struct cb_session cb_session;

typedef enum cb_status {
  CB_OK = 0,
  CB_ERR_CONFIG = 1,   /* bad configuration or arguments */
  CB_ERR_PARTIAL = 2,  /* run finished with failed or incomplete cells */
  CB_ERR_ORACLE = 3,   /* oracle or diagnostic self-test failure */
  CB_ERR_IO = 4,       /* file system failure */
  CB_ERR_INTERNAL = 5  /* unexpected internal error */
} cb_status;

CB_API cb_session* cb_session_new(void);
CB_API void cb_session_free(cb_session* session);

/* Message for the most recent failing call on this session; empty string
 * when the last call succeeded. The pointer stays valid until the next call
 * on the same session. */
CB_API const char* cb_last_error(const cb_session* session);

CB_API const char* cb_version(void);

/* Runs the benchmark matrix described by the TOML config into out_dir.
 * resume != 0 skips completed cells; workers = 0 picks the hardware
 * default. */
CB_API cb_status cb_run(cb_session* session, const char* config_path, const char* out_dir, int resume,
                        int workers);

/* Renders SVG coverage panels from the artifacts in out_dir. */
CB_API cb_status cb_plot(cb_session* session, const char* out_dir);

/* Writes report.csv and digest.txt from the artifacts in out_dir. */
CB_API cb_status cb_report(cb_session* session, const char* out_dir);

/* Reference-oracle self-tests for one task: "tg", "tg_ss", "sv", "sv_ss" or
 * "slcp". Progress lines go to stdout. */
CB_API cb_status cb_oracle_selftest(cb_session* session, const char* task);

/* Quick invariant suite over the numerical core. Progress lines go to
 * stdout. */
CB_API cb_status cb_selftest(cb_session* session);

/* Deterministic seed derivation from a master seed and a label path;
 * exposed so external drivers can reproduce per-cell seeds. */
CB_API uint64_t cb_derive_seed(uint64_t master_seed, const char* const* labels, size_t n_labels);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* COVBENCH_H */
