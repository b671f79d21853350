#ifndef DOBS_H
#define DOBS_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define DOBS_API __declspec(dllexport)
#else
#define DOBS_API __attribute__((visibility("default")))
#endif

/* Status codes. Values are stable; the CLI reuses them as exit codes
   (IO maps to the invalid-input exit, internal to the numerical one). */
typedef enum dobs_status {
  DOBS_OK = 0,
  DOBS_ERR_INVALID_INPUT = 2,
  DOBS_ERR_CERTIFICATE = 3,
  DOBS_ERR_NUMERICAL = 4,
  DOBS_ERR_IO = 5,
  DOBS_ERR_INTERNAL = 6
} dobs_status;

typedef struct dobs_scenario dobs_scenario;
typedef struct dobs_design dobs_design;
typedef struct dobs_trace dobs_trace;

DOBS_API const char* dobs_status_name(dobs_status status);

/* Thread-local message for the most recent failed call; empty string when
   the last call succeeded. Never NULL. */
DOBS_API const char* dobs_last_error(void);

/* Name of the certificate check behind the most recent failure, when one is
   known (DOBS_ERR_CERTIFICATE, or a completed run with failing lines).
   Empty otherwise. */
DOBS_API const char* dobs_last_error_check(void);

/* Frees strings returned through char** out parameters. */
DOBS_API void dobs_string_free(char* text);

DOBS_API dobs_status dobs_scenario_load_file(const char* path, dobs_scenario** out);
DOBS_API dobs_status dobs_scenario_load_string(const char* json_text, dobs_scenario** out);
DOBS_API void dobs_scenario_free(dobs_scenario* scenario);
DOBS_API dobs_status dobs_scenario_override_seed(dobs_scenario* scenario, uint64_t seed);
DOBS_API dobs_status dobs_scenario_set_verbose(dobs_scenario* scenario, int verbose);
/* Negative on NULL input. */
DOBS_API int dobs_scenario_agent_count(const dobs_scenario* scenario);
DOBS_API int dobs_scenario_state_dim(const dobs_scenario* scenario);

/* Runs the synthesis pipeline: decomposition, gain placement, error model,
   q selection, certificate battery. Returns DOBS_OK with a design even when
   certificate lines fail (probe dobs_design_certificates_pass); structural
   and numerical breakdowns return an error and no design. */
DOBS_API dobs_status dobs_synthesize(const dobs_scenario* scenario, dobs_design** out);

DOBS_API void dobs_design_free(dobs_design* design);
DOBS_API long long dobs_design_q(const dobs_design* design);
DOBS_API double dobs_design_certified_bound(const dobs_design* design);
/* Static string, not freed: "weighted", "mixed" or "explicit". */
DOBS_API const char* dobs_design_method(const dobs_design* design);
DOBS_API int dobs_design_certificates_pass(const dobs_design* design);
/* Name of the first failing non-informational check; empty when all pass. */
DOBS_API dobs_status dobs_design_first_failure(const dobs_design* design, char** out);
/* Full certificate report text. */
DOBS_API dobs_status dobs_design_report(const dobs_design* design,
                                        const dobs_scenario* scenario, char** out);
DOBS_API dobs_status dobs_design_save(const dobs_design* design, const char* path);
/* Loads a gains file and re-runs the certificate battery against the
   scenario. Value tampering shows up as failing lines, not as an error. */
DOBS_API dobs_status dobs_design_load(const dobs_scenario* scenario, const char* path,
                                      dobs_design** out);

DOBS_API dobs_status dobs_simulate(const dobs_scenario* scenario, const dobs_design* design,
                                   dobs_trace** out);
DOBS_API void dobs_trace_free(dobs_trace* trace);
/* Number of recorded event rows (tau_max + 1); negative on NULL input. */
DOBS_API long long dobs_trace_rows(const dobs_trace* trace);
/* Total stacked error norm at a row; NaN when out of range. */
DOBS_API double dobs_trace_error_norm(const dobs_trace* trace, long long row);
/* Byte-deterministic CSV for a fixed scenario and library build. */
DOBS_API dobs_status dobs_trace_csv(const dobs_trace* trace, int include_state, char** out);
/* Per-round consensus CSV; rows exist only for verbose runs. */
DOBS_API dobs_status dobs_trace_rounds_csv(const dobs_trace* trace, char** out);
DOBS_API dobs_status dobs_trace_summary(const dobs_trace* trace, const dobs_scenario* scenario,
                                        const dobs_design* design, char** out);
/* 1 when |e(tau)| <= C lambda^tau held over the whole trace, 0 when not,
   negative on error. */
DOBS_API int dobs_trace_rate_target_met(const dobs_trace* trace, const dobs_scenario* scenario,
                                        const dobs_design* design);

/* Certificate battery plus simulation-backed checks. design may be NULL to
   synthesize from the scenario first. Returns DOBS_OK whenever the battery
   ran to completion; *out_pass carries the verdict and the thread-local
   error slots name the first failing line when it is 0. */
DOBS_API dobs_status dobs_verify(const dobs_scenario* scenario, const dobs_design* design,
                                 char** out_report, int* out_pass);

/* Seeded built-in verification suite over generated scenarios and random
   graph certificates. */
DOBS_API dobs_status dobs_verify_builtin(uint64_t seed, char** out_report, int* out_pass);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DOBS_H */
