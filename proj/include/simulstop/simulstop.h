#ifndef SIMULSTOP_H
#define SIMULSTOP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SIMULSTOP_API __declspec(dllexport)
#else
#define SIMULSTOP_API __attribute__((visibility("default")))
#endif

typedef enum simulstop_status {
  SIMULSTOP_OK = 0,
  SIMULSTOP_ERR_CONFIG = 1,
  SIMULSTOP_ERR_INVALID_ARGUMENT = 2,
  SIMULSTOP_ERR_NUMERIC = 3,
  SIMULSTOP_ERR_BUDGET_EXCEEDED = 4,
  SIMULSTOP_ERR_HORIZON_EXCEEDED = 5,
  SIMULSTOP_ERR_UNSUPPORTED_SCENARIO = 6,
  SIMULSTOP_ERR_UNDEFINED_CONDITIONAL = 7,
  SIMULSTOP_ERR_IO = 8,
  SIMULSTOP_ERR_INTERNAL = 9
} simulstop_status;

typedef enum simulstop_format {
  SIMULSTOP_FORMAT_AUTO = 0, /* by extension: .json is JSON, otherwise YAML */
  SIMULSTOP_FORMAT_YAML = 1,
  SIMULSTOP_FORMAT_JSON = 2
} simulstop_format;

typedef struct simulstop_scenario simulstop_scenario;

SIMULSTOP_API const char* simulstop_version(void);
/* Message of the last failure on the calling thread; empty after a success. */
SIMULSTOP_API const char* simulstop_last_error(void);
SIMULSTOP_API const char* simulstop_status_name(simulstop_status status);
/* Nonzero for failures caused by the request or its configuration (CLI exit code 2). */
SIMULSTOP_API int simulstop_is_config_error(simulstop_status status);
/* Releases strings returned through char** out-parameters. */
SIMULSTOP_API void simulstop_free(char* text);

SIMULSTOP_API simulstop_status simulstop_scenario_load(const char* path, simulstop_format format,
                                                       simulstop_scenario** out);
/* base_dir resolves relative path references; may be NULL. */
SIMULSTOP_API simulstop_status simulstop_scenario_parse(const char* text, simulstop_format format,
                                                        const char* base_dir,
                                                        simulstop_scenario** out);
SIMULSTOP_API simulstop_status simulstop_scenario_constants(double alpha1, double alpha2,
                                                            double alpha3,
                                                            simulstop_scenario** out);
SIMULSTOP_API void simulstop_scenario_free(simulstop_scenario* scenario);
SIMULSTOP_API simulstop_status simulstop_scenario_write(const simulstop_scenario* scenario,
                                                        simulstop_format format, char** out);

SIMULSTOP_API simulstop_status simulstop_prob_equal(const simulstop_scenario* scenario,
                                                    double* value, double* abs_error);
/* Two times for pair models, n for a shock system. */
SIMULSTOP_API simulstop_status simulstop_joint_survival(const simulstop_scenario* scenario,
                                                        const double* times, size_t count,
                                                        double* value, double* abs_error);
/* quantity: e.g. "prob-equal", "hazard 1 1e-4", "conditional both-before 0.5". The
   scenario may be NULL for "erfc-h x [ell]". Writes {quantity, inputs, value,
   abs_error_estimate}. */
SIMULSTOP_API simulstop_status simulstop_eval(const simulstop_scenario* scenario,
                                              const char* quantity, char** json_out);
/* corrupt_row (may be NULL) perturbs one closed form, for harness tests. Either output
   pointer may be NULL. */
SIMULSTOP_API simulstop_status simulstop_validate(const simulstop_scenario* scenario,
                                                  uint64_t samples, uint64_t seed,
                                                  const char* corrupt_row, char** json_out,
                                                  char** table_out, int* passed);
/* template_path may be NULL for scenario-free quantities. */
SIMULSTOP_API simulstop_status simulstop_sweep(const char* template_path, simulstop_format format,
                                               const char* param, const double* grid,
                                               size_t count, const char* quantity,
                                               char** csv_out);
/* as_estimate = 0: raw samples as CSV; otherwise the equality frequency as JSON
   {mean, std_error, n, ci99}. */
SIMULSTOP_API simulstop_status simulstop_simulate(const simulstop_scenario* scenario,
                                                  uint64_t samples, uint64_t seed,
                                                  int as_estimate, char** out);
/* ell_override may be NULL. */
SIMULSTOP_API simulstop_status simulstop_erfc_report(const double* ell_override, char** json_out);

#ifdef __cplusplus
}
#endif

#endif
