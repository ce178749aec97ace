#ifndef SUPERMODE_LAB_H
#define SUPERMODE_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a call.
typedef enum SmlStatus {
    SML_STATUS_OK = 0,
    SML_STATUS_NULL_ARGUMENT = 1,
    SML_STATUS_INVALID_UTF8 = 2,
    SML_STATUS_IO = 3,
    SML_STATUS_CONFIG = 4,
    SML_STATUS_NUMERIC = 5,
    // The report holds no such result; add the analysis to the config.
    SML_STATUS_MISSING_RESULT = 6,
    SML_STATUS_BUFFER_TOO_SMALL = 7,
    SML_STATUS_PANIC = 8,
} SmlStatus;

// Parsed run configuration.
typedef struct SmlConfig SmlConfig;

// Completed run: the report and the supermode basis it was computed from.
typedef struct SmlReport SmlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into this library from the same thread.
const char *sml_last_error(void);

// Library version as a static NUL-terminated string.
const char *sml_version(void);

// Parses a JSON config held in memory.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum SmlStatus sml_config_from_json(const char *json, struct SmlConfig **out);

// Parses a JSON config file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum SmlStatus sml_config_from_file(const char *path, struct SmlConfig **out);

// Replaces the scale factor of the config (must be at least 1).
//
// # Safety
// `config` must come from `sml_config_from_*` and not be freed.
enum SmlStatus sml_config_set_kappa(struct SmlConfig *config, double kappa);

// # Safety
// `config` must be NULL or come from `sml_config_from_*`, freed once.
void sml_config_free(struct SmlConfig *config);

// Runs every analysis of the config.
//
// # Safety
// `config` must be a live config handle and `out` a writable pointer.
enum SmlStatus sml_run(const struct SmlConfig *config, struct SmlReport **out);

// # Safety
// `report` must be NULL or come from `sml_run`, freed once.
void sml_report_free(struct SmlReport *report);

// Leading eigenvalue of the run. Needs a basis (any analysis except the
// length sweep).
//
// # Safety
// `report` must be a live report handle and `out` a writable pointer.
enum SmlStatus sml_report_lambda0(const struct SmlReport *report, double *out);

// Copies the significant eigenvalues, largest magnitude first. `len`
// receives the count; with `buffer` NULL only the count is returned.
//
// # Safety
// `buffer` must be NULL or hold `capacity` doubles; `len` must be writable.
enum SmlStatus sml_report_eigenvalues(const struct SmlReport *report,
                                      double *buffer,
                                      size_t capacity,
                                      size_t *len);

// Threshold irradiance (W/m²) and average power (W). Needs the threshold
// analysis in the config. Either out pointer may be NULL.
//
// # Safety
// `report` must be a live report handle; out pointers NULL or writable.
enum SmlStatus sml_report_threshold(const struct SmlReport *report,
                                    double *irradiance,
                                    double *power);

// Number of supermodes squeezed below `bound_db` (negative) at pump ratio
// `r` and noise frequency `w` (in units of the cavity linewidth).
//
// # Safety
// `report` must be a live report handle and `out` a writable pointer.
enum SmlStatus sml_report_squeezed_count(const struct SmlReport *report,
                                         double r,
                                         double w,
                                         double bound_db,
                                         size_t *out);

// The full report as pretty-printed JSON. Release with [`sml_string_free`].
//
// # Safety
// `report` must be a live report handle and `out` a writable pointer.
enum SmlStatus sml_report_json(const struct SmlReport *report, char **out);

// # Safety
// `s` must be NULL or a string returned by this library, freed once.
void sml_string_free(char *s);

// Noise variance of one supermode relative to shot noise. `lam_ratio` is
// `Λ_k/Λ₀`; `squeezed_quadrature` nonzero selects the quadrature measured
// with the LO shifted by π/2.
//
// # Safety
// `out` must be a writable pointer.
enum SmlStatus sml_quadrature_variance(double lam_ratio,
                                       double r,
                                       double w,
                                       bool squeezed_quadrature,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUPERMODE_LAB_H */
