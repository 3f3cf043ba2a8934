#ifndef HYBF_H
#define HYBF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HybfStatus {
  HYBF_STATUS_OK = 0,
  HYBF_STATUS_INVALID_INPUT = 1,
  HYBF_STATUS_SOLVER_FAILURE = 2,
  HYBF_STATUS_NULL_POINTER = 3,
  HYBF_STATUS_PANIC = 4,
} HybfStatus;

/**
 * Opaque beam-matrix handle.
 */
typedef struct HybfBeams HybfBeams;

/**
 * Opaque scenario handle.
 */
typedef struct HybfScenario HybfScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next call into this library from the same thread.
 */
const char *hybf_last_error(void);

/**
 * Draws a random scenario with default macro-cell parameters.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum HybfStatus hybf_scenario_generate(size_t num_hotspots,
                                       size_t num_sections,
                                       uint64_t seed,
                                       struct HybfScenario **out);

/**
 * Parses a scenario from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum HybfStatus hybf_scenario_from_json(const char *json, struct HybfScenario **out);

/**
 * Serializes a scenario; release the string with [`hybf_string_free`].
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum HybfStatus hybf_scenario_to_json(const struct HybfScenario *scenario, char **out);

/**
 * Number of antenna elements M, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t hybf_scenario_num_elements(const struct HybfScenario *scenario);

/**
 * Number of hotspots K, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t hybf_scenario_num_hotspots(const struct HybfScenario *scenario);

/**
 * Number of sections L, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t hybf_scenario_num_sections(const struct HybfScenario *scenario);

/**
 * # Safety
 * `scenario` must be null or a handle not yet freed.
 */
void hybf_scenario_free(struct HybfScenario *scenario);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void hybf_string_free(char *s);

/**
 * Runs the named method (e.g. `"GP"`, `"SDR-R"`, `"MB-GP"`). Single-beam
 * methods see all hotspots as one section. `UB` produces no beams and sets
 * `*out_beams` to null.
 *
 * # Safety
 * `scenario` must be a live handle, `method` a NUL-terminated string, and
 * `out_beams` / `out_utility_bits` writable (either may be null to skip).
 */
enum HybfStatus hybf_optimize(const struct HybfScenario *scenario,
                              const char *method,
                              size_t n_trial,
                              uint64_t seed,
                              struct HybfBeams **out_beams,
                              double *out_utility_bits);

/**
 * Builds a beam handle from row-major interleaved `(re, im)` data of length
 * `2·rows·cols`. The matrix must satisfy the per-antenna power constraint.
 *
 * # Safety
 * `data` must point to `2·rows·cols` readable doubles; `out` must be writable.
 */
enum HybfStatus hybf_beams_new(const double *data,
                               size_t rows,
                               size_t cols,
                               struct HybfBeams **out);

/**
 * # Safety
 * `beams` must be a live handle; `rows` and `cols` writable.
 */
enum HybfStatus hybf_beams_dims(const struct HybfBeams *beams, size_t *rows, size_t *cols);

/**
 * Copies the matrix into `data` (row-major interleaved, `len` doubles).
 *
 * # Safety
 * `beams` must be a live handle and `data` must hold `len` doubles.
 */
enum HybfStatus hybf_beams_copy(const struct HybfBeams *beams, double *data, size_t len);

/**
 * # Safety
 * `beams` must be null or a handle not yet freed.
 */
void hybf_beams_free(struct HybfBeams *beams);

/**
 * Network utility of `beams` on `scenario`, in bps/Hz. A single column is
 * evaluated against all hotspots as one section.
 *
 * # Safety
 * Both handles must be live; `out_bits` writable.
 */
enum HybfStatus hybf_utility(const struct HybfScenario *scenario,
                             const struct HybfBeams *beams,
                             double *out_bits);

/**
 * Projects a row-major interleaved matrix onto the per-antenna power set in
 * place.
 *
 * # Safety
 * `data` must hold `2·rows·cols` writable doubles.
 */
enum HybfStatus hybf_project(double *data, size_t rows, size_t cols);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYBF_H */
