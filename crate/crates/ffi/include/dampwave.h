#ifndef DAMPWAVE_H
#define DAMPWAVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DwScheme {
  DW_SCHEME_FD01 = 0,
  DW_SCHEME_FD11 = 1,
  /**
   * General Padé member; orders passed separately.
   */
  DW_SCHEME_FD_ST = 2,
  DW_SCHEME_OEFD = 3,
  DW_SCHEME_OIFD = 4,
} DwScheme;

typedef enum DwStatus {
  DW_STATUS_OK = 0,
  DW_STATUS_NULL_POINTER = 1,
  DW_STATUS_INVALID_ARGUMENT = 2,
  DW_STATUS_PARSE = 3,
  DW_STATUS_NUMERICAL = 4,
  DW_STATUS_MISSING_EXACT = 5,
  DW_STATUS_BUFFER_TOO_SMALL = 6,
  DW_STATUS_PANIC = 7,
} DwStatus;

/**
 * Opaque problem definition.
 */
typedef struct DwProblem DwProblem;

/**
 * Opaque finished run: the final state and enough context to evaluate errors.
 */
typedef struct DwRun DwRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL,
 * or 0 when there is no error.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t dw_last_error_message(char *buf, size_t len);

/**
 * Static version string.
 */
const char *dw_version(void);

/**
 * Built-in problem by name (`sample`, `undamped`, `forced`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum DwStatus dw_problem_builtin(const char *name, struct DwProblem **out);

/**
 * Problem from a JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum DwStatus dw_problem_from_json(const char *json, struct DwProblem **out);

/**
 * # Safety
 * `problem` must be NULL or a handle from this library not yet freed.
 */
void dw_problem_free(struct DwProblem *problem);

/**
 * Runs `scheme` with `n` subintervals and step `k` up to `t_final`.
 * `pade_s`/`pade_t` are read only for `DW_SCHEME_FD_ST`. A run that blows up
 * still succeeds; query it with [`dw_run_blew_up`].
 *
 * # Safety
 * `problem` must be a live handle; `out` must be a valid pointer.
 */
enum DwStatus dw_solve(const struct DwProblem *problem,
                       enum DwScheme scheme,
                       size_t pade_s,
                       size_t pade_t,
                       size_t n,
                       double k,
                       double t_final,
                       struct DwRun **out);

/**
 * # Safety
 * `run` must be NULL or a handle from this library not yet freed.
 */
void dw_run_free(struct DwRun *run);

/**
 * Number of interior nodes, 0 for NULL.
 *
 * # Safety
 * `run` must be NULL or a live handle.
 */
size_t dw_run_interior_nodes(const struct DwRun *run);

/**
 * 1 if the run hit a non-finite state, 0 if not, -1 for NULL.
 *
 * # Safety
 * `run` must be NULL or a live handle.
 */
int dw_run_blew_up(const struct DwRun *run);

/**
 * Time of the last completed step.
 *
 * # Safety
 * `run` must be a live handle; `t` a valid pointer.
 */
enum DwStatus dw_run_final_time(const struct DwRun *run, double *t);

/**
 * Copies the interior displacements of the last completed step into `buf`,
 * which must hold [`dw_run_interior_nodes`] values.
 *
 * # Safety
 * `run` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum DwStatus dw_run_displacement(const struct DwRun *run, double *buf, size_t len);

/**
 * Max abs error over interior nodes at the last completed step.
 *
 * # Safety
 * `run` must be a live handle; `err` a valid pointer.
 */
enum DwStatus dw_run_max_error(const struct DwRun *run, double *err);

/**
 * Explicit-scheme verdict: `*stable` is 1 or 0 and `margins[0..2]` receive
 * `2/γ* - k` and `sqrt(γ*)/2 - sqrt(k)/h` (either may be NULL).
 *
 * # Safety
 * `stable` must be valid; `margins` NULL or pointing to 2 doubles.
 */
enum DwStatus dw_explicit_stability(double k,
                                    double h,
                                    double gamma_star,
                                    int *stable,
                                    double *margins);

/**
 * Largest `|μ|` of the FD-(1,1) map over all modes, constant damping.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DwStatus dw_implicit_max_modulus(size_t n, double h, double k, double gamma, double *out);

/**
 * Padé coefficients in ascending powers: `numerator` gets `t + 1` values,
 * `denominator` gets `s + 1`.
 *
 * # Safety
 * `numerator`/`denominator` must point to at least `t + 1`/`s + 1` doubles.
 */
enum DwStatus dw_pade_coefficients(size_t s, size_t t, double *numerator, double *denominator);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DAMPWAVE_H */
