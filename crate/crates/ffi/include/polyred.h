#ifndef POLYRED_H
#define POLYRED_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PolyredMode {
  POLYRED_MODE_STRICT = 0,
  POLYRED_MODE_RELAXED = 1,
  POLYRED_MODE_PRIVATIZED = 2,
} PolyredMode;

typedef enum PolyredScheduleSource {
  POLYRED_SCHEDULE_SOURCE_ORIGINAL = 0,
  POLYRED_SCHEDULE_SOURCE_SEARCH = 1,
} PolyredScheduleSource;

typedef enum PolyredStatus {
  POLYRED_STATUS_OK = 0,
  POLYRED_STATUS_NULL_ARGUMENT = 1,
  POLYRED_STATUS_INVALID_UTF8 = 2,
  POLYRED_STATUS_PARSE_ERROR = 3,
  /**
   * Dependence analysis, search or planning could not proceed.
   */
  POLYRED_STATUS_ANALYSIS_ERROR = 4,
  POLYRED_STATUS_ILLEGAL_SCHEDULE = 5,
  POLYRED_STATUS_INVALID_ARGUMENT = 6,
  POLYRED_STATUS_EXECUTION_ERROR = 7,
  POLYRED_STATUS_PANIC = 8,
} PolyredStatus;

/**
 * A validated schedule of a kernel with its privatization plan.
 */
typedef struct PolyredPlan PolyredPlan;

/**
 * A parsed kernel.
 */
typedef struct PolyredScop PolyredScop;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *polyred_last_error_message(void);

/**
 * Parses a kernel; with `fuse` consecutive statements of a block are fused.
 *
 * # Safety
 * `source` must be a nul-terminated string and `out` a valid pointer.
 */
enum PolyredStatus polyred_scop_parse(const char *source, bool fuse, struct PolyredScop **out_scop);

/**
 * # Safety
 * `scop` must come from [`polyred_scop_parse`] and not be used afterwards.
 */
void polyred_scop_free(struct PolyredScop *scop);

/**
 * Number of statements of the kernel.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PolyredStatus polyred_scop_statement_count(const struct PolyredScop *scop, size_t *count);

/**
 * Number of detected reductions.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PolyredStatus polyred_scop_reduction_count(const struct PolyredScop *scop, size_t *count);

/**
 * Validates the original or searched schedule under `mode` and plans
 * parallelization and privatization.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PolyredStatus polyred_plan_new(const struct PolyredScop *scop,
                                    enum PolyredMode legality,
                                    enum PolyredScheduleSource source,
                                    struct PolyredPlan **out_plan);

/**
 * # Safety
 * `plan` must come from [`polyred_plan_new`] and not be used afterwards.
 */
void polyred_plan_free(struct PolyredPlan *plan);

/**
 * Parallel schedule dimension, or -1 when the code stays sequential.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PolyredStatus polyred_plan_parallel_dim(const struct PolyredPlan *plan, int64_t *dim);

/**
 * Number of privatized reductions.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PolyredStatus polyred_plan_privatized_count(const struct PolyredPlan *plan, size_t *count);

/**
 * OpenMP C for the plan. Release the string with [`polyred_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum PolyredStatus polyred_plan_emit_c(const struct PolyredPlan *plan, char **code);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void polyred_string_free(char *s);

/**
 * Runs the plan on `contexts` simulated threads for `seeds` interleavings
 * starting at `seed`, comparing memory with sequential execution.
 * `params` binds every parameter, e.g. `"NX=4,NY=3"`.
 *
 * # Safety
 * Pointers must be valid; `params` nul-terminated.
 */
enum PolyredStatus polyred_plan_verify(const struct PolyredPlan *plan,
                                       const char *params,
                                       size_t contexts,
                                       size_t seeds,
                                       uint64_t seed,
                                       bool *all_equal);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYRED_H */
