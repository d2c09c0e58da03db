#ifndef SCENRED_H
#define SCENRED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScenredCostKind {
  SCENRED_COST_KIND_ID = 0,
  SCENRED_COST_KIND_MO = 1,
  SCENRED_COST_KIND_BR = 2,
  SCENRED_COST_KIND_BE = 3,
  SCENRED_COST_KIND_PR = 4,
} ScenredCostKind;

typedef enum ScenredStatus {
  SCENRED_STATUS_OK = 0,
  /**
   * Invalid option or parameter (bad `m`, unknown kind, ...).
   */
  SCENRED_STATUS_CONFIG_ERROR = 1,
  /**
   * Input data rejected (probabilities, shapes, schema).
   */
  SCENRED_STATUS_DATA_ERROR = 2,
  /**
   * The MILP/LP backend failed or the problem is degenerate.
   */
  SCENRED_STATUS_SOLVER_ERROR = 3,
  /**
   * A required pointer was null.
   */
  SCENRED_STATUS_NULL_POINTER = 5,
  /**
   * Output buffer too small; nothing was written.
   */
  SCENRED_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * Internal panic, caught at the boundary.
   */
  SCENRED_STATUS_PANIC = 7,
} ScenredStatus;

/**
 * Cost matrix handle.
 */
typedef struct ScenredCostMatrix ScenredCostMatrix;

/**
 * Discrete distribution handle.
 */
typedef struct ScenredDistribution ScenredDistribution;

/**
 * Unit-commitment problem handle.
 */
typedef struct ScenredProblem ScenredProblem;

/**
 * Forward-selection result handle.
 */
typedef struct ScenredReduction ScenredReduction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *scenred_last_error(void);

/**
 * Library version, static storage.
 */
const char *scenred_version(void);

/**
 * Builds a distribution from `n` scenarios of dimension `dim` stored
 * row-major in `values`. `probabilities` may be null for equal weights.
 *
 * # Safety
 * `values` must point to `n * dim` doubles and `probabilities`, when not
 * null, to `n` doubles.
 */
enum ScenredStatus scenred_distribution_new(size_t n,
                                            size_t dim,
                                            const double *values,
                                            const double *probabilities,
                                            struct ScenredDistribution **out);

/**
 * # Safety
 * `d` must be null or a handle from this library, not yet freed.
 */
void scenred_distribution_free(struct ScenredDistribution *d);

/**
 * Number of scenarios, 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
size_t scenred_distribution_len(const struct ScenredDistribution *d);

/**
 * Scenario dimension, 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
size_t scenred_distribution_dim(const struct ScenredDistribution *d);

/**
 * Squared Euclidean distances between the scenarios of `d`.
 *
 * # Safety
 * `d` must be a live handle and `out` a valid pointer.
 */
enum ScenredStatus scenred_cost_matrix_id(const struct ScenredDistribution *d,
                                          struct ScenredCostMatrix **out);

/**
 * User-supplied `n x n` row-major costs with a zero diagonal.
 *
 * # Safety
 * `entries` must point to `n * n` doubles.
 */
enum ScenredStatus scenred_cost_matrix_new(size_t n,
                                           const double *entries,
                                           enum ScenredCostKind kind,
                                           struct ScenredCostMatrix **out);

/**
 * Problem-driven cost matrix of `kind` for `d` on `problem`, solved to the
 * relative MIP gap `gap`. The solver backend honors `SCENRED_SOLVER`.
 *
 * # Safety
 * All handles must be live and `out` valid.
 */
enum ScenredStatus scenred_cost_matrix_problem(const struct ScenredProblem *problem,
                                               enum ScenredCostKind kind,
                                               const struct ScenredDistribution *d,
                                               double gap,
                                               struct ScenredCostMatrix **out);

/**
 * # Safety
 * `c` must be null or a live handle.
 */
void scenred_cost_matrix_free(struct ScenredCostMatrix *c);

/**
 * Side length, 0 for a null handle.
 *
 * # Safety
 * `c` must be null or a live handle.
 */
size_t scenred_cost_matrix_size(const struct ScenredCostMatrix *c);

/**
 * Entry `(i, j)`, 1-based.
 *
 * # Safety
 * `c` must be live and `value` valid.
 */
enum ScenredStatus scenred_cost_matrix_get(const struct ScenredCostMatrix *c,
                                           size_t i,
                                           size_t j,
                                           double *value);

/**
 * MILPs and LPs solved to build the matrix.
 *
 * # Safety
 * `c` must be live; the output pointers valid.
 */
enum ScenredStatus scenred_cost_matrix_solve_counts(const struct ScenredCostMatrix *c,
                                                    uint64_t *milp_count,
                                                    uint64_t *lp_count);

/**
 * Greedy forward selection of `m` scenarios with redistribution.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum ScenredStatus scenred_forward_select(const struct ScenredDistribution *d,
                                          const struct ScenredCostMatrix *c,
                                          size_t m,
                                          struct ScenredReduction **out);

/**
 * # Safety
 * `r` must be null or a live handle.
 */
void scenred_reduction_free(struct ScenredReduction *r);

/**
 * Number of selected scenarios, 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
size_t scenred_reduction_len(const struct ScenredReduction *r);

/**
 * Selected ids (1-based) in selection order.
 *
 * # Safety
 * `r` must be live; `buf` must hold `cap` values.
 */
enum ScenredStatus scenred_reduction_indices(const struct ScenredReduction *r,
                                             size_t *buf,
                                             size_t cap);

/**
 * Redistributed masses, aligned with [`scenred_reduction_indices`].
 *
 * # Safety
 * `r` must be live; `buf` must hold `cap` values.
 */
enum ScenredStatus scenred_reduction_probabilities(const struct ScenredReduction *r,
                                                   double *buf,
                                                   size_t cap);

/**
 * Transport distance between the original and the reduced distribution.
 *
 * # Safety
 * `r` must be live and `value` valid.
 */
enum ScenredStatus scenred_reduction_distance(const struct ScenredReduction *r, double *value);

/**
 * The built-in two-bus, two-generator, one-farm instance over two periods.
 *
 * # Safety
 * `out` must be valid.
 */
enum ScenredStatus scenred_problem_desk(struct ScenredProblem **out);

/**
 * Parses a `network.json` document (MW units).
 *
 * # Safety
 * `json` must be a NUL-terminated UTF-8 string; `out` valid.
 */
enum ScenredStatus scenred_problem_from_json(const char *json, struct ScenredProblem **out);

/**
 * # Safety
 * `p` must be null or a live handle.
 */
void scenred_problem_free(struct ScenredProblem *p);

/**
 * Length of one scenario vector (farms times periods), 0 for null.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t scenred_problem_scenario_dim(const struct ScenredProblem *p);

/**
 * Relative approximation error of the reduced distribution in `r` with
 * respect to `d`, as a fraction (not percent).
 *
 * # Safety
 * Handles must be live and `rae` valid.
 */
enum ScenredStatus scenred_problem_rae(const struct ScenredProblem *problem,
                                       const struct ScenredDistribution *d,
                                       const struct ScenredReduction *r,
                                       double gap,
                                       double *rae);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCENRED_H */
