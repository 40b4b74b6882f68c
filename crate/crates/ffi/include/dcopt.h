#ifndef DCOPT_H
#define DCOPT_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes shared by every entry point.
typedef enum DcoptStatus {
  DCOPT_STATUS_OK = 0,
  DCOPT_STATUS_NULL_POINTER = 1,
  DCOPT_STATUS_INVALID_ARGUMENT = 2,
  DCOPT_STATUS_DIMENSION_MISMATCH = 3,
  DCOPT_STATUS_WEIGHT_BOUNDS = 4,
  DCOPT_STATUS_NOT_STRONGLY_CONVEX = 5,
  DCOPT_STATUS_NUMERICAL_FAILURE = 6,
  DCOPT_STATUS_CERTIFICATION_FAILED = 7,
  DCOPT_STATUS_PANIC = 8,
} DcoptStatus;

// Penalized consensus problem: topology, Metropolis weights, local costs
// and penalty coefficient.
typedef struct DcoptProblem DcoptProblem;

// Undirected connected graph.
typedef struct DcoptTopology DcoptTopology;

// Network Newton options. `tol <= 0` selects the default adaptive
// threshold.
typedef struct DcoptNnOptions {
  size_t k;
  double eps;
  double alpha0;
  bool adaptive;
  double tol;
  double alpha_min;
  size_t max_iters;
} DcoptNnOptions;

// Summary of a finished run.
typedef struct DcoptRunStats {
  size_t iterations;
  uint64_t vector_msgs;
  uint64_t signal_msgs;
  // Penalty coefficient at exit; NaN for ADMM runs.
  double final_alpha;
} DcoptRunStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or an empty string.
// The pointer stays valid until the next call on the same thread.
const char *dcopt_last_error(void);

// Library version as a static NUL-terminated string.
const char *dcopt_version(void);

// Builds a topology from `n_edges` undirected pairs stored as
// `edges[2e], edges[2e + 1]`.
//
// # Safety
// `edges` must point to `2 * n_edges` readable values and `out` must be
// writable.
enum DcoptStatus dcopt_topology_from_edges(size_t n,
                                           const size_t *edges,
                                           size_t n_edges,
                                           struct DcoptTopology **out);

// Samples a connected Erdős–Rényi graph with edge probability `p_c`.
//
// # Safety
// `out` must be writable.
enum DcoptStatus dcopt_topology_random(size_t n,
                                       double p_c,
                                       uint64_t seed,
                                       struct DcoptTopology **out);

// Number of nodes.
//
// # Safety
// `topology` must be a live handle or null.
size_t dcopt_topology_nodes(const struct DcoptTopology *topology);

// Number of undirected edges.
//
// # Safety
// `topology` must be a live handle or null.
size_t dcopt_topology_edges(const struct DcoptTopology *topology);

// # Safety
// `topology` must come from this library and not be freed twice.
void dcopt_topology_free(struct DcoptTopology *topology);

// Quadratic problem with `f_i(x) = ½xᵀA_i x + b_iᵀx`. `a` holds the `n`
// row-major `p×p` blocks back to back and `b` the `n` vectors of length `p`.
//
// # Safety
// `a` must hold `n·p·p` values, `b` must hold `n·p` values and `out` must be
// writable.
enum DcoptStatus dcopt_problem_quadratic(const struct DcoptTopology *topology,
                                         size_t p,
                                         const double *a,
                                         const double *b,
                                         double alpha,
                                         struct DcoptProblem **out);

// Regularized logistic regression. `features` holds `rows` row-major
// samples of length `p`, `labels` holds values in {−1, +1}; rows are split
// across nodes in contiguous chunks.
//
// # Safety
// `features` must hold `rows·p` values, `labels` must hold `rows` values and
// `out` must be writable.
enum DcoptStatus dcopt_problem_logistic(const struct DcoptTopology *topology,
                                        size_t p,
                                        const double *features,
                                        const double *labels,
                                        size_t rows,
                                        double reg,
                                        double alpha,
                                        struct DcoptProblem **out);

// Length `n·p` of the stacked iterate.
//
// # Safety
// `problem` must be a live handle or null.
size_t dcopt_problem_dim(const struct DcoptProblem *problem);

// # Safety
// `problem` must come from this library and not be freed twice.
void dcopt_problem_free(struct DcoptProblem *problem);

// Defaults: `K = 1`, unit step, `α₀ = 1e-2`, fixed penalty, 100 iterations.
struct DcoptNnOptions dcopt_nn_options_default(void);

// Runs network Newton (or its adaptive variant) from zero on `problem`,
// writing the stacked iterate to `y_out` (length [`dcopt_problem_dim`]).
// The problem's own penalty coefficient is replaced by `options.alpha0`.
// `stats` may be null.
//
// # Safety
// Handles must be live, `options` readable, `y_out` writable for `y_len`
// values and `stats` writable or null.
enum DcoptStatus dcopt_nn_solve(const struct DcoptProblem *problem,
                                const struct DcoptNnOptions *options,
                                double *y_out,
                                size_t y_len,
                                struct DcoptRunStats *stats);

// Runs DQM with penalty `c` on the local costs of `problem` from the
// standard zero start. The penalty coefficient of `problem` is unused.
//
// # Safety
// Handles must be live, `x_out` writable for `x_len` values and `stats`
// writable or null.
enum DcoptStatus dcopt_dqm_solve(const struct DcoptProblem *problem,
                                 double c,
                                 size_t max_iters,
                                 double *x_out,
                                 size_t x_len,
                                 struct DcoptRunStats *stats);

// Checks every splitting bound at the point `y` for order `k`. Writes 1 to
// `passed` when all hold and 0 otherwise; a failed bound also returns
// [`DcoptStatus::CertificationFailed`] with the failing checks in the error
// message.
//
// # Safety
// `problem` must be live, `y` readable for `y_len` values and `passed`
// writable or null.
enum DcoptStatus dcopt_certify(const struct DcoptProblem *problem,
                               const double *y,
                               size_t y_len,
                               size_t k,
                               int32_t *passed);

// Status code name as a static NUL-terminated string.
const char *dcopt_status_name(enum DcoptStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCOPT_H */
