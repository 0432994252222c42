#ifndef SPARSE_BANDIT_H
#define SPARSE_BANDIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every exported function.
typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_ARGUMENT = 2,
  SB_STATUS_DIMENSION_MISMATCH = 3,
  SB_STATUS_INVALID_GEOMETRY = 4,
  SB_STATUS_INVALID_SUPPORT = 5,
  SB_STATUS_UNSUPPORTED_GEOMETRY = 6,
  SB_STATUS_BUDGET_EXCEEDED = 7,
  SB_STATUS_SINGULAR_BASIS = 8,
  SB_STATUS_CONFIG = 9,
  SB_STATUS_IO = 10,
  SB_STATUS_PANIC = 11,
} SbStatus;

// Opaque result of a multi-trial experiment.
typedef struct SbExperiment SbExperiment;

// Opaque action-set geometry.
typedef struct SbGeometry SbGeometry;

// Headline numbers of an experiment. Absent values are NaN.
typedef struct SbSummary {
  size_t trials;
  uint64_t horizon;
  double mean_regret;
  double std_regret;
  double mean_alpha_regret;
  double std_alpha_regret;
  double mean_alpha;
  double lock_fraction;
  double mean_lock_cycle;
  double mean_recovery_cycle;
  double c0;
} SbSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *sb_last_error(void);

// Euclidean ball of the given radius in `dim` dimensions.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum SbStatus sb_geometry_euclidean_ball(size_t dim, double radius, struct SbGeometry **out);

// Ellipsoid `{x : xᵀAx ≤ 1}` from a row-major `dim × dim` matrix.
//
// # Safety
// `a` must point to `dim * dim` doubles; `out` must be writable.
enum SbStatus sb_geometry_ellipsoid(size_t dim, const double *a, struct SbGeometry **out);

// `{x : ‖x‖_p ≤ radius}` for `p ∈ (1, 2]`.
//
// # Safety
// `out` must be writable.
enum SbStatus sb_geometry_lp_ball(size_t dim, double p, double radius, struct SbGeometry **out);

// `{x : ‖x‖₁ ≤ radius}`.
//
// # Safety
// `out` must be writable.
enum SbStatus sb_geometry_l1_ball(size_t dim, double radius, struct SbGeometry **out);

// Box `∏ [lo_i, hi_i]`.
//
// # Safety
// `lo` and `hi` must each point to `dim` doubles; `out` must be writable.
enum SbStatus sb_geometry_hypercube(size_t dim,
                                    const double *lo,
                                    const double *hi,
                                    struct SbGeometry **out);

// Releases a geometry. NULL is ignored.
//
// # Safety
// `g` must come from one of the `sb_geometry_*` constructors and not have
// been freed already.
void sb_geometry_free(struct SbGeometry *g);

// Ambient dimension, or 0 for NULL.
//
// # Safety
// `g` must be NULL or a live handle.
size_t sb_geometry_dim(const struct SbGeometry *g);

// `sup_{x ∈ X} ‖x‖₂`.
//
// # Safety
// `g` must be a live handle; `out_value` must be writable.
enum SbStatus sb_geometry_max_norm(const struct SbGeometry *g, double *out_value);

// `h(S; θ)` for the support given by `support_len` indices.
//
// # Safety
// `theta` must point to `dim` doubles, `support` to `support_len` indices;
// `out_value` must be writable.
enum SbStatus sb_value_on_support(const struct SbGeometry *g,
                                  const double *theta,
                                  const size_t *support,
                                  size_t support_len,
                                  double *out_value);

// A maximiser of `θᵀx` over `X ∩ {supp(x) ⊆ S}`, written to `out_action`.
//
// # Safety
// `theta` and `out_action` must point to `dim` doubles, `support` to
// `support_len` indices.
enum SbStatus sb_best_action_on_support(const struct SbGeometry *g,
                                        const double *theta,
                                        const size_t *support,
                                        size_t support_len,
                                        double *out_action);

// Writes 1 to `out_member` if `x ∈ X`, else 0.
//
// # Safety
// `x` must point to `dim` doubles; `out_member` must be writable.
enum SbStatus sb_membership(const struct SbGeometry *g, const double *x, int32_t *out_member);

// Exact best H-sparse action on a Euclidean ball.
//
// # Safety
// `theta` and `out_action` must point to `dim` doubles, `out_support` to
// room for `h` indices; `out_len` and `out_value` must be writable.
enum SbStatus sb_exact_top_h(const struct SbGeometry *g,
                             const double *theta,
                             size_t h,
                             size_t *out_support,
                             size_t *out_len,
                             double *out_action,
                             double *out_value);

// Best H-sparse action by enumerating every support of size `≤ h`.
//
// # Safety
// Same buffer requirements as [`sb_exact_top_h`].
enum SbStatus sb_brute_force(const struct SbGeometry *g,
                             const double *theta,
                             size_t h,
                             size_t *out_support,
                             size_t *out_len,
                             double *out_action,
                             double *out_value);

// Greedy support selection. Writes the `h` indices in selection order, the
// value of the selected support and the minimum marginal-gain gap
// (`INFINITY` when undefined).
//
// # Safety
// `theta` must point to `dim` doubles, `out_selected` to room for `h`
// indices; `out_value` and `out_min_gap` must be writable.
enum SbStatus sb_greedy_select(const struct SbGeometry *g,
                               const double *theta,
                               size_t h,
                               size_t *out_selected,
                               double *out_value,
                               double *out_min_gap);

// Parses a TOML experiment config and runs every trial. Relative paths in
// the config resolve against `base_dir`, which may be NULL.
//
// # Safety
// `config` must be a nul-terminated string, `base_dir` NULL or one; `out`
// must be writable.
enum SbStatus sb_experiment_run(const char *config,
                                const char *base_dir,
                                struct SbExperiment **out);

// Releases an experiment result. NULL is ignored.
//
// # Safety
// `e` must come from [`sb_experiment_run`] and not have been freed already.
void sb_experiment_free(struct SbExperiment *e);

// Copies the experiment's headline numbers into `out_summary`.
//
// # Safety
// `e` must be a live handle; `out_summary` must be writable.
enum SbStatus sb_experiment_summary(const struct SbExperiment *e, struct SbSummary *out_summary);

// Writes `regret.csv`, `cycles.csv`, `recovery.csv` and `summary.csv` into
// `out_dir`, creating it if needed.
//
// # Safety
// `e` must be a live handle and `out_dir` a nul-terminated string.
enum SbStatus sb_experiment_export_csv(const struct SbExperiment *e, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSE_BANDIT_H */
