#ifndef MA_BELLMAN_H
#define MA_BELLMAN_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MaStatus {
  MA_STATUS_OK = 0,
  MA_STATUS_NULL_POINTER = 1,
  MA_STATUS_INVALID_ARGUMENT = 2,
  MA_STATUS_MESH_ERROR = 3,
  MA_STATUS_NOT_CONVERGED = 4,
  MA_STATUS_SOLVER_ERROR = 5,
  MA_STATUS_IO_ERROR = 6,
  MA_STATUS_PANIC = 7,
} MaStatus;

/**
 * Built-in test problems with known solutions.
 */
typedef enum MaProblem {
  MA_PROBLEM_QUARTIC = 0,
  MA_PROBLEM_NONSMOOTH = 1,
} MaProblem;

/**
 * Opaque mesh handle.
 */
typedef struct MaMesh MaMesh;

/**
 * Opaque solution handle.
 */
typedef struct MaSolution MaSolution;

/**
 * Solver settings. Obtain defaults from [`ma_default_options`].
 */
typedef struct MaOptions {
  /**
   * Stencil factor: nominal stencil size is `m * h_avg`.
   */
  double m;
  size_t n_angles;
  size_t n_a;
  double tol;
  size_t max_iter;
} MaOptions;

/**
 * Relative discretization errors against the exact solution.
 */
typedef struct MaErrorNorms {
  double l2_rel;
  double linf_rel;
  double h1_rel;
} MaErrorNorms;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or an empty
 * string. The pointer stays valid until the next `ma_*` call on the thread.
 */
const char *ma_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ma_version(void);

/**
 * Default settings: `m = 2`, a 64 x 33 control grid, tolerance `1e-6` and at
 * most 100 Howard iterations.
 */
struct MaOptions ma_default_options(void);

/**
 * Creates the level-0 mesh of the disk-union-square domain.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum MaStatus ma_mesh_coarse(struct MaMesh **out);

/**
 * Meshes the disk-union-square domain with target edge length `target_h`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum MaStatus ma_mesh_build(double target_h, struct MaMesh **out);

/**
 * Creates a new mesh by `levels` uniform red refinements of `mesh`.
 *
 * # Safety
 * `mesh` must be a live handle and `out` a valid pointer to writable storage.
 */
enum MaStatus ma_mesh_refine(const struct MaMesh *mesh, size_t levels, struct MaMesh **out);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t ma_mesh_num_nodes(const struct MaMesh *mesh);

/**
 * Number of triangles, or 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t ma_mesh_num_triangles(const struct MaMesh *mesh);

/**
 * Average triangle diameter, or NaN for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
double ma_mesh_h_avg(const struct MaMesh *mesh);

/**
 * Copies node coordinates as interleaved `x, y` pairs into `xy`, which must
 * hold at least `2 * num_nodes` values.
 *
 * # Safety
 * `mesh` must be a live handle and `xy` must point to `len` writable doubles.
 */
enum MaStatus ma_mesh_copy_nodes(const struct MaMesh *mesh, double *xy, size_t len);

/**
 * Copies zero-based triangle vertex indices, three per triangle.
 *
 * # Safety
 * `mesh` must be a live handle and `vertices` must point to `len` writable
 * `size_t` values.
 */
enum MaStatus ma_mesh_copy_triangles(const struct MaMesh *mesh, size_t *vertices, size_t len);

/**
 * Copies one flag per node: 1 on the boundary, 0 inside.
 *
 * # Safety
 * `mesh` must be a live handle and `flags` must point to `len` writable bytes.
 */
enum MaStatus ma_mesh_copy_boundary_flags(const struct MaMesh *mesh, uint8_t *flags, size_t len);

/**
 * Writes the mesh in the crate's text format.
 *
 * # Safety
 * `mesh` must be a live handle and `path` a NUL-terminated UTF-8 string.
 */
enum MaStatus ma_mesh_write(const struct MaMesh *mesh, const char *path);

/**
 * Releases a mesh. Null is ignored. Solutions do not borrow their mesh, so
 * the order of release does not matter.
 *
 * # Safety
 * `mesh` must be null or a handle not yet freed.
 */
void ma_mesh_free(struct MaMesh *mesh);

/**
 * Solves a built-in problem on `mesh`. `options` may be null for defaults.
 *
 * On `MA_STATUS_NOT_CONVERGED` the last iterate is still returned in `out`
 * and must be freed.
 *
 * # Safety
 * `mesh` must be a live handle, `problem` one of the declared enumerators,
 * `options` null or valid, and `out` a valid pointer to writable storage for
 * one handle.
 */
enum MaStatus ma_solve(const struct MaMesh *mesh,
                       enum MaProblem problem,
                       const struct MaOptions *options,
                       struct MaSolution **out);

/**
 * Solves with nodal source `f >= 0` and boundary data `g`, both of length
 * `num_nodes`. Only boundary entries of `g` are used.
 *
 * # Safety
 * `mesh` must be a live handle, `f` and `g` must point to `len` readable
 * doubles, `options` must be null or valid, and `out` a valid pointer to
 * writable storage for one handle.
 */
enum MaStatus ma_solve_custom(const struct MaMesh *mesh,
                              const double *f,
                              const double *g,
                              size_t len,
                              const struct MaOptions *options,
                              struct MaSolution **out);

/**
 * Number of nodal values in the solution, or 0 for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t ma_solution_len(const struct MaSolution *solution);

/**
 * Copies the nodal values of the solution.
 *
 * # Safety
 * `solution` must be a live handle and `values` must point to `len`
 * writable doubles.
 */
enum MaStatus ma_solution_copy_values(const struct MaSolution *solution,
                                      double *values,
                                      size_t len);

/**
 * Number of linear solves performed, or 0 for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t ma_solution_iterations(const struct MaSolution *solution);

/**
 * Sup-norm change of the last Howard step, or NaN for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double ma_solution_final_step(const struct MaSolution *solution);

/**
 * Whether the Howard iteration met its tolerance.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
bool ma_solution_converged(const struct MaSolution *solution);

/**
 * Relative errors against the exact solution. Only available for solutions
 * of built-in problems.
 *
 * # Safety
 * `solution` must be a live handle and `out` a valid pointer.
 */
enum MaStatus ma_solution_errors(const struct MaSolution *solution, struct MaErrorNorms *out);

/**
 * Releases a solution. Null is ignored.
 *
 * # Safety
 * `solution` must be null or a handle not yet freed.
 */
void ma_solution_free(struct MaSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MA_BELLMAN_H */
