/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef ELASTIC_COMPLEX_H
#define ELASTIC_COMPLEX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Highest degree accepted by the calls below.
 */
#define EC_P_MAX 12

typedef enum EcStatus {
  EC_STATUS_OK = 0,
  EC_STATUS_NULL_POINTER = 1,
  /**
   * bad name, degree, file or mesh
   */
  EC_STATUS_INVALID_ARGUMENT = 2,
  EC_STATUS_NUMERICAL = 3,
  /**
   * a Rust panic was caught at the boundary
   */
  EC_STATUS_PANIC = 4,
} EcStatus;

typedef enum EcBc {
  EC_BC_DISPLACEMENT = 0,
  EC_BC_TRACTION = 1,
  /**
   * the boundary tags stored in the mesh file
   */
  EC_BC_FILE_TAGS = 2,
} EcBc;

/**
 * Opaque mesh handle.
 */
typedef struct EcMesh EcMesh;

typedef struct EcInfSup {
  double beta;
  double nu;
  double residual;
  size_t dim_sigma;
  size_t dim_v;
} EcInfSup;

typedef struct EcComplexReport {
  size_t dim_sigma;
  size_t dim_q;
  size_t dim_v;
  size_t i_star;
  size_t p1_gamma;
  size_t cohomology_dim;
  bool euler_identity;
  double kernel_gap;
  double airy_gap;
} EcComplexReport;

typedef struct EcHodgeConstants {
  /**
   * bound of the harmonic and potential parts by the stress
   */
  double potential;
  /**
   * bound of the remaining part by the divergence
   */
  double tau;
} EcHodgeConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a mesh from a built-in name (`unit_triangle`, `crisscross(n)`,
 * `square_annulus`) or a path to a `tri-mesh v1` file.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 * The handle stored in `*out` must be released with `ec_mesh_free`.
 */
enum EcStatus ec_mesh_new(const char *name, struct EcMesh **out);

/**
 * One uniform refinement of `mesh` as a new handle.
 *
 * # Safety
 * `mesh` must be a live handle and `out` a writable pointer.
 */
enum EcStatus ec_mesh_refine(const struct EcMesh *mesh, struct EcMesh **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `mesh` must be null or a handle not freed before.
 */
void ec_mesh_free(struct EcMesh *mesh);

/**
 * Vertex, edge and cell counts.
 *
 * # Safety
 * `mesh` must be a live handle; the three outputs must be writable.
 */
enum EcStatus ec_mesh_counts(const struct EcMesh *mesh, size_t *nv, size_t *ne, size_t *nt);

/**
 * Discrete inf-sup constant of the stress space of degree `p` (or its
 * Arnold-Winther subspace) against the displacements.
 *
 * # Safety
 * `mesh` must be a live handle and `out` writable.
 */
enum EcStatus ec_infsup(const struct EcMesh *mesh,
                        size_t p,
                        enum EcBc bc,
                        bool arnold_winther,
                        struct EcInfSup *out);

/**
 * Space dimensions, the Euler-type identity and the cohomology dimension.
 *
 * # Safety
 * `mesh` must be a live handle and `out` writable.
 */
enum EcStatus ec_complex_check(const struct EcMesh *mesh,
                               size_t p,
                               enum EcBc bc,
                               struct EcComplexReport *out);

/**
 * Worst-case constants of the decomposition with degree-3 harmonic forms.
 *
 * # Safety
 * `mesh` must be a live handle and `out` writable.
 */
enum EcStatus ec_hodge_constants(const struct EcMesh *mesh,
                                 size_t p,
                                 enum EcBc bc,
                                 struct EcHodgeConstants *out);

/**
 * Copies the message of the last failure on this thread into `buf` and
 * returns its length without the terminating NUL. Nothing is written when
 * `buf` is null or `len` is too small; call again with a larger buffer.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ec_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ec_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELASTIC_COMPLEX_H */
