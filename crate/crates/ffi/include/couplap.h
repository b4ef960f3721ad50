#ifndef COUPLAP_H
#define COUPLAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CouplapStatus {
  COUPLAP_STATUS_OK = 0,
  COUPLAP_STATUS_NULL_POINTER = 1,
  COUPLAP_STATUS_IO = 2,
  COUPLAP_STATUS_PARSE = 3,
  COUPLAP_STATUS_EMPTY_CLOUD = 4,
  COUPLAP_STATUS_DIMENSION_MISMATCH = 5,
  COUPLAP_STATUS_DISCONNECTED = 6,
  COUPLAP_STATUS_DEGENERATE = 7,
  COUPLAP_STATUS_NON_CONVERGENCE = 8,
  COUPLAP_STATUS_INVALID_ARGUMENT = 9,
  COUPLAP_STATUS_PRECONDITION = 10,
  COUPLAP_STATUS_BUFFER_TOO_SMALL = 11,
  COUPLAP_STATUS_PANIC = 12,
} CouplapStatus;

typedef enum CouplapSide {
  COUPLAP_SIDE_LEFT = 0,
  COUPLAP_SIDE_RIGHT = 1,
} CouplapSide;

/**
 * Opaque point cloud.
 */
typedef struct CouplapCloud CouplapCloud;

/**
 * Opaque set of eigenpairs.
 */
typedef struct CouplapEmbedding CouplapEmbedding;

typedef struct CouplapSideResult {
  /**
   * 0 for left, 1 for right.
   */
  int32_t side;
  double d_same;
  double d_mirror;
  double margin;
  bool registration_failure;
} CouplapSideResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library from the same thread.
 */
const char *couplap_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *couplap_version(void);

/**
 * Builds a cloud from `n` interleaved `x, y, z` triples.
 *
 * # Safety
 * `xyz` must point to `3 * n` readable doubles and `out` must be writable.
 */
enum CouplapStatus couplap_cloud_from_xyz(const double *xyz, size_t n, struct CouplapCloud **out);

/**
 * Loads a cloud from a PLY, XYZ-CSV or organized-grid file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be writable.
 */
enum CouplapStatus couplap_cloud_load(const char *path, struct CouplapCloud **out);

/**
 * Number of points, or 0 for a null handle.
 *
 * # Safety
 * `cloud` must be null or a live handle.
 */
size_t couplap_cloud_len(const struct CouplapCloud *cloud);

/**
 * # Safety
 * `cloud` must be null or a handle not yet freed.
 */
void couplap_cloud_free(struct CouplapCloud *cloud);

/**
 * Smallest `m + 1` eigenpairs of the cloud's kNN graph Laplacian.
 *
 * # Safety
 * `cloud` must be a live handle and `out` must be writable.
 */
enum CouplapStatus couplap_eigenmaps(const struct CouplapCloud *cloud,
                                     size_t k,
                                     size_t m,
                                     struct CouplapEmbedding **out);

/**
 * Number of vertices, or 0 for a null handle.
 *
 * # Safety
 * `emb` must be null or a live handle.
 */
size_t couplap_embedding_rows(const struct CouplapEmbedding *emb);

/**
 * Number of eigenpairs, or 0 for a null handle.
 *
 * # Safety
 * `emb` must be null or a live handle.
 */
size_t couplap_embedding_count(const struct CouplapEmbedding *emb);

/**
 * Copies the ascending eigenvalues into `out`.
 *
 * # Safety
 * `emb` must be a live handle and `out` must hold `len` doubles.
 */
enum CouplapStatus couplap_embedding_eigenvalues(const struct CouplapEmbedding *emb,
                                                 double *out,
                                                 size_t len);

/**
 * Copies the eigenvectors column-major (`rows * count` values) into `out`.
 *
 * # Safety
 * `emb` must be a live handle and `out` must hold `len` doubles.
 */
enum CouplapStatus couplap_embedding_vectors(const struct CouplapEmbedding *emb,
                                             double *out,
                                             size_t len);

/**
 * # Safety
 * `emb` must be null or a handle not yet freed.
 */
void couplap_embedding_free(struct CouplapEmbedding *emb);

/**
 * Grassmann distance between the target and each of `count` registered
 * sources, written to `distances`.
 *
 * # Safety
 * Handles must be live, `sources` must hold `count` handles and
 * `distances` must hold `len` doubles.
 */
enum CouplapStatus couplap_global_match(const struct CouplapCloud *target,
                                        const struct CouplapCloud *const *sources,
                                        size_t count,
                                        size_t k,
                                        size_t m,
                                        double l,
                                        uint64_t seed,
                                        double *distances,
                                        size_t len);

/**
 * Per-point dissimilarity in `[0, 2]` between the target and one
 * registered source. `scores` receives one value per target point; points
 * without a cross-connection get NaN.
 *
 * # Safety
 * Handles must be live and `scores` must hold `len` doubles.
 */
enum CouplapStatus couplap_pointwise(const struct CouplapCloud *target,
                                     const struct CouplapCloud *source,
                                     size_t k,
                                     size_t m,
                                     double l,
                                     uint64_t seed,
                                     double *scores,
                                     size_t len);

/**
 * Side of `target` given a `source` of known side, with default parameters
 * and PCA+ICP registration.
 *
 * # Safety
 * Handles must be live and `out` must be writable.
 */
enum CouplapStatus couplap_estimate_side(const struct CouplapCloud *source,
                                         enum CouplapSide source_side,
                                         const struct CouplapCloud *target,
                                         uint64_t seed,
                                         struct CouplapSideResult *out);

/**
 * Normalized area under the PRO curve up to `fpr_limit` for a row-major
 * `height * width` score map and mask (non-zero is anomalous).
 *
 * # Safety
 * `scores` and `mask` must hold `height * width` values and `out` must be
 * writable.
 */
enum CouplapStatus couplap_pro_auc(const double *scores,
                                   const uint8_t *mask,
                                   size_t height,
                                   size_t width,
                                   double fpr_limit,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COUPLAP_H */
