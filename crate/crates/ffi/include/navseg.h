#ifndef NAVSEG_H
#define NAVSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum NavsegStatus {
  NAVSEG_STATUS_OK = 0,
  NAVSEG_STATUS_NULL_POINTER = 1,
  NAVSEG_STATUS_INVALID_UTF8 = 2,
  NAVSEG_STATUS_IO = 3,
  NAVSEG_STATUS_INVALID_ARGUMENT = 4,
  NAVSEG_STATUS_OUT_OF_RANGE = 5,
  NAVSEG_STATUS_MALFORMED = 6,
  NAVSEG_STATUS_FAILURE = 7,
  NAVSEG_STATUS_PANIC = 8,
} NavsegStatus;

/**
 * A scene with its navigation domain and rendered views.
 */
typedef struct NavsegDataset NavsegDataset;

/**
 * A partition of a dataset's domain into segments.
 */
typedef struct NavsegPartition NavsegPartition;

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`) and returns its full length, or 0 when
 * there is none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t navseg_last_error(char *buf, size_t len);

/**
 * Builds a scene from a JSON file and renders every view of its domain.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NavsegStatus navseg_dataset_load(const char *path, struct NavsegDataset **out);

/**
 * # Safety
 * `ds` must be null or a handle from [`navseg_dataset_load`] not yet freed.
 */
void navseg_dataset_free(struct NavsegDataset *ds);

/**
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum NavsegStatus navseg_dataset_view_count(const struct NavsegDataset *ds, size_t *out);

/**
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum NavsegStatus navseg_dataset_voxel_count(const struct NavsegDataset *ds, size_t *out);

/**
 * Number of voxels seen by both views `a` and `b`.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum NavsegStatus navseg_similarity(const struct NavsegDataset *ds,
                                    size_t a,
                                    size_t b,
                                    size_t *out);

/**
 * Best number of segments for rate weight `mu` and navigation period `nt`.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum NavsegStatus navseg_select_num_segments(const struct NavsegDataset *ds,
                                             double mu,
                                             size_t nt,
                                             uint32_t q,
                                             size_t *out);

/**
 * Runs the partition optimizer with `nv` segments.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum NavsegStatus navseg_partition_optimize(const struct NavsegDataset *ds,
                                            size_t nv,
                                            double lambda,
                                            uint32_t q,
                                            size_t nt,
                                            struct NavsegPartition **out);

/**
 * Reads a partition JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NavsegStatus navseg_partition_load(const char *path, struct NavsegPartition **out);

/**
 * Writes a partition as JSON.
 *
 * # Safety
 * `p` must be a live partition handle and `path` a NUL-terminated string.
 */
enum NavsegStatus navseg_partition_save(const struct NavsegPartition *p, const char *path);

/**
 * # Safety
 * `p` must be null or a partition handle not yet freed.
 */
void navseg_partition_free(struct NavsegPartition *p);

/**
 * # Safety
 * `p` must be a live partition handle and `out` a valid pointer.
 */
enum NavsegStatus navseg_partition_segment_count(const struct NavsegPartition *p, size_t *out);

/**
 * Reference view of segment `segment`.
 *
 * # Safety
 * `p` must be a live partition handle and `out` a valid pointer.
 */
enum NavsegStatus navseg_partition_reference(const struct NavsegPartition *p,
                                             size_t segment,
                                             size_t *out);

/**
 * Segment containing view `view`.
 *
 * # Safety
 * `p` must be a live partition handle and `out` a valid pointer.
 */
enum NavsegStatus navseg_partition_segment_of(const struct NavsegPartition *p,
                                              size_t view,
                                              size_t *out);

/**
 * Storage, expected rate and objective in bits.
 *
 * # Safety
 * `p` must be a live partition handle; each out pointer must be valid.
 */
enum NavsegStatus navseg_partition_costs(const struct NavsegPartition *p,
                                         double *storage,
                                         double *rate,
                                         double *objective);

#endif  /* NAVSEG_H */
