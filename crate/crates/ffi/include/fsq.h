#ifndef FSQ_H
#define FSQ_H

/* Generated by cbindgen. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum FsqStatus {
  FSQ_STATUS_OK = 0,
  FSQ_STATUS_NULL_POINTER = 1,
  FSQ_STATUS_INVALID_UTF8 = 2,
  FSQ_STATUS_INVALID_ARGUMENT = 3,
  FSQ_STATUS_IO = 4,
  FSQ_STATUS_FORMAT = 5,
  FSQ_STATUS_PARSE = 6,
  FSQ_STATUS_RESOLVE = 7,
  FSQ_STATUS_GEOMETRY = 8,
  FSQ_STATUS_OUT_OF_RANGE = 9,
  FSQ_STATUS_PANIC = 10,
} FsqStatus;

/**
 * An ordered collection of fibers.
 */
typedef struct FsqFiberSet FsqFiberSet;

/**
 * A query bound to a scene, ready to score fibers.
 */
typedef struct FsqQuery FsqQuery;

/**
 * Per-fiber scores from one evaluation.
 */
typedef struct FsqResults FsqResults;

/**
 * A loaded scene of named structures.
 */
typedef struct FsqScene FsqScene;

/**
 * Score of one fiber.
 */
typedef struct FsqScore {
  uint64_t fiber_id;
  double degree;
  bool accepted;
  size_t clause_count;
} FsqScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next fsq call on the same thread.
 */
const char *fsq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fsq_version(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FsqStatus fsq_scene_load(const char *path, struct FsqScene **out);

/**
 * # Safety
 * `scene` must be null or come from `fsq_scene_load`, and not be freed twice.
 */
void fsq_scene_free(struct FsqScene *scene);

/**
 * # Safety
 * `scene` must be a live scene; `out` must be writable.
 */
enum FsqStatus fsq_scene_structure_count(const struct FsqScene *scene, size_t *out);

/**
 * Parse query text (directives included) and bind it to `scene`.
 * `cache_dir` may be null to compute every landscape.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum FsqStatus fsq_query_compile(const struct FsqScene *scene,
                                 const char *text,
                                 const char *cache_dir,
                                 struct FsqQuery **out);

/**
 * # Safety
 * `query` must be null or come from `fsq_query_compile`.
 */
void fsq_query_free(struct FsqQuery *query);

/**
 * # Safety
 * `query` must be a live query.
 */
enum FsqStatus fsq_query_set_threshold(struct FsqQuery *query, double threshold);

/**
 * # Safety
 * `query` must be a live query; `out` must be writable.
 */
enum FsqStatus fsq_query_clause_count(const struct FsqQuery *query, size_t *out);

/**
 * Create an empty fiber set.
 */
struct FsqFiberSet *fsq_fibers_new(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FsqStatus fsq_fibers_load(const char *path, struct FsqFiberSet **out);

/**
 * Append a fiber. `xyz` holds `n_points` points as consecutive x, y, z in mm.
 *
 * # Safety
 * `xyz` must point to `3 * n_points` readable doubles.
 */
enum FsqStatus fsq_fibers_push(struct FsqFiberSet *set,
                               uint64_t id,
                               const double *xyz,
                               size_t n_points);

/**
 * # Safety
 * `set` must be a live fiber set; `out` must be writable.
 */
enum FsqStatus fsq_fibers_len(const struct FsqFiberSet *set, size_t *out);

/**
 * # Safety
 * `set` must be null or a fiber set not yet freed.
 */
void fsq_fibers_free(struct FsqFiberSet *set);

/**
 * Score every fiber of `set`, in input order.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum FsqStatus fsq_evaluate(const struct FsqQuery *query,
                            const struct FsqFiberSet *set,
                            struct FsqResults **out);

/**
 * # Safety
 * `results` must be live; `out` must be writable.
 */
enum FsqStatus fsq_results_len(const struct FsqResults *results, size_t *out);

/**
 * # Safety
 * `results` must be live; `out` must be writable.
 */
enum FsqStatus fsq_results_get(const struct FsqResults *results,
                               size_t index,
                               struct FsqScore *out);

/**
 * Copy up to `cap` clause degrees of result `index` into `buf`.
 *
 * # Safety
 * `buf` must have room for `cap` doubles (it may be null when `cap` is 0).
 */
enum FsqStatus fsq_results_clause_degrees(const struct FsqResults *results,
                                          size_t index,
                                          double *buf,
                                          size_t cap,
                                          size_t *written);

/**
 * # Safety
 * `results` must be null or come from `fsq_evaluate`.
 */
void fsq_results_free(struct FsqResults *results);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FSQ_H */
