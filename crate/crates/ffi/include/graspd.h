#ifndef GRASPD_H
#define GRASPD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/**
 * Result of every fallible call.
 */
typedef enum GraspdStatus {
  GRASPD_STATUS_OK = 0,
  GRASPD_STATUS_NULL_POINTER = 1,
  GRASPD_STATUS_INVALID_ARGUMENT = 2,
  GRASPD_STATUS_IO = 3,
  GRASPD_STATUS_NUMERICAL = 4,
  GRASPD_STATUS_PANIC = 5,
} GraspdStatus;

/**
 * The candidate kept by one synthesis run.
 */
typedef struct GraspdGrasp GraspdGrasp;

/**
 * An articulated hand.
 */
typedef struct GraspdHand GraspdHand;

/**
 * A signed distance grid.
 */
typedef struct GraspdSdf GraspdSdf;

/**
 * Scores for one grasp. `ratio` is negative when nothing interpenetrates;
 * `displacement` is infinite when the shake test diverged.
 */
typedef struct GraspdEvalReport {
  double contact_area;
  double interpen_volume;
  double ratio;
  double epsilon;
  double displacement;
  size_t contact_count;
} GraspdEvalReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library from this thread.
 */
const char *graspd_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void graspd_string_free(char *s);

/**
 * Loads a bundled hand (`"tripod"` or `"pinch"`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum GraspdStatus graspd_hand_builtin(const char *name, struct GraspdHand **out);

/**
 * Parses a hand description.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum GraspdStatus graspd_hand_from_json(const char *json, struct GraspdHand **out);

/**
 * # Safety
 * `hand` must be null or a handle from this library, not yet freed.
 */
void graspd_hand_free(struct GraspdHand *hand);

/**
 * Number of joint angles; 0 for a null handle.
 *
 * # Safety
 * `hand` must be null or a live handle.
 */
size_t graspd_hand_num_joints(const struct GraspdHand *hand);

/**
 * Number of surface sample points; 0 for a null handle.
 *
 * # Safety
 * `hand` must be null or a live handle.
 */
size_t graspd_hand_num_points(const struct GraspdHand *hand);

/**
 * Reads a binary grid file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum GraspdStatus graspd_sdf_load(const char *path, struct GraspdSdf **out);

/**
 * Builds a grid from node values in x-fastest order over the box
 * `min..max`.
 *
 * # Safety
 * `dims`, `min` and `max` must point to 3 values, `values` to `len`.
 */
enum GraspdStatus graspd_sdf_from_values(const size_t *dims,
                                         const double *min,
                                         const double *max,
                                         const double *values,
                                         size_t len,
                                         struct GraspdSdf **out);

/**
 * # Safety
 * `sdf` must be null or a live handle.
 */
void graspd_sdf_free(struct GraspdSdf *sdf);

/**
 * Signed distance at a world point.
 *
 * # Safety
 * `point` must point to 3 values and `out` be writable.
 */
enum GraspdStatus graspd_sdf_distance(const struct GraspdSdf *sdf,
                                      const double *point,
                                      double *out);

/**
 * Runs one grasp optimization. `config_json` may be null for defaults;
 * `job` selects the random stream.
 *
 * # Safety
 * Handles must be live; `config_json` null or NUL-terminated; `out`
 * writable.
 */
enum GraspdStatus graspd_synthesize(const struct GraspdHand *hand,
                                    const struct GraspdSdf *sdf,
                                    const char *config_json,
                                    uint64_t job,
                                    struct GraspdGrasp **out);

/**
 * # Safety
 * `grasp` must be null or a live handle.
 */
void graspd_grasp_free(struct GraspdGrasp *grasp);

/**
 * Whether the kept candidate meets both constraints; false for null.
 *
 * # Safety
 * `grasp` must be null or a live handle.
 */
bool graspd_grasp_feasible(const struct GraspdGrasp *grasp);

/**
 * The kept candidate, its losses and displacement as JSON. Release with
 * [`graspd_string_free`].
 *
 * # Safety
 * `grasp` must be a live handle and `out` writable.
 */
enum GraspdStatus graspd_grasp_to_json(const struct GraspdGrasp *grasp, char **out);

/**
 * Scores a grasp against `sdf`.
 *
 * # Safety
 * Handles must be live; `config_json` null or NUL-terminated; `out`
 * writable.
 */
enum GraspdStatus graspd_evaluate(const struct GraspdHand *hand,
                                  const struct GraspdSdf *sdf,
                                  const struct GraspdGrasp *grasp,
                                  const char *config_json,
                                  struct GraspdEvalReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRASPD_H */
