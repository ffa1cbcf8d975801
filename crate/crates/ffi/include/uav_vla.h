#ifndef UAV_VLA_H
#define UAV_VLA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum UavVlaStatus {
  UAV_VLA_STATUS_OK = 0,
  UAV_VLA_STATUS_NULL_POINTER = 1,
  UAV_VLA_STATUS_INVALID_ARGUMENT = 2,
  UAV_VLA_STATUS_INVALID_UTF8 = 3,
  UAV_VLA_STATUS_PARSE = 4,
  UAV_VLA_STATUS_INVALID_PLAN = 5,
  UAV_VLA_STATUS_EVALUATION = 6,
  UAV_VLA_STATUS_PANIC = 7,
} UavVlaStatus;

typedef enum UavVlaMethod {
  UAV_VLA_METHOD_KNN = 0,
  UAV_VLA_METHOD_DTW = 1,
  UAV_VLA_METHOD_SEQUENTIAL = 2,
} UavVlaMethod;

/**
 * Opaque georeference handle.
 */
typedef struct UavVlaGeoReference UavVlaGeoReference;

/**
 * Opaque mission plan handle.
 */
typedef struct UavVlaMissionPlan UavVlaMissionPlan;

/**
 * Opaque trajectory handle.
 */
typedef struct UavVlaTrajectory UavVlaTrajectory;

typedef struct UavVlaGeoPoint {
  double lat;
  double lon;
} UavVlaGeoPoint;

typedef struct UavVlaPixel {
  double x;
  double y;
} UavVlaPixel;

typedef struct UavVlaMetric {
  double rmse_m;
  double total_sq_m2;
  size_t matched_pairs;
  /**
   * Sequential only: the trajectories differ in length.
   */
  bool length_mismatch;
} UavVlaMetric;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *uav_vla_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void uav_vla_string_free(char *s);

/**
 * Great-circle distance in meters.
 *
 * # Safety
 * `out_m` must be NULL or point to writable memory.
 */
enum UavVlaStatus uav_vla_haversine_m(struct UavVlaGeoPoint a,
                                      struct UavVlaGeoPoint b,
                                      double *out_m);

/**
 * # Safety
 * `out_ref` must be NULL or point to writable memory.
 */
enum UavVlaStatus uav_vla_georef_new(struct UavVlaGeoPoint top_left,
                                     struct UavVlaGeoPoint bottom_right,
                                     uint32_t width_px,
                                     uint32_t height_px,
                                     struct UavVlaGeoReference **out_ref);

/**
 * Parses the per-image metadata JSON.
 *
 * # Safety
 * `json` must be NULL or a NUL-terminated string; `out_ref` must be NULL or
 * point to writable memory.
 */
enum UavVlaStatus uav_vla_georef_from_json(const char *json, struct UavVlaGeoReference **out_ref);

/**
 * # Safety
 * `reference` must be NULL or a handle from this library not freed yet.
 */
void uav_vla_georef_free(struct UavVlaGeoReference *reference);

/**
 * # Safety
 * Pointers must be NULL or valid.
 */
enum UavVlaStatus uav_vla_pixel_to_geo(const struct UavVlaGeoReference *reference,
                                       struct UavVlaPixel pixel,
                                       struct UavVlaGeoPoint *out_point);

/**
 * # Safety
 * Pointers must be NULL or valid.
 */
enum UavVlaStatus uav_vla_geo_to_pixel(const struct UavVlaGeoReference *reference,
                                       struct UavVlaGeoPoint point,
                                       struct UavVlaPixel *out_pixel);

/**
 * Home position: 10% of the image size in from the top-left corner.
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum UavVlaStatus uav_vla_make_home(const struct UavVlaGeoReference *reference,
                                    struct UavVlaGeoPoint *out_point);

/**
 * Parses a `QGC WPL 110` file. With `lenient`, unknown command codes are
 * kept instead of rejected.
 *
 * # Safety
 * `wpl_text` must be NULL or a NUL-terminated string; `out_plan` must be
 * NULL or point to writable memory.
 */
enum UavVlaStatus uav_vla_plan_parse(const char *wpl_text,
                                     bool lenient,
                                     struct UavVlaMissionPlan **out_plan);

/**
 * HOME, TAKEOFF, one WAYPOINT per target in the given order,
 * RETURN_TO_LAUNCH, LAND.
 *
 * # Safety
 * `targets` must point to `count` points (or be NULL when `count` is 0);
 * `out_plan` must be NULL or point to writable memory.
 */
enum UavVlaStatus uav_vla_plan_build_survey(const struct UavVlaGeoPoint *targets,
                                            size_t count,
                                            struct UavVlaGeoPoint home,
                                            double altitude_m,
                                            struct UavVlaMissionPlan **out_plan);

/**
 * Checks the flight invariants (takeoff before waypoints, ends with LAND,
 * ...). Parsing alone checks only the file structure.
 *
 * # Safety
 * `plan` must be NULL or a live handle.
 */
enum UavVlaStatus uav_vla_plan_validate(const struct UavVlaMissionPlan *plan);

/**
 * Serializes to `QGC WPL 110` text. Free the result with
 * [`uav_vla_string_free`].
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum UavVlaStatus uav_vla_plan_serialize(const struct UavVlaMissionPlan *plan, char **out_text);

/**
 * Number of items, home included. 0 for NULL.
 *
 * # Safety
 * `plan` must be NULL or a live handle.
 */
size_t uav_vla_plan_len(const struct UavVlaMissionPlan *plan);

/**
 * # Safety
 * `plan` must be NULL or a handle from this library not freed yet.
 */
void uav_vla_plan_free(struct UavVlaMissionPlan *plan);

/**
 * Ground track of a plan.
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum UavVlaStatus uav_vla_plan_trajectory(const struct UavVlaMissionPlan *plan,
                                          struct UavVlaTrajectory **out_trajectory);

/**
 * Trajectory from explicit points; consecutive repeats are rejected.
 *
 * # Safety
 * `points` must point to `count` points; `out_trajectory` must be NULL or
 * point to writable memory.
 */
enum UavVlaStatus uav_vla_trajectory_new(const struct UavVlaGeoPoint *points,
                                         size_t count,
                                         struct UavVlaTrajectory **out_trajectory);

/**
 * Number of points. 0 for NULL.
 *
 * # Safety
 * `trajectory` must be NULL or a live handle.
 */
size_t uav_vla_trajectory_len(const struct UavVlaTrajectory *trajectory);

/**
 * # Safety
 * Pointers must be NULL or valid.
 */
enum UavVlaStatus uav_vla_trajectory_point(const struct UavVlaTrajectory *trajectory,
                                           size_t index,
                                           struct UavVlaGeoPoint *out_point);

/**
 * Sum of great-circle distances between consecutive points.
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum UavVlaStatus uav_vla_trajectory_length_m(const struct UavVlaTrajectory *trajectory,
                                              double *out_m);

/**
 * # Safety
 * `trajectory` must be NULL or a handle from this library not freed yet.
 */
void uav_vla_trajectory_free(struct UavVlaTrajectory *trajectory);

/**
 * RMSE of `generated` against `truth` with one of the three matching
 * methods.
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum UavVlaStatus uav_vla_evaluate(const struct UavVlaTrajectory *generated,
                                   const struct UavVlaTrajectory *truth,
                                   enum UavVlaMethod method,
                                   struct UavVlaMetric *out_metric);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UAV_VLA_H */
