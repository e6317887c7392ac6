#ifndef PVMAP_FFI_H
#define PVMAP_FFI_H

/* Generated by cbindgen from the pvmap-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum PvmapStatus {
  PvmapStatusOk = 0,
  /**
   * A pointer was null, a length inconsistent, or a value out of range.
   */
  PvmapStatusInvalidArgument = 1,
  /**
   * The inputs were readable but geometrically unusable.
   */
  PvmapStatusGeometry = 2,
  /**
   * An internal invariant failed; details via `pvmap_last_error_message`.
   */
  PvmapStatusInternal = 3,
} PvmapStatus;

/**
 * Opaque collection of simple polygons in one planar CRS.
 */
typedef struct PvmapPolygonSet PvmapPolygonSet;

/**
 * Plane-fit result: tilt from horizontal and compass azimuth of the
 * downslope direction (180 = south), plus a confidence tag.
 */
typedef struct PvmapOrientation {
  double tilt_deg;
  double azimuth_deg;
  /**
   * 0 ok, 1 flat roof, 2 too few points, 3 fallback.
   */
  int32_t confidence;
} PvmapOrientation;

/**
 * Best module arrangement found for a footprint.
 */
typedef struct PvmapLayout {
  /**
   * Index into the built-in module template catalog.
   */
  size_t template_index;
  size_t module_count;
  /**
   * 1 when the winning orientation is landscape, 0 for portrait.
   */
  int32_t landscape;
  /**
   * Rated DC capacity, watts.
   */
  double capacity_w;
  /**
   * Matching score `IoU / (1 + HD)` of the arrangement.
   */
  double score;
} PvmapLayout;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on the calling thread. The pointer
 * stays valid until the next failing call on the same thread. Never null.
 */
const char *pvmap_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *pvmap_version(void);

/**
 * Creates an empty polygon set. Free with [`pvmap_polygon_set_free`].
 */
struct PvmapPolygonSet *pvmap_polygon_set_new(void);

/**
 * Frees a polygon set. A null pointer is a no-op.
 *
 * # Safety
 * `set` must be null or a pointer from [`pvmap_polygon_set_new`] that has
 * not been freed already.
 */
void pvmap_polygon_set_free(struct PvmapPolygonSet *set);

/**
 * Appends one simple polygon (exterior ring only, no holes) given as
 * `n_points` interleaved `x, y` pairs. The ring may be open or closed and
 * in either winding; it is normalized on insert.
 *
 * # Safety
 * `set` must be a live set from [`pvmap_polygon_set_new`]; `xy` must point
 * to `2 * n_points` readable doubles.
 */
enum PvmapStatus pvmap_polygon_set_add(struct PvmapPolygonSet *set,
                                       const double *xy,
                                       size_t n_points);

/**
 * Number of polygons currently in the set; 0 for null.
 *
 * # Safety
 * `set` must be null or a live set.
 */
size_t pvmap_polygon_set_len(const struct PvmapPolygonSet *set);

/**
 * Total enclosed area of the set, treating polygons as disjoint; 0 for null.
 *
 * # Safety
 * `set` must be null or a live set.
 */
double pvmap_polygon_set_area(const struct PvmapPolygonSet *set);

/**
 * Area intersection-over-union of two polygon sets, in `[0, 1]`.
 *
 * # Safety
 * `a` and `b` must be live sets; `out` must be a writable double.
 */
enum PvmapStatus pvmap_area_iou(const struct PvmapPolygonSet *a,
                                const struct PvmapPolygonSet *b,
                                double *out);

/**
 * Dice coefficient of two polygon sets, in `[0, 1]`.
 *
 * # Safety
 * `a` and `b` must be live sets; `out` must be a writable double.
 */
enum PvmapStatus pvmap_dice(const struct PvmapPolygonSet *a,
                            const struct PvmapPolygonSet *b,
                            double *out);

/**
 * Symmetric boundary Hausdorff distance with discretization step
 * `step` (same length unit as the coordinates; must be positive).
 *
 * # Safety
 * `a` and `b` must be live, non-empty sets; `out` must be writable.
 */
enum PvmapStatus pvmap_hausdorff_distance(const struct PvmapPolygonSet *a,
                                          const struct PvmapPolygonSet *b,
                                          double step,
                                          double *out);

/**
 * Matching score `IoU / (1 + HD)` of a candidate set against a reference.
 *
 * # Safety
 * `a` and `b` must be live sets; `out` must be writable.
 */
enum PvmapStatus pvmap_matching_score(const struct PvmapPolygonSet *candidate,
                                      const struct PvmapPolygonSet *reference,
                                      double step,
                                      double *out);

/**
 * Robust (RANSAC + total-least-squares) plane fit over `n_points`
 * interleaved `x, y, z` triples, already clipped to one roof facet.
 * Deterministic for a fixed `seed`.
 *
 * # Safety
 * `xyz` must point to `3 * n_points` readable doubles; `out` must be a
 * writable [`PvmapOrientation`].
 */
enum PvmapStatus pvmap_fit_orientation(const double *xyz,
                                       size_t n_points,
                                       uint64_t seed,
                                       struct PvmapOrientation *out);

/**
 * Infers the best module layout for a footprint polygon (interleaved
 * `x, y` pairs, meters) tilted by `tilt_deg`, evaluating the built-in
 * template catalog in both orientations.
 *
 * # Safety
 * `xy` must point to `2 * n_points` readable doubles; `out` must be a
 * writable [`PvmapLayout`].
 */
enum PvmapStatus pvmap_infer_layout(const double *xy,
                                    size_t n_points,
                                    double tilt_deg,
                                    struct PvmapLayout *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PVMAP_FFI_H */
