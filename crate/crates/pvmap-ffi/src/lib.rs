//! C ABI over the pvmap geometry and fitting kernels.
//!
//! The surface follows the usual handle/status-code pattern: polygon sets are
//! opaque heap objects created and freed through this API, every fallible
//! call returns a [`PvmapStatus`], and the last failure message per thread is
//! readable via [`pvmap_last_error_message`]. Coordinates cross the boundary
//! as interleaved `f64` arrays (`x0, y0, x1, y1, …` and `x, y, z` triples).
//!
//! No callback ever unwinds across the boundary: panics are caught and
//! reported as `PVMAP_STATUS_INTERNAL`.

use pvmap::geom::{ArrayPolygon, Point2};
use pvmap::layout::{builtin_module_templates, infer_best_layout, LayoutParams, Orientation};
use pvmap::metrics::{multi_area_iou, multi_dice, multi_hausdorff, multi_matching_score};
use pvmap::orientation::{fit_plane_robust, plane_to_orientation, Confidence, FitParams, PointSet};
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvmapStatus {
    PvmapStatusOk = 0,
    /// A pointer was null, a length inconsistent, or a value out of range.
    PvmapStatusInvalidArgument = 1,
    /// The inputs were readable but geometrically unusable.
    PvmapStatusGeometry = 2,
    /// An internal invariant failed; details via `pvmap_last_error_message`.
    PvmapStatusInternal = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let safe = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = safe);
}

fn fail(status: PvmapStatus, msg: &str) -> PvmapStatus {
    set_error(msg);
    status
}

fn guard(body: impl FnOnce() -> PvmapStatus) -> PvmapStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(PvmapStatus::PvmapStatusInternal, "panic inside pvmap-ffi"),
    }
}

/// Message for the most recent failure on the calling thread. The pointer
/// stays valid until the next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn pvmap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pvmap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------------------
// Polygon sets
// ---------------------------------------------------------------------------

/// Opaque collection of simple polygons in one planar CRS.
pub struct PolygonSet {
    polygons: Vec<ArrayPolygon>,
}

/// Creates an empty polygon set. Free with [`pvmap_polygon_set_free`].
#[no_mangle]
pub extern "C" fn pvmap_polygon_set_new() -> *mut PolygonSet {
    Box::into_raw(Box::new(PolygonSet {
        polygons: Vec::new(),
    }))
}

/// Frees a polygon set. A null pointer is a no-op.
///
/// # Safety
/// `set` must be null or a pointer from [`pvmap_polygon_set_new`] that has
/// not been freed already.
#[no_mangle]
pub unsafe extern "C" fn pvmap_polygon_set_free(set: *mut PolygonSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

unsafe fn ring_from_raw(xy: *const f64, n_points: usize) -> Result<Vec<Point2>, PvmapStatus> {
    if xy.is_null() {
        return Err(fail(
            PvmapStatus::PvmapStatusInvalidArgument,
            "coordinate pointer is null",
        ));
    }
    if n_points < 3 {
        return Err(fail(
            PvmapStatus::PvmapStatusInvalidArgument,
            "a ring needs at least 3 points",
        ));
    }
    let flat = std::slice::from_raw_parts(xy, n_points * 2);
    Ok(flat
        .chunks_exact(2)
        .map(|c| Point2::new(c[0], c[1]))
        .collect())
}

/// Appends one simple polygon (exterior ring only, no holes) given as
/// `n_points` interleaved `x, y` pairs. The ring may be open or closed and
/// in either winding; it is normalized on insert.
///
/// # Safety
/// `set` must be a live set from [`pvmap_polygon_set_new`]; `xy` must point
/// to `2 * n_points` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn pvmap_polygon_set_add(
    set: *mut PolygonSet,
    xy: *const f64,
    n_points: usize,
) -> PvmapStatus {
    guard(|| {
        let Some(set) = set.as_mut() else {
            return fail(PvmapStatus::PvmapStatusInvalidArgument, "set is null");
        };
        let ring = match ring_from_raw(xy, n_points) {
            Ok(r) => r,
            Err(status) => return status,
        };
        let id = format!("p{}", set.polygons.len());
        match ArrayPolygon::new(id, "ffi", ring, Vec::new()) {
            Ok(poly) => {
                set.polygons.push(poly);
                PvmapStatus::PvmapStatusOk
            }
            Err(e) => fail(PvmapStatus::PvmapStatusGeometry, &e.to_string()),
        }
    })
}

/// Number of polygons currently in the set; 0 for null.
///
/// # Safety
/// `set` must be null or a live set.
#[no_mangle]
pub unsafe extern "C" fn pvmap_polygon_set_len(set: *const PolygonSet) -> usize {
    set.as_ref().map_or(0, |s| s.polygons.len())
}

/// Total enclosed area of the set, treating polygons as disjoint; 0 for null.
///
/// # Safety
/// `set` must be null or a live set.
#[no_mangle]
pub unsafe extern "C" fn pvmap_polygon_set_area(set: *const PolygonSet) -> f64 {
    set.as_ref()
        .map_or(0.0, |s| s.polygons.iter().map(|p| p.area()).sum())
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

unsafe fn metric2(
    a: *const PolygonSet,
    b: *const PolygonSet,
    out: *mut f64,
    f: impl FnOnce(&[ArrayPolygon], &[ArrayPolygon]) -> pvmap::Result<f64>,
) -> PvmapStatus {
    let (Some(a), Some(b)) = (a.as_ref(), b.as_ref()) else {
        return fail(PvmapStatus::PvmapStatusInvalidArgument, "set is null");
    };
    let Some(out) = out.as_mut() else {
        return fail(PvmapStatus::PvmapStatusInvalidArgument, "out is null");
    };
    match f(&a.polygons, &b.polygons) {
        Ok(v) => {
            *out = v;
            PvmapStatus::PvmapStatusOk
        }
        Err(e) => fail(PvmapStatus::PvmapStatusGeometry, &e.to_string()),
    }
}

/// Area intersection-over-union of two polygon sets, in `[0, 1]`.
///
/// # Safety
/// `a` and `b` must be live sets; `out` must be a writable double.
#[no_mangle]
pub unsafe extern "C" fn pvmap_area_iou(
    a: *const PolygonSet,
    b: *const PolygonSet,
    out: *mut f64,
) -> PvmapStatus {
    guard(|| metric2(a, b, out, multi_area_iou))
}

/// Dice coefficient of two polygon sets, in `[0, 1]`.
///
/// # Safety
/// `a` and `b` must be live sets; `out` must be a writable double.
#[no_mangle]
pub unsafe extern "C" fn pvmap_dice(
    a: *const PolygonSet,
    b: *const PolygonSet,
    out: *mut f64,
) -> PvmapStatus {
    guard(|| metric2(a, b, out, multi_dice))
}

/// Symmetric boundary Hausdorff distance with discretization step
/// `step` (same length unit as the coordinates; must be positive).
///
/// # Safety
/// `a` and `b` must be live, non-empty sets; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvmap_hausdorff_distance(
    a: *const PolygonSet,
    b: *const PolygonSet,
    step: f64,
    out: *mut f64,
) -> PvmapStatus {
    guard(|| metric2(a, b, out, |x, y| multi_hausdorff(x, y, step)))
}

/// Matching score `IoU / (1 + HD)` of a candidate set against a reference.
///
/// # Safety
/// `a` and `b` must be live sets; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pvmap_matching_score(
    candidate: *const PolygonSet,
    reference: *const PolygonSet,
    step: f64,
    out: *mut f64,
) -> PvmapStatus {
    guard(|| {
        metric2(candidate, reference, out, |c, r| {
            multi_matching_score(c, r, step)
        })
    })
}

// ---------------------------------------------------------------------------
// Orientation
// ---------------------------------------------------------------------------

/// Plane-fit result: tilt from horizontal and compass azimuth of the
/// downslope direction (180 = south), plus a confidence tag.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PvmapOrientation {
    pub tilt_deg: f64,
    pub azimuth_deg: f64,
    /// 0 ok, 1 flat roof, 2 too few points, 3 fallback.
    pub confidence: i32,
}

fn confidence_code(c: Confidence) -> i32 {
    match c {
        Confidence::Ok => 0,
        Confidence::FlatRoof => 1,
        Confidence::LowPoints => 2,
        Confidence::Fallback => 3,
    }
}

/// Robust (RANSAC + total-least-squares) plane fit over `n_points`
/// interleaved `x, y, z` triples, already clipped to one roof facet.
/// Deterministic for a fixed `seed`.
///
/// # Safety
/// `xyz` must point to `3 * n_points` readable doubles; `out` must be a
/// writable [`PvmapOrientation`].
#[no_mangle]
pub unsafe extern "C" fn pvmap_fit_orientation(
    xyz: *const f64,
    n_points: usize,
    seed: u64,
    out: *mut PvmapOrientation,
) -> PvmapStatus {
    guard(|| {
        if xyz.is_null() {
            return fail(PvmapStatus::PvmapStatusInvalidArgument, "xyz is null");
        }
        let Some(out) = out.as_mut() else {
            return fail(PvmapStatus::PvmapStatusInvalidArgument, "out is null");
        };
        let flat = std::slice::from_raw_parts(xyz, n_points * 3);
        let points: Vec<[f64; 3]> = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let params = FitParams {
            seed,
            ..FitParams::default()
        };
        if points.len() < params.min_points.max(3) {
            *out = PvmapOrientation {
                tilt_deg: 0.0,
                azimuth_deg: 180.0,
                confidence: confidence_code(Confidence::LowPoints),
            };
            return PvmapStatus::PvmapStatusOk;
        }
        let cloud = match PointSet::new(points, "ffi") {
            Ok(c) => c,
            Err(e) => return fail(PvmapStatus::PvmapStatusInvalidArgument, &e.to_string()),
        };
        match fit_plane_robust(&cloud, &params) {
            Ok(plane) => {
                let est = plane_to_orientation(&plane, &params);
                *out = PvmapOrientation {
                    tilt_deg: est.tilt_deg,
                    azimuth_deg: est.azimuth_deg,
                    confidence: confidence_code(est.confidence),
                };
                PvmapStatus::PvmapStatusOk
            }
            Err(e) => fail(PvmapStatus::PvmapStatusGeometry, &e.to_string()),
        }
    })
}

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

/// Best module arrangement found for a footprint.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PvmapLayout {
    /// Index into the built-in module template catalog.
    pub template_index: usize,
    pub module_count: usize,
    /// 1 when the winning orientation is landscape, 0 for portrait.
    pub landscape: i32,
    /// Rated DC capacity, watts.
    pub capacity_w: f64,
    /// Matching score `IoU / (1 + HD)` of the arrangement.
    pub score: f64,
}

/// Infers the best module layout for a footprint polygon (interleaved
/// `x, y` pairs, meters) tilted by `tilt_deg`, evaluating the built-in
/// template catalog in both orientations.
///
/// # Safety
/// `xy` must point to `2 * n_points` readable doubles; `out` must be a
/// writable [`PvmapLayout`].
#[no_mangle]
pub unsafe extern "C" fn pvmap_infer_layout(
    xy: *const f64,
    n_points: usize,
    tilt_deg: f64,
    out: *mut PvmapLayout,
) -> PvmapStatus {
    guard(|| {
        let Some(out) = out.as_mut() else {
            return fail(PvmapStatus::PvmapStatusInvalidArgument, "out is null");
        };
        let ring = match ring_from_raw(xy, n_points) {
            Ok(r) => r,
            Err(status) => return status,
        };
        let footprint = match ArrayPolygon::new("footprint", "ffi", ring, Vec::new()) {
            Ok(p) => p,
            Err(e) => return fail(PvmapStatus::PvmapStatusGeometry, &e.to_string()),
        };
        let templates = builtin_module_templates();
        match infer_best_layout(&footprint, tilt_deg, &templates, &LayoutParams::default()) {
            Ok(layout) => {
                *out = PvmapLayout {
                    template_index: layout.template_index,
                    module_count: layout.module_count,
                    landscape: (layout.orientation == Orientation::Landscape) as i32,
                    capacity_w: layout.capacity_w,
                    score: layout.score,
                };
                PvmapStatus::PvmapStatusOk
            }
            Err(e) => fail(PvmapStatus::PvmapStatusGeometry, &e.to_string()),
        }
    })
}
