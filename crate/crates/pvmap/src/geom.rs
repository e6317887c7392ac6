//! Planar geometry kernel.
//!
//! Polygons live either in pixel coordinates (during mask vectorization) or in
//! a projected metric CRS; the same types serve both, and `crs_id` records
//! which frame a polygon is in. Boolean set operations are delegated to the
//! `geo` crate; hulls, minimal rectangles, containment, distances and scanline
//! sampling are implemented here.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance used when collapsing duplicate vertices.
const DUP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Perpendicular vector (rotated +90 degrees).
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Signed area of a ring (positive for counter-clockwise orientation).
/// The ring must not repeat its first vertex at the end.
pub fn signed_ring_area(ring: &[Point2]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

/// A simple polygon with optional holes.
///
/// Invariants maintained by construction: the exterior ring is
/// counter-clockwise and holes are clockwise, rings are stored without a
/// closing duplicate vertex, all coordinates are finite, and `area` equals
/// the exterior area minus the hole areas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayPolygon {
    pub id: String,
    pub crs_id: String,
    exterior: Vec<Point2>,
    holes: Vec<Vec<Point2>>,
    area: f64,
}

impl ArrayPolygon {
    /// Builds a polygon and validates ring topology: rings must be simple,
    /// non-crossing, and each hole must lie inside the exterior.
    pub fn new(
        id: impl Into<String>,
        crs_id: impl Into<String>,
        exterior: Vec<Point2>,
        holes: Vec<Vec<Point2>>,
    ) -> Result<Self> {
        let poly = Self::from_rings(id, crs_id, exterior, holes)?;
        poly.validate_topology()?;
        Ok(poly)
    }

    /// Builds a polygon, normalizing orientation and dropping duplicate
    /// vertices, without the quadratic simplicity check. For rings coming out
    /// of the boolean kernel, which already guarantees valid topology.
    pub(crate) fn from_rings(
        id: impl Into<String>,
        crs_id: impl Into<String>,
        exterior: Vec<Point2>,
        holes: Vec<Vec<Point2>>,
    ) -> Result<Self> {
        let mut exterior = clean_ring(exterior)?;
        if signed_ring_area(&exterior) < 0.0 {
            exterior.reverse();
        }
        let mut clean_holes = Vec::with_capacity(holes.len());
        for h in holes {
            let mut h = clean_ring(h)?;
            if signed_ring_area(&h) > 0.0 {
                h.reverse();
            }
            clean_holes.push(h);
        }
        let ext_area = signed_ring_area(&exterior);
        let hole_area: f64 = clean_holes.iter().map(|h| -signed_ring_area(h)).sum();
        let area = ext_area - hole_area;
        if area <= 0.0 {
            return Err(Error::Geometry(format!(
                "polygon has non-positive area {area}"
            )));
        }
        Ok(ArrayPolygon {
            id: id.into(),
            crs_id: crs_id.into(),
            exterior,
            holes: clean_holes,
            area,
        })
    }

    pub fn exterior(&self) -> &[Point2] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<Point2>] {
        &self.holes
    }

    /// Net enclosed area (exterior minus holes), in squared CRS units.
    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point2]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }

    /// Axis-aligned bounds as (min, max) corners.
    pub fn bounds(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.exterior {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Area centroid accounting for holes.
    pub fn centroid(&self) -> Point2 {
        let mut ax = 0.0;
        let mut ay = 0.0;
        let mut a = 0.0;
        for ring in self.rings() {
            let n = ring.len();
            for i in 0..n {
                let p = ring[i];
                let q = ring[(i + 1) % n];
                let cross = p.x * q.y - q.x * p.y;
                ax += (p.x + q.x) * cross;
                ay += (p.y + q.y) * cross;
                a += cross;
            }
        }
        if a.abs() < f64::MIN_POSITIVE {
            return self.exterior[0];
        }
        Point2::new(ax / (3.0 * a), ay / (3.0 * a))
    }

    /// Even-odd containment over all rings. Points within `eps` of any edge
    /// count as inside, making the test boundary-inclusive.
    pub fn contains_point(&self, p: Point2, eps: f64) -> bool {
        for ring in self.rings() {
            let n = ring.len();
            for i in 0..n {
                if point_segment_distance(p, ring[i], ring[(i + 1) % n]) <= eps {
                    return true;
                }
            }
        }
        let mut inside = false;
        for ring in self.rings() {
            let n = ring.len();
            for i in 0..n {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                if (a.y <= p.y) != (b.y <= p.y) {
                    let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                    if x > p.x {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    /// Snaps every coordinate to multiples of `grid`, dropping vertices that
    /// collapse. Returns an error if the polygon degenerates.
    pub fn snapped(&self, grid: f64) -> Result<ArrayPolygon> {
        let snap = |p: &Point2| Point2::new((p.x / grid).round() * grid, (p.y / grid).round() * grid);
        let exterior = self.exterior.iter().map(snap).collect();
        let holes = self
            .holes
            .iter()
            .map(|h| h.iter().map(snap).collect())
            .collect();
        ArrayPolygon::from_rings(self.id.clone(), self.crs_id.clone(), exterior, holes)
    }

    fn validate_topology(&self) -> Result<()> {
        let rings: Vec<&[Point2]> = self.rings().collect();
        for (ri, ring) in rings.iter().enumerate() {
            if ring_self_intersects(ring) {
                return Err(Error::Geometry(format!(
                    "ring {ri} of polygon {} self-intersects",
                    self.id
                )));
            }
        }
        for i in 0..rings.len() {
            for j in (i + 1)..rings.len() {
                if rings_cross(rings[i], rings[j]) {
                    return Err(Error::Geometry(format!(
                        "rings {i} and {j} of polygon {} cross",
                        self.id
                    )));
                }
            }
        }
        for (hi, hole) in self.holes.iter().enumerate() {
            let c = ring_interior_point(hole);
            if !point_in_ring(c, &self.exterior) {
                return Err(Error::Geometry(format!(
                    "hole {hi} of polygon {} lies outside the exterior",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

fn clean_ring(mut ring: Vec<Point2>) -> Result<Vec<Point2>> {
    if ring.len() > 1 && ring[0].dist(ring[ring.len() - 1]) <= DUP_EPS {
        ring.pop();
    }
    let mut out: Vec<Point2> = Vec::with_capacity(ring.len());
    for p in ring {
        if !p.is_finite() {
            return Err(Error::Geometry("non-finite coordinate in ring".into()));
        }
        if out.last().map_or(true, |q| q.dist(p) > DUP_EPS) {
            out.push(p);
        }
    }
    while out.len() > 1 && out[0].dist(*out.last().unwrap()) <= DUP_EPS {
        out.pop();
    }
    if out.len() < 3 {
        return Err(Error::Geometry(format!(
            "ring has {} distinct vertices, need at least 3",
            out.len()
        )));
    }
    Ok(out)
}

/// Strict even-odd test without the boundary band.
fn point_in_ring(p: Point2, ring: &[Point2]) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a.y <= p.y) != (b.y <= p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if x > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

/// A point in the interior of a ring: the midpoint of a diagonal slightly
/// inside the first convex vertex; falls back to the vertex average.
fn ring_interior_point(ring: &[Point2]) -> Point2 {
    let n = ring.len();
    for i in 0..n {
        let prev = ring[(i + n - 1) % n];
        let cur = ring[i];
        let next = ring[(i + 1) % n];
        let candidate = Point2::new(
            cur.x + 1e-9 * ((prev.x + next.x) * 0.5 - cur.x),
            cur.y + 1e-9 * ((prev.y + next.y) * 0.5 - cur.y),
        );
        if point_in_ring(candidate, ring) {
            return candidate;
        }
    }
    let mut acc = Point2::new(0.0, 0.0);
    for p in ring {
        acc = acc + *p;
    }
    acc * (1.0 / n as f64)
}

fn segments_properly_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let orient = |p: Point2, q: Point2, r: Point2| (q - p).perp().dot(r - p);
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn ring_self_intersects(ring: &[Point2]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        for j in (i + 1)..n {
            // Skip adjacent segments (they share an endpoint).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let c = ring[j];
            let d = ring[(j + 1) % n];
            if segments_properly_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

fn rings_cross(r1: &[Point2], r2: &[Point2]) -> bool {
    let n1 = r1.len();
    let n2 = r2.len();
    for i in 0..n1 {
        for j in 0..n2 {
            if segments_properly_intersect(r1[i], r1[(i + 1) % n1], r2[j], r2[(j + 1) % n2]) {
                return true;
            }
        }
    }
    false
}

/// Shortest distance from `p` to segment `ab`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= f64::MIN_POSITIVE {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Convex hull (Andrew monotone chain), counter-clockwise, collinear points
/// dropped. Returns fewer than 3 points for degenerate inputs.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| a.dist(*b) <= DUP_EPS);
    let n = pts.len();
    if n < 3 {
        return pts;
    }
    let cross = |o: Point2, a: Point2, b: Point2| (a - o).perp().dot(b - o);
    let chain = |iter: &mut dyn Iterator<Item = Point2>| -> Vec<Point2> {
        let mut half: Vec<Point2> = Vec::with_capacity(n);
        for p in iter {
            while half.len() >= 2 && cross(half[half.len() - 2], half[half.len() - 1], p) <= 0.0 {
                half.pop();
            }
            half.push(p);
        }
        half.pop();
        half
    };
    let mut hull = chain(&mut pts.iter().copied());
    hull.extend(chain(&mut pts.iter().rev().copied()));
    hull
}

/// Minimal-area oriented bounding rectangle.
///
/// `center` is the rectangle center, `half_extents = (a, b)` with `a >= b`,
/// and `angle_rad` is the direction of the long (`a`) axis, normalized to
/// `[0, pi)`. Full extents are clamped below by the `min_extent` passed to
/// [`min_area_rect`], which keeps degenerate inputs representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedRectangle {
    pub center: Point2,
    pub half_extents: (f64, f64),
    pub angle_rad: f64,
}

impl OrientedRectangle {
    pub fn long_axis(&self) -> Point2 {
        Point2::new(self.angle_rad.cos(), self.angle_rad.sin())
    }

    pub fn short_axis(&self) -> Point2 {
        self.long_axis().perp()
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_extents.0 * self.half_extents.1
    }

    /// Corners in counter-clockwise order starting from `center - a*u - b*v`.
    pub fn corners(&self) -> [Point2; 4] {
        let u = self.long_axis() * self.half_extents.0;
        let v = self.short_axis() * self.half_extents.1;
        let c = self.center;
        [c - u - v, c + u - v, c + u + v, c - u + v]
    }

    pub fn contains(&self, p: Point2, eps: f64) -> bool {
        let d = p - self.center;
        d.dot(self.long_axis()).abs() <= self.half_extents.0 + eps
            && d.dot(self.short_axis()).abs() <= self.half_extents.1 + eps
    }

    pub fn to_polygon(&self, id: impl Into<String>, crs_id: impl Into<String>) -> ArrayPolygon {
        ArrayPolygon::from_rings(id, crs_id, self.corners().to_vec(), Vec::new())
            .expect("rectangle with clamped extents is a valid polygon")
    }
}

fn normalize_axis_angle(angle: f64) -> f64 {
    let mut a = angle % std::f64::consts::PI;
    if a < 0.0 {
        a += std::f64::consts::PI;
    }
    // The modulo can return PI itself when angle is a tiny negative number.
    if a >= std::f64::consts::PI {
        a -= std::f64::consts::PI;
    }
    a
}

/// Minimal-area bounding rectangle via edge enumeration over the convex hull
/// (the optimal rectangle has one side collinear with a hull edge). Full
/// extents are clamped below by `min_extent`; degenerate inputs (single point
/// or collinear set) produce a thin rectangle along the dominant direction.
pub fn min_area_rect(points: &[Point2], min_extent: f64) -> Result<OrientedRectangle> {
    if points.is_empty() {
        return Err(Error::Geometry("minimal rectangle of empty set".into()));
    }
    if !points.iter().all(|p| p.is_finite()) {
        return Err(Error::Geometry("non-finite coordinate in point set".into()));
    }
    let hull = convex_hull(points);
    if hull.len() < 3 {
        // Collinear or single point: span the dominant direction.
        let (lo, hi) = hull
            .iter()
            .chain(points.iter())
            .fold((points[0], points[0]), |(lo, hi), p| {
                (
                    Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                    Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
                )
            });
        let diag = hi - lo;
        let angle = if diag.norm() <= DUP_EPS {
            0.0
        } else {
            normalize_axis_angle(diag.y.atan2(diag.x))
        };
        let a = (diag.norm() * 0.5).max(min_extent * 0.5);
        let b = min_extent * 0.5;
        return Ok(OrientedRectangle {
            center: Point2::new((lo.x + hi.x) * 0.5, (lo.y + hi.y) * 0.5),
            half_extents: (a.max(b), b.min(a)),
            angle_rad: angle,
        });
    }

    let mut best: Option<(f64, OrientedRectangle)> = None;
    let n = hull.len();
    for i in 0..n {
        let e = hull[(i + 1) % n] - hull[i];
        let len = e.norm();
        if len <= DUP_EPS {
            continue;
        }
        let u = e * (1.0 / len);
        let v = u.perp();
        let (mut ulo, mut uhi, mut vlo, mut vhi) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &p in &hull {
            let pu = p.dot(u);
            let pv = p.dot(v);
            ulo = ulo.min(pu);
            uhi = uhi.max(pu);
            vlo = vlo.min(pv);
            vhi = vhi.max(pv);
        }
        let du = uhi - ulo;
        let dv = vhi - vlo;
        let area = du * dv;
        if best.as_ref().map_or(true, |(a, _)| area < *a) {
            let cu = (ulo + uhi) * 0.5;
            let cv = (vlo + vhi) * 0.5;
            let center = u * cu + v * cv;
            let (half_a, half_b, axis) = if du >= dv {
                (du * 0.5, dv * 0.5, u)
            } else {
                (dv * 0.5, du * 0.5, v)
            };
            let rect = OrientedRectangle {
                center,
                half_extents: (
                    half_a.max(min_extent * 0.5),
                    half_b.max(min_extent * 0.5),
                ),
                angle_rad: normalize_axis_angle(axis.y.atan2(axis.x)),
            };
            best = Some((area, rect));
        }
    }
    best.map(|(_, r)| r)
        .ok_or_else(|| Error::Geometry("minimal rectangle search found no edge".into()))
}

/// Subdivides every edge of `ring` so no segment exceeds `max_step`; original
/// vertices are preserved. The closing edge is included.
pub fn densify_ring(ring: &[Point2], max_step: f64) -> Vec<Point2> {
    assert!(max_step > 0.0, "densify step must be positive");
    let n = ring.len();
    let mut out = Vec::with_capacity(n * 2);
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let len = a.dist(b);
        let pieces = (len / max_step).ceil().max(1.0) as usize;
        for k in 0..pieces {
            let t = k as f64 / pieces as f64;
            out.push(a + (b - a) * t);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Boolean set operations (geo-backed)
// ---------------------------------------------------------------------------

fn to_geo(poly: &ArrayPolygon) -> geo::Polygon<f64> {
    let ring_to_ls = |ring: &[Point2]| {
        geo::LineString::from(
            ring.iter()
                .map(|p| geo::Coord { x: p.x, y: p.y })
                .collect::<Vec<_>>(),
        )
    };
    geo::Polygon::new(
        ring_to_ls(&poly.exterior),
        poly.holes.iter().map(|h| ring_to_ls(h)).collect(),
    )
}

fn to_geo_multi(polys: &[ArrayPolygon]) -> geo::MultiPolygon<f64> {
    geo::MultiPolygon::new(polys.iter().map(to_geo).collect())
}

fn from_geo_multi(multi: geo::MultiPolygon<f64>, id: &str, crs_id: &str) -> Vec<ArrayPolygon> {
    let mut out = Vec::new();
    for p in multi {
        let ext: Vec<Point2> = p
            .exterior()
            .coords()
            .map(|c| Point2::new(c.x, c.y))
            .collect();
        let holes: Vec<Vec<Point2>> = p
            .interiors()
            .iter()
            .map(|h| h.coords().map(|c| Point2::new(c.x, c.y)).collect())
            .collect();
        // Degenerate slivers from the kernel are dropped rather than reported.
        if let Ok(ap) = ArrayPolygon::from_rings(id, crs_id, ext, holes) {
            out.push(ap);
        }
    }
    out
}

fn check_crs(a: &[ArrayPolygon], b: &[ArrayPolygon]) -> Result<String> {
    let mut crs: Option<&str> = None;
    for p in a.iter().chain(b.iter()) {
        match crs {
            None => crs = Some(&p.crs_id),
            Some(c) if c == p.crs_id => {}
            Some(c) => {
                return Err(Error::CrsMismatch {
                    left: c.to_string(),
                    right: p.crs_id.clone(),
                })
            }
        }
    }
    Ok(crs.unwrap_or("").to_string())
}

#[derive(Debug, Clone, Copy)]
enum BoolOp {
    Union,
    Intersection,
    Difference,
}

fn boolean(a: &[ArrayPolygon], b: &[ArrayPolygon], op: BoolOp) -> Result<Vec<ArrayPolygon>> {
    use geo::BooleanOps;
    let crs = check_crs(a, b)?;
    let id = a.first().map(|p| p.id.clone()).unwrap_or_default();
    if a.is_empty() {
        return Ok(match op {
            BoolOp::Union => b.to_vec(),
            _ => Vec::new(),
        });
    }
    if b.is_empty() {
        return Ok(match op {
            BoolOp::Intersection => Vec::new(),
            _ => a.to_vec(),
        });
    }
    let ga = to_geo_multi(a);
    let gb = to_geo_multi(b);
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| match op {
        BoolOp::Union => ga.union(&gb),
        BoolOp::Intersection => ga.intersection(&gb),
        BoolOp::Difference => ga.difference(&gb),
    }))
    .map_err(|_| Error::Geometry("boolean kernel failed on degenerate input".into()))?;
    Ok(from_geo_multi(result, &id, &crs))
}

/// Union of two polygon sets. The result inherits `id` from the left side.
pub fn union(a: &[ArrayPolygon], b: &[ArrayPolygon]) -> Result<Vec<ArrayPolygon>> {
    boolean(a, b, BoolOp::Union)
}

/// Intersection of two polygon sets; empty when they are disjoint.
pub fn intersection(a: &[ArrayPolygon], b: &[ArrayPolygon]) -> Result<Vec<ArrayPolygon>> {
    boolean(a, b, BoolOp::Intersection)
}

/// `a` minus `b`.
pub fn difference(a: &[ArrayPolygon], b: &[ArrayPolygon]) -> Result<Vec<ArrayPolygon>> {
    boolean(a, b, BoolOp::Difference)
}

pub fn total_area(polys: &[ArrayPolygon]) -> f64 {
    polys.iter().map(|p| p.area()).sum()
}

/// Largest-area member of a set, if any.
pub fn largest_part(parts: Vec<ArrayPolygon>) -> Option<ArrayPolygon> {
    parts
        .into_iter()
        .max_by(|a, b| a.area().partial_cmp(&b.area()).unwrap())
}

// ---------------------------------------------------------------------------
// Scanline sampling
// ---------------------------------------------------------------------------

/// Even-odd membership of a lattice of sample points against a set of rings.
///
/// Sample `(i, j)` sits at `origin + (i*step, j*step)` for `i in 0..nx`,
/// `j in 0..ny`; the returned vector is row-major with `true` for samples
/// inside. Points exactly on a crossing count as inside.
pub fn scanline_membership(
    rings: &[&[Point2]],
    origin: Point2,
    step: f64,
    nx: usize,
    ny: usize,
) -> Vec<bool> {
    let mut hits = vec![false; nx * ny];
    let mut xs: Vec<f64> = Vec::new();
    for j in 0..ny {
        let y = origin.y + j as f64 * step;
        xs.clear();
        for ring in rings {
            let n = ring.len();
            for i in 0..n {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                if (a.y <= y) != (b.y <= y) {
                    xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
        }
        if xs.is_empty() {
            continue;
        }
        xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let row = &mut hits[j * nx..(j + 1) * nx];
        let mut k = 0;
        for (i, slot) in row.iter_mut().enumerate() {
            let x = origin.x + i as f64 * step;
            while k < xs.len() && xs[k] <= x {
                k += 1;
            }
            // Odd number of crossings at or left of the sample: inside.
            *slot = k % 2 == 1;
        }
    }
    hits
}

/// Collects all rings of a polygon set for scanline sampling.
pub fn set_rings(polys: &[ArrayPolygon]) -> Vec<&[Point2]> {
    polys.iter().flat_map(|p| p.rings()).collect()
}
