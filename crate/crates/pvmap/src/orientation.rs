//! Tilt and azimuth from point clouds.
//!
//! For each footprint the cloud is clipped to the polygon, a plane is fitted
//! with RANSAC followed by a total-least-squares refit over the consensus
//! set, and the plane normal is converted to installation tilt and compass
//! azimuth (0 = North, 90 = East). Flat roofs (tilt below the threshold)
//! report azimuth 180 by convention so downstream code never branches on
//! missing values.

use crate::error::{Error, Result};
use crate::geom::ArrayPolygon;
use crate::geom::Point2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: Vec<[f64; 3]>,
    pub crs_id: String,
}

impl PointSet {
    pub fn new(points: Vec<[f64; 3]>, crs_id: impl Into<String>) -> Result<Self> {
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::Geometry("non-finite point coordinate".into()));
        }
        Ok(PointSet {
            points,
            crs_id: crs_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    LeastSquares,
    RansacRefit,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    /// Unit normal with `normal[2] >= 0`.
    pub normal: [f64; 3],
    /// Plane equation `normal · p = offset`.
    pub offset: f64,
    pub inlier_count: usize,
    pub rms_residual_m: f64,
    pub method: FitMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Ok,
    FlatRoof,
    LowPoints,
    Fallback,
}

impl std::fmt::Display for Confidence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Confidence::Ok => "ok",
            Confidence::FlatRoof => "flat_roof",
            Confidence::LowPoints => "low_points",
            Confidence::Fallback => "fallback",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Confidence {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.trim() {
            "ok" => Ok(Confidence::Ok),
            "flat_roof" => Ok(Confidence::FlatRoof),
            "low_points" => Ok(Confidence::LowPoints),
            "fallback" => Ok(Confidence::Fallback),
            other => Err(crate::error::Error::InvalidArgument(format!(
                "unknown confidence {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationEstimate {
    /// Installation tilt from horizontal, degrees in [0, 90).
    pub tilt_deg: f64,
    /// Compass bearing of the downslope direction, degrees in [0, 360).
    pub azimuth_deg: f64,
    pub confidence: Confidence,
}

impl OrientationEstimate {
    /// Neutral estimate used when no plane can be fitted: horizontal,
    /// south-facing by convention.
    pub fn neutral(confidence: Confidence) -> Self {
        OrientationEstimate {
            tilt_deg: 0.0,
            azimuth_deg: 180.0,
            confidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitParams {
    /// Minimum clipped points required to attempt a fit.
    pub min_points: usize,
    /// RANSAC iterations (3-point samples). Zero means plain least squares
    /// over all points.
    pub iterations: usize,
    /// Orthogonal distance for RANSAC inlier classification, meters.
    pub inlier_dist_m: f64,
    /// Tilts below this are reported as flat roofs, degrees.
    pub flat_threshold_deg: f64,
    /// RANSAC sampling seed; fits are deterministic for a fixed seed.
    pub seed: u64,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            min_points: 10,
            iterations: 200,
            inlier_dist_m: 0.10,
            flat_threshold_deg: 5.0,
            seed: 0,
        }
    }
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn normalize3(a: [f64; 3]) -> Option<[f64; 3]> {
    let n = norm3(a);
    if n <= f64::MIN_POSITIVE {
        return None;
    }
    Some([a[0] / n, a[1] / n, a[2] / n])
}

/// Retains the points whose horizontal position lies inside or on the
/// footprint (boundary inclusive within 1e-9 m).
pub fn clip_pointset(cloud: &PointSet, footprint: &ArrayPolygon) -> Result<PointSet> {
    if cloud.crs_id != footprint.crs_id {
        return Err(Error::CrsMismatch {
            left: cloud.crs_id.clone(),
            right: footprint.crs_id.clone(),
        });
    }
    let points = cloud
        .points
        .iter()
        .copied()
        .filter(|p| footprint.contains_point(Point2::new(p[0], p[1]), 1e-9))
        .collect();
    Ok(PointSet {
        points,
        crs_id: cloud.crs_id.clone(),
    })
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as rows), unordered.
fn jacobi_eigen_sym3(mut m: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..50 {
        // Largest off-diagonal element.
        let (mut p, mut q, mut max) = (0usize, 1usize, m[0][1].abs());
        for (i, j) in [(0usize, 2usize), (1, 2)] {
            if m[i][j].abs() > max {
                max = m[i][j].abs();
                p = i;
                q = j;
            }
        }
        if max < 1e-15 {
            break;
        }
        let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        let mpp = m[p][p];
        let mqq = m[q][q];
        let mpq = m[p][q];
        m[p][p] = c * c * mpp - 2.0 * s * c * mpq + s * s * mqq;
        m[q][q] = s * s * mpp + 2.0 * s * c * mpq + c * c * mqq;
        m[p][q] = 0.0;
        m[q][p] = 0.0;
        let r = 3 - p - q;
        let mrp = m[r][p];
        let mrq = m[r][q];
        m[r][p] = c * mrp - s * mrq;
        m[p][r] = m[r][p];
        m[r][q] = s * mrp + c * mrq;
        m[q][r] = m[r][q];
        for row in &mut v {
            let vp = row[p];
            let vq = row[q];
            row[p] = c * vp - s * vq;
            row[q] = s * vp + c * vq;
        }
    }
    let vals = [m[0][0], m[1][1], m[2][2]];
    // Eigenvectors are the columns of v; return them as rows.
    let vecs = [
        [v[0][0], v[1][0], v[2][0]],
        [v[0][1], v[1][1], v[2][1]],
        [v[0][2], v[1][2], v[2][2]],
    ];
    (vals, vecs)
}

/// Total-least-squares plane through a point subset: the normal is the
/// smallest principal direction of the centered covariance.
fn tls_plane(points: &[[f64; 3]], idx: &[usize]) -> Option<([f64; 3], f64)> {
    let n = idx.len();
    if n < 3 {
        return None;
    }
    let mut c = [0.0f64; 3];
    for &i in idx {
        for k in 0..3 {
            c[k] += points[i][k];
        }
    }
    for k in &mut c {
        *k /= n as f64;
    }
    let mut cov = [[0.0f64; 3]; 3];
    for &i in idx {
        let d = sub3(points[i], c);
        for a in 0..3 {
            for b in 0..3 {
                cov[a][b] += d[a] * d[b];
            }
        }
    }
    let (vals, vecs) = jacobi_eigen_sym3(cov);
    let mut best = 0;
    for k in 1..3 {
        if vals[k] < vals[best] {
            best = k;
        }
    }
    let mut normal = normalize3(vecs[best])?;
    if normal[2] < 0.0 {
        normal = [-normal[0], -normal[1], -normal[2]];
    }
    let offset = dot3(normal, c);
    Some((normal, offset))
}

fn median(mut vals: Vec<f64>) -> f64 {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}

fn fallback_plane(points: &[[f64; 3]]) -> PlaneFit {
    let z = median(points.iter().map(|p| p[2]).collect());
    PlaneFit {
        normal: [0.0, 0.0, 1.0],
        offset: z,
        inlier_count: points.len(),
        rms_residual_m: 0.0,
        method: FitMethod::Fallback,
    }
}

/// RANSAC plane fit with TLS refit over the consensus set.
///
/// Deterministic for a fixed `params.seed`. With `iterations = 0` the fit is
/// a plain TLS over all points (`method = least_squares`). Degenerate input
/// (all samples collinear) falls back to a horizontal plane at the median z.
pub fn fit_plane_robust(points: &PointSet, params: &FitParams) -> Result<PlaneFit> {
    let pts = &points.points;
    if pts.len() < params.min_points.max(3) {
        return Err(Error::Geometry(format!(
            "plane fit needs at least {} points, got {}",
            params.min_points.max(3),
            pts.len()
        )));
    }

    if params.iterations == 0 {
        let idx: Vec<usize> = (0..pts.len()).collect();
        return Ok(match tls_plane(pts, &idx) {
            Some((normal, offset)) => {
                let rms = rms_residual(pts, &idx, normal, offset);
                PlaneFit {
                    normal,
                    offset,
                    inlier_count: pts.len(),
                    rms_residual_m: rms,
                    method: FitMethod::LeastSquares,
                }
            }
            None => fallback_plane(pts),
        });
    }

    // Collinearity guard relative to the sample's own scale.
    let degenerate_eps = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best_inliers: Vec<usize> = Vec::new();
    for _ in 0..params.iterations {
        let i = rng.gen_range(0..pts.len());
        let j = rng.gen_range(0..pts.len());
        let k = rng.gen_range(0..pts.len());
        if i == j || j == k || i == k {
            continue;
        }
        let e1 = sub3(pts[j], pts[i]);
        let e2 = sub3(pts[k], pts[i]);
        let n = cross3(e1, e2);
        let scale = norm3(e1) * norm3(e2);
        if norm3(n) <= degenerate_eps * scale.max(f64::MIN_POSITIVE) {
            continue;
        }
        let normal = match normalize3(n) {
            Some(v) => v,
            None => continue,
        };
        let offset = dot3(normal, pts[i]);
        let inliers: Vec<usize> = (0..pts.len())
            .filter(|&t| (dot3(normal, pts[t]) - offset).abs() <= params.inlier_dist_m)
            .collect();
        if inliers.len() > best_inliers.len() {
            best_inliers = inliers;
        }
    }

    if best_inliers.len() < 3 {
        return Ok(fallback_plane(pts));
    }
    match tls_plane(pts, &best_inliers) {
        Some((normal, offset)) => {
            let rms = rms_residual(pts, &best_inliers, normal, offset);
            Ok(PlaneFit {
                normal,
                offset,
                inlier_count: best_inliers.len(),
                rms_residual_m: rms,
                method: FitMethod::RansacRefit,
            })
        }
        None => Ok(fallback_plane(pts)),
    }
}

fn rms_residual(points: &[[f64; 3]], idx: &[usize], normal: [f64; 3], offset: f64) -> f64 {
    let ss: f64 = idx
        .iter()
        .map(|&i| {
            let d = dot3(normal, points[i]) - offset;
            d * d
        })
        .sum();
    (ss / idx.len() as f64).sqrt()
}

/// Converts a plane normal to tilt/azimuth. The downslope direction projects
/// to `(normal.x, normal.y)` horizontally, so its compass bearing is
/// `atan2(x, y)` with x = East, y = North.
pub fn plane_to_orientation(plane: &PlaneFit, params: &FitParams) -> OrientationEstimate {
    let tilt_deg = plane.normal[2].clamp(-1.0, 1.0).acos().to_degrees();
    // Vertical planes are out of scope; keep the stated [0, 90) range.
    let tilt_deg = tilt_deg.min(90.0 - 1e-9);
    if tilt_deg < params.flat_threshold_deg {
        return OrientationEstimate {
            tilt_deg,
            azimuth_deg: 180.0,
            confidence: Confidence::FlatRoof,
        };
    }
    let mut azimuth_deg = plane.normal[0].atan2(plane.normal[1]).to_degrees();
    if azimuth_deg < 0.0 {
        azimuth_deg += 360.0;
    }
    if azimuth_deg >= 360.0 {
        azimuth_deg -= 360.0;
    }
    let confidence = match plane.method {
        FitMethod::Fallback => Confidence::Fallback,
        _ => Confidence::Ok,
    };
    OrientationEstimate {
        tilt_deg,
        azimuth_deg,
        confidence,
    }
}

/// Clip + fit + convert in one call. Fewer than `min_points` clipped points
/// yields a neutral estimate flagged `low_points` instead of an error.
pub fn estimate_orientation(
    cloud: &PointSet,
    footprint: &ArrayPolygon,
    params: &FitParams,
) -> Result<OrientationEstimate> {
    let clipped = clip_pointset(cloud, footprint)?;
    if clipped.len() < params.min_points.max(3) {
        return Ok(OrientationEstimate::neutral(Confidence::LowPoints));
    }
    let plane = fit_plane_robust(&clipped, params)?;
    Ok(plane_to_orientation(&plane, params))
}
