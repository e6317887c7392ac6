//! Agreement metrics: polygon overlap (IoU/Dice), boundary Hausdorff
//! distance, the combined matching score, capacity-validation statistics,
//! and band-width / baseline-error measures on power series.
//!
//! Everything here is pure arithmetic over already-validated inputs; all
//! functions are safe for concurrent use.

use crate::error::{Error, Result};
use crate::geom::{self, ArrayPolygon};
use crate::profile::{check_aligned, PowerSeries};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Default boundary discretization step for Hausdorff distance, meters.
/// Finer than any module edge; result is within one step of the true value.
pub const DEFAULT_HD_STEP_M: f64 = 0.05;

/// Default power threshold (Wh) below which a timestamp is excluded from
/// percentage-error denominators. Nighttime hours produce zero energy and
/// would otherwise divide by zero.
pub const DEFAULT_EPS_POWER_WH: f64 = 1.0;

// ---------------------------------------------------------------------------
// Polygon agreement
// ---------------------------------------------------------------------------

/// Intersection-over-union of two polygon sets. The union area comes from
/// inclusion–exclusion so only one boolean operation runs per call. Two
/// empty sets have no defined overlap; that case returns 0.
pub fn multi_area_iou(a: &[ArrayPolygon], b: &[ArrayPolygon]) -> Result<f64> {
    let area_a = geom::total_area(a);
    let area_b = geom::total_area(b);
    if area_a == 0.0 && area_b == 0.0 {
        return Ok(0.0);
    }
    let inter = geom::total_area(&geom::intersection(a, b)?);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return Ok(0.0);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Dice (F1) coefficient of two polygon sets: `2|A∩B| / (|A|+|B|)`.
pub fn multi_dice(a: &[ArrayPolygon], b: &[ArrayPolygon]) -> Result<f64> {
    let area_a = geom::total_area(a);
    let area_b = geom::total_area(b);
    if area_a + area_b == 0.0 {
        return Ok(0.0);
    }
    let inter = geom::total_area(&geom::intersection(a, b)?);
    Ok((2.0 * inter / (area_a + area_b)).clamp(0.0, 1.0))
}

pub fn area_iou(a: &ArrayPolygon, b: &ArrayPolygon) -> Result<f64> {
    multi_area_iou(std::slice::from_ref(a), std::slice::from_ref(b))
}

pub fn dice_coefficient(a: &ArrayPolygon, b: &ArrayPolygon) -> Result<f64> {
    multi_dice(std::slice::from_ref(a), std::slice::from_ref(b))
}

/// Greatest distance from any sampled point of `from` to the boundary of
/// `to`. Distances use the exact segments of `to`, so only the `from` side
/// is discretized.
fn directed_boundary_distance(from: &[ArrayPolygon], to: &[ArrayPolygon], step: f64) -> f64 {
    let to_rings = geom::set_rings(to);
    let mut worst = 0.0f64;
    for ring in geom::set_rings(from) {
        for p in geom::densify_ring(ring, step) {
            let mut best = f64::INFINITY;
            for other in &to_rings {
                let n = other.len();
                for i in 0..n {
                    let d = geom::point_segment_distance(p, other[i], other[(i + 1) % n]);
                    if d < best {
                        best = d;
                    }
                }
            }
            if best > worst {
                worst = best;
            }
        }
    }
    worst
}

/// Symmetric Hausdorff distance between polygon-set boundaries, with the
/// boundaries discretized at arc-length step ≤ `step_m` (original vertices
/// kept). Result is within `step_m` of the true boundary Hausdorff distance.
pub fn multi_hausdorff(a: &[ArrayPolygon], b: &[ArrayPolygon], step_m: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Geometry(
            "Hausdorff distance requires nonempty polygon sets".into(),
        ));
    }
    if step_m <= 0.0 || !step_m.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Hausdorff step must be positive, got {step_m}"
        )));
    }
    Ok(directed_boundary_distance(a, b, step_m).max(directed_boundary_distance(b, a, step_m)))
}

pub fn hausdorff_distance(a: &ArrayPolygon, b: &ArrayPolygon) -> Result<f64> {
    multi_hausdorff(
        std::slice::from_ref(a),
        std::slice::from_ref(b),
        DEFAULT_HD_STEP_M,
    )
}

pub fn hausdorff_distance_with_step(
    a: &ArrayPolygon,
    b: &ArrayPolygon,
    step_m: f64,
) -> Result<f64> {
    multi_hausdorff(std::slice::from_ref(a), std::slice::from_ref(b), step_m)
}

/// Combined matching score `S = IoU / (1 + HD)` with HD in meters. An empty
/// candidate scores 0 (no overlap to reward).
pub fn multi_matching_score(
    candidate: &[ArrayPolygon],
    footprint: &[ArrayPolygon],
    hd_step_m: f64,
) -> Result<f64> {
    if candidate.is_empty() || geom::total_area(candidate) == 0.0 {
        return Ok(0.0);
    }
    let iou = multi_area_iou(candidate, footprint)?;
    if iou == 0.0 {
        return Ok(0.0);
    }
    let hd = multi_hausdorff(candidate, footprint, hd_step_m)?;
    Ok(iou / (1.0 + hd))
}

pub fn matching_score(candidate: &ArrayPolygon, footprint: &ArrayPolygon) -> Result<f64> {
    multi_matching_score(
        std::slice::from_ref(candidate),
        std::slice::from_ref(footprint),
        DEFAULT_HD_STEP_M,
    )
}

// ---------------------------------------------------------------------------
// Capacity validation
// ---------------------------------------------------------------------------

/// One joined validation row. `ape_pct` is absent when the recorded value is
/// nonpositive (the row is excluded from MAPE).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionError {
    pub region_id: String,
    pub recorded_kwp: f64,
    pub predicted_kwp: f64,
    pub ape_pct: Option<f64>,
}

/// Capacity validation statistics over neighborhood-aggregated predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mae_kwp: f64,
    pub mape_pct: f64,
    /// Rows excluded from MAPE because the recorded value was nonpositive.
    pub mape_exclusions: usize,
    /// Coefficient of determination of predictions against recorded values.
    pub r2: f64,
    /// Pearson r² of the least-squares fit, for comparison with studies that
    /// report regression goodness-of-fit instead.
    pub r2_regression: f64,
    pub within_margin_fraction: f64,
    pub margin_pct: f64,
    pub quartiles_recorded_kwp: [f64; 3],
    pub quartiles_predicted_kwp: [f64; 3],
    /// Percentage difference of predicted vs recorded quartile values
    /// (quartile-vs-quartile reading of "error at the quartiles").
    pub quartile_delta_pct: [f64; 3],
    /// APE of the region whose recorded capacity is closest to each recorded
    /// quartile (region-matched reading). Empty when no row qualifies.
    pub quartile_matched_ape: Vec<(String, f64)>,
    pub per_region: Vec<RegionError>,
}

/// Quartiles by linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Result<[f64; 3]> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "quartiles of an empty sample".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let at = |q: f64| -> f64 {
        let h = (n - 1) as f64 * q;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Ok([at(0.25), at(0.5), at(0.75)])
}

fn pearson_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    (sxy * sxy) / (sxx * syy)
}

/// Joins predictions with recorded capacities on region id and computes the
/// validation statistics. Errors when the join is empty or a side repeats a
/// region id.
pub fn capacity_validation_report(
    predicted: &[(String, f64)],
    recorded: &[(String, f64)],
    margin_pct: f64,
) -> Result<ValidationReport> {
    let index = |rows: &[(String, f64)], side: &str| -> Result<BTreeMap<String, f64>> {
        let mut map = BTreeMap::new();
        for (id, v) in rows {
            if map.insert(id.clone(), *v).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate region id {id:?} in {side} capacities"
                )));
            }
        }
        Ok(map)
    };
    let pred = index(predicted, "predicted")?;
    let rec = index(recorded, "recorded")?;

    let mut per_region = Vec::new();
    for (id, p) in &pred {
        if let Some(r) = rec.get(id) {
            let ape = (*r > 0.0).then(|| 100.0 * (p - r).abs() / r);
            per_region.push(RegionError {
                region_id: id.clone(),
                recorded_kwp: *r,
                predicted_kwp: *p,
                ape_pct: ape,
            });
        }
    }
    if per_region.is_empty() {
        return Err(Error::InvalidArgument(
            "no region ids shared between predicted and recorded capacities".into(),
        ));
    }

    let n = per_region.len() as f64;
    let mae = per_region
        .iter()
        .map(|e| (e.predicted_kwp - e.recorded_kwp).abs())
        .sum::<f64>()
        / n;
    let apes: Vec<f64> = per_region.iter().filter_map(|e| e.ape_pct).collect();
    let mape_exclusions = per_region.len() - apes.len();
    let mape = if apes.is_empty() {
        f64::NAN
    } else {
        apes.iter().sum::<f64>() / apes.len() as f64
    };

    // Margin test without division: |p − r| ≤ (margin/100)·r also covers
    // zero-recorded rows (only an exact zero prediction passes there).
    let within = per_region
        .iter()
        .filter(|e| (e.predicted_kwp - e.recorded_kwp).abs() <= margin_pct / 100.0 * e.recorded_kwp)
        .count() as f64
        / n;

    let rec_vals: Vec<f64> = per_region.iter().map(|e| e.recorded_kwp).collect();
    let pred_vals: Vec<f64> = per_region.iter().map(|e| e.predicted_kwp).collect();
    let mean_rec = rec_vals.iter().sum::<f64>() / n;
    let ss_res: f64 = per_region
        .iter()
        .map(|e| (e.predicted_kwp - e.recorded_kwp).powi(2))
        .sum();
    let ss_tot: f64 = rec_vals.iter().map(|r| (r - mean_rec).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NAN
    };

    let q_rec = quartiles(&rec_vals)?;
    let q_pred = quartiles(&pred_vals)?;
    let mut quartile_delta = [f64::NAN; 3];
    for i in 0..3 {
        if q_rec[i] > 0.0 {
            quartile_delta[i] = 100.0 * (q_pred[i] - q_rec[i]) / q_rec[i];
        }
    }
    let mut matched = Vec::new();
    for q in q_rec {
        let best = per_region
            .iter()
            .filter(|e| e.ape_pct.is_some())
            .min_by(|a, b| {
                (a.recorded_kwp - q)
                    .abs()
                    .total_cmp(&(b.recorded_kwp - q).abs())
                    .then_with(|| a.region_id.cmp(&b.region_id))
            });
        if let Some(e) = best {
            matched.push((e.region_id.clone(), e.ape_pct.expect("filtered above")));
        }
    }

    Ok(ValidationReport {
        mae_kwp: mae,
        mape_pct: mape,
        mape_exclusions,
        r2,
        r2_regression: pearson_r2(&rec_vals, &pred_vals),
        within_margin_fraction: within,
        margin_pct,
        quartiles_recorded_kwp: q_rec,
        quartiles_predicted_kwp: q_pred,
        quartile_delta_pct: quartile_delta,
        quartile_matched_ape: matched,
        per_region,
    })
}

// ---------------------------------------------------------------------------
// Band and baseline series metrics
// ---------------------------------------------------------------------------

/// Width of a generation band relative to its upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandMetrics {
    /// Mean absolute percentage width: mean of `|up−lo|/up` over timestamps
    /// where the upper bound exceeds the power filter.
    pub mapw_pct: f64,
    /// Cumulative percentage width: `Σ(up−lo)/Σup` over the same set.
    pub cpw_pct: f64,
    pub n_used: usize,
}

/// Percentage errors of a baseline series against each band edge. The
/// denominator filter applies per reference, so the two sides may use
/// different timestamp counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineErrorMetrics {
    pub mape_h_pct: f64,
    pub mape_l_pct: f64,
    /// Signed cumulative error vs the upper edge; positive when the baseline
    /// produces more than the reference.
    pub cpe_h_pct: f64,
    pub cpe_l_pct: f64,
    pub n_used_h: usize,
    pub n_used_l: usize,
}

pub fn band_width_metrics(
    upper: &PowerSeries,
    lower: &PowerSeries,
    eps_power: f64,
) -> Result<BandMetrics> {
    check_aligned(upper, lower)?;
    let mut sum_ratio = 0.0;
    let mut sum_diff = 0.0;
    let mut sum_up = 0.0;
    let mut n_used = 0usize;
    for (up, lo) in upper.values_wh.iter().zip(&lower.values_wh) {
        if *up > eps_power {
            sum_ratio += (up - lo).abs() / up;
            sum_diff += up - lo;
            sum_up += up;
            n_used += 1;
        }
    }
    if n_used == 0 {
        return Err(Error::Series(format!(
            "no timestamp has upper-bound power above {eps_power} Wh"
        )));
    }
    Ok(BandMetrics {
        mapw_pct: 100.0 * sum_ratio / n_used as f64,
        cpw_pct: 100.0 * sum_diff / sum_up,
        n_used,
    })
}

pub fn baseline_error_metrics(
    baseline: &PowerSeries,
    upper: &PowerSeries,
    lower: &PowerSeries,
    eps_power: f64,
) -> Result<BaselineErrorMetrics> {
    check_aligned(baseline, upper)?;
    check_aligned(baseline, lower)?;
    let against = |reference: &PowerSeries| -> Result<(f64, f64, usize)> {
        let mut sum_ape = 0.0;
        let mut sum_base = 0.0;
        let mut sum_ref = 0.0;
        let mut n = 0usize;
        for (b, r) in baseline.values_wh.iter().zip(&reference.values_wh) {
            if *r > eps_power {
                sum_ape += (b - r).abs() / r;
                sum_base += b;
                sum_ref += r;
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::Series(format!(
                "no timestamp of '{}' passes the {eps_power} Wh filter",
                reference.label
            )));
        }
        Ok((
            100.0 * sum_ape / n as f64,
            100.0 * (sum_base - sum_ref) / sum_ref,
            n,
        ))
    };
    let (mape_h, cpe_h, n_h) = against(upper)?;
    let (mape_l, cpe_l, n_l) = against(lower)?;
    Ok(BaselineErrorMetrics {
        mape_h_pct: mape_h,
        mape_l_pct: mape_l,
        cpe_h_pct: cpe_h,
        cpe_l_pct: cpe_l,
        n_used_h: n_h,
        n_used_l: n_l,
    })
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

/// Flat CSV with a `metric,value,unit` header from (metric, value, unit) rows.
pub fn metrics_csv(rows: &[(String, f64, &str)]) -> String {
    let mut out = String::from("metric,value,unit\n");
    for (name, value, unit) in rows {
        out.push_str(&format!("{name},{},{unit}\n", fmt_value(*value)));
    }
    out
}

impl ValidationReport {
    pub fn csv_rows(&self) -> Vec<(String, f64, &'static str)> {
        let mut rows = vec![
            ("n_regions".into(), self.per_region.len() as f64, "count"),
            ("mae".into(), self.mae_kwp, "kwp"),
            ("mape".into(), self.mape_pct, "pct"),
            ("mape_exclusions".into(), self.mape_exclusions as f64, "count"),
            ("r2".into(), self.r2, "1"),
            ("r2_regression".into(), self.r2_regression, "1"),
            (
                "within_margin_fraction".into(),
                self.within_margin_fraction,
                "1",
            ),
            ("margin".into(), self.margin_pct, "pct"),
        ];
        for (i, name) in ["q1", "q2", "q3"].iter().enumerate() {
            rows.push((format!("recorded_{name}"), self.quartiles_recorded_kwp[i], "kwp"));
            rows.push((
                format!("predicted_{name}"),
                self.quartiles_predicted_kwp[i],
                "kwp",
            ));
            rows.push((format!("delta_{name}"), self.quartile_delta_pct[i], "pct"));
        }
        for e in &self.per_region {
            if let Some(ape) = e.ape_pct {
                rows.push((format!("ape.{}", e.region_id), ape, "pct"));
            }
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        metrics_csv(&self.csv_rows())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("Capacity validation\n");
        s.push_str(&format!("  regions joined        {}\n", self.per_region.len()));
        s.push_str(&format!("  MAE                   {:.3} kWp\n", self.mae_kwp));
        s.push_str(&format!(
            "  MAPE                  {:.3} % ({} excluded)\n",
            self.mape_pct, self.mape_exclusions
        ));
        s.push_str(&format!("  R² (vs diagonal)      {:.4}\n", self.r2));
        s.push_str(&format!("  R² (regression)       {:.4}\n", self.r2_regression));
        s.push_str(&format!(
            "  within ±{:.0}%           {:.1} % of regions\n",
            self.margin_pct,
            100.0 * self.within_margin_fraction
        ));
        s.push_str(&format!(
            "  recorded quartiles    {:.1} / {:.1} / {:.1} kWp\n",
            self.quartiles_recorded_kwp[0],
            self.quartiles_recorded_kwp[1],
            self.quartiles_recorded_kwp[2]
        ));
        s.push_str(&format!(
            "  predicted quartiles   {:.1} / {:.1} / {:.1} kWp\n",
            self.quartiles_predicted_kwp[0],
            self.quartiles_predicted_kwp[1],
            self.quartiles_predicted_kwp[2]
        ));
        s.push_str(&format!(
            "  quartile delta        {:.2} / {:.2} / {:.2} % (predicted vs recorded quartile values)\n",
            self.quartile_delta_pct[0], self.quartile_delta_pct[1], self.quartile_delta_pct[2]
        ));
        if !self.quartile_matched_ape.is_empty() {
            let parts: Vec<String> = self
                .quartile_matched_ape
                .iter()
                .map(|(id, ape)| format!("{id}: {ape:.2} %"))
                .collect();
            s.push_str(&format!(
                "  APE at quartile-matched regions: {}\n",
                parts.join(", ")
            ));
        }
        s.push_str("  region                recorded    predicted   APE\n");
        for e in &self.per_region {
            let ape = e
                .ape_pct
                .map(|a| format!("{a:.2} %"))
                .unwrap_or_else(|| "n/a".into());
            s.push_str(&format!(
                "  {:<20}  {:>9.2}   {:>9.2}   {ape}\n",
                e.region_id, e.recorded_kwp, e.predicted_kwp
            ));
        }
        s
    }
}

impl BandMetrics {
    pub fn csv_rows(&self) -> Vec<(String, f64, &'static str)> {
        vec![
            ("mapw".into(), self.mapw_pct, "pct"),
            ("cpw".into(), self.cpw_pct, "pct"),
            ("n_used".into(), self.n_used as f64, "count"),
        ]
    }

    pub fn to_text(&self) -> String {
        format!(
            "Band width\n  MAPW  {:.3} %\n  CPW   {:.3} %\n  hours used  {}\n",
            self.mapw_pct, self.cpw_pct, self.n_used
        )
    }
}

impl BaselineErrorMetrics {
    pub fn csv_rows(&self, prefix: &str) -> Vec<(String, f64, &'static str)> {
        vec![
            (format!("{prefix}mape_h"), self.mape_h_pct, "pct"),
            (format!("{prefix}mape_l"), self.mape_l_pct, "pct"),
            (format!("{prefix}cpe_h"), self.cpe_h_pct, "pct"),
            (format!("{prefix}cpe_l"), self.cpe_l_pct, "pct"),
            (format!("{prefix}n_used_h"), self.n_used_h as f64, "count"),
            (format!("{prefix}n_used_l"), self.n_used_l as f64, "count"),
        ]
    }

    pub fn to_text(&self, label: &str) -> String {
        format!(
            "Baseline errors ({label})\n  MAPE_H  {:.3} %   MAPE_L  {:.3} %\n  CPE_H   {:+.3} %   CPE_L   {:+.3} %\n  hours used  {} (upper) / {} (lower)\n",
            self.mape_h_pct, self.mape_l_pct, self.cpe_h_pct, self.cpe_l_pct, self.n_used_h, self.n_used_l
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;
    use chrono::{TimeZone, Utc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poly(id: &str, pts: &[(f64, f64)]) -> ArrayPolygon {
        let ring: Vec<Point2> = pts.iter().map(|&(x, y)| Point2 { x, y }).collect();
        ArrayPolygon::new(id, "local", ring, Vec::new()).unwrap()
    }

    fn unit_square(dx: f64, dy: f64) -> ArrayPolygon {
        poly(
            "sq",
            &[
                (dx, dy),
                (dx + 1.0, dy),
                (dx + 1.0, dy + 1.0),
                (dx, dy + 1.0),
            ],
        )
    }

    fn scaled(p: &ArrayPolygon, k: f64) -> ArrayPolygon {
        let ring: Vec<Point2> = p
            .exterior()
            .iter()
            .map(|q| Point2 {
                x: q.x * k,
                y: q.y * k,
            })
            .collect();
        ArrayPolygon::new(p.id.clone(), "local", ring, Vec::new()).unwrap()
    }

    fn random_convex(rng: &mut ChaCha8Rng, offset: f64) -> Option<ArrayPolygon> {
        let n = rng.gen_range(4..10);
        let pts: Vec<Point2> = (0..n)
            .map(|_| Point2 {
                x: rng.gen_range(0.0..8.0) + offset,
                y: rng.gen_range(0.0..8.0),
            })
            .collect();
        let hull = crate::geom::convex_hull(&pts);
        if hull.len() < 3 {
            return None;
        }
        ArrayPolygon::new("r", "local", hull, Vec::new()).ok()
    }

    #[test]
    fn iou_identical_disjoint_and_shifted() {
        let a = unit_square(0.0, 0.0);
        assert!((area_iou(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let far = unit_square(5.0, 0.0);
        assert_eq!(area_iou(&a, &far).unwrap(), 0.0);
        // Half-overlap: intersection 0.5, union 1.5.
        let shifted = unit_square(0.5, 0.0);
        assert!((area_iou(&a, &shifted).unwrap() - 1.0 / 3.0).abs() < 1e-9);
        assert!((dice_coefficient(&a, &shifted).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn dice_iou_identity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0;
        while checked < 1000 {
            let off = rng.gen_range(-4.0..4.0);
            let (Some(a), Some(b)) = (random_convex(&mut rng, 0.0), random_convex(&mut rng, off))
            else {
                continue;
            };
            let iou = area_iou(&a, &b).unwrap();
            let dice = dice_coefficient(&a, &b).unwrap();
            assert!(
                (dice - 2.0 * iou / (1.0 + iou)).abs() < 1e-9,
                "iou {iou} dice {dice}"
            );
            checked += 1;
        }
    }

    #[test]
    fn hausdorff_examples() {
        let a = unit_square(0.0, 0.0);
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        let b = unit_square(1.0, 0.0);
        let hd = hausdorff_distance(&a, &b).unwrap();
        assert!((hd - 1.0).abs() <= DEFAULT_HD_STEP_M, "hd {hd}");
        // Concentric squares of sides 2 and 4: corner of the outer square is
        // √2 from the inner boundary.
        let inner = poly("i", &[(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]);
        let outer = poly("o", &[(-2.0, -2.0), (2.0, -2.0), (2.0, 2.0), (-2.0, 2.0)]);
        let hd = hausdorff_distance(&inner, &outer).unwrap();
        assert!((hd - 2f64.sqrt()).abs() <= DEFAULT_HD_STEP_M, "hd {hd}");
    }

    #[test]
    fn matching_score_examples() {
        let a = unit_square(0.0, 0.0);
        assert!((matching_score(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(matching_score(&a, &unit_square(9.0, 9.0)).unwrap(), 0.0);
        // IoU 1/3 and HD 1.0 compose to 1/6.
        let s = matching_score(&a, &unit_square(0.5, 0.0)).unwrap();
        let hd = hausdorff_distance(&a, &unit_square(0.5, 0.0)).unwrap();
        assert!((s - (1.0 / 3.0) / (1.0 + hd)).abs() < 1e-12);
        assert!((s - 0.2222).abs() < 2e-2); // shifted by 0.5 → HD 0.5
        let s2 = matching_score(&a, &unit_square(1.0, 0.0));
        assert_eq!(s2.unwrap(), 0.0, "edge-adjacent squares share no area");
    }

    #[test]
    fn metric_symmetry_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 50 {
            let off = rng.gen_range(-2.0..2.0);
            let (Some(a), Some(b)) = (random_convex(&mut rng, 0.0), random_convex(&mut rng, off))
            else {
                continue;
            };
            assert!((area_iou(&a, &b).unwrap() - area_iou(&b, &a).unwrap()).abs() < 1e-12);
            assert!(
                (hausdorff_distance(&a, &b).unwrap() - hausdorff_distance(&b, &a).unwrap()).abs()
                    < 1e-9
            );
            let sab = matching_score(&a, &b).unwrap();
            let sba = matching_score(&b, &a).unwrap();
            assert!((sab - sba).abs() <= 1e-6, "S asymmetry {}", (sab - sba).abs());
            checked += 1;
        }
    }

    #[test]
    fn scaling_polygons_scales_hd_but_not_iou() {
        let a = unit_square(0.0, 0.0);
        let b = unit_square(0.5, 0.25);
        let k = 3.0;
        let (ak, bk) = (scaled(&a, k), scaled(&b, k));
        let iou = area_iou(&a, &b).unwrap();
        let iou_k = area_iou(&ak, &bk).unwrap();
        assert!((iou - iou_k).abs() < 1e-9);
        let dice = dice_coefficient(&a, &b).unwrap();
        assert!((dice - dice_coefficient(&ak, &bk).unwrap()).abs() < 1e-9);
        let hd = hausdorff_distance(&a, &b).unwrap();
        let hd_k = hausdorff_distance(&ak, &bk).unwrap();
        assert!(
            (hd_k - k * hd).abs() <= DEFAULT_HD_STEP_M * (1.0 + k),
            "hd {hd} scaled {hd_k}"
        );
        let s = matching_score(&a, &b).unwrap();
        let s_k = matching_score(&ak, &bk).unwrap();
        assert!((s_k - iou / (1.0 + hd_k)).abs() < 1e-9);
        assert!(s_k < s, "larger HD must shrink the score");
    }

    fn named(vals: &[(&str, f64)]) -> Vec<(String, f64)> {
        vals.iter().map(|(s, v)| (s.to_string(), *v)).collect()
    }

    #[test]
    fn validation_report_perfect_prediction() {
        let rows = named(&[("a", 100.0), ("b", 200.0), ("c", 300.0)]);
        let r = capacity_validation_report(&rows, &rows, 25.0).unwrap();
        assert_eq!(r.mae_kwp, 0.0);
        assert_eq!(r.mape_pct, 0.0);
        assert_eq!(r.r2, 1.0);
        assert_eq!(r.within_margin_fraction, 1.0);
        assert!((r.r2_regression - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_report_hand_arithmetic() {
        let pred = named(&[("a", 100.0), ("b", 200.0), ("c", 300.0)]);
        let rec = named(&[("a", 110.0), ("b", 190.0), ("c", 330.0)]);
        let r = capacity_validation_report(&pred, &rec, 25.0).unwrap();
        assert!((r.mae_kwp - 50.0 / 3.0).abs() < 1e-9, "mae {}", r.mae_kwp);
        let mape = 100.0 * (10.0 / 110.0 + 10.0 / 190.0 + 30.0 / 330.0) / 3.0;
        assert!((r.mape_pct - mape).abs() < 1e-9);
        assert!((r.mape_pct - 7.815).abs() < 1e-3);
        assert_eq!(r.within_margin_fraction, 1.0);
        assert!((r.r2 - (1.0 - 1100.0 / 24800.0)).abs() < 1e-12);
        // Linear-interpolation quartiles of (110, 190, 330).
        assert_eq!(r.quartiles_recorded_kwp, [150.0, 190.0, 260.0]);
        assert_eq!(r.quartiles_predicted_kwp, [150.0, 200.0, 250.0]);
        assert!(r.quartiles_recorded_kwp.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn validation_report_zero_recorded_is_excluded_from_mape() {
        let pred = named(&[("a", 5.0), ("b", 200.0)]);
        let rec = named(&[("a", 0.0), ("b", 200.0)]);
        let r = capacity_validation_report(&pred, &rec, 25.0).unwrap();
        assert_eq!(r.mape_exclusions, 1);
        assert_eq!(r.mape_pct, 0.0);
        // Zero recorded with nonzero prediction is never within the margin.
        assert_eq!(r.within_margin_fraction, 0.5);
        assert_eq!(r.per_region[0].ape_pct, None);
    }

    #[test]
    fn validation_report_rejects_bad_joins() {
        let a = named(&[("a", 1.0)]);
        let b = named(&[("b", 1.0)]);
        assert!(capacity_validation_report(&a, &b, 25.0).is_err());
        let dup = named(&[("a", 1.0), ("a", 2.0)]);
        assert!(capacity_validation_report(&dup, &a, 25.0).is_err());
    }

    fn series(vals: &[f64], label: &str) -> PowerSeries {
        let ts = (0..vals.len())
            .map(|h| Utc.with_ymd_and_hms(2022, 1, 1, h as u32, 0, 0).unwrap())
            .collect();
        PowerSeries::new(ts, vals.to_vec(), label).unwrap()
    }

    #[test]
    fn band_metrics_examples() {
        let up = series(&[1000.0, 2000.0, 4000.0], "up");
        let same = band_width_metrics(&up, &up, 1.0).unwrap();
        assert_eq!(same.mapw_pct, 0.0);
        assert_eq!(same.cpw_pct, 0.0);
        let lo = series(&[800.0, 1500.0, 3600.0], "lo");
        let m = band_width_metrics(&up, &lo, 1.0).unwrap();
        assert!((m.mapw_pct - 18.333).abs() < 1e-3, "mapw {}", m.mapw_pct);
        assert!((m.cpw_pct - 15.714).abs() < 1e-3, "cpw {}", m.cpw_pct);
        assert_eq!(m.n_used, 3);
        let zero = series(&[0.0, 0.0, 0.0], "z");
        let m = band_width_metrics(&up, &zero, 1.0).unwrap();
        assert_eq!(m.mapw_pct, 100.0);
        assert_eq!(m.cpw_pct, 100.0);
        assert!(band_width_metrics(&zero, &zero, 1.0).is_err());
    }

    #[test]
    fn band_metrics_constant_ratio_property() {
        let up = series(&[500.0, 1500.0, 2500.0, 4000.0], "up");
        let c = 0.23;
        let lo = series(
            &up.values_wh.iter().map(|v| v * (1.0 - c)).collect::<Vec<_>>(),
            "lo",
        );
        let m = band_width_metrics(&up, &lo, 1.0).unwrap();
        assert!((m.mapw_pct - 100.0 * c).abs() < 1e-9);
        assert!((m.cpw_pct - 100.0 * c).abs() < 1e-9);
    }

    #[test]
    fn baseline_error_examples() {
        let up = series(&[1000.0, 2000.0, 4000.0], "up");
        let lo = series(&[900.0, 1700.0, 3500.0], "lo");
        let same = baseline_error_metrics(&up, &up, &lo, 1.0).unwrap();
        assert_eq!(same.mape_h_pct, 0.0);
        assert_eq!(same.cpe_h_pct, 0.0);
        let base = series(&[900.0, 1800.0, 4200.0], "base");
        let m = baseline_error_metrics(&base, &up, &lo, 1.0).unwrap();
        assert!((m.mape_h_pct - 8.333).abs() < 1e-3, "mape_h {}", m.mape_h_pct);
        assert!((m.cpe_h_pct - -1.4286).abs() < 1e-3, "cpe_h {}", m.cpe_h_pct);
        assert_eq!((m.n_used_h, m.n_used_l), (3, 3));
        // Baseline above the reference ⇒ positive signed error.
        let above = series(&[1100.0, 2200.0, 4400.0], "b2");
        let m = baseline_error_metrics(&above, &up, &lo, 1.0).unwrap();
        assert!(m.cpe_h_pct > 0.0);
    }

    #[test]
    fn eps_filter_is_monotone() {
        let up = series(&[0.5, 2.0, 50.0, 900.0], "up");
        let lo = series(&[0.1, 1.0, 40.0, 800.0], "lo");
        let mut last = usize::MAX;
        for eps in [0.0, 1.0, 10.0, 100.0] {
            let m = band_width_metrics(&up, &lo, eps).unwrap();
            assert!(m.n_used <= last);
            last = m.n_used;
        }
    }

    #[test]
    fn csv_serialization_shape() {
        let up = series(&[1000.0, 2000.0], "up");
        let lo = series(&[800.0, 1600.0], "lo");
        let m = band_width_metrics(&up, &lo, 1.0).unwrap();
        let csv = metrics_csv(&m.csv_rows());
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("metric,value,unit"));
        assert_eq!(lines.next(), Some("mapw,20.000000,pct"));
        assert!(csv.ends_with('\n'));
        let rows = named(&[("a", 100.0)]);
        let r = capacity_validation_report(&rows, &rows, 25.0).unwrap();
        assert!(r.to_csv().contains("mae,0.000000,kwp"));
        assert!(r.to_text().contains("MAE"));
    }
}
