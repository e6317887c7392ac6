//! Module-layout inference: fit standard CEC module templates onto a
//! tilt-foreshortened virtual grid aligned with the footprint's minimal
//! bounding rectangle and keep the best-scoring arrangement.
//!
//! Every template is tried in portrait and landscape, so a 23-entry table
//! yields 46 candidate layouts per footprint. Candidates are compared by the
//! matching score (overlap divided by one plus the boundary Hausdorff
//! distance) and ties fall back to module count, template index, then
//! portrait first.

use crate::error::{Error, Result};
use crate::geom::{self, min_area_rect, ArrayPolygon, OrientedRectangle, Point2};
use crate::metrics::{multi_area_iou, multi_hausdorff, DEFAULT_HD_STEP_M};
use crate::raster::{label_bitmap, Connectivity};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

/// Minimum extent handed to the MBR search; footprints are meter-scale.
const MIN_MBR_EXTENT_M: f64 = 1e-6;
/// Slack for "cell larger than the MBR" comparisons, absorbing float noise
/// from rectangle fitting on exactly-tiling footprints.
const EXTENT_SLACK_M: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Material {
    MonoCSi,
    MultiCSi,
}

impl std::fmt::Display for Material {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Material::MonoCSi => f.write_str("Mono-c-Si"),
            Material::MultiCSi => f.write_str("Multi-c-Si"),
        }
    }
}

impl std::str::FromStr for Material {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Mono-c-Si" => Ok(Material::MonoCSi),
            "Multi-c-Si" => Ok(Material::MultiCSi),
            other => Err(Error::InvalidArgument(format!(
                "unknown module material {other:?}"
            ))),
        }
    }
}

/// One standard module type. `rated_power_w` is configuration, not a
/// datasheet fact: the default maps the numeric label token to kW per cell
/// and multiplies by the cell count, and can be overridden wholesale via CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleTemplate {
    pub index: usize,
    pub label: String,
    pub height_mm: f64,
    pub width_mm: f64,
    pub cell_count: u32,
    pub material: Material,
    pub rated_power_w: f64,
}

// label, height_mm, width_mm, cell_count. Row 12 carries a label/count
// mismatch (label says 60, table says 72); kept verbatim.
const BUILTIN_ROWS: [(&str, f64, f64, u32); 23] = [
    ("Mono-c-Si_0.017_128", 2067.0, 1046.0, 128),
    ("Mono-c-Si_0.017_96", 1559.0, 1046.0, 96),
    ("Mono-c-Si_0.022_72", 1620.0, 980.0, 72),
    ("Mono-c-Si_0.025_72", 1924.0, 954.0, 72),
    ("Mono-c-Si_0.026_60", 1620.0, 980.0, 60),
    ("Mono-c-Si_0.026_72", 1893.0, 971.0, 72),
    ("Mono-c-Si_0.026_96", 1943.0, 1297.0, 96),
    ("Mono-c-Si_0.027_60", 1644.0, 979.0, 60),
    ("Mono-c-Si_0.027_72", 1966.0, 1000.0, 72),
    ("Mono-c-Si_0.027_96", 1980.0, 1300.0, 96),
    ("Mono-c-Si_0.028_60", 1680.0, 996.0, 60),
    ("Mono-c-Si_0.028_72", 2000.0, 1000.0, 72),
    ("Mono-c-Si_0.033_60", 1960.0, 998.0, 72),
    ("Multi-c-Si_0.024_72", 1864.0, 932.0, 72),
    ("Multi-c-Si_0.025_72", 1924.0, 954.0, 72),
    ("Multi-c-Si_0.026_60", 1614.0, 954.0, 60),
    ("Multi-c-Si_0.026_72", 1934.0, 970.0, 72),
    ("Multi-c-Si_0.026_96", 1943.0, 1297.0, 96),
    ("Multi-c-Si_0.027_60", 1640.0, 998.0, 60),
    ("Multi-c-Si_0.027_72", 1970.0, 988.0, 72),
    ("Multi-c-Si_0.028_60", 1670.0, 1000.0, 60),
    ("Multi-c-Si_0.028_72", 1994.0, 1000.0, 72),
    ("Multi-c-Si_0.033_60", 1960.0, 998.0, 60),
];

/// Default power mapping: the middle label token read as kW per cell times
/// the cell count. An interpretation, not ground truth — override via CSV
/// when real ratings are known.
pub fn default_rated_power_w(label: &str, cell_count: u32) -> Option<f64> {
    let token = label.split('_').nth(1)?;
    let kw_per_cell: f64 = token.parse().ok()?;
    (kw_per_cell > 0.0).then(|| kw_per_cell * f64::from(cell_count) * 1000.0)
}

/// The 23 built-in standard module templates.
pub fn builtin_module_templates() -> Vec<ModuleTemplate> {
    BUILTIN_ROWS
        .iter()
        .enumerate()
        .map(|(index, &(label, height_mm, width_mm, cell_count))| {
            let material = label
                .split('_')
                .next()
                .and_then(|m| m.parse().ok())
                .expect("builtin labels start with a material token");
            let rated_power_w = default_rated_power_w(label, cell_count)
                .expect("builtin labels carry a numeric power token");
            ModuleTemplate {
                index,
                label: label.to_string(),
                height_mm,
                width_mm,
                cell_count,
                material,
                rated_power_w,
            }
        })
        .collect()
}

const TEMPLATE_CSV_HEADER: &str = "index,label,height_mm,width_mm,cell_count,material,rated_power_w";

/// Parses a template-override CSV (replaces the built-in table wholesale).
pub fn parse_template_overrides(text: &str, source: &Path) -> Result<Vec<ModuleTemplate>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty template file"))?;
    if header.trim() != TEMPLATE_CSV_HEADER {
        return Err(Error::parse(
            source,
            1,
            format!("expected header {TEMPLATE_CSV_HEADER:?}"),
        ));
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected 7 fields, got {}", fields.len()),
            ));
        }
        let num = |idx: usize, name: &str| -> Result<f64> {
            fields[idx].parse::<f64>().map_err(|_| {
                Error::parse(source, line_no, format!("bad {name} value {:?}", fields[idx]))
            })
        };
        let index = fields[0]
            .parse::<usize>()
            .map_err(|_| Error::parse(source, line_no, format!("bad index {:?}", fields[0])))?;
        if !seen.insert(index) {
            return Err(Error::parse(
                source,
                line_no,
                format!("duplicate template index {index}"),
            ));
        }
        let height_mm = num(2, "height_mm")?;
        let width_mm = num(3, "width_mm")?;
        let cell_count = fields[4].parse::<u32>().map_err(|_| {
            Error::parse(source, line_no, format!("bad cell_count {:?}", fields[4]))
        })?;
        let rated_power_w = num(6, "rated_power_w")?;
        if height_mm <= 0.0 || width_mm <= 0.0 || cell_count == 0 || rated_power_w <= 0.0 {
            return Err(Error::parse(
                source,
                line_no,
                "dimensions, cell count and rated power must be positive",
            ));
        }
        out.push(ModuleTemplate {
            index,
            label: fields[1].to_string(),
            height_mm,
            width_mm,
            cell_count,
            material: fields[5].parse()?,
            rated_power_w,
        });
    }
    if out.is_empty() {
        return Err(Error::parse(source, 1, "template file has no data rows"));
    }
    Ok(out)
}

/// Serializes a template table in the override-CSV format.
pub fn templates_to_csv(templates: &[ModuleTemplate]) -> String {
    let mut s = String::from(TEMPLATE_CSV_HEADER);
    s.push('\n');
    for t in templates {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.index, t.label, t.height_mm, t.width_mm, t.cell_count, t.material, t.rated_power_w
        ));
    }
    s
}

// ---------------------------------------------------------------------------
// Plan-view cell geometry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Portrait,
    Landscape,
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Orientation::Portrait => f.write_str("portrait"),
            Orientation::Landscape => f.write_str("landscape"),
        }
    }
}

impl std::str::FromStr for Orientation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "portrait" => Ok(Orientation::Portrait),
            "landscape" => Ok(Orientation::Landscape),
            other => Err(Error::InvalidArgument(format!(
                "unknown orientation {other:?}"
            ))),
        }
    }
}

/// Plan-view (map-projected) cell extents along the two MBR axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDimensions {
    pub along_mbr_long_m: f64,
    pub along_mbr_short_m: f64,
    pub orientation: Orientation,
    pub gap_m: f64,
}

/// Which MBR axis receives the tilt-foreshortened module dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
enum ForeshortenAxis {
    /// Larger plan extent along the long MBR axis (default reading).
    #[default]
    Auto,
    Long,
    Short,
}

fn plan_extents(
    template: &ModuleTemplate,
    orientation: Orientation,
    tilt_deg: f64,
    gap_m: f64,
) -> Result<(f64, f64)> {
    if !(0.0..90.0).contains(&tilt_deg) {
        return Err(Error::InvalidArgument(format!(
            "tilt must lie in [0, 90) degrees, got {tilt_deg}"
        )));
    }
    if gap_m < 0.0 || !gap_m.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "cell gap must be nonnegative, got {gap_m}"
        )));
    }
    let h = template.height_mm / 1000.0;
    let w = template.width_mm / 1000.0;
    // The up-slope dimension shrinks by cos(tilt): height in portrait,
    // width in landscape.
    let (across, upslope) = match orientation {
        Orientation::Portrait => (w, h),
        Orientation::Landscape => (h, w),
    };
    Ok((across, upslope * tilt_deg.to_radians().cos()))
}

fn cell_with_axis(
    template: &ModuleTemplate,
    orientation: Orientation,
    tilt_deg: f64,
    gap_m: f64,
    axis: ForeshortenAxis,
) -> Result<CellDimensions> {
    let (across, foreshortened) = plan_extents(template, orientation, tilt_deg, gap_m)?;
    let (along_long, along_short) = match axis {
        ForeshortenAxis::Auto => (across.max(foreshortened), across.min(foreshortened)),
        ForeshortenAxis::Long => (foreshortened, across),
        ForeshortenAxis::Short => (across, foreshortened),
    };
    Ok(CellDimensions {
        along_mbr_long_m: along_long,
        along_mbr_short_m: along_short,
        orientation,
        gap_m,
    })
}

/// Plan-view cell for a template at the given tilt: the up-slope module
/// dimension is multiplied by cos(tilt) and the larger resulting extent runs
/// along the long MBR axis.
pub fn plan_cell_dimensions(
    template: &ModuleTemplate,
    orientation: Orientation,
    tilt_deg: f64,
    gap_m: f64,
) -> Result<CellDimensions> {
    cell_with_axis(template, orientation, tilt_deg, gap_m, ForeshortenAxis::Auto)
}

// ---------------------------------------------------------------------------
// Virtual grid placement
// ---------------------------------------------------------------------------

/// The MBR corner with minimum (x, y) and the inward unit axes from it.
fn grid_frame(mbr: &OrientedRectangle) -> (Point2, Point2, Point2) {
    let corners = mbr.corners();
    let anchor = *corners
        .iter()
        .min_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)))
        .expect("rectangle has corners");
    let inward = |axis: Point2| -> Point2 {
        let to_center = mbr.center - anchor;
        if to_center.dot(axis) >= 0.0 {
            axis
        } else {
            axis * -1.0
        }
    };
    (anchor, inward(mbr.long_axis()), inward(mbr.short_axis()))
}

/// Accepted cells of one grid placement, together with their lattice indices
/// and the frame needed to reconstruct exact node coordinates.
struct PlacedGrid {
    quads: Vec<[Point2; 4]>,
    idx: Vec<(u32, u32)>,
    anchor: Point2,
    u: Point2,
    v: Point2,
    start_l: f64,
    start_s: f64,
    pitch_l: f64,
    pitch_s: f64,
    gapped: bool,
}

impl PlacedGrid {
    /// Lattice node `(i, j)` in map coordinates. Dissolved outlines are built
    /// from this single formula, so shared cell edges coincide exactly.
    fn node(&self, i: u32, j: u32) -> Point2 {
        self.anchor
            + self.u * (self.start_l + i as f64 * self.pitch_l)
            + self.v * (self.start_s + j as f64 * self.pitch_s)
    }
}

fn place_grid_with_phase(
    footprint: &ArrayPolygon,
    mbr: &OrientedRectangle,
    cell: &CellDimensions,
    coverage_tau: f64,
    phase: (f64, f64),
) -> Result<PlacedGrid> {
    if !(0.0..=1.0).contains(&coverage_tau) || coverage_tau == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "coverage threshold must lie in (0, 1], got {coverage_tau}"
        )));
    }
    let (ext_l, ext_s) = (cell.along_mbr_long_m, cell.along_mbr_short_m);
    if ext_l <= 0.0 || ext_s <= 0.0 {
        return Err(Error::InvalidArgument(
            "cell extents must be positive".into(),
        ));
    }
    let (anchor, u, v) = grid_frame(mbr);
    let pitch_l = ext_l + cell.gap_m;
    let pitch_s = ext_s + cell.gap_m;
    let start_l = -phase.0 * pitch_l;
    let start_s = -phase.1 * pitch_s;
    let mut grid = PlacedGrid {
        quads: Vec::new(),
        idx: Vec::new(),
        anchor,
        u,
        v,
        start_l,
        start_s,
        pitch_l,
        pitch_s,
        gapped: cell.gap_m > 0.0,
    };
    let span_l = 2.0 * mbr.half_extents.0;
    let span_s = 2.0 * mbr.half_extents.1;
    if ext_l > span_l + EXTENT_SLACK_M && ext_s > span_s + EXTENT_SLACK_M {
        return Ok(grid);
    }
    let count = |span: f64, pitch: f64, start: f64| -> usize {
        (((span - start - EXTENT_SLACK_M) / pitch).ceil().max(1.0)) as usize
    };
    let n_cols = count(span_l, pitch_l, start_l);
    let n_rows = count(span_s, pitch_s, start_s);

    let cell_area = ext_l * ext_s;
    for i in 0..n_cols {
        for j in 0..n_rows {
            let o = anchor + u * (start_l + i as f64 * pitch_l) + v * (start_s + j as f64 * pitch_s);
            let quad = [o, o + u * ext_l, o + u * ext_l + v * ext_s, o + v * ext_s];
            let cell_poly = ArrayPolygon::new(
                format!("{}/cell_{i}_{j}", footprint.id),
                footprint.crs_id.clone(),
                quad.to_vec(),
                Vec::new(),
            )?;
            let overlap = geom::total_area(&geom::intersection(
                std::slice::from_ref(&cell_poly),
                std::slice::from_ref(footprint),
            )?);
            if overlap / cell_area >= coverage_tau {
                grid.quads.push(quad);
                grid.idx.push((i as u32, j as u32));
            }
        }
    }
    Ok(grid)
}

/// Lays a grid of plan cells over the footprint, anchored at the MBR corner
/// of minimum (x, y) with columns along the long MBR axis, and keeps the
/// cells whose footprint-overlap ratio reaches `coverage_tau`. A cell larger
/// than the MBR in both extents yields an empty list.
pub fn place_virtual_grid(
    footprint: &ArrayPolygon,
    mbr: &OrientedRectangle,
    cell: &CellDimensions,
    coverage_tau: f64,
) -> Result<Vec<[Point2; 4]>> {
    Ok(place_grid_with_phase(footprint, mbr, cell, coverage_tau, (0.0, 0.0))?.quads)
}

// ---------------------------------------------------------------------------
// Candidate evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutParams {
    /// Minimum cell-overlap ratio to accept a grid cell ("most of a cell").
    pub coverage_tau: f64,
    /// Inter-module spacing added to both grid pitches, meters.
    pub gap_m: f64,
    /// Boundary discretization step for the Hausdorff term, meters.
    pub hd_step_m: f64,
    /// Divide the Hausdorff term by the MBR diagonal before scoring, making
    /// the score scale-free. Off by default: the score is unit-dependent
    /// with distances in meters.
    pub normalize_hd: bool,
    /// Grid anchor phases swept per axis (1 = single anchored grid).
    pub phase_sweep: usize,
    /// Compass bearing of the downslope direction; when set, the
    /// foreshortened extent is laid along the MBR axis most parallel to it.
    pub downslope_azimuth_deg: Option<f64>,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            coverage_tau: 0.5,
            gap_m: 0.0,
            hd_step_m: DEFAULT_HD_STEP_M,
            normalize_hd: false,
            phase_sweep: 1,
            downslope_azimuth_deg: None,
        }
    }
}

/// One evaluated arrangement of modules on a footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleLayout {
    pub template_index: usize,
    pub orientation: Orientation,
    /// Accepted cell quadrilaterals in map coordinates.
    pub accepted_cells: Vec<[Point2; 4]>,
    pub module_count: usize,
    /// Dissolved union of the accepted cells; disconnected acceptance
    /// patterns produce multiple parts.
    pub layout_parts: Vec<ArrayPolygon>,
    pub score: f64,
    pub capacity_w: f64,
}

/// Signed shoelace area of a lattice ring, in cell units.
fn lattice_ring_area(ring: &[(u32, u32)]) -> i64 {
    let mut acc = 0i64;
    for k in 0..ring.len() {
        let (x0, y0) = ring[k];
        let (x1, y1) = ring[(k + 1) % ring.len()];
        acc += x0 as i64 * y1 as i64 - x1 as i64 * y0 as i64;
    }
    acc
}

/// Dissolves the accepted cells into polygon parts. Gapless cells tile an
/// integer lattice, so their union is traced combinatorially: boundary edges
/// are the cell sides whose neighbor is not accepted, stitched into rings
/// with the interior kept on the left. This sidesteps floating-point boolean
/// unions entirely — exactly shared cell edges are a degenerate input for
/// those and previously could leave adjacent cells unmerged, poisoning the
/// Hausdorff term with interior edges. Gapped cells never touch and are
/// emitted as one part each.
fn dissolve_cells(
    grid: &PlacedGrid,
    footprint: &ArrayPolygon,
    template_index: usize,
) -> Result<Vec<ArrayPolygon>> {
    let part_id =
        |k: usize| -> String { format!("{}/layout{template_index}/{k}", footprint.id) };
    if grid.idx.is_empty() {
        return Ok(Vec::new());
    }
    if grid.gapped {
        let mut parts = Vec::with_capacity(grid.quads.len());
        for (k, quad) in grid.quads.iter().enumerate() {
            parts.push(ArrayPolygon::new(
                part_id(k),
                footprint.crs_id.clone(),
                quad.to_vec(),
                Vec::new(),
            )?);
        }
        return Ok(parts);
    }

    // Components of the accepted-cell polyomino (4-connected; diagonal
    // contact is a shared corner, not a shared edge).
    let (max_i, max_j) = grid
        .idx
        .iter()
        .fold((0, 0), |(mi, mj), &(i, j)| (mi.max(i), mj.max(j)));
    let (w, h) = (max_i as usize + 1, max_j as usize + 1);
    let mut bitmap = vec![false; w * h];
    for &(i, j) in &grid.idx {
        bitmap[j as usize * w + i as usize] = true;
    }
    let components = label_bitmap(w, h, &bitmap, Connectivity::Four, 1);

    let mut parts = Vec::with_capacity(components.len());
    for cells in &components {
        let in_comp: HashSet<(u32, u32)> = cells.iter().copied().collect();
        // Directed boundary edges with the interior on the left.
        let mut outgoing: BTreeMap<(u32, u32), Vec<(u32, u32)>> = BTreeMap::new();
        let mut push = |from: (u32, u32), to: (u32, u32)| {
            outgoing.entry(from).or_default().push(to);
        };
        for &(i, j) in cells {
            if j == 0 || !in_comp.contains(&(i, j - 1)) {
                push((i, j), (i + 1, j));
            }
            if !in_comp.contains(&(i + 1, j)) {
                push((i + 1, j), (i + 1, j + 1));
            }
            if !in_comp.contains(&(i, j + 1)) {
                push((i + 1, j + 1), (i, j + 1));
            }
            if i == 0 || !in_comp.contains(&(i - 1, j)) {
                push((i, j + 1), (i, j));
            }
        }

        // Stitch edges into rings. At a pinch node (two diagonal cells of the
        // same component meeting at a corner) the left-most turn keeps each
        // ring hugging its own interior.
        let mut rings: Vec<Vec<(u32, u32)>> = Vec::new();
        let starts: Vec<(u32, u32)> = outgoing.keys().copied().collect();
        for start in starts {
            loop {
                let Some(&first) = outgoing.get(&start).and_then(|v| v.first()) else {
                    break;
                };
                outgoing.get_mut(&start).unwrap().retain(|&t| t != first);
                let mut ring = vec![start];
                let (mut from, mut to) = (start, first);
                while to != start {
                    let dir = (to.0 as i64 - from.0 as i64, to.1 as i64 - from.1 as i64);
                    let next_dir = |cand: (u32, u32)| {
                        (cand.0 as i64 - to.0 as i64, cand.1 as i64 - to.1 as i64)
                    };
                    let options = outgoing.get(&to).cloned().unwrap_or_default();
                    // Preference: left turn, straight, right turn.
                    let left = (-dir.1, dir.0);
                    let next = options
                        .iter()
                        .copied()
                        .min_by_key(|&c| {
                            let d = next_dir(c);
                            if d == left {
                                0
                            } else if d == dir {
                                1
                            } else {
                                2
                            }
                        })
                        .ok_or_else(|| {
                            Error::Geometry("open boundary chain in cell lattice".into())
                        })?;
                    outgoing.get_mut(&to).unwrap().retain(|&t| t != next);
                    ring.push(to);
                    from = to;
                    to = next;
                }
                // Merge collinear runs.
                let n = ring.len();
                let slim: Vec<(u32, u32)> = (0..n)
                    .filter(|&k| {
                        let p = ring[(k + n - 1) % n];
                        let q = ring[k];
                        let r = ring[(k + 1) % n];
                        (q.0 as i64 - p.0 as i64, q.1 as i64 - p.1 as i64)
                            != (r.0 as i64 - q.0 as i64, r.1 as i64 - q.1 as i64)
                    })
                    .map(|k| ring[k])
                    .collect();
                rings.push(slim);
            }
        }

        // The single positive-area ring is the outline; the rest are holes.
        let exterior_at = rings
            .iter()
            .position(|r| lattice_ring_area(r) > 0)
            .ok_or_else(|| Error::Geometry("cell lattice produced no outline ring".into()))?;
        let map_ring = |ring: &[(u32, u32)]| -> Vec<Point2> {
            ring.iter().map(|&(i, j)| grid.node(i, j)).collect()
        };
        let exterior = map_ring(&rings[exterior_at]);
        let holes: Vec<Vec<Point2>> = rings
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != exterior_at)
            .map(|(_, r)| map_ring(r))
            .collect();
        parts.push(ArrayPolygon::from_rings(
            part_id(parts.len()),
            footprint.crs_id.clone(),
            exterior,
            holes,
        )?);
    }
    Ok(parts)
}

fn score_layout(
    parts: &[ArrayPolygon],
    footprint: &ArrayPolygon,
    params: &LayoutParams,
    mbr: &OrientedRectangle,
) -> Result<f64> {
    if parts.is_empty() || geom::total_area(parts) == 0.0 {
        return Ok(0.0);
    }
    let fp = std::slice::from_ref(footprint);
    let iou = multi_area_iou(parts, fp)?;
    if iou == 0.0 {
        return Ok(0.0);
    }
    let hd = multi_hausdorff(parts, fp, params.hd_step_m)?;
    let hd = if params.normalize_hd {
        let diag = (mbr.half_extents.0.hypot(mbr.half_extents.1)) * 2.0;
        hd / diag
    } else {
        hd
    };
    Ok(iou / (1.0 + hd))
}

fn choose_axis(params: &LayoutParams, mbr: &OrientedRectangle) -> ForeshortenAxis {
    match params.downslope_azimuth_deg {
        None => ForeshortenAxis::Auto,
        Some(az) => {
            let az = az.to_radians();
            let down = Point2 {
                x: az.sin(),
                y: az.cos(),
            };
            if down.dot(mbr.long_axis()).abs() >= down.dot(mbr.short_axis()).abs() {
                ForeshortenAxis::Long
            } else {
                ForeshortenAxis::Short
            }
        }
    }
}

/// Evaluates every template in both orientations and returns all candidates
/// in template × {portrait, landscape} order.
pub fn enumerate_layout_candidates(
    footprint: &ArrayPolygon,
    tilt_deg: f64,
    templates: &[ModuleTemplate],
    params: &LayoutParams,
) -> Result<Vec<ModuleLayout>> {
    if templates.is_empty() {
        return Err(Error::InvalidArgument("no module templates given".into()));
    }
    let mbr = min_area_rect(footprint.exterior(), MIN_MBR_EXTENT_M)?;
    let axis = choose_axis(params, &mbr);
    let phases = params.phase_sweep.max(1);
    let mut out = Vec::with_capacity(templates.len() * 2);
    for template in templates {
        for orientation in [Orientation::Portrait, Orientation::Landscape] {
            let cell = cell_with_axis(template, orientation, tilt_deg, params.gap_m, axis)?;
            let mut best: Option<ModuleLayout> = None;
            for pi in 0..phases {
                for pj in 0..phases {
                    let phase = (pi as f64 / phases as f64, pj as f64 / phases as f64);
                    let grid =
                        place_grid_with_phase(footprint, &mbr, &cell, params.coverage_tau, phase)?;
                    let parts = dissolve_cells(&grid, footprint, template.index)?;
                    let score = score_layout(&parts, footprint, params, &mbr)?;
                    let candidate = ModuleLayout {
                        template_index: template.index,
                        orientation,
                        module_count: grid.quads.len(),
                        accepted_cells: grid.quads,
                        layout_parts: parts,
                        score,
                        capacity_w: template.rated_power_w * 0.0, // set below
                    };
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            candidate.score > b.score
                                || (candidate.score == b.score
                                    && candidate.module_count > b.module_count)
                        }
                    };
                    if better {
                        best = Some(candidate);
                    }
                }
            }
            let mut layout = best.expect("at least one phase evaluated");
            layout.capacity_w = layout.module_count as f64 * template.rated_power_w;
            out.push(layout);
        }
    }
    Ok(out)
}

/// Best layout for the footprint at the given tilt. Ties break toward more
/// modules, then the lower template index, then portrait. A footprint too
/// small for every template yields a valid zero-module layout with score 0.
pub fn infer_best_layout(
    footprint: &ArrayPolygon,
    tilt_deg: f64,
    templates: &[ModuleTemplate],
    params: &LayoutParams,
) -> Result<ModuleLayout> {
    let candidates = enumerate_layout_candidates(footprint, tilt_deg, templates, params)?;
    // Candidates arrive ordered by (template index, portrait-first), so a
    // strictly-better comparison realizes the remaining tie-break rules.
    let mut best: Option<ModuleLayout> = None;
    for c in candidates {
        let better = match &best {
            None => true,
            Some(b) => {
                c.score > b.score || (c.score == b.score && c.module_count > b.module_count)
            }
        };
        if better {
            best = Some(c);
        }
    }
    Ok(best.expect("candidate list is nonempty"))
}

/// Capacity of a layout under the template it was fitted with.
pub fn layout_capacity(layout: &ModuleLayout, template: &ModuleTemplate) -> Result<f64> {
    if layout.template_index != template.index {
        return Err(Error::InvalidArgument(format!(
            "layout was fitted with template {} but capacity was requested for template {}",
            layout.template_index, template.index
        )));
    }
    Ok(layout.module_count as f64 * template.rated_power_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::multi_matching_score;

    fn pt(x: f64, y: f64) -> Point2 {
        Point2 { x, y }
    }

    fn rect_poly(id: &str, x0: f64, y0: f64, w: f64, h: f64) -> ArrayPolygon {
        ArrayPolygon::new(
            id,
            "local",
            vec![pt(x0, y0), pt(x0 + w, y0), pt(x0 + w, y0 + h), pt(x0, y0 + h)],
            Vec::new(),
        )
        .unwrap()
    }

    fn rotated_rect(id: &str, w: f64, h: f64, angle_deg: f64, cx: f64, cy: f64) -> ArrayPolygon {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let ring = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]
            .iter()
            .map(|&(x, y)| pt(cx + x * c - y * s, cy + x * s + y * c))
            .collect();
        ArrayPolygon::new(id, "local", ring, Vec::new()).unwrap()
    }

    fn t11() -> ModuleTemplate {
        builtin_module_templates()[11].clone()
    }

    #[test]
    fn builtin_table_matches_reference_rows() {
        let templates = builtin_module_templates();
        assert_eq!(templates.len(), 23);
        let t = &templates[11];
        assert_eq!(t.label, "Mono-c-Si_0.028_72");
        assert_eq!((t.height_mm, t.width_mm), (2000.0, 1000.0));
        assert_eq!(t.cell_count, 72);
        assert_eq!(t.material, Material::MonoCSi);
        assert_eq!((templates[0].height_mm, templates[0].width_mm), (2067.0, 1046.0));
        assert_eq!(templates[0].cell_count, 128);
        for t in &templates {
            assert!(t.height_mm >= t.width_mm, "row {} not height-major", t.index);
            assert!(t.rated_power_w > 0.0);
            assert!(t.label.starts_with(&t.material.to_string()));
        }
        // Label/count mismatch in row 12 is preserved as published.
        assert_eq!(templates[12].label, "Mono-c-Si_0.033_60");
        assert_eq!(templates[12].cell_count, 72);
        // Default power mapping: kW-per-cell token × cell count.
        assert!((templates[11].rated_power_w - 0.028 * 72.0 * 1000.0).abs() < 1e-9);
    }

    #[test]
    fn plan_cells_apply_cosine_to_the_upslope_extent() {
        let c = plan_cell_dimensions(&t11(), Orientation::Portrait, 0.0, 0.0).unwrap();
        assert!((c.along_mbr_long_m - 2.0).abs() < 1e-12);
        assert!((c.along_mbr_short_m - 1.0).abs() < 1e-12);
        let c = plan_cell_dimensions(&t11(), Orientation::Portrait, 60.0, 0.0).unwrap();
        // 2.000 · cos 60° = 1.000: both extents collapse to a meter.
        assert!((c.along_mbr_long_m - 1.0).abs() < 1e-9);
        assert!((c.along_mbr_short_m - 1.0).abs() < 1e-9);
        let c = plan_cell_dimensions(&t11(), Orientation::Landscape, 35.0, 0.0).unwrap();
        assert!((c.along_mbr_short_m - 0.8192).abs() < 1e-4);
        assert!((c.along_mbr_long_m - 2.0).abs() < 1e-12);
        assert!(plan_cell_dimensions(&t11(), Orientation::Portrait, 90.0, 0.0).is_err());
        assert!(plan_cell_dimensions(&t11(), Orientation::Portrait, -1.0, 0.0).is_err());
    }

    fn grid_cells(fp: &ArrayPolygon, cell: &CellDimensions, tau: f64) -> Vec<[Point2; 4]> {
        let mbr = min_area_rect(fp.exterior(), MIN_MBR_EXTENT_M).unwrap();
        place_virtual_grid(fp, &mbr, cell, tau).unwrap()
    }

    #[test]
    fn grid_on_aligned_rectangle_accepts_six_cells() {
        let fp = rect_poly("fp", 0.0, 0.0, 3.0, 4.0);
        let cell = plan_cell_dimensions(&t11(), Orientation::Portrait, 0.0, 0.0).unwrap();
        let cells = grid_cells(&fp, &cell, 0.5);
        assert_eq!(cells.len(), 6);
        for quad in &cells {
            for p in quad {
                assert!(fp.contains_point(*p, 1e-9), "cell corner {p:?} outside");
            }
        }
    }

    #[test]
    fn grid_is_rotation_equivariant_on_exact_tilings() {
        let cell = plan_cell_dimensions(&t11(), Orientation::Portrait, 0.0, 0.0).unwrap();
        for angle in [0.0, 37.0, 101.5] {
            let fp = rotated_rect("fp", 3.0, 4.0, angle, 12.0, -7.0);
            let cells = grid_cells(&fp, &cell, 0.5);
            assert_eq!(cells.len(), 6, "angle {angle}");
        }
    }

    #[test]
    fn grid_rejects_cells_below_coverage() {
        // Footprint as long as the cell but much narrower: one candidate
        // cell at overlap ratio 0.4 < τ.
        let fp = rect_poly("fp", 0.0, 0.0, 2.0, 0.4);
        let cell = CellDimensions {
            along_mbr_long_m: 2.0,
            along_mbr_short_m: 1.0,
            orientation: Orientation::Portrait,
            gap_m: 0.0,
        };
        assert_eq!(grid_cells(&fp, &cell, 0.5).len(), 0);
        // Same geometry passes once τ drops below the ratio.
        assert_eq!(grid_cells(&fp, &cell, 0.39).len(), 1);
    }

    #[test]
    fn grid_is_empty_when_cell_exceeds_mbr_in_both_extents() {
        let fp = rect_poly("fp", 0.0, 0.0, 1.0, 0.8);
        let cell = CellDimensions {
            along_mbr_long_m: 2.0,
            along_mbr_short_m: 1.0,
            orientation: Orientation::Portrait,
            gap_m: 0.0,
        };
        assert!(grid_cells(&fp, &cell, 0.5).is_empty());
    }

    #[test]
    fn dissolve_merges_gapless_tiling_into_one_part() {
        // 3 × 2 cells tile the footprint exactly. The dissolved union must be
        // a single quadrilateral: leftover interior edges would register as
        // boundary samples and poison the Hausdorff term below.
        let fp = rect_poly("fp", 5.0, -2.0, 4.5, 2.0);
        let cell = CellDimensions {
            along_mbr_long_m: 1.5,
            along_mbr_short_m: 1.0,
            orientation: Orientation::Portrait,
            gap_m: 0.0,
        };
        let mbr = min_area_rect(fp.exterior(), MIN_MBR_EXTENT_M).unwrap();
        let grid = place_grid_with_phase(&fp, &mbr, &cell, 0.5, (0.0, 0.0)).unwrap();
        assert_eq!(grid.quads.len(), 6);
        let parts = dissolve_cells(&grid, &fp, 11).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].id, "fp/layout11/0");
        assert_eq!(parts[0].exterior().len(), 4, "collinear runs not merged");
        assert!(parts[0].holes().is_empty());
        assert!((parts[0].area() - 9.0).abs() < 1e-9);
        let score = multi_matching_score(&parts, std::slice::from_ref(&fp), 0.25).unwrap();
        assert!((score - 1.0).abs() < 1e-9, "score {score}");
    }

    #[test]
    fn dissolve_traces_hole_rings_around_rejected_cells() {
        // A footprint hole swallows most of the centre cell of a 3 × 3 grid,
        // so the dissolved outline must carry an inner ring where the cell
        // was rejected.
        let hole = vec![pt(1.6, 1.05), pt(2.9, 1.05), pt(2.9, 1.95), pt(1.6, 1.95)];
        let fp = ArrayPolygon::new(
            "fp",
            "local",
            vec![pt(0.0, 0.0), pt(4.5, 0.0), pt(4.5, 3.0), pt(0.0, 3.0)],
            vec![hole],
        )
        .unwrap();
        let cell = CellDimensions {
            along_mbr_long_m: 1.5,
            along_mbr_short_m: 1.0,
            orientation: Orientation::Portrait,
            gap_m: 0.0,
        };
        let mbr = min_area_rect(fp.exterior(), MIN_MBR_EXTENT_M).unwrap();
        let grid = place_grid_with_phase(&fp, &mbr, &cell, 0.5, (0.0, 0.0)).unwrap();
        assert_eq!(grid.quads.len(), 8);
        let parts = dissolve_cells(&grid, &fp, 0).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].holes().len(), 1);
        assert!((parts[0].area() - 12.0).abs() < 1e-9);
    }

    /// A hand-built unit lattice for exercising the dissolve on acceptance
    /// patterns the placement stage would not normally emit.
    fn unit_grid(idx: Vec<(u32, u32)>) -> PlacedGrid {
        PlacedGrid {
            quads: Vec::new(),
            idx,
            anchor: pt(0.0, 0.0),
            u: pt(1.0, 0.0),
            v: pt(0.0, 1.0),
            start_l: 0.0,
            start_s: 0.0,
            pitch_l: 1.0,
            pitch_s: 1.0,
            gapped: false,
        }
    }

    #[test]
    fn dissolve_splits_diagonal_contact_into_two_parts() {
        // Cells meeting only at a corner share a lattice node but no edge.
        let fp = rect_poly("fp", 0.0, 0.0, 2.0, 2.0);
        let parts = dissolve_cells(&unit_grid(vec![(0, 0), (1, 1)]), &fp, 3).unwrap();
        assert_eq!(parts.len(), 2);
        for p in &parts {
            assert_eq!(p.exterior().len(), 4);
            assert!(p.holes().is_empty());
            assert!((p.area() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dissolve_survives_pinch_between_hole_and_notch() {
        // 3 × 3 block minus the centre and one corner: the interior void
        // touches the outside world diagonally at a node where four boundary
        // edges meet. The ring stitcher must close every walk there and keep
        // even-odd containment intact.
        let idx: Vec<(u32, u32)> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&c| c != (0, 0) && c != (1, 1))
            .collect();
        let fp = rect_poly("fp", 0.0, 0.0, 3.0, 3.0);
        let parts = dissolve_cells(&unit_grid(idx), &fp, 0).unwrap();
        assert_eq!(parts.len(), 1);
        assert!((parts[0].area() - 7.0).abs() < 1e-12);
        for (p, inside) in [
            (pt(1.5, 0.5), true),
            (pt(0.5, 1.5), true),
            (pt(2.5, 2.5), true),
            (pt(0.5, 0.5), false),
            (pt(1.5, 1.5), false),
        ] {
            assert_eq!(parts[0].contains_point(p, 1e-9), inside, "probe {p:?}");
        }
    }

    #[test]
    fn best_layout_recovers_constructed_grid() {
        // 2 rows × 3 columns of portrait template-11 cells: 3 m × 4 m.
        let fp = rect_poly("fp", 10.0, 20.0, 3.0, 4.0);
        let templates = builtin_module_templates();
        let params = LayoutParams::default();
        let best = infer_best_layout(&fp, 0.0, &templates, &params).unwrap();
        assert_eq!(best.template_index, 11);
        assert_eq!(best.orientation, Orientation::Portrait);
        assert_eq!(best.module_count, 6);
        assert!(best.score >= 0.95, "score {}", best.score);
        assert!((best.capacity_w - 6.0 * 2016.0).abs() < 1e-9);
        // Score must agree with a direct recomputation.
        let recomputed = multi_matching_score(
            &best.layout_parts,
            std::slice::from_ref(&fp),
            params.hd_step_m,
        )
        .unwrap();
        assert!((best.score - recomputed).abs() < 1e-9);
    }

    #[test]
    fn tiny_footprint_yields_zero_module_layout() {
        let fp = rect_poly("fp", 0.0, 0.0, 0.4, 0.3);
        let best =
            infer_best_layout(&fp, 0.0, &builtin_module_templates(), &LayoutParams::default())
                .unwrap();
        assert_eq!(best.module_count, 0);
        assert_eq!(best.score, 0.0);
        assert_eq!(best.capacity_w, 0.0);
        assert!(best.layout_parts.is_empty());
    }

    #[test]
    fn equal_scores_break_toward_more_modules() {
        // Both templates tile a 2 m square exactly (score 1.0); the halved
        // module wins on count despite its higher index.
        let big = ModuleTemplate {
            index: 0,
            label: "Test_0.4_1".into(),
            height_mm: 2000.0,
            width_mm: 2000.0,
            cell_count: 1,
            material: Material::MonoCSi,
            rated_power_w: 400.0,
        };
        let half = ModuleTemplate {
            index: 1,
            label: "Test_0.2_1".into(),
            height_mm: 2000.0,
            width_mm: 1000.0,
            cell_count: 1,
            material: Material::MonoCSi,
            rated_power_w: 200.0,
        };
        let fp = rect_poly("fp", 0.0, 0.0, 2.0, 2.0);
        let best = infer_best_layout(
            &fp,
            0.0,
            &[big.clone(), half.clone()],
            &LayoutParams::default(),
        )
        .unwrap();
        assert_eq!(best.template_index, 1);
        assert_eq!(best.module_count, 2);
        assert!((best.score - 1.0).abs() < 1e-9);
        // With equal score and count the lower index (given first) wins.
        let twin = ModuleTemplate { index: 5, ..big.clone() };
        let best = infer_best_layout(&fp, 0.0, &[big, twin], &LayoutParams::default()).unwrap();
        assert_eq!(best.template_index, 0);
    }

    #[test]
    fn full_table_enumerates_46_candidates() {
        let fp = rect_poly("fp", 0.0, 0.0, 3.0, 4.0);
        let candidates = enumerate_layout_candidates(
            &fp,
            20.0,
            &builtin_module_templates(),
            &LayoutParams::default(),
        )
        .unwrap();
        assert_eq!(candidates.len(), 46);
        for c in &candidates {
            assert!((0.0..=1.0).contains(&c.score), "score {}", c.score);
            assert_eq!(c.module_count, c.accepted_cells.len());
        }
        // Both orientations appear for every template.
        let portrait = candidates
            .iter()
            .filter(|c| c.orientation == Orientation::Portrait)
            .count();
        assert_eq!(portrait, 23);
    }

    #[test]
    fn module_count_is_monotone_in_tilt() {
        let fp = rect_poly("fp", 0.0, 0.0, 3.0, 4.0);
        let t = t11();
        let params = LayoutParams::default();
        let mbr = min_area_rect(fp.exterior(), MIN_MBR_EXTENT_M).unwrap();
        let mut last = 0usize;
        for tilt in [0.0, 20.0, 40.0, 60.0, 80.0] {
            let cell = plan_cell_dimensions(&t, Orientation::Portrait, tilt, 0.0).unwrap();
            let n = place_virtual_grid(&fp, &mbr, &cell, params.coverage_tau)
                .unwrap()
                .len();
            assert!(n >= last, "count dropped from {last} to {n} at tilt {tilt}");
            last = n;
        }
    }

    #[test]
    fn layout_is_translation_equivariant() {
        let templates = builtin_module_templates();
        let params = LayoutParams::default();
        let fp = rect_poly("fp", 0.0, 0.0, 3.2, 4.1);
        let moved = rect_poly("fp", 1000.0, -500.0, 3.2, 4.1);
        let a = infer_best_layout(&fp, 25.0, &templates, &params).unwrap();
        let b = infer_best_layout(&moved, 25.0, &templates, &params).unwrap();
        assert_eq!(a.template_index, b.template_index);
        assert_eq!(a.module_count, b.module_count);
        assert!((a.score - b.score).abs() < 1e-6, "{} vs {}", a.score, b.score);
    }

    #[test]
    fn layout_is_rotation_equivariant_on_exact_tilings() {
        let templates = builtin_module_templates();
        let params = LayoutParams::default();
        let base = rect_poly("fp", 0.0, 0.0, 3.0, 4.0);
        let rot = rotated_rect("fp", 3.0, 4.0, 37.0, 5.0, 9.0);
        let a = infer_best_layout(&base, 0.0, &templates, &params).unwrap();
        let b = infer_best_layout(&rot, 0.0, &templates, &params).unwrap();
        assert_eq!(a.template_index, b.template_index);
        assert_eq!(a.module_count, b.module_count);
        assert!((a.score - b.score).abs() < 1e-6);
    }

    fn distance_to_polygon(p: Point2, poly: &ArrayPolygon) -> f64 {
        if poly.contains_point(p, 1e-12) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for ring in poly.rings() {
            let n = ring.len();
            for i in 0..n {
                best = best.min(crate::geom::point_segment_distance(
                    p,
                    ring[i],
                    ring[(i + 1) % n],
                ));
            }
        }
        best
    }

    #[test]
    fn accepted_cells_stay_within_dilated_footprint() {
        // An L-shaped footprint exercises partially covered border cells.
        let fp = ArrayPolygon::new(
            "fp",
            "local",
            vec![
                pt(0.0, 0.0),
                pt(4.2, 0.0),
                pt(4.2, 2.1),
                pt(2.0, 2.1),
                pt(2.0, 4.4),
                pt(0.0, 4.4),
            ],
            Vec::new(),
        )
        .unwrap();
        let params = LayoutParams::default();
        let best = infer_best_layout(&fp, 15.0, &builtin_module_templates(), &params).unwrap();
        assert!(best.module_count > 0);
        let cell = plan_cell_dimensions(
            &builtin_module_templates()[best.template_index],
            best.orientation,
            15.0,
            0.0,
        )
        .unwrap();
        let diag = cell.along_mbr_long_m.hypot(cell.along_mbr_short_m);
        let bound = (1.0 - params.coverage_tau) * diag + 1e-9;
        for quad in &best.accepted_cells {
            for p in quad {
                let d = distance_to_polygon(*p, &fp);
                assert!(d <= bound, "corner {p:?} at {d} exceeds {bound}");
            }
        }
    }

    #[test]
    fn capacity_requires_matching_template() {
        let templates = builtin_module_templates();
        let fp = rect_poly("fp", 0.0, 0.0, 3.0, 4.0);
        let best = infer_best_layout(&fp, 0.0, &templates, &LayoutParams::default()).unwrap();
        let cap = layout_capacity(&best, &templates[best.template_index]).unwrap();
        assert!((cap - best.capacity_w).abs() < 1e-9);
        let wrong = &templates[(best.template_index + 1) % templates.len()];
        assert!(layout_capacity(&best, wrong).is_err());
        // Plain multiplications.
        let custom = ModuleTemplate {
            index: best.template_index,
            rated_power_w: 350.0,
            ..templates[best.template_index].clone()
        };
        let mut ten = best.clone();
        ten.module_count = 10;
        assert_eq!(layout_capacity(&ten, &custom).unwrap(), 3500.0);
        let mut six = best.clone();
        six.module_count = 6;
        let custom400 = ModuleTemplate {
            rated_power_w: 400.0,
            ..custom
        };
        assert_eq!(layout_capacity(&six, &custom400).unwrap(), 2400.0);
        let mut zero = best.clone();
        zero.module_count = 0;
        assert_eq!(layout_capacity(&zero, &custom400).unwrap(), 0.0);
    }

    #[test]
    fn template_override_csv_roundtrip() {
        let templates = builtin_module_templates();
        let csv = templates_to_csv(&templates);
        let parsed = parse_template_overrides(&csv, Path::new("templates.csv")).unwrap();
        assert_eq!(parsed, templates);
        let bad_header = "a,b,c\n1,2,3\n";
        assert!(parse_template_overrides(bad_header, Path::new("t.csv")).is_err());
        let bad_row = format!("{TEMPLATE_CSV_HEADER}\n0,X_1_1,-5,100,10,Mono-c-Si,100\n");
        assert!(parse_template_overrides(&bad_row, Path::new("t.csv")).is_err());
        let dup = format!(
            "{TEMPLATE_CSV_HEADER}\n0,X_1_1,100,50,10,Mono-c-Si,100\n0,Y_1_1,100,50,10,Multi-c-Si,100\n"
        );
        assert!(parse_template_overrides(&dup, Path::new("t.csv")).is_err());
    }

    #[test]
    fn downslope_switch_changes_axis_assignment() {
        // Footprint long axis along y; cell extents chosen so the two
        // assignments differ: with downslope along the long axis the
        // foreshortened (smaller) extent is forced onto the long axis.
        let t = ModuleTemplate {
            index: 0,
            label: "Test_0.3_1".into(),
            height_mm: 2000.0,
            width_mm: 1500.0,
            cell_count: 1,
            material: Material::MonoCSi,
            rated_power_w: 300.0,
        };
        let fp = rect_poly("fp", 0.0, 0.0, 3.0, 4.5);
        let tilt = 70.0; // portrait plan pair: (1.5, 2.0·cos70 = 0.684)
        let auto = infer_best_layout(&fp, tilt, std::slice::from_ref(&t), &LayoutParams::default())
            .unwrap();
        let params = LayoutParams {
            downslope_azimuth_deg: Some(0.0), // due north = along the long axis
            ..LayoutParams::default()
        };
        let aligned = infer_best_layout(&fp, tilt, std::slice::from_ref(&t), &params).unwrap();
        // Auto puts 1.5 along long (3 rows × 2 cols); aligned puts 0.684
        // along long. The arrangements must differ.
        assert_ne!(auto.accepted_cells, aligned.accepted_cells);
        assert!(auto.module_count > 0 && aligned.module_count > 0);
    }

    #[test]
    fn phase_sweep_never_reduces_the_score() {
        let fp = rect_poly("fp", 0.0, 0.0, 3.3, 4.4);
        let templates = builtin_module_templates();
        let plain = infer_best_layout(&fp, 10.0, &templates, &LayoutParams::default()).unwrap();
        let swept_params = LayoutParams {
            phase_sweep: 3,
            ..LayoutParams::default()
        };
        let swept = infer_best_layout(&fp, 10.0, &templates, &swept_params).unwrap();
        assert!(
            swept.score >= plain.score - 1e-12,
            "sweep {} < anchored {}",
            swept.score,
            plain.score
        );
    }
}
