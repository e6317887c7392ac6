//! End-to-end orchestration: the enriched PV record, neighborhood
//! aggregation, GeoJSON export, and the staged `run` driver with hash-based
//! stage skipping.
//!
//! A run executes vectorize → orient → layout → capacity against a flat
//! key=value config. Every stage hashes its inputs and effective parameters;
//! a stage whose digest matches the recorded one (and whose output exists)
//! is skipped, so reruns on unchanged inputs are byte-identical and cheap.

use crate::error::{Error, Result};
use crate::geom::{ArrayPolygon, Point2};
pub use crate::io::NeighborhoodRecord;
use crate::io::{self, PvLayerFeature};
use crate::layout::{
    builtin_module_templates, infer_best_layout, parse_template_overrides, templates_to_csv,
    LayoutParams, ModuleLayout, ModuleTemplate,
};
use crate::orientation::{estimate_orientation, Confidence, FitParams, OrientationEstimate, PointSet};
use crate::profile::ModelParams;
use crate::raster::{Connectivity, GeoreferencedMask};
use crate::vectorize::{vectorize_mask, RefineParams};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Region id under which systems outside every boundary are reported.
pub const UNASSIGNED_REGION: &str = "_unassigned";

pub const FOOTPRINTS_FILE: &str = "footprints.geojson";
pub const ORIENTATION_FILE: &str = "orientation.csv";
pub const PV_LAYER_FILE: &str = "pv_layer.geojson";
pub const CAPACITY_FILE: &str = "capacity_by_region.csv";
pub const MANIFEST_FILE: &str = "run_manifest.txt";
const STATE_FILE: &str = "stage_state.json";

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Source files and the parameter digest that produced a record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    /// Role → source path, e.g. "mask" → "scene/mask.pgm".
    pub sources: BTreeMap<String, String>,
    /// Digest of the effective parameter set.
    pub params_digest: String,
}

/// One fully parameterized PV system: footprint, orientation, module layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PVSystemRecord {
    pub id: String,
    pub footprint: ArrayPolygon,
    pub orientation: OrientationEstimate,
    pub layout: ModuleLayout,
    /// Always equals `layout.capacity_w`; stored for direct access.
    pub capacity_w: f64,
    pub provenance: Provenance,
}

impl PVSystemRecord {
    pub fn new(
        footprint: ArrayPolygon,
        orientation: OrientationEstimate,
        layout: ModuleLayout,
        provenance: Provenance,
    ) -> Self {
        PVSystemRecord {
            id: footprint.id.clone(),
            capacity_w: layout.capacity_w,
            footprint,
            orientation,
            layout,
            provenance,
        }
    }
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Per-region capacity sums plus any assignment warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAggregate {
    /// One row per input region in input order (zero-capacity regions
    /// included), then `_unassigned` if any system fell outside all regions.
    pub rows: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

fn aggregate_points(
    items: &[(String, Point2, f64)],
    crs: Option<&str>,
    regions: &[NeighborhoodRecord],
) -> Result<RegionAggregate> {
    let mut seen = std::collections::BTreeSet::new();
    for r in regions {
        if !seen.insert(r.region_id.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate region_id {:?}",
                r.region_id
            )));
        }
        if let Some(crs) = crs {
            if r.boundary.crs_id != crs {
                return Err(Error::CrsMismatch {
                    left: crs.into(),
                    right: r.boundary.crs_id.clone(),
                });
            }
        }
    }
    let mut sums_w = vec![0.0f64; regions.len()];
    let mut unassigned_w = 0.0f64;
    let mut any_unassigned = false;
    let mut warnings = Vec::new();
    for (id, centroid, capacity_w) in items {
        let mut containing: Vec<usize> = regions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.boundary.contains_point(*centroid, 1e-9))
            .map(|(i, _)| i)
            .collect();
        if containing.len() > 1 {
            containing.sort_by(|&a, &b| {
                regions[a]
                    .boundary
                    .area()
                    .total_cmp(&regions[b].boundary.area())
            });
            warnings.push(format!(
                "system {:?} centroid lies in {} overlapping regions; assigned to smaller region {:?}",
                id,
                containing.len(),
                regions[containing[0]].region_id
            ));
        }
        match containing.first() {
            Some(&i) => sums_w[i] += capacity_w,
            None => {
                unassigned_w += capacity_w;
                any_unassigned = true;
            }
        }
    }
    let mut rows: Vec<(String, f64)> = regions
        .iter()
        .zip(&sums_w)
        .map(|(r, w)| (r.region_id.clone(), w / 1000.0))
        .collect();
    if any_unassigned {
        rows.push((UNASSIGNED_REGION.to_string(), unassigned_w / 1000.0));
    }
    Ok(RegionAggregate { rows, warnings })
}

/// Sums system capacities per neighborhood, assigning each system to the
/// region containing its footprint centroid. Systems outside all regions
/// land under [`UNASSIGNED_REGION`]; a centroid in several overlapping
/// regions goes to the smallest one, with a warning.
pub fn aggregate_by_neighborhood(
    systems: &[PVSystemRecord],
    regions: &[NeighborhoodRecord],
) -> Result<RegionAggregate> {
    let crs = systems.first().map(|s| s.footprint.crs_id.as_str());
    for s in systems {
        if Some(s.footprint.crs_id.as_str()) != crs {
            return Err(Error::CrsMismatch {
                left: crs.unwrap_or_default().into(),
                right: s.footprint.crs_id.clone(),
            });
        }
    }
    let items: Vec<(String, Point2, f64)> = systems
        .iter()
        .map(|s| (s.id.clone(), s.footprint.centroid(), s.capacity_w))
        .collect();
    aggregate_points(&items, crs, regions)
}

/// [`aggregate_by_neighborhood`] over a re-imported PV layer.
pub fn aggregate_feature_capacities(
    features: &[PvLayerFeature],
    regions: &[NeighborhoodRecord],
) -> Result<RegionAggregate> {
    let crs = features.first().map(|f| f.footprint.crs_id.as_str());
    let items: Vec<(String, Point2, f64)> = features
        .iter()
        .map(|f| (f.id.clone(), f.footprint.centroid(), f.capacity_wp))
        .collect();
    aggregate_points(&items, crs, regions)
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

fn record_to_feature(
    record: &PVSystemRecord,
    templates: &[ModuleTemplate],
) -> Result<PvLayerFeature> {
    if record.capacity_w != record.layout.capacity_w {
        return Err(Error::InvalidArgument(format!(
            "record {:?}: capacity_w {} disagrees with layout capacity {}",
            record.id, record.capacity_w, record.layout.capacity_w
        )));
    }
    let template = templates
        .iter()
        .find(|t| t.index == record.layout.template_index)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "record {:?}: template index {} not in catalog",
                record.id, record.layout.template_index
            ))
        })?;
    Ok(PvLayerFeature {
        id: record.id.clone(),
        footprint: record.footprint.clone(),
        tilt_deg: record.orientation.tilt_deg,
        azimuth_deg: record.orientation.azimuth_deg,
        orientation_confidence: record.orientation.confidence,
        template_label: template.label.clone(),
        mounting_orientation: record.layout.orientation.to_string(),
        module_count: record.layout.module_count as u64,
        capacity_wp: record.capacity_w,
        matching_score: record.layout.score,
        area_m2: record.footprint.area(),
    })
}

/// Serializes records as the enriched GeoJSON layer, resolving template
/// labels through `templates`. Feature order follows input order; ids must
/// be unique.
pub fn export_pv_layer(
    systems: &[PVSystemRecord],
    templates: &[ModuleTemplate],
    path: &Path,
) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for s in systems {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate id {:?}", s.id)));
        }
    }
    let features: Vec<PvLayerFeature> = systems
        .iter()
        .map(|s| record_to_feature(s, templates))
        .collect::<Result<_>>()?;
    io::write_pv_layer(&features, path)
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

/// Effective configuration of a pipeline run. Parsed from the flat
/// key=value file; every field has a default except the mask/worldfile/out
/// paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mask: PathBuf,
    pub worldfile: PathBuf,
    pub pointcloud: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub out: PathBuf,
    pub crs_id: String,
    /// Gray threshold for mask foreground.
    pub mask_threshold: u8,
    pub seed: u64,
    pub margin_pct: f64,
    /// Systems above this capacity are excluded from aggregation.
    pub max_system_kwp: Option<f64>,
    /// Align the foreshortened module extent with each footprint's measured
    /// downslope bearing instead of the MBR short axis.
    pub align_downslope: bool,
    pub refine: RefineParams,
    pub fit: FitParams,
    pub layout: LayoutParams,
    pub model: ModelParams,
    pub eps_power_wh: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mask: PathBuf::new(),
            worldfile: PathBuf::new(),
            pointcloud: None,
            regions: None,
            templates: None,
            out: PathBuf::new(),
            crs_id: "local".into(),
            mask_threshold: 128,
            seed: 0,
            margin_pct: 25.0,
            max_system_kwp: None,
            align_downslope: false,
            refine: RefineParams::default(),
            fit: FitParams::default(),
            layout: LayoutParams::default(),
            model: ModelParams::default(),
            eps_power_wh: crate::metrics::DEFAULT_EPS_POWER_WH,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for key {key:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "bad boolean {value:?} for key {key:?}"
        ))),
    }
}

impl PipelineConfig {
    /// Builds a config from parsed key=value pairs. Relative paths resolve
    /// against `base_dir` (the config file's directory). Unknown keys are
    /// rejected.
    pub fn from_map(map: &BTreeMap<String, String>, base_dir: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let resolve = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        for (key, value) in map {
            match key.as_str() {
                "mask" => cfg.mask = resolve(value),
                "worldfile" => cfg.worldfile = resolve(value),
                "pointcloud" => cfg.pointcloud = Some(resolve(value)),
                "regions" => cfg.regions = Some(resolve(value)),
                "templates" => cfg.templates = Some(resolve(value)),
                "out" => cfg.out = resolve(value),
                "crs_id" => cfg.crs_id = value.clone(),
                "mask_threshold" => cfg.mask_threshold = parse_value(key, value)?,
                "seed" => cfg.seed = parse_value(key, value)?,
                "margin_pct" => cfg.margin_pct = parse_value(key, value)?,
                "max_system_kwp" => cfg.max_system_kwp = Some(parse_value(key, value)?),
                "align_downslope" => cfg.align_downslope = parse_bool(key, value)?,
                "connectivity" => {
                    cfg.refine.connectivity = match value.as_str() {
                        "4" => Connectivity::Four,
                        "8" => Connectivity::Eight,
                        _ => {
                            return Err(Error::Config(format!(
                                "connectivity must be 4 or 8, got {value:?}"
                            )))
                        }
                    }
                }
                "max_depth" => cfg.refine.max_depth = parse_value(key, value)?,
                "stop_ratio" => cfg.refine.stop_ratio = parse_value(key, value)?,
                "min_mismatch_px" => cfg.refine.min_mismatch_px = parse_value(key, value)?,
                "min_component_px" => cfg.refine.min_component_px = parse_value(key, value)?,
                "min_area_m2" => cfg.refine.min_area_m2 = parse_value(key, value)?,
                "min_extent_m" => cfg.refine.min_extent_m = parse_value(key, value)?,
                "min_points" => cfg.fit.min_points = parse_value(key, value)?,
                "iterations" => cfg.fit.iterations = parse_value(key, value)?,
                "inlier_dist_m" => cfg.fit.inlier_dist_m = parse_value(key, value)?,
                "flat_threshold_deg" => cfg.fit.flat_threshold_deg = parse_value(key, value)?,
                "coverage_tau" => cfg.layout.coverage_tau = parse_value(key, value)?,
                "gap_m" => cfg.layout.gap_m = parse_value(key, value)?,
                "hd_step_m" => cfg.layout.hd_step_m = parse_value(key, value)?,
                "normalize_hd" => cfg.layout.normalize_hd = parse_bool(key, value)?,
                "phase_sweep" => cfg.layout.phase_sweep = parse_value(key, value)?,
                "derate" => cfg.model.derate = parse_value(key, value)?,
                "gamma_per_c" => cfg.model.gamma_per_c = parse_value(key, value)?,
                "noct_coeff" => cfg.model.noct_coeff = parse_value(key, value)?,
                "albedo" => cfg.model.albedo = parse_value(key, value)?,
                "missing_temp_c" => cfg.model.missing_temp_c = parse_value(key, value)?,
                "baseline1_tilt_deg" => cfg.model.baseline1_tilt_deg = parse_value(key, value)?,
                "baseline1_azimuth_deg" => {
                    cfg.model.baseline1_azimuth_deg = parse_value(key, value)?
                }
                "eps_power_wh" => cfg.eps_power_wh = parse_value(key, value)?,
                _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
            }
        }
        cfg.fit.seed = cfg.seed;
        Ok(cfg)
    }

    /// Checks that the inputs a full `run` needs are present. Subcommands
    /// operating on intermediate files accept partial configs.
    fn require_run_inputs(&self) -> Result<()> {
        for (name, path) in [("mask", &self.mask), ("worldfile", &self.worldfile), ("out", &self.out)]
        {
            if path.as_os_str().is_empty() {
                return Err(Error::Config(format!("missing required key {name:?}")));
            }
        }
        Ok(())
    }

    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_text(path)?;
        let map = io::parse_config_text(&text, path)?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty());
        Self::from_map(&map, base.unwrap_or(Path::new(".")))
    }

    /// Every tunable with its effective value, sorted by name. This is both
    /// the manifest parameter section and the parameter digest input, so the
    /// manifest can never silently omit a knob that affects outputs.
    pub fn manifest_params(&self) -> Vec<(String, String)> {
        let opt_f64 = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "none".into());
        let mut rows: Vec<(String, String)> = vec![
            ("align_downslope", self.align_downslope.to_string()),
            ("albedo", self.model.albedo.to_string()),
            (
                "baseline1_azimuth_deg",
                self.model.baseline1_azimuth_deg.to_string(),
            ),
            (
                "baseline1_tilt_deg",
                self.model.baseline1_tilt_deg.to_string(),
            ),
            (
                "connectivity",
                match self.refine.connectivity {
                    Connectivity::Four => "4".into(),
                    Connectivity::Eight => "8".into(),
                },
            ),
            ("coverage_tau", self.layout.coverage_tau.to_string()),
            ("crs_id", self.crs_id.clone()),
            ("derate", self.model.derate.to_string()),
            ("eps_power_wh", self.eps_power_wh.to_string()),
            ("flat_threshold_deg", self.fit.flat_threshold_deg.to_string()),
            ("gamma_per_c", self.model.gamma_per_c.to_string()),
            ("gap_m", self.layout.gap_m.to_string()),
            ("hd_step_m", self.layout.hd_step_m.to_string()),
            ("inlier_dist_m", self.fit.inlier_dist_m.to_string()),
            ("iterations", self.fit.iterations.to_string()),
            ("margin_pct", self.margin_pct.to_string()),
            ("mask_threshold", self.mask_threshold.to_string()),
            ("max_depth", self.refine.max_depth.to_string()),
            ("max_system_kwp", opt_f64(self.max_system_kwp)),
            ("min_area_m2", self.refine.min_area_m2.to_string()),
            ("min_component_px", self.refine.min_component_px.to_string()),
            ("min_extent_m", self.refine.min_extent_m.to_string()),
            ("min_mismatch_px", self.refine.min_mismatch_px.to_string()),
            ("min_points", self.fit.min_points.to_string()),
            ("missing_temp_c", self.model.missing_temp_c.to_string()),
            ("noct_coeff", self.model.noct_coeff.to_string()),
            ("normalize_hd", self.layout.normalize_hd.to_string()),
            ("phase_sweep", self.layout.phase_sweep.to_string()),
            ("seed", self.seed.to_string()),
            ("stop_ratio", self.refine.stop_ratio.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        rows.sort();
        rows
    }
}

// ---------------------------------------------------------------------------
// Run driver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub name: &'static str,
    pub skipped: bool,
}

/// What a `run` did: per-stage outcomes, assignment warnings, and the files
/// it produced (or found up to date).
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub stages: Vec<StageOutcome>,
    pub warnings: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

fn hex_digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    format!("{:x}", h.finalize())
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_digest(&[&bytes]))
}

fn stage_err(stage: &str, e: Error) -> Error {
    match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage {
            stage: stage.to_string(),
            msg: e.to_string(),
        },
    }
}

struct Runner {
    cfg: PipelineConfig,
    params_digest: String,
    state: BTreeMap<String, String>,
    state_path: PathBuf,
    summary: RunSummary,
}

impl Runner {
    fn load_state(path: &Path) -> BTreeMap<String, String> {
        // A missing or corrupt cache only disables skipping.
        std::fs::read_to_string(path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default()
    }

    fn save_state(&self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.state).expect("string map serializes");
        text.push('\n');
        io::write_atomic(&self.state_path, text.as_bytes())
    }

    /// Runs `body` unless the stage digest matches the recorded one and the
    /// output already exists.
    fn stage(
        &mut self,
        name: &'static str,
        input_digests: &[String],
        output: &Path,
        body: impl FnOnce(&PipelineConfig) -> Result<Vec<String>>,
    ) -> Result<()> {
        let mut parts: Vec<&[u8]> = vec![
            env!("CARGO_PKG_VERSION").as_bytes(),
            name.as_bytes(),
            self.params_digest.as_bytes(),
        ];
        parts.extend(input_digests.iter().map(|d| d.as_bytes()));
        let digest = hex_digest(&parts);
        let up_to_date = self.state.get(name) == Some(&digest) && output.exists();
        if !up_to_date {
            let warnings = body(&self.cfg).map_err(|e| stage_err(name, e))?;
            self.summary.warnings.extend(warnings);
            self.state.insert(name.to_string(), digest);
            self.save_state().map_err(|e| stage_err(name, e))?;
        }
        self.summary.stages.push(StageOutcome {
            name,
            skipped: up_to_date,
        });
        self.summary.outputs.push(output.to_path_buf());
        Ok(())
    }
}

fn load_templates(cfg: &PipelineConfig) -> Result<Vec<ModuleTemplate>> {
    match &cfg.templates {
        None => Ok(builtin_module_templates()),
        Some(path) => parse_template_overrides(&io::read_text(path)?, path),
    }
}

/// Executes the full pipeline described by the config file: vectorize →
/// orient → layout → capacity, then writes the run manifest. Stages whose
/// inputs and parameters are unchanged since the recorded run are skipped.
pub fn run_pipeline(config_path: &Path) -> Result<RunSummary> {
    let cfg = PipelineConfig::load(config_path)?;
    cfg.require_run_inputs()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;

    let params_rows = cfg.manifest_params();
    let params_text: String = params_rows
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect();
    let templates = load_templates(&cfg).map_err(|e| stage_err("layout", e))?;
    let templates_csv = templates_to_csv(&templates);
    let params_digest = hex_digest(&[params_text.as_bytes(), templates_csv.as_bytes()]);

    let footprints_path = cfg.out.join(FOOTPRINTS_FILE);
    let orientation_path = cfg.out.join(ORIENTATION_FILE);
    let layer_path = cfg.out.join(PV_LAYER_FILE);
    let capacity_path = cfg.out.join(CAPACITY_FILE);
    let state_path = cfg.out.join(STATE_FILE);

    let mut runner = Runner {
        state: Runner::load_state(&state_path),
        state_path,
        params_digest,
        summary: RunSummary {
            stages: Vec::new(),
            warnings: Vec::new(),
            outputs: Vec::new(),
        },
        cfg,
    };

    // -- vectorize ----------------------------------------------------------
    let mask_digest = file_digest(&runner.cfg.mask).map_err(|e| stage_err("vectorize", e))?;
    let world_digest = file_digest(&runner.cfg.worldfile).map_err(|e| stage_err("vectorize", e))?;
    let fp_out = footprints_path.clone();
    runner.stage(
        "vectorize",
        &[mask_digest, world_digest],
        &footprints_path,
        move |cfg| {
            let mask =
                GeoreferencedMask::load(&cfg.mask, &cfg.worldfile, cfg.mask_threshold, &cfg.crs_id)?;
            let footprints = vectorize_mask(&mask, &cfg.refine)?;
            io::write_footprints_geojson(&footprints, &fp_out)?;
            Ok(Vec::new())
        },
    )?;

    // -- orient --------------------------------------------------------------
    let fp_digest = file_digest(&footprints_path).map_err(|e| stage_err("orient", e))?;
    let cloud_digest = match &runner.cfg.pointcloud {
        Some(p) => file_digest(p).map_err(|e| stage_err("orient", e))?,
        None => "no-pointcloud".to_string(),
    };
    let fp_in = footprints_path.clone();
    let ori_out = orientation_path.clone();
    runner.stage(
        "orient",
        &[fp_digest.clone(), cloud_digest],
        &orientation_path,
        move |cfg| {
            let footprints = io::read_footprints_geojson(&fp_in)?;
            let cloud = match &cfg.pointcloud {
                Some(p) => Some(PointSet::new(io::read_pointcloud_csv(p)?, &cfg.crs_id)?),
                None => None,
            };
            let rows: Vec<(String, OrientationEstimate)> = footprints
                .iter()
                .map(|fp| {
                    let est = match &cloud {
                        Some(c) => estimate_orientation(c, fp, &cfg.fit)?,
                        None => OrientationEstimate::neutral(Confidence::Fallback),
                    };
                    Ok((fp.id.clone(), est))
                })
                .collect::<Result<_>>()?;
            io::write_orientation_csv(&rows, &ori_out)?;
            Ok(Vec::new())
        },
    )?;

    // -- layout ---------------------------------------------------------------
    let ori_digest = file_digest(&orientation_path).map_err(|e| stage_err("layout", e))?;
    let fp_in = footprints_path.clone();
    let ori_in = orientation_path.clone();
    let layer_out = layer_path.clone();
    let catalog = templates.clone();
    let params_digest_for_prov = runner.params_digest.clone();
    runner.stage(
        "layout",
        &[fp_digest, ori_digest],
        &layer_path,
        move |cfg| {
            let footprints = io::read_footprints_geojson(&fp_in)?;
            let orientations: BTreeMap<String, OrientationEstimate> =
                io::read_orientation_csv(&ori_in)?.into_iter().collect();
            let mut provenance = Provenance {
                sources: BTreeMap::new(),
                params_digest: params_digest_for_prov,
            };
            provenance
                .sources
                .insert("mask".into(), cfg.mask.display().to_string());
            if let Some(p) = &cfg.pointcloud {
                provenance
                    .sources
                    .insert("pointcloud".into(), p.display().to_string());
            }
            let mut records = Vec::with_capacity(footprints.len());
            for fp in footprints {
                let est = orientations.get(&fp.id).copied().ok_or_else(|| {
                    Error::InvalidArgument(format!("no orientation row for footprint {:?}", fp.id))
                })?;
                let mut layout_params = cfg.layout;
                if cfg.align_downslope && est.confidence == Confidence::Ok {
                    layout_params.downslope_azimuth_deg = Some(est.azimuth_deg);
                }
                let layout = infer_best_layout(&fp, est.tilt_deg, &catalog, &layout_params)?;
                records.push(PVSystemRecord::new(fp, est, layout, provenance.clone()));
            }
            export_pv_layer(&records, &catalog, &layer_out)?;
            Ok(Vec::new())
        },
    )?;

    // -- capacity -------------------------------------------------------------
    let layer_digest = file_digest(&layer_path).map_err(|e| stage_err("capacity", e))?;
    let regions_digest = match &runner.cfg.regions {
        Some(p) => file_digest(p).map_err(|e| stage_err("capacity", e))?,
        None => "no-regions".to_string(),
    };
    let layer_in = layer_path.clone();
    let cap_out = capacity_path.clone();
    runner.stage(
        "capacity",
        &[layer_digest, regions_digest],
        &capacity_path,
        move |cfg| {
            let features = io::read_pv_layer(&layer_in)?;
            let kept: Vec<PvLayerFeature> = match cfg.max_system_kwp {
                Some(max) => features
                    .into_iter()
                    .filter(|f| f.capacity_wp / 1000.0 <= max)
                    .collect(),
                None => features,
            };
            let regions = match &cfg.regions {
                Some(p) => io::read_regions_geojson(p)?,
                None => Vec::new(),
            };
            let agg = aggregate_feature_capacities(&kept, &regions)?;
            io::write_capacity_csv(&agg.rows, "region_id,predicted_kwp", &cap_out)?;
            Ok(agg.warnings)
        },
    )?;

    // -- manifest ---------------------------------------------------------------
    // Rewritten every run; contains no clocks, so reruns are byte-identical.
    let manifest_path = runner.cfg.out.join(MANIFEST_FILE);
    let mut manifest = format!(
        "pvmap run manifest\nversion = {}\n\n[parameters]\n{}",
        env!("CARGO_PKG_VERSION"),
        params_text
    );
    manifest.push_str("\n[templates]\n");
    manifest.push_str(&format!(
        "source = {}\n",
        runner
            .cfg
            .templates
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "builtin".into())
    ));
    manifest.push_str(&format!(
        "sha256 = {}\n",
        hex_digest(&[templates_csv.as_bytes()])
    ));
    manifest.push_str("\n[inputs]\n");
    let mut input_line = |name: &str, path: Option<&PathBuf>| -> Result<()> {
        match path {
            Some(p) => {
                let d = file_digest(p)?;
                manifest.push_str(&format!("{name} = {} (sha256 {d})\n", p.display()));
            }
            None => manifest.push_str(&format!("{name} = none\n")),
        }
        Ok(())
    };
    input_line("mask", Some(&runner.cfg.mask))?;
    input_line("worldfile", Some(&runner.cfg.worldfile))?;
    input_line("pointcloud", runner.cfg.pointcloud.as_ref())?;
    input_line("regions", runner.cfg.regions.as_ref())?;
    manifest.push_str("\n[stages]\n");
    for s in &runner.summary.stages {
        manifest.push_str(&format!(
            "{} = {}\n",
            s.name,
            runner.state.get(s.name).map(String::as_str).unwrap_or("-")
        ));
    }
    manifest.push_str("\n[outputs]\n");
    for out in [FOOTPRINTS_FILE, ORIENTATION_FILE, PV_LAYER_FILE, CAPACITY_FILE] {
        manifest.push_str(out);
        manifest.push('\n');
    }
    io::write_atomic(&manifest_path, manifest.as_bytes())?;
    runner.summary.outputs.push(manifest_path);
    Ok(runner.summary)
}
