//! `pvmap` — rooftop PV parameterization pipeline over GIS files.
//!
//! Subcommands mirror the pipeline stages (vectorize, orient, layout,
//! capacity), plus validation/profile/band-metric reports and `run` for the
//! whole chain driven by a config file.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pvmap::io;
use pvmap::layout::{builtin_module_templates, infer_best_layout, parse_template_overrides};
use pvmap::metrics::{band_width_metrics, baseline_error_metrics, capacity_validation_report, metrics_csv};
use pvmap::orientation::{estimate_orientation, Confidence, OrientationEstimate, PointSet};
use pvmap::pipeline::{
    aggregate_feature_capacities, run_pipeline, PipelineConfig, CAPACITY_FILE, FOOTPRINTS_FILE,
    MANIFEST_FILE, ORIENTATION_FILE, PV_LAYER_FILE,
};
use pvmap::profile::{
    aggregate_profiles, baseline_scenario_profile, simulate_upper_bound_profile, BaselineScenario,
    SystemSpec,
};
use pvmap::raster::GeoreferencedMask;
use pvmap::vectorize::vectorize_mask;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "pvmap", version, about = "Rooftop PV mapping: masks to module-level system records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract georeferenced array footprints from a binary mask.
    Vectorize(VectorizeArgs),
    /// Estimate per-footprint tilt and azimuth from a point cloud.
    Orient(OrientArgs),
    /// Infer module layouts and capacities; writes the enriched PV layer.
    Layout(LayoutArgs),
    /// Aggregate system capacities over neighborhood boundaries.
    Capacity(CapacityArgs),
    /// Compare predicted per-region capacities against recorded values.
    Validate(ValidateArgs),
    /// Simulate an hourly generation profile for a PV layer.
    Profile(ProfileArgs),
    /// Band-width and baseline-error metrics over power series.
    BandMetrics(BandMetricsArgs),
    /// Run the full pipeline from a config file.
    Run(RunArgs),
}

/// Shared base-config flag: explicit flags override file values.
#[derive(Args)]
struct ConfigArg {
    /// Flat key=value config supplying defaults for unspecified flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig> {
        Ok(match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        })
    }
}

#[derive(Args)]
struct VectorizeArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Binary mask image (PGM or PNG).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// ESRI world file georeferencing the mask.
    #[arg(long)]
    worldfile: Option<PathBuf>,
    /// Output footprint GeoJSON.
    #[arg(long)]
    out: PathBuf,
    /// CRS tag recorded on output geometries.
    #[arg(long)]
    crs_id: Option<String>,
    /// Gray threshold for mask foreground.
    #[arg(long)]
    mask_threshold: Option<u8>,
}

#[derive(Args)]
struct OrientArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Footprint GeoJSON from `vectorize`.
    #[arg(long)]
    footprints: PathBuf,
    /// Point cloud CSV (x,y,z). Omitted: neutral fallback estimates.
    #[arg(long)]
    pointcloud: Option<PathBuf>,
    /// Output orientation CSV.
    #[arg(long)]
    out: PathBuf,
    /// RANSAC sampling seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct LayoutArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Footprint GeoJSON from `vectorize`.
    #[arg(long)]
    footprints: PathBuf,
    /// Orientation CSV from `orient`.
    #[arg(long)]
    orientation: PathBuf,
    /// Output enriched PV-layer GeoJSON.
    #[arg(long)]
    out: PathBuf,
    /// Module template CSV replacing the built-in catalog.
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Args)]
struct CapacityArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Enriched PV-layer GeoJSON from `layout`.
    #[arg(long)]
    layer: PathBuf,
    /// Neighborhood boundaries GeoJSON.
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Output per-region capacity CSV.
    #[arg(long)]
    out: PathBuf,
    /// Exclude systems above this capacity from aggregation.
    #[arg(long)]
    max_system_kwp: Option<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Predicted capacities CSV (region_id,predicted_kwp).
    #[arg(long)]
    predicted: PathBuf,
    /// Recorded capacities CSV (region_id,recorded_kwp).
    #[arg(long)]
    recorded: PathBuf,
    /// Output directory for validation.txt and validation.csv.
    #[arg(long)]
    out: PathBuf,
    /// Relative margin for the within-band fraction, percent.
    #[arg(long, default_value_t = 25.0)]
    margin_pct: f64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ScenarioArg {
    /// Configuration-aware optimistic profile.
    UpperBound,
    /// All systems forced due south at the fixed regional tilt.
    Baseline1,
    /// All systems forced flat.
    Baseline2,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Enriched PV-layer GeoJSON from `layout`.
    #[arg(long)]
    layer: PathBuf,
    /// Hourly weather CSV (timestamp,ghi,dni,dhi,temp,wind).
    #[arg(long)]
    weather: PathBuf,
    /// Site latitude, degrees north.
    #[arg(long)]
    lat: f64,
    /// Site longitude, degrees east.
    #[arg(long)]
    lon: f64,
    /// Which community profile to simulate.
    #[arg(long, value_enum, default_value_t = ScenarioArg::UpperBound)]
    scenario: ScenarioArg,
    /// Output power CSV (timestamp,energy_wh).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BandMetricsArgs {
    /// Optimistic (upper-bound) power CSV.
    #[arg(long)]
    upper: PathBuf,
    /// Pessimistic (lower-bound) power CSV.
    #[arg(long)]
    lower: PathBuf,
    /// Baseline-1 power CSV to score against the band.
    #[arg(long)]
    baseline1: Option<PathBuf>,
    /// Baseline-2 power CSV to score against the band.
    #[arg(long)]
    baseline2: Option<PathBuf>,
    /// Output directory for band_metrics.txt and band_metrics.csv.
    #[arg(long)]
    out: PathBuf,
    /// Hourly energy below this is excluded from percentage denominators.
    #[arg(long, default_value_t = 1.0)]
    eps_power_wh: f64,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config file.
    #[arg(long)]
    config: PathBuf,
}

fn require_path(flag: Option<PathBuf>, cfg_value: &Path, name: &str) -> Result<PathBuf> {
    flag.or_else(|| {
        (!cfg_value.as_os_str().is_empty()).then(|| cfg_value.to_path_buf())
    })
    .with_context(|| format!("--{name} required (flag or config key)"))
}

fn cmd_vectorize(args: VectorizeArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    if let Some(v) = args.crs_id {
        cfg.crs_id = v;
    }
    if let Some(v) = args.mask_threshold {
        cfg.mask_threshold = v;
    }
    let mask_path = require_path(args.mask, &cfg.mask, "mask")?;
    let world_path = require_path(args.worldfile, &cfg.worldfile, "worldfile")?;
    let mask = GeoreferencedMask::load(&mask_path, &world_path, cfg.mask_threshold, &cfg.crs_id)?;
    let footprints = vectorize_mask(&mask, &cfg.refine)?;
    io::write_footprints_geojson(&footprints, &args.out)?;
    println!("{} footprints -> {}", footprints.len(), args.out.display());
    Ok(())
}

fn cmd_orient(args: OrientArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    if let Some(v) = args.seed {
        cfg.seed = v;
        cfg.fit.seed = v;
    }
    let footprints = io::read_footprints_geojson(&args.footprints)?;
    let cloud = match args.pointcloud.as_ref().or(cfg.pointcloud.as_ref()) {
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
        .collect::<pvmap::Result<_>>()?;
    io::write_orientation_csv(&rows, &args.out)?;
    println!("{} orientations -> {}", rows.len(), args.out.display());
    Ok(())
}

fn cmd_layout(args: LayoutArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let templates = match args.templates.as_ref().or(cfg.templates.as_ref()) {
        Some(p) => parse_template_overrides(&io::read_text(p)?, p)?,
        None => builtin_module_templates(),
    };
    let footprints = io::read_footprints_geojson(&args.footprints)?;
    let orientations: BTreeMap<String, OrientationEstimate> =
        io::read_orientation_csv(&args.orientation)?.into_iter().collect();
    let mut features = Vec::with_capacity(footprints.len());
    for fp in footprints {
        let est = orientations
            .get(&fp.id)
            .copied()
            .with_context(|| format!("no orientation row for footprint {:?}", fp.id))?;
        let mut params = cfg.layout;
        if cfg.align_downslope && est.confidence == Confidence::Ok {
            params.downslope_azimuth_deg = Some(est.azimuth_deg);
        }
        let layout = infer_best_layout(&fp, est.tilt_deg, &templates, &params)?;
        let template = templates
            .iter()
            .find(|t| t.index == layout.template_index)
            .context("layout references unknown template")?;
        features.push(io::PvLayerFeature {
            id: fp.id.clone(),
            tilt_deg: est.tilt_deg,
            azimuth_deg: est.azimuth_deg,
            orientation_confidence: est.confidence,
            template_label: template.label.clone(),
            mounting_orientation: layout.orientation.to_string(),
            module_count: layout.module_count as u64,
            capacity_wp: layout.capacity_w,
            matching_score: layout.score,
            area_m2: fp.area(),
            footprint: fp,
        });
    }
    io::write_pv_layer(&features, &args.out)?;
    println!("{} systems -> {}", features.len(), args.out.display());
    Ok(())
}

fn cmd_capacity(args: CapacityArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let features = io::read_pv_layer(&args.layer)?;
    let max = args.max_system_kwp.or(cfg.max_system_kwp);
    let kept: Vec<_> = match max {
        Some(m) => features
            .into_iter()
            .filter(|f| f.capacity_wp / 1000.0 <= m)
            .collect(),
        None => features,
    };
    let regions = match args.regions.as_ref().or(cfg.regions.as_ref()) {
        Some(p) => io::read_regions_geojson(p)?,
        None => Vec::new(),
    };
    let agg = aggregate_feature_capacities(&kept, &regions)?;
    for w in &agg.warnings {
        eprintln!("warning: {w}");
    }
    io::write_capacity_csv(&agg.rows, "region_id,predicted_kwp", &args.out)?;
    println!("{} regions -> {}", agg.rows.len(), args.out.display());
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let predicted = io::read_region_csv(&args.predicted, "predicted_kwp")?;
    let recorded = io::read_recorded_csv(&args.recorded)?;
    let report = capacity_validation_report(&predicted, &recorded, args.margin_pct)?;
    std::fs::create_dir_all(&args.out)?;
    io::write_atomic(&args.out.join("validation.txt"), report.to_text().as_bytes())?;
    io::write_atomic(&args.out.join("validation.csv"), report.to_csv().as_bytes())?;
    print!("{}", report.to_text());
    Ok(())
}

fn cmd_profile(args: ProfileArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let layer = io::read_pv_layer(&args.layer)?;
    let weather = io::read_weather_csv(&args.weather)?;
    let systems: Vec<SystemSpec> = layer
        .iter()
        .map(|f| SystemSpec {
            tilt_deg: f.tilt_deg,
            azimuth_deg: f.azimuth_deg,
            capacity_w: f.capacity_wp,
        })
        .collect();
    anyhow::ensure!(!systems.is_empty(), "PV layer contains no systems");
    let site = (args.lat, args.lon);
    let series = match args.scenario {
        ScenarioArg::UpperBound => {
            let per_system: Vec<_> = systems
                .iter()
                .map(|s| simulate_upper_bound_profile(s, &weather, site, &cfg.model))
                .collect();
            aggregate_profiles(&per_system)?
        }
        ScenarioArg::Baseline1 => {
            baseline_scenario_profile(&systems, &weather, site, BaselineScenario::Baseline1, &cfg.model)
        }
        ScenarioArg::Baseline2 => {
            baseline_scenario_profile(&systems, &weather, site, BaselineScenario::Baseline2, &cfg.model)
        }
    };
    io::write_power_csv(&series, &args.out)?;
    let total_kwh: f64 = series.values_wh.iter().sum::<f64>() / 1000.0;
    println!(
        "{} hours, {:.1} kWh total -> {}",
        series.len(),
        total_kwh,
        args.out.display()
    );
    Ok(())
}

fn cmd_band_metrics(args: BandMetricsArgs) -> Result<()> {
    let upper = io::read_power_csv(&args.upper, "upper")?;
    let lower = io::read_power_csv(&args.lower, "lower")?;
    let band = band_width_metrics(&upper, &lower, args.eps_power_wh)?;
    let mut text = band.to_text();
    let mut rows = band.csv_rows();
    for (path, prefix) in [(&args.baseline1, "baseline1"), (&args.baseline2, "baseline2")] {
        if let Some(p) = path {
            let series = io::read_power_csv(p, prefix)?;
            let m = baseline_error_metrics(&series, &upper, &lower, args.eps_power_wh)?;
            text.push_str(&m.to_text(prefix));
            rows.extend(m.csv_rows(&format!("{prefix}.")));
        }
    }
    std::fs::create_dir_all(&args.out)?;
    io::write_atomic(&args.out.join("band_metrics.txt"), text.as_bytes())?;
    io::write_atomic(&args.out.join("band_metrics.csv"), metrics_csv(&rows).as_bytes())?;
    print!("{text}");
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let summary = run_pipeline(&args.config)?;
    for s in &summary.stages {
        println!(
            "stage {:<10} {}",
            s.name,
            if s.skipped { "skipped (up to date)" } else { "done" }
        );
    }
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    for name in [FOOTPRINTS_FILE, ORIENTATION_FILE, PV_LAYER_FILE, CAPACITY_FILE, MANIFEST_FILE] {
        println!("output {name}");
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Vectorize(a) => cmd_vectorize(a),
        Command::Orient(a) => cmd_orient(a),
        Command::Layout(a) => cmd_layout(a),
        Command::Capacity(a) => cmd_capacity(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Profile(a) => cmd_profile(a),
        Command::BandMetrics(a) => cmd_band_metrics(a),
        Command::Run(a) => cmd_run(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
