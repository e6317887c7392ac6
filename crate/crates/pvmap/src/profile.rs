//! Power profiles: solar geometry, a simple upper-bound DC model, baseline
//! scenarios, and Generation Predictive Band assembly.
//!
//! The built-in model is deliberately simple — an isotropic plane-of-array
//! transposition and a linear temperature-derated DC conversion. It stands in
//! for full simulation tools as the optimistic (non-shading) bound and for
//! the two baseline scenarios; mismatch-aware lower bounds are ingested from
//! CSV rather than modeled.

use crate::error::{Error, Result};
use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

/// Hourly weather series, struct-of-vectors. All vectors share one length and
/// timestamps are strictly increasing UTC instants.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    pub timestamps: Vec<DateTime<Utc>>,
    pub ghi_w_m2: Vec<f64>,
    pub dni_w_m2: Vec<f64>,
    pub dhi_w_m2: Vec<f64>,
    pub temp_c: Vec<Option<f64>>,
    pub wind_m_s: Vec<Option<f64>>,
}

impl WeatherSeries {
    pub fn new(
        timestamps: Vec<DateTime<Utc>>,
        ghi_w_m2: Vec<f64>,
        dni_w_m2: Vec<f64>,
        dhi_w_m2: Vec<f64>,
        temp_c: Vec<Option<f64>>,
        wind_m_s: Vec<Option<f64>>,
    ) -> Result<Self> {
        let n = timestamps.len();
        for (name, len) in [
            ("ghi", ghi_w_m2.len()),
            ("dni", dni_w_m2.len()),
            ("dhi", dhi_w_m2.len()),
            ("temp", temp_c.len()),
            ("wind", wind_m_s.len()),
        ] {
            if len != n {
                return Err(Error::Series(format!(
                    "weather column {name} has length {len}, expected {n}"
                )));
            }
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Series(
                "weather timestamps must be strictly increasing".into(),
            ));
        }
        if ghi_w_m2
            .iter()
            .chain(&dni_w_m2)
            .chain(&dhi_w_m2)
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Series(
                "irradiance values must be finite and nonnegative".into(),
            ));
        }
        Ok(WeatherSeries {
            timestamps,
            ghi_w_m2,
            dni_w_m2,
            dhi_w_m2,
            temp_c,
            wind_m_s,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Energy series in watt-hours per interval (hourly in practice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    pub timestamps: Vec<DateTime<Utc>>,
    pub values_wh: Vec<f64>,
    pub label: String,
}

impl PowerSeries {
    pub fn new(
        timestamps: Vec<DateTime<Utc>>,
        values_wh: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if timestamps.len() != values_wh.len() {
            return Err(Error::Series(format!(
                "power series length mismatch: {} timestamps vs {} values",
                timestamps.len(),
                values_wh.len()
            )));
        }
        if values_wh.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Series(
                "power values must be finite and nonnegative".into(),
            ));
        }
        Ok(PowerSeries {
            timestamps,
            values_wh,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn total_wh(&self) -> f64 {
        self.values_wh.iter().sum()
    }
}

/// Errors unless two series share identical timestamp grids; reports the
/// first misaligned row.
pub fn check_aligned(a: &PowerSeries, b: &PowerSeries) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Series(format!(
            "series '{}' ({}) and '{}' ({}) differ in length",
            a.label,
            a.len(),
            b.label,
            b.len()
        )));
    }
    for (i, (ta, tb)) in a.timestamps.iter().zip(&b.timestamps).enumerate() {
        if ta != tb {
            return Err(Error::Series(format!(
                "series misaligned at row {i}: {ta} vs {tb}"
            )));
        }
    }
    Ok(())
}

/// Optimistic/pessimistic envelope of plausible generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationBand {
    pub upper: PowerSeries,
    pub lower: PowerSeries,
    /// True when any lower value exceeded the upper bound and was clamped.
    pub clamp_applied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarPosition {
    /// Angle from vertical, degrees: 0 overhead, 90 at the horizon.
    pub zenith_deg: f64,
    /// Compass bearing of the sun, degrees (0 = N, 90 = E).
    pub azimuth_deg: f64,
}

/// Solar position from the NOAA/Meeus low-precision formulas (equation of
/// time + hour angle). No atmospheric refraction; accuracy is a few
/// hundredths of a degree for 1950–2050, ample for irradiance transposition.
pub fn solar_position(timestamp: DateTime<Utc>, lat_deg: f64, lon_deg: f64) -> SolarPosition {
    debug_assert!(lat_deg.abs() <= 90.0, "latitude out of range");
    let jd = timestamp.timestamp_millis() as f64 / 86_400_000.0 + 2_440_587.5;
    let t = (jd - 2_451_545.0) / 36_525.0;

    let l0 = (280.46646 + 36000.76983 * t + 0.0003032 * t * t).rem_euclid(360.0);
    let m_deg = (357.52911 + 35999.05029 * t - 0.0001537 * t * t).rem_euclid(360.0);
    let m = m_deg.to_radians();
    let e = 0.016708634 - 0.000042037 * t - 0.0000001267 * t * t;
    let c = (1.914602 - 0.004817 * t - 0.000014 * t * t) * m.sin()
        + (0.019993 - 0.000101 * t) * (2.0 * m).sin()
        + 0.000289 * (3.0 * m).sin();
    let true_long = l0 + c;
    let omega = (125.04 - 1934.136 * t).to_radians();
    let lambda = (true_long - 0.00569 - 0.00478 * omega.sin()).to_radians();
    let eps0 = 23.0 + 26.0 / 60.0 + 21.448 / 3600.0
        - (46.8150 * t + 0.00059 * t * t - 0.001813 * t * t * t) / 3600.0;
    let eps = (eps0 + 0.00256 * omega.cos()).to_radians();
    let dec = (eps.sin() * lambda.sin()).asin();

    // Equation of time, minutes.
    let y = (eps / 2.0).tan().powi(2);
    let l0r = l0.to_radians();
    let eot_rad = y * (2.0 * l0r).sin() - 2.0 * e * m.sin()
        + 4.0 * e * y * m.sin() * (2.0 * l0r).cos()
        - 0.5 * y * y * (4.0 * l0r).sin()
        - 1.25 * e * e * (2.0 * m).sin();
    let eot_min = 4.0 * eot_rad.to_degrees();

    let utc_min = f64::from(timestamp.hour()) * 60.0
        + f64::from(timestamp.minute())
        + f64::from(timestamp.second()) / 60.0
        + f64::from(timestamp.nanosecond()) / 60e9;
    let tst = (utc_min + eot_min + 4.0 * lon_deg).rem_euclid(1440.0);
    let ha = (tst / 4.0 - 180.0).to_radians();

    let lat = lat_deg.to_radians();
    let cos_zen = lat.sin() * dec.sin() + lat.cos() * dec.cos() * ha.cos();
    let zenith_deg = cos_zen.clamp(-1.0, 1.0).acos().to_degrees();
    // Azimuth measured from south (westward positive), shifted to compass.
    let a = ha
        .sin()
        .atan2(ha.cos() * lat.sin() - dec.tan() * lat.cos())
        .to_degrees();
    let azimuth_deg = (a + 180.0).rem_euclid(360.0);
    SolarPosition {
        zenith_deg,
        azimuth_deg,
    }
}

/// Isotropic-sky plane-of-array irradiance, W/m².
///
/// `POA = DNI·max(0, cos AOI) + DHI·(1+cos θ)/2 + GHI·albedo·(1−cos θ)/2`
/// with `cos AOI = cos θ_z cos θ + sin θ_z sin θ cos(az_sun − az_surface)`.
pub fn plane_of_array_irradiance(
    ghi: f64,
    dni: f64,
    dhi: f64,
    tilt_deg: f64,
    azimuth_deg: f64,
    sun: SolarPosition,
    albedo: f64,
) -> f64 {
    let tilt = tilt_deg.to_radians();
    let zen = sun.zenith_deg.to_radians();
    let cos_aoi = zen.cos() * tilt.cos()
        + zen.sin() * tilt.sin() * (sun.azimuth_deg - azimuth_deg).to_radians().cos();
    let beam = dni * cos_aoi.max(0.0);
    let sky = dhi * (1.0 + tilt.cos()) / 2.0;
    let ground = ghi * albedo * (1.0 - tilt.cos()) / 2.0;
    beam + sky + ground
}

/// The orientation/capacity triple the simulator needs from a system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub tilt_deg: f64,
    pub azimuth_deg: f64,
    pub capacity_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Flat system derate covering wiring, soiling, inverter losses.
    pub derate: f64,
    /// Power temperature coefficient per °C (negative).
    pub gamma_per_c: f64,
    /// Cell-over-ambient heating per unit POA, °C·m²/W.
    pub noct_coeff: f64,
    /// Ground reflectance for the transposition model.
    pub albedo: f64,
    /// Ambient temperature assumed when the weather row has none, °C.
    pub missing_temp_c: f64,
    /// Baseline-1 override: fixed south-facing tilt (local latitude minus
    /// roughly 15° for the Netherlands).
    pub baseline1_tilt_deg: f64,
    pub baseline1_azimuth_deg: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            derate: 0.85,
            gamma_per_c: -0.004,
            noct_coeff: 0.025,
            albedo: 0.2,
            missing_temp_c: 20.0,
            baseline1_tilt_deg: 35.0,
            baseline1_azimuth_deg: 180.0,
        }
    }
}

/// One hour of DC energy (Wh) from POA irradiance and ambient temperature:
/// `capacity · (POA/1000) · derate · max(0, 1 + γ·(T_cell − 25))` with
/// `T_cell = T_ambient + POA · noct_coeff`.
pub fn dc_energy_wh(capacity_w: f64, poa_w_m2: f64, temp_c: f64, params: &ModelParams) -> f64 {
    let t_cell = temp_c + poa_w_m2 * params.noct_coeff;
    let temp_factor = (1.0 + params.gamma_per_c * (t_cell - 25.0)).max(0.0);
    capacity_w * (poa_w_m2 / 1000.0) * params.derate * temp_factor
}

/// Hourly upper-bound (non-shading) profile for one system.
pub fn simulate_upper_bound_profile(
    system: &SystemSpec,
    weather: &WeatherSeries,
    site: (f64, f64),
    params: &ModelParams,
) -> PowerSeries {
    let (lat, lon) = site;
    let values: Vec<f64> = weather
        .timestamps
        .iter()
        .enumerate()
        .map(|(i, ts)| {
            let sun = solar_position(*ts, lat, lon);
            let poa = plane_of_array_irradiance(
                weather.ghi_w_m2[i],
                weather.dni_w_m2[i],
                weather.dhi_w_m2[i],
                system.tilt_deg,
                system.azimuth_deg,
                sun,
                params.albedo,
            );
            let temp = weather.temp_c[i].unwrap_or(params.missing_temp_c);
            dc_energy_wh(system.capacity_w, poa, temp, params)
        })
        .collect();
    PowerSeries {
        timestamps: weather.timestamps.clone(),
        values_wh: values,
        label: "upper_bound".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineScenario {
    /// Every system forced due south at the fixed regional tilt.
    Baseline1,
    /// Every system forced flat (tilt 0°).
    Baseline2,
}

impl std::fmt::Display for BaselineScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaselineScenario::Baseline1 => f.write_str("baseline1"),
            BaselineScenario::Baseline2 => f.write_str("baseline2"),
        }
    }
}

impl std::str::FromStr for BaselineScenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "baseline1" | "1" => Ok(BaselineScenario::Baseline1),
            "baseline2" | "2" => Ok(BaselineScenario::Baseline2),
            other => Err(Error::Config(format!("unknown baseline scenario {other:?}"))),
        }
    }
}

/// Community profile under a baseline scenario: orientations are overridden
/// (capacities retained) and per-system outputs are summed in input order.
pub fn baseline_scenario_profile(
    systems: &[SystemSpec],
    weather: &WeatherSeries,
    site: (f64, f64),
    scenario: BaselineScenario,
    params: &ModelParams,
) -> PowerSeries {
    let mut total = vec![0.0f64; weather.len()];
    for sys in systems {
        let overridden = match scenario {
            BaselineScenario::Baseline1 => SystemSpec {
                tilt_deg: params.baseline1_tilt_deg,
                azimuth_deg: params.baseline1_azimuth_deg,
                capacity_w: sys.capacity_w,
            },
            BaselineScenario::Baseline2 => SystemSpec {
                tilt_deg: 0.0,
                azimuth_deg: 180.0,
                capacity_w: sys.capacity_w,
            },
        };
        let profile = simulate_upper_bound_profile(&overridden, weather, site, params);
        for (acc, v) in total.iter_mut().zip(&profile.values_wh) {
            *acc += v;
        }
    }
    PowerSeries {
        timestamps: weather.timestamps.clone(),
        values_wh: total,
        label: scenario.to_string(),
    }
}

/// Pairs the optimistic and pessimistic series into a band. Rows where the
/// lower series exceeds the upper are clamped to the upper bound.
pub fn assemble_gpb(upper: PowerSeries, lower: PowerSeries) -> Result<GenerationBand> {
    check_aligned(&upper, &lower)?;
    let mut lower = lower;
    let mut clamp_applied = false;
    for (lo, up) in lower.values_wh.iter_mut().zip(&upper.values_wh) {
        if *lo > *up {
            *lo = *up;
            clamp_applied = true;
        }
    }
    Ok(GenerationBand {
        upper,
        lower,
        clamp_applied,
    })
}

/// Element-wise sum of aligned series.
pub fn aggregate_profiles(series: &[PowerSeries]) -> Result<PowerSeries> {
    let first = series
        .first()
        .ok_or_else(|| Error::Series("cannot aggregate zero series".into()))?;
    let mut values = vec![0.0f64; first.len()];
    for s in series {
        check_aligned(first, s)?;
        for (acc, v) in values.iter_mut().zip(&s.values_wh) {
            *acc += v;
        }
    }
    Ok(PowerSeries {
        timestamps: first.timestamps.clone(),
        values_wh: values,
        label: "aggregate".into(),
    })
}

/// Constant-derate stand-in for a pessimistic (shaded/mismatched) profile;
/// exists to exercise band machinery in tests and demos, not as a model.
pub fn shaded_profile(series: &PowerSeries, derate: f64, label: impl Into<String>) -> PowerSeries {
    let d = derate.clamp(0.0, 1.0);
    PowerSeries {
        timestamps: series.timestamps.clone(),
        values_wh: series.values_wh.iter().map(|v| v * d).collect(),
        label: label.into(),
    }
}

/// A clear-sky-like synthetic day for demos and tests: a sine-bell of direct
/// irradiance centered on local solar noon, hourly steps.
pub fn synthetic_clear_day(
    date_utc: DateTime<Utc>,
    lat_deg: f64,
    lon_deg: f64,
) -> Result<WeatherSeries> {
    let day_start = date_utc
        .date_naive()
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc();
    let mut timestamps = Vec::with_capacity(24);
    let mut ghi = Vec::with_capacity(24);
    let mut dni = Vec::with_capacity(24);
    let mut dhi = Vec::with_capacity(24);
    for h in 0..24 {
        let ts = day_start + chrono::Duration::hours(h);
        let sun = solar_position(ts, lat_deg, lon_deg);
        let cos_z = sun.zenith_deg.to_radians().cos().max(0.0);
        // Crude clear-sky: beam attenuated by air mass, 10% diffuse share.
        let beam_normal = if cos_z > 0.0 {
            950.0 * 0.7f64.powf((1.0 / cos_z).powf(0.678))
        } else {
            0.0
        };
        let diffuse = 80.0 * cos_z;
        timestamps.push(ts);
        dni.push(beam_normal);
        dhi.push(diffuse);
        ghi.push(beam_normal * cos_z + diffuse);
    }
    let n = timestamps.len();
    WeatherSeries::new(timestamps, ghi, dni, dhi, vec![Some(15.0); n], vec![None; n])
}

/// True when the timestamp's year is shared by all series rows — small
/// helper for report labeling.
pub fn series_year(series: &PowerSeries) -> Option<i32> {
    let mut years = series.timestamps.iter().map(|t| t.year());
    let first = years.next()?;
    years.all(|y| y == first).then_some(first)
}
