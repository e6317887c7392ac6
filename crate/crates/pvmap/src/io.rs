//! File formats: the enriched PV GeoJSON layer, region boundaries, the CSV
//! family (point clouds, weather, power series, recorded capacities,
//! orientation tables), flat key=value configs, and atomic file writes.
//!
//! All CSVs are comma-separated UTF-8 with a required header row and `.` as
//! the decimal separator. GeoJSON numbers are rounded to at most six
//! fractional digits on export, so a read-back agrees within 1e-6.

use crate::error::{Error, Result};
use crate::geom::{ArrayPolygon, Point2};
use crate::orientation::{Confidence, OrientationEstimate};
use crate::profile::{PowerSeries, WeatherSeries};
use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

// ---------------------------------------------------------------------------
// Primitive file helpers
// ---------------------------------------------------------------------------

/// Whole-file atomic write: the content lands under a temporary name in the
/// target directory and is renamed over the destination.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| Error::io(path, e))?;
    tmp.write_all(content).map_err(|e| Error::io(path, e))?;
    #[cfg(unix)]
    {
        // Temp files default to 0600; outputs should get ordinary perms.
        use std::os::unix::fs::PermissionsExt;
        let _ = tmp
            .as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644));
    }
    tmp.persist(path)
        .map_err(|e| Error::io(path, e.error))
        .map(|_| ())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Rounds to six fractional digits (the export precision for GeoJSON).
pub fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn parse_f64(field: &str, path: &Path, line: usize, name: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("bad {name} value {:?}", field.trim())))
}

fn parse_timestamp(field: &str, path: &Path, line: usize) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(field.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| {
            Error::parse(
                path,
                line,
                format!("bad timestamp {:?} (expected RFC 3339)", field.trim()),
            )
        })
}

fn timestamp_str(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Splits CSV text into header fields and data rows, rejecting files without
/// the expected header prefix.
fn csv_rows<'a>(
    text: &'a str,
    path: &Path,
    required: &[&str],
) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let have: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if have.len() < required.len() || have[..required.len()] != *required {
        return Err(Error::parse(
            path,
            1,
            format!("expected header starting with {:?}", required.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        rows.push((i + 1, line.split(',').map(str::trim).collect()));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// GeoJSON
// ---------------------------------------------------------------------------

/// One exported PV system feature: footprint geometry plus the fixed
/// property set of the enriched layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PvLayerFeature {
    pub id: String,
    pub footprint: ArrayPolygon,
    pub tilt_deg: f64,
    pub azimuth_deg: f64,
    pub orientation_confidence: Confidence,
    pub template_label: String,
    pub mounting_orientation: String,
    pub module_count: u64,
    pub capacity_wp: f64,
    pub matching_score: f64,
    pub area_m2: f64,
}

fn ring_to_json(ring: &[Point2]) -> Value {
    let mut coords: Vec<Value> = ring
        .iter()
        .map(|p| json!([round6(p.x), round6(p.y)]))
        .collect();
    coords.push(coords[0].clone()); // GeoJSON rings close explicitly
    Value::Array(coords)
}

fn polygon_to_json(poly: &ArrayPolygon) -> Value {
    let mut rings = vec![ring_to_json(poly.exterior())];
    rings.extend(poly.holes().iter().map(|h| ring_to_json(h)));
    json!({ "type": "Polygon", "coordinates": rings })
}

fn json_to_polygon(
    geometry: &Value,
    id: &str,
    crs_id: &str,
    path: &Path,
) -> Result<ArrayPolygon> {
    let gtype = geometry["type"].as_str().unwrap_or_default();
    if gtype != "Polygon" {
        return Err(Error::parse(
            path,
            1,
            format!("feature {id:?}: unsupported geometry type {gtype:?}"),
        ));
    }
    let rings = geometry["coordinates"]
        .as_array()
        .ok_or_else(|| Error::parse(path, 1, format!("feature {id:?}: missing coordinates")))?;
    let mut parsed: Vec<Vec<Point2>> = Vec::with_capacity(rings.len());
    for ring in rings {
        let pts = ring
            .as_array()
            .ok_or_else(|| Error::parse(path, 1, format!("feature {id:?}: bad ring")))?;
        let mut out = Vec::with_capacity(pts.len());
        for p in pts {
            let xy = p.as_array().filter(|a| a.len() >= 2).ok_or_else(|| {
                Error::parse(path, 1, format!("feature {id:?}: bad coordinate"))
            })?;
            match (xy[0].as_f64(), xy[1].as_f64()) {
                (Some(x), Some(y)) => out.push(Point2 { x, y }),
                _ => {
                    return Err(Error::parse(
                        path,
                        1,
                        format!("feature {id:?}: non-numeric coordinate"),
                    ))
                }
            }
        }
        parsed.push(out);
    }
    if parsed.is_empty() {
        return Err(Error::parse(path, 1, format!("feature {id:?}: no rings")));
    }
    let exterior = parsed.remove(0);
    ArrayPolygon::new(id, crs_id, exterior, parsed)
}

fn feature_collection(features: Vec<Value>, crs_id: Option<&str>) -> Value {
    let mut obj = Map::new();
    obj.insert("type".into(), json!("FeatureCollection"));
    if let Some(crs) = crs_id {
        // Foreign member carrying the projected CRS tag of the coordinates.
        obj.insert("crs_id".into(), json!(crs));
    }
    obj.insert("features".into(), Value::Array(features));
    Value::Object(obj)
}

fn prop_f64(props: &Value, key: &str, id: &str, path: &Path) -> Result<f64> {
    props[key].as_f64().ok_or_else(|| {
        Error::parse(path, 1, format!("feature {id:?}: missing numeric {key:?}"))
    })
}

fn prop_str<'v>(props: &'v Value, key: &str, id: &str, path: &Path) -> Result<&'v str> {
    props[key]
        .as_str()
        .ok_or_else(|| Error::parse(path, 1, format!("feature {id:?}: missing {key:?}")))
}

/// Writes the enriched PV layer as a GeoJSON FeatureCollection. Feature
/// order is preserved; all numbers carry at most six fractional digits.
pub fn write_pv_layer(features: &[PvLayerFeature], path: &Path) -> Result<()> {
    let crs = features.first().map(|f| f.footprint.crs_id.as_str());
    for f in features {
        if Some(f.footprint.crs_id.as_str()) != crs {
            return Err(Error::CrsMismatch {
                left: crs.unwrap_or_default().into(),
                right: f.footprint.crs_id.clone(),
            });
        }
    }
    let feats: Vec<Value> = features
        .iter()
        .map(|f| {
            json!({
                "type": "Feature",
                "geometry": polygon_to_json(&f.footprint),
                "properties": {
                    "id": f.id,
                    "tilt_deg": round6(f.tilt_deg),
                    "azimuth_deg": round6(f.azimuth_deg),
                    "orientation_confidence": f.orientation_confidence.to_string(),
                    "template_label": f.template_label,
                    "mounting_orientation": f.mounting_orientation,
                    "module_count": f.module_count,
                    "capacity_wp": round6(f.capacity_wp),
                    "matching_score": round6(f.matching_score),
                    "area_m2": round6(f.area_m2),
                },
            })
        })
        .collect();
    let doc = feature_collection(feats, crs);
    let mut text = serde_json::to_string_pretty(&doc).expect("GeoJSON value serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Reads a PV layer written by [`write_pv_layer`].
pub fn read_pv_layer(path: &Path) -> Result<Vec<PvLayerFeature>> {
    let doc: Value = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let crs = doc["crs_id"].as_str().unwrap_or("local").to_string();
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| Error::parse(path, 1, "not a FeatureCollection"))?;
    let mut out = Vec::with_capacity(features.len());
    for f in features {
        let props = &f["properties"];
        let id = prop_str(props, "id", "?", path)?.to_string();
        let footprint = json_to_polygon(&f["geometry"], &id, &crs, path)?;
        out.push(PvLayerFeature {
            tilt_deg: prop_f64(props, "tilt_deg", &id, path)?,
            azimuth_deg: prop_f64(props, "azimuth_deg", &id, path)?,
            orientation_confidence: prop_str(props, "orientation_confidence", &id, path)?
                .parse()?,
            template_label: prop_str(props, "template_label", &id, path)?.to_string(),
            mounting_orientation: prop_str(props, "mounting_orientation", &id, path)?.to_string(),
            module_count: props["module_count"].as_u64().ok_or_else(|| {
                Error::parse(path, 1, format!("feature {id:?}: missing module_count"))
            })?,
            capacity_wp: prop_f64(props, "capacity_wp", &id, path)?,
            matching_score: prop_f64(props, "matching_score", &id, path)?,
            area_m2: prop_f64(props, "area_m2", &id, path)?,
            id,
            footprint,
        });
    }
    Ok(out)
}

/// Writes bare footprints (the vectorize-stage output): a FeatureCollection
/// with only `id` and `area_m2` properties.
pub fn write_footprints_geojson(footprints: &[ArrayPolygon], path: &Path) -> Result<()> {
    let crs = footprints.first().map(|f| f.crs_id.as_str());
    let feats: Vec<Value> = footprints
        .iter()
        .map(|f| {
            json!({
                "type": "Feature",
                "geometry": polygon_to_json(f),
                "properties": { "id": f.id, "area_m2": round6(f.area()) },
            })
        })
        .collect();
    let mut text =
        serde_json::to_string_pretty(&feature_collection(feats, crs)).expect("serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Reads footprints written by [`write_footprints_geojson`].
pub fn read_footprints_geojson(path: &Path) -> Result<Vec<ArrayPolygon>> {
    let doc: Value = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let crs = doc["crs_id"].as_str().unwrap_or("local").to_string();
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| Error::parse(path, 1, "not a FeatureCollection"))?;
    let mut out = Vec::with_capacity(features.len());
    for f in features {
        let id = prop_str(&f["properties"], "id", "?", path)?.to_string();
        out.push(json_to_polygon(&f["geometry"], &id, &crs, path)?);
    }
    Ok(out)
}

/// A neighborhood boundary with an optional recorded capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodRecord {
    pub region_id: String,
    pub boundary: ArrayPolygon,
    pub recorded_kwp: Option<f64>,
}

/// Reads region boundaries: a FeatureCollection of polygons carrying a
/// `region_id` property and optionally `recorded_kwp`.
pub fn read_regions_geojson(path: &Path) -> Result<Vec<NeighborhoodRecord>> {
    let doc: Value = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let crs = doc["crs_id"].as_str().unwrap_or("local").to_string();
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| Error::parse(path, 1, "not a FeatureCollection"))?;
    let mut out = Vec::with_capacity(features.len());
    let mut seen = std::collections::BTreeSet::new();
    for f in features {
        let props = &f["properties"];
        let region_id = prop_str(props, "region_id", "?", path)?.to_string();
        if !seen.insert(region_id.clone()) {
            return Err(Error::parse(
                path,
                1,
                format!("duplicate region_id {region_id:?}"),
            ));
        }
        let recorded_kwp = match &props["recorded_kwp"] {
            Value::Null => None,
            v => {
                let kwp = v.as_f64().ok_or_else(|| {
                    Error::parse(path, 1, format!("region {region_id:?}: bad recorded_kwp"))
                })?;
                if kwp < 0.0 {
                    return Err(Error::parse(
                        path,
                        1,
                        format!("region {region_id:?}: negative recorded_kwp"),
                    ));
                }
                Some(kwp)
            }
        };
        let boundary = json_to_polygon(&f["geometry"], &region_id, &crs, path)?;
        out.push(NeighborhoodRecord {
            region_id,
            boundary,
            recorded_kwp,
        });
    }
    Ok(out)
}

/// Writes region boundaries in the format [`read_regions_geojson`] accepts.
pub fn write_regions_geojson(regions: &[NeighborhoodRecord], path: &Path) -> Result<()> {
    let crs = regions.first().map(|r| r.boundary.crs_id.as_str());
    let feats: Vec<Value> = regions
        .iter()
        .map(|r| {
            let mut props = Map::new();
            props.insert("region_id".into(), json!(r.region_id));
            if let Some(kwp) = r.recorded_kwp {
                props.insert("recorded_kwp".into(), json!(round6(kwp)));
            }
            json!({
                "type": "Feature",
                "geometry": polygon_to_json(&r.boundary),
                "properties": Value::Object(props),
            })
        })
        .collect();
    let mut text =
        serde_json::to_string_pretty(&feature_collection(feats, crs)).expect("serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

// ---------------------------------------------------------------------------
// CSV readers/writers
// ---------------------------------------------------------------------------

/// Reads an `x,y,z` point cloud into raw coordinate triples.
pub fn read_pointcloud_csv(path: &Path) -> Result<Vec<[f64; 3]>> {
    let text = read_text(path)?;
    let rows = csv_rows(&text, path, &["x", "y", "z"])?;
    let mut points = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        if fields.len() < 3 {
            return Err(Error::parse(path, line, "expected x,y,z"));
        }
        points.push([
            parse_f64(fields[0], path, line, "x")?,
            parse_f64(fields[1], path, line, "y")?,
            parse_f64(fields[2], path, line, "z")?,
        ]);
    }
    Ok(points)
}

/// Reads hourly weather: `timestamp,ghi,dni,dhi[,temp[,wind]]`; empty temp
/// or wind cells become absent values.
pub fn read_weather_csv(path: &Path) -> Result<WeatherSeries> {
    let text = read_text(path)?;
    let rows = csv_rows(&text, path, &["timestamp", "ghi", "dni", "dhi"])?;
    let mut ts = Vec::with_capacity(rows.len());
    let (mut ghi, mut dni, mut dhi) = (Vec::new(), Vec::new(), Vec::new());
    let (mut temp, mut wind) = (Vec::new(), Vec::new());
    for (line, fields) in rows {
        if fields.len() < 4 {
            return Err(Error::parse(path, line, "expected timestamp,ghi,dni,dhi"));
        }
        ts.push(parse_timestamp(fields[0], path, line)?);
        ghi.push(parse_f64(fields[1], path, line, "ghi")?);
        dni.push(parse_f64(fields[2], path, line, "dni")?);
        dhi.push(parse_f64(fields[3], path, line, "dhi")?);
        let opt = |idx: usize| -> Result<Option<f64>> {
            match fields.get(idx) {
                None | Some(&"") => Ok(None),
                Some(s) => parse_f64(s, path, line, "optional column").map(Some),
            }
        };
        temp.push(opt(4)?);
        wind.push(opt(5)?);
    }
    WeatherSeries::new(ts, ghi, dni, dhi, temp, wind)
}

pub fn write_weather_csv(weather: &WeatherSeries, path: &Path) -> Result<()> {
    let mut s = String::from("timestamp,ghi,dni,dhi,temp,wind\n");
    for i in 0..weather.len() {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            timestamp_str(weather.timestamps[i]),
            weather.ghi_w_m2[i],
            weather.dni_w_m2[i],
            weather.dhi_w_m2[i],
            opt(weather.temp_c[i]),
            opt(weather.wind_m_s[i]),
        ));
    }
    write_atomic(path, s.as_bytes())
}

/// Reads an externally produced energy series: `timestamp,energy_wh`.
pub fn read_power_csv(path: &Path, label: &str) -> Result<PowerSeries> {
    let text = read_text(path)?;
    let rows = csv_rows(&text, path, &["timestamp", "energy_wh"])?;
    let mut ts = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        if fields.len() < 2 {
            return Err(Error::parse(path, line, "expected timestamp,energy_wh"));
        }
        ts.push(parse_timestamp(fields[0], path, line)?);
        values.push(parse_f64(fields[1], path, line, "energy_wh")?);
    }
    PowerSeries::new(ts, values, label)
}

pub fn write_power_csv(series: &PowerSeries, path: &Path) -> Result<()> {
    let mut s = String::from("timestamp,energy_wh\n");
    for (t, v) in series.timestamps.iter().zip(&series.values_wh) {
        s.push_str(&format!("{},{}\n", timestamp_str(*t), round6(*v)));
    }
    write_atomic(path, s.as_bytes())
}

/// Reads a two-column region CSV with header `region_id,<value_column>`.
pub fn read_region_csv(path: &Path, value_column: &str) -> Result<Vec<(String, f64)>> {
    let text = read_text(path)?;
    let rows = csv_rows(&text, path, &["region_id", value_column])?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        if fields.len() < 2 {
            return Err(Error::parse(
                path,
                line,
                format!("expected region_id,{value_column}"),
            ));
        }
        out.push((
            fields[0].to_string(),
            parse_f64(fields[1], path, line, value_column)?,
        ));
    }
    Ok(out)
}

/// Reads recorded capacities: `region_id,recorded_kwp`.
pub fn read_recorded_csv(path: &Path) -> Result<Vec<(String, f64)>> {
    read_region_csv(path, "recorded_kwp")
}

pub fn write_capacity_csv(rows: &[(String, f64)], header: &str, path: &Path) -> Result<()> {
    let mut s = format!("{header}\n");
    for (id, kwp) in rows {
        s.push_str(&format!("{id},{}\n", round6(*kwp)));
    }
    write_atomic(path, s.as_bytes())
}

/// Per-footprint orientation table: `id,tilt_deg,azimuth_deg,confidence`.
pub fn write_orientation_csv(rows: &[(String, OrientationEstimate)], path: &Path) -> Result<()> {
    let mut s = String::from("id,tilt_deg,azimuth_deg,confidence\n");
    for (id, est) in rows {
        s.push_str(&format!(
            "{id},{},{},{}\n",
            round6(est.tilt_deg),
            round6(est.azimuth_deg),
            est.confidence
        ));
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_orientation_csv(path: &Path) -> Result<Vec<(String, OrientationEstimate)>> {
    let text = read_text(path)?;
    let rows = csv_rows(&text, path, &["id", "tilt_deg", "azimuth_deg", "confidence"])?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        if fields.len() < 4 {
            return Err(Error::parse(
                path,
                line,
                "expected id,tilt_deg,azimuth_deg,confidence",
            ));
        }
        out.push((
            fields[0].to_string(),
            OrientationEstimate {
                tilt_deg: parse_f64(fields[1], path, line, "tilt_deg")?,
                azimuth_deg: parse_f64(fields[2], path, line, "azimuth_deg")?,
                confidence: fields[3].parse()?,
            },
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Flat key=value config
// ---------------------------------------------------------------------------

/// Parses the flat `key=value` config format. Keys mirror CLI flag names;
/// dashes normalize to underscores. `#` starts a comment; duplicate keys are
/// rejected.
pub fn parse_config_text(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::parse(path, i + 1, format!("expected key=value, got {line:?}"))
        })?;
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        if key.is_empty() {
            return Err(Error::parse(path, i + 1, "empty key"));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::parse(path, i + 1, format!("duplicate key {key:?}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::TempDir;

    fn pt(x: f64, y: f64) -> Point2 {
        Point2 { x, y }
    }

    fn quad(id: &str, x0: f64, y0: f64, w: f64, h: f64) -> ArrayPolygon {
        ArrayPolygon::new(
            id,
            "epsg:28992",
            vec![pt(x0, y0), pt(x0 + w, y0), pt(x0 + w, y0 + h), pt(x0, y0 + h)],
            Vec::new(),
        )
        .unwrap()
    }

    fn feature(i: usize, rng: &mut ChaCha8Rng) -> PvLayerFeature {
        let fp = quad(
            &format!("pv_{i:04}"),
            rng.gen_range(-1e4..1e4),
            rng.gen_range(-1e4..1e4),
            rng.gen_range(1.0..20.0),
            rng.gen_range(1.0..20.0),
        );
        PvLayerFeature {
            id: fp.id.clone(),
            area_m2: fp.area(),
            footprint: fp,
            tilt_deg: rng.gen_range(0.0..60.0),
            azimuth_deg: rng.gen_range(0.0..360.0),
            orientation_confidence: Confidence::Ok,
            template_label: "Mono-c-Si_0.028_72".into(),
            mounting_orientation: "portrait".into(),
            module_count: rng.gen_range(0..40),
            capacity_wp: rng.gen_range(0.0..2e4),
            matching_score: rng.gen_range(0.0..1.0),
        }
    }

    #[test]
    fn pv_layer_roundtrip_preserves_everything() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("layer.geojson");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let features: Vec<PvLayerFeature> = (0..1000).map(|i| feature(i, &mut rng)).collect();
        write_pv_layer(&features, &path).unwrap();
        let back = read_pv_layer(&path).unwrap();
        assert_eq!(back.len(), features.len());
        for (a, b) in features.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.module_count, b.module_count);
            assert_eq!(a.orientation_confidence, b.orientation_confidence);
            assert_eq!(a.template_label, b.template_label);
            assert_eq!(a.mounting_orientation, b.mounting_orientation);
            for (x, y) in [
                (a.tilt_deg, b.tilt_deg),
                (a.azimuth_deg, b.azimuth_deg),
                (a.capacity_wp, b.capacity_wp),
                (a.matching_score, b.matching_score),
                (a.area_m2, b.area_m2),
            ] {
                assert!((x - y).abs() <= 1e-6 + 1e-12, "{x} vs {y}");
            }
            assert_eq!(a.footprint.crs_id, b.footprint.crs_id);
            for (p, q) in a.footprint.exterior().iter().zip(b.footprint.exterior()) {
                assert!(p.dist(*q) <= 2e-6, "{p:?} vs {q:?}");
            }
        }
    }

    #[test]
    fn empty_layer_is_a_valid_collection() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("empty.geojson");
        write_pv_layer(&[], &path).unwrap();
        let doc: Value = serde_json::from_str(&read_text(&path).unwrap()).unwrap();
        assert_eq!(doc["type"], "FeatureCollection");
        assert_eq!(doc["features"].as_array().unwrap().len(), 0);
        assert!(read_pv_layer(&path).unwrap().is_empty());
    }

    #[test]
    fn exported_numbers_have_at_most_six_fractional_digits() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("layer.geojson");
        let mut f = PvLayerFeature {
            id: "pv_0001".into(),
            footprint: quad("pv_0001", 0.123456789, 0.987654321, 3.0, 4.0),
            tilt_deg: 33.333333333,
            azimuth_deg: 181.8181818181,
            orientation_confidence: Confidence::Ok,
            template_label: "t".into(),
            mounting_orientation: "landscape".into(),
            module_count: 3,
            capacity_wp: 6048.000000001,
            matching_score: 0.123456789,
            area_m2: 12.0,
        };
        f.area_m2 = f.footprint.area();
        write_pv_layer(std::slice::from_ref(&f), &path).unwrap();
        let text = read_text(&path).unwrap();
        for line in text.lines() {
            if let Some(frac) = line.split('.').nth(1) {
                let digits = frac.chars().take_while(|c| c.is_ascii_digit()).count();
                assert!(digits <= 6, "too many fractional digits: {line}");
            }
        }
    }

    #[test]
    fn regions_roundtrip_and_validation() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("regions.geojson");
        let regions = vec![
            NeighborhoodRecord {
                region_id: "north".into(),
                boundary: quad("north", 0.0, 0.0, 100.0, 100.0),
                recorded_kwp: Some(345.5),
            },
            NeighborhoodRecord {
                region_id: "south".into(),
                boundary: quad("south", 0.0, -100.0, 100.0, 100.0),
                recorded_kwp: None,
            },
        ];
        write_regions_geojson(&regions, &path).unwrap();
        let back = read_regions_geojson(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].region_id, "north");
        assert_eq!(back[0].recorded_kwp, Some(345.5));
        assert_eq!(back[1].recorded_kwp, None);
        assert_eq!(back[0].boundary.crs_id, "epsg:28992");
        // Duplicate ids are rejected.
        let dup = vec![regions[0].clone(), regions[0].clone()];
        write_regions_geojson(&dup, &path).unwrap();
        assert!(read_regions_geojson(&path).is_err());
    }

    #[test]
    fn pointcloud_csv_roundtrip_and_errors() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("points.csv");
        write_atomic(&path, b"x,y,z\n1.0,2.0,3.5\n-4,0,9.25\n").unwrap();
        let pts = read_pointcloud_csv(&path).unwrap();
        assert_eq!(pts, vec![[1.0, 2.0, 3.5], [-4.0, 0.0, 9.25]]);
        write_atomic(&path, b"a,b\n1,2\n").unwrap();
        assert!(read_pointcloud_csv(&path).is_err());
        write_atomic(&path, b"x,y,z\n1.0,nope,3\n").unwrap();
        let err = read_pointcloud_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn weather_csv_handles_optional_columns() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("weather.csv");
        write_atomic(
            &path,
            b"timestamp,ghi,dni,dhi,temp,wind\n2022-06-21T11:00:00Z,500,700,120,18.5,3.2\n2022-06-21T12:00:00Z,520,720,130,,\n",
        )
        .unwrap();
        let w = read_weather_csv(&path).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.temp_c[0], Some(18.5));
        assert_eq!(w.temp_c[1], None);
        assert_eq!(w.wind_m_s[1], None);
        let out = dir.path().join("weather2.csv");
        write_weather_csv(&w, &out).unwrap();
        let again = read_weather_csv(&out).unwrap();
        assert_eq!(w, again);
    }

    #[test]
    fn power_csv_roundtrip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("power.csv");
        let ts: Vec<_> = (0..3)
            .map(|h| Utc.with_ymd_and_hms(2022, 1, 1, h, 0, 0).unwrap())
            .collect();
        let series = PowerSeries::new(ts, vec![0.0, 1234.5, 987.125], "upper").unwrap();
        write_power_csv(&series, &path).unwrap();
        let back = read_power_csv(&path, "upper").unwrap();
        assert_eq!(series, back);
    }

    #[test]
    fn recorded_and_orientation_csv() {
        let dir = TempDir::new().unwrap();
        let rec = dir.path().join("recorded.csv");
        write_atomic(&rec, b"region_id,recorded_kwp\nnorth,345.5\nsouth,729\n").unwrap();
        let rows = read_recorded_csv(&rec).unwrap();
        assert_eq!(rows[1], ("south".to_string(), 729.0));
        let ori = dir.path().join("orientation.csv");
        let rows = vec![
            (
                "pv_0001".to_string(),
                OrientationEstimate {
                    tilt_deg: 32.5,
                    azimuth_deg: 182.25,
                    confidence: Confidence::Ok,
                },
            ),
            (
                "pv_0002".to_string(),
                OrientationEstimate::neutral(Confidence::LowPoints),
            ),
        ];
        write_orientation_csv(&rows, &ori).unwrap();
        let back = read_orientation_csv(&ori).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn config_parsing_rules() {
        let path = Path::new("run.cfg");
        let cfg = parse_config_text(
            "# demo\nmask = scene/mask.pgm\nmargin-pct = 25\n\nseed=7 # trailing comment\n",
            path,
        )
        .unwrap();
        assert_eq!(cfg["mask"], "scene/mask.pgm");
        assert_eq!(cfg["margin_pct"], "25");
        assert_eq!(cfg["seed"], "7");
        assert!(parse_config_text("mask scene.pgm\n", path).is_err());
        assert!(parse_config_text("a=1\na=2\n", path).is_err());
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(read_text(&path).unwrap(), "second");
    }
}
