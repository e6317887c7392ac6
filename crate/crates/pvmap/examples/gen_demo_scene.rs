//! Regenerates the bundled demo scene under `demo/`.
//!
//! The scene is fully synthetic and deterministic: three rooftop arrays
//! (south-tilted, flat L-shaped, east-tilted) on a 0.25 m grid, a LiDAR-like
//! point cloud sampling each roof plane, two neighborhood boundaries with
//! recorded capacities, and one clear summer day of hourly weather.
//!
//! Run with `cargo run --example gen_demo_scene`.

use chrono::{TimeZone, Utc};
use pvmap::geom::{ArrayPolygon, Point2};
use pvmap::io::{self, NeighborhoodRecord};
use pvmap::profile::synthetic_clear_day;
use pvmap::raster::{Affine2, GeoreferencedMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

const WIDTH: usize = 96;
const HEIGHT: usize = 72;
const GSD: f64 = 0.25;
const X0: f64 = 500.0;
const Y0: f64 = 1000.0;

fn rect_region(id: &str, x0: f64, y0: f64, w: f64, h: f64) -> NeighborhoodRecord {
    let boundary = ArrayPolygon::new(
        id,
        "local",
        vec![
            Point2::new(x0, y0),
            Point2::new(x0 + w, y0),
            Point2::new(x0 + w, y0 + h),
            Point2::new(x0, y0 + h),
        ],
        Vec::new(),
    )
    .expect("rectangular region is valid");
    NeighborhoodRecord {
        region_id: id.into(),
        boundary,
        recorded_kwp: None,
    }
}

fn main() {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo");
    std::fs::create_dir_all(&demo).expect("demo dir");
    let mut rng = ChaCha8Rng::seed_from_u64(20220621);

    // -- mask -----------------------------------------------------------------
    let mut data = vec![false; WIDTH * HEIGHT];
    let mut fill = |c0: usize, r0: usize, cw: usize, rh: usize, on: bool| {
        for r in r0..r0 + rh {
            for c in c0..c0 + cw {
                data[r * WIDTH + c] = on;
            }
        }
    };
    fill(8, 10, 24, 14, true); // A: 6.0 m x 3.5 m, south-tilted 30 deg
    fill(40, 12, 20, 20, true); // B: L-shaped flat roof ...
    fill(52, 12, 8, 8, false); // ... with a notch cut from one corner
    fill(68, 40, 20, 16, true); // C: 5.0 m x 4.0 m, east-tilted 20 deg

    // Light salt-and-pepper noise, kept off the arrays and their borders so
    // the scene stays clean while still exercising component filtering.
    for _ in 0..30 {
        let c = rng.gen_range(0..WIDTH);
        let r = rng.gen_range(0..HEIGHT);
        let near_array = (7..33).contains(&c) && (9..25).contains(&r)
            || (39..61).contains(&c) && (11..33).contains(&r)
            || (67..89).contains(&c) && (39..57).contains(&r);
        if !near_array {
            data[r * WIDTH + c] = rng.gen_bool(0.5);
        }
    }

    let affine = Affine2::north_up(X0, Y0, GSD);
    let mask = GeoreferencedMask::new(WIDTH as u32, HEIGHT as u32, data, affine, "local")
        .expect("mask dimensions consistent");
    mask.write_pgm(&demo.join("mask.pgm")).expect("write mask");
    std::fs::write(demo.join("mask.wld"), affine.to_world_text()).expect("write world file");

    // -- point cloud ------------------------------------------------------------
    // World-space footprints (pixel centers +/- half a pixel):
    //   A: x 501.875..507.875, y 994.125..997.625
    //   B: x 509.875..514.875, y 992.125..997.125 (L-shape bbox)
    //   C: x 516.875..521.875, y 986.125..990.125
    let mut rows = String::from("x,y,z\n");
    let mut plane = |n: usize,
                     xr: (f64, f64),
                     yr: (f64, f64),
                     z: &dyn Fn(f64, f64) -> f64,
                     rng: &mut ChaCha8Rng| {
        for _ in 0..n {
            let x = rng.gen_range(xr.0..xr.1);
            let y = rng.gen_range(yr.0..yr.1);
            let mut zv = z(x, y) + rng.gen_range(-0.04..0.04);
            if rng.gen_bool(0.05) {
                zv += rng.gen_range(0.5..1.5); // chimneys, antennas, noise
            }
            rows.push_str(&format!("{x:.3},{y:.3},{zv:.3}\n"));
        }
    };
    let tan30 = 30f64.to_radians().tan();
    let tan20 = 20f64.to_radians().tan();
    plane(
        600,
        (502.0, 507.8),
        (994.2, 997.6),
        &|_, y| 12.0 + (y - 994.0) * tan30,
        &mut rng,
    );
    plane(500, (510.0, 514.8), (992.2, 997.0), &|_, _| 9.0, &mut rng);
    plane(
        500,
        (517.0, 521.8),
        (986.2, 990.0),
        &|x, _| 11.0 + (522.2 - x) * tan20,
        &mut rng,
    );
    std::fs::write(demo.join("pointcloud.csv"), rows).expect("write point cloud");

    // -- regions and recorded capacities ---------------------------------------
    // Recorded values sit within ~10% of what the pipeline predicts for this
    // scene, so the bundled validation report reads like a realistic one.
    let mut west = rect_region("west", 500.0, 988.0, 16.0, 12.0);
    west.recorded_kwp = Some(41.0);
    let mut east = rect_region("east", 516.0, 982.0, 8.5, 10.0);
    east.recorded_kwp = Some(22.5);
    io::write_regions_geojson(&[west, east], &demo.join("regions.geojson"))
        .expect("write regions");
    io::write_capacity_csv(
        &[("west".into(), 41.0), ("east".into(), 22.5)],
        "region_id,recorded_kwp",
        &demo.join("recorded.csv"),
    )
    .expect("write recorded capacities");

    // -- weather -----------------------------------------------------------------
    let day = Utc.with_ymd_and_hms(2022, 6, 21, 0, 0, 0).unwrap();
    let weather = synthetic_clear_day(day, 51.44, 5.48).expect("synthetic day");
    io::write_weather_csv(&weather, &demo.join("weather.csv")).expect("write weather");

    // -- config --------------------------------------------------------------------
    let config = "\
# Demo pipeline configuration. Paths are relative to this file.
mask = mask.pgm
worldfile = mask.wld
pointcloud = pointcloud.csv
regions = regions.geojson
out = out
seed = 42
";
    std::fs::write(demo.join("run.cfg"), config).expect("write config");
    println!("demo scene written to {}", demo.display());
}
