//! Georeferenced binary masks.
//!
//! Masks come from segmentation output as PGM (P2/P5) or 8-bit grayscale PNG
//! plus an ESRI world file. Pixel coordinates follow the pixel-center
//! convention: integer `(col, row)` addresses the center of a pixel whose
//! square spans half a pixel in each direction.

use crate::error::{Error, Result};
use crate::geom::Point2;
use std::fmt;
use std::path::Path;

/// Affine map from pixel `(col, row)` to world `(x, y)`:
///
/// ```text
/// x = a*col + b*row + c
/// y = d*col + e*row + f
/// ```
///
/// An ESRI world file stores the six coefficients one per line in the order
/// `a, d, b, e, c, f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Affine2 {
    /// Identity transform (pixel coordinates are world coordinates).
    pub const IDENTITY: Affine2 = Affine2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 1.0,
        f: 0.0,
    };

    /// North-up transform: square pixels of size `pixel`, origin pixel center
    /// at `(x0, y0)`, rows increasing southward.
    pub fn north_up(x0: f64, y0: f64, pixel: f64) -> Affine2 {
        Affine2 {
            a: pixel,
            b: 0.0,
            c: x0,
            d: 0.0,
            e: -pixel,
            f: y0,
        }
    }

    pub fn parse_world_file(path: &Path) -> Result<Affine2> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_world_text(&text).map_err(|msg| Error::WorldFile {
            path: path.to_path_buf(),
            msg,
        })
    }

    /// Parses the six-line world file body. Blank lines are ignored; exactly
    /// six numeric values are required.
    pub fn parse_world_text(text: &str) -> std::result::Result<Affine2, String> {
        let mut vals = Vec::with_capacity(6);
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 = t
                .parse()
                .map_err(|_| format!("line {}: not a number: {t:?}", i + 1))?;
            if !v.is_finite() {
                return Err(format!("line {}: non-finite coefficient", i + 1));
            }
            vals.push(v);
        }
        if vals.len() != 6 {
            return Err(format!("expected 6 coefficients, found {}", vals.len()));
        }
        let t = Affine2 {
            a: vals[0],
            d: vals[1],
            b: vals[2],
            e: vals[3],
            c: vals[4],
            f: vals[5],
        };
        if t.det().abs() < 1e-30 {
            return Err("transform is singular".into());
        }
        Ok(t)
    }

    /// Serializes in world-file line order (`a, d, b, e, c, f`).
    pub fn to_world_text(&self) -> String {
        format!(
            "{}\n{}\n{}\n{}\n{}\n{}\n",
            self.a, self.d, self.b, self.e, self.c, self.f
        )
    }

    pub fn det(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    /// Area of one pixel in squared world units.
    pub fn pixel_area(&self) -> f64 {
        self.det().abs()
    }

    /// Pixel `(col, row)` (centers at integers) to world coordinates.
    pub fn pixel_to_world(&self, p: Point2) -> Point2 {
        Point2::new(
            self.a * p.x + self.b * p.y + self.c,
            self.d * p.x + self.e * p.y + self.f,
        )
    }

    /// World coordinates back to fractional pixel `(col, row)`.
    pub fn world_to_pixel(&self, w: Point2) -> Point2 {
        let det = self.det();
        let x = w.x - self.c;
        let y = w.y - self.f;
        Point2::new((self.e * x - self.b * y) / det, (self.a * y - self.d * x) / det)
    }
}

/// Pixel connectivity for component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Connectivity::Four => write!(f, "4"),
            Connectivity::Eight => write!(f, "8"),
        }
    }
}

impl std::str::FromStr for Connectivity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "4" => Ok(Connectivity::Four),
            "8" => Ok(Connectivity::Eight),
            other => Err(Error::Config(format!(
                "connectivity must be 4 or 8, got {other:?}"
            ))),
        }
    }
}

/// Binary mask with its georeference.
#[derive(Debug, Clone)]
pub struct GeoreferencedMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
    pub affine: Affine2,
    pub crs_id: String,
}

impl GeoreferencedMask {
    pub fn new(
        width: u32,
        height: u32,
        data: Vec<bool>,
        affine: Affine2,
        crs_id: impl Into<String>,
    ) -> Result<Self> {
        if data.len() != (width as usize) * (height as usize) {
            return Err(Error::Geometry(format!(
                "mask data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(GeoreferencedMask {
            width,
            height,
            data,
            affine,
            crs_id: crs_id.into(),
        })
    }

    /// Loads an image (PGM or PNG by extension/content) and thresholds it:
    /// gray values `>= threshold` are foreground.
    pub fn load(
        image_path: &Path,
        world_path: &Path,
        threshold: u8,
        crs_id: impl Into<String>,
    ) -> Result<Self> {
        let affine = Affine2::parse_world_file(world_path)?;
        let img = image::open(image_path).map_err(|e| Error::Image {
            path: image_path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let gray = img.into_luma8();
        let (width, height) = gray.dimensions();
        let data = gray.pixels().map(|p| p.0[0] >= threshold).collect();
        GeoreferencedMask::new(width, height, data, affine, crs_id)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, col: u32, row: u32) -> bool {
        debug_assert!(col < self.width && row < self.height);
        self.data[row as usize * self.width as usize + col as usize]
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    /// Writes the mask as a binary PGM (foreground 255, background 0).
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut buf = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        buf.extend(self.data.iter().map(|v| if *v { 255u8 } else { 0u8 }));
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// One 8- or 4-connected blob of foreground pixels.
#[derive(Debug, Clone)]
pub struct PixelComponent {
    /// 1-based label in row-major discovery order.
    pub label: u32,
    /// Member pixels as `(col, row)`, sorted row-major.
    pub pixels: Vec<(u32, u32)>,
    /// Inclusive pixel bounding box `(min_col, min_row, max_col, max_row)`.
    pub bbox: (u32, u32, u32, u32),
}

impl PixelComponent {
    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }
}

/// Labels connected `true` regions of a row-major bitmap with a flood fill.
/// Regions smaller than `min_px` are dropped; each region's pixels are sorted
/// row-major and regions are returned in row-major first-pixel order.
pub(crate) fn label_bitmap(
    width: usize,
    height: usize,
    data: &[bool],
    connectivity: Connectivity,
    min_px: usize,
) -> Vec<Vec<(u32, u32)>> {
    debug_assert_eq!(data.len(), width * height);
    let mut seen = vec![false; width * height];
    let mut regions = Vec::new();
    let mut stack: Vec<(u32, u32)> = Vec::new();
    for row in 0..height {
        for col in 0..width {
            let idx = row * width + col;
            if seen[idx] || !data[idx] {
                continue;
            }
            seen[idx] = true;
            stack.push((col as u32, row as u32));
            let mut pixels = Vec::new();
            while let Some((c, r)) = stack.pop() {
                pixels.push((c, r));
                for (dc, dr) in connectivity.offsets() {
                    let nc = c as i64 + dc;
                    let nr = r as i64 + dr;
                    if nc < 0 || nr < 0 || nc >= width as i64 || nr >= height as i64 {
                        continue;
                    }
                    let nidx = nr as usize * width + nc as usize;
                    if !seen[nidx] && data[nidx] {
                        seen[nidx] = true;
                        stack.push((nc as u32, nr as u32));
                    }
                }
            }
            if pixels.len() < min_px {
                continue;
            }
            pixels.sort_by_key(|&(c, r)| (r, c));
            regions.push(pixels);
        }
    }
    regions
}

/// Labels foreground blobs. Components smaller than `min_component_px` are
/// dropped; the rest are ordered by (min row, min col) of their bounding box
/// and labeled 1..n, so output is deterministic.
pub fn extract_components(
    mask: &GeoreferencedMask,
    connectivity: Connectivity,
    min_component_px: usize,
) -> Vec<PixelComponent> {
    let regions = label_bitmap(
        mask.width as usize,
        mask.height as usize,
        &mask.data,
        connectivity,
        min_component_px,
    );
    let mut components: Vec<PixelComponent> = regions
        .into_iter()
        .map(|pixels| {
            let bbox = pixel_bbox(&pixels);
            PixelComponent {
                label: 0,
                pixels,
                bbox,
            }
        })
        .collect();
    components.sort_by_key(|c| (c.bbox.1, c.bbox.0));
    for (i, c) in components.iter_mut().enumerate() {
        c.label = i as u32 + 1;
    }
    components
}

/// Inclusive bounding box of a non-empty pixel list.
pub(crate) fn pixel_bbox(pixels: &[(u32, u32)]) -> (u32, u32, u32, u32) {
    let mut it = pixels.iter();
    let &(c, r) = it.next().expect("bbox of empty pixel set");
    let (mut c0, mut r0, mut c1, mut r1) = (c, r, c, r);
    for &(c, r) in it {
        c0 = c0.min(c);
        r0 = r0.min(r);
        c1 = c1.max(c);
        r1 = r1.max(r);
    }
    (c0, r0, c1, r1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from_rows(rows: &[&str]) -> GeoreferencedMask {
        let height = rows.len() as u32;
        let width = rows[0].len() as u32;
        let data = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| c == '#'))
            .collect();
        GeoreferencedMask::new(width, height, data, Affine2::IDENTITY, "px").unwrap()
    }

    #[test]
    fn world_file_round_trip_and_order() {
        // a, d, b, e, c, f — note the interleaved order.
        let text = "0.25\n0.0\n0.0\n-0.25\n1000.5\n2000.5\n";
        let t = Affine2::parse_world_text(text).unwrap();
        assert_eq!(t.a, 0.25);
        assert_eq!(t.e, -0.25);
        assert_eq!(t.c, 1000.5);
        let again = Affine2::parse_world_text(&t.to_world_text()).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn world_file_rejects_singular_and_short() {
        assert!(Affine2::parse_world_text("0\n0\n0\n0\n0\n0\n").is_err());
        assert!(Affine2::parse_world_text("1\n0\n0\n1\n0\n").is_err());
        assert!(Affine2::parse_world_text("1\nx\n0\n1\n0\n0\n").is_err());
    }

    #[test]
    fn affine_round_trip() {
        let t = Affine2 {
            a: 0.25,
            b: 0.01,
            c: 155000.0,
            d: -0.02,
            e: -0.25,
            f: 463000.0,
        };
        let p = Point2::new(37.0, 111.0);
        let w = t.pixel_to_world(p);
        let back = t.world_to_pixel(w);
        assert!(p.dist(back) < 1e-9);
    }

    #[test]
    fn north_up_maps_rows_south() {
        let t = Affine2::north_up(100.0, 200.0, 0.5);
        let w = t.pixel_to_world(Point2::new(2.0, 4.0));
        assert_eq!(w, Point2::new(101.0, 198.0));
        assert!((t.pixel_area() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn components_eight_vs_four_connectivity() {
        // Two blocks touching only diagonally.
        let m = mask_from_rows(&[
            "##...", //
            "##...", //
            "..##.", //
            "..##.", //
        ]);
        let eight = extract_components(&m, Connectivity::Eight, 1);
        assert_eq!(eight.len(), 1);
        assert_eq!(eight[0].pixel_count(), 8);
        let four = extract_components(&m, Connectivity::Four, 1);
        assert_eq!(four.len(), 2);
        assert_eq!(four[0].label, 1);
        assert_eq!(four[1].label, 2);
        // Row-major discovery order: the upper-left block first.
        assert_eq!(four[0].pixels[0], (0, 0));
        assert_eq!(four[1].bbox, (2, 2, 3, 3));
    }

    #[test]
    fn small_components_are_dropped() {
        let m = mask_from_rows(&[
            "#..##", //
            "...##", //
        ]);
        let comps = extract_components(&m, Connectivity::Eight, 4);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].pixel_count(), 4);
    }

    #[test]
    fn empty_mask_yields_no_components() {
        let m = mask_from_rows(&["...", "..."]);
        assert!(extract_components(&m, Connectivity::Eight, 1).is_empty());
    }

    #[test]
    fn pgm_round_trip() {
        let dir = std::env::temp_dir().join("pvmap_raster_test");
        std::fs::create_dir_all(&dir).unwrap();
        let m = mask_from_rows(&["#.#", ".#."]);
        let img = dir.join("m.pgm");
        let wld = dir.join("m.wld");
        m.write_pgm(&img).unwrap();
        std::fs::write(&wld, Affine2::IDENTITY.to_world_text()).unwrap();
        let loaded = GeoreferencedMask::load(&img, &wld, 128, "px").unwrap();
        assert_eq!(loaded.width(), 3);
        assert_eq!(loaded.height(), 2);
        assert_eq!(loaded.foreground_count(), 3);
        assert!(loaded.get(0, 0) && !loaded.get(1, 0) && loaded.get(1, 1));
    }
}
