//! Monochrome scatterplot rendering onto an ink canvas.
//!
//! Each point stamps a filled disc. Overlapping discs composite with
//! `ink' = ink + opacity·(1 − ink)`, which for `c` covering points has the
//! closed form `1 − (1 − opacity)^c`. Rendering therefore counts coverage
//! per cell and applies the closed form once, so the result does not depend
//! on point order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Point;
use crate::error::{Error, Result};

pub const DEFAULT_WIDTH: usize = 1085;
pub const DEFAULT_HEIGHT: usize = 924;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub point_size_px: f64,
    pub opacity: f64,
    pub width_px: usize,
    pub height_px: usize,
}

impl RenderConfig {
    pub fn new(point_size_px: f64, opacity: f64, width_px: usize, height_px: usize) -> Result<Self> {
        let cfg = RenderConfig { point_size_px, opacity, width_px, height_px };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.point_size_px >= 1.0) {
            return Err(Error::invalid(format!("point size must be >= 1px, got {}", self.point_size_px)));
        }
        if !(self.opacity > 0.0 && self.opacity <= 1.0) {
            return Err(Error::invalid(format!("opacity must be in (0,1], got {}", self.opacity)));
        }
        if self.width_px < 16 || self.height_px < 16 {
            return Err(Error::invalid(format!(
                "canvas must be at least 16x16, got {}x{}",
                self.width_px, self.height_px
            )));
        }
        Ok(())
    }
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { point_size_px: 2.0, opacity: 0.1, width_px: DEFAULT_WIDTH, height_px: DEFAULT_HEIGHT }
    }
}

/// Row-major grid of ink coverage, 0 = blank, 1 = saturated.
#[derive(Debug, Clone, PartialEq)]
pub struct InkImage {
    pub width_px: usize,
    pub height_px: usize,
    pub ink: Vec<f64>,
}

impl InkImage {
    pub fn blank(width_px: usize, height_px: usize) -> Self {
        InkImage { width_px, height_px, ink: vec![0.0; width_px * height_px] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.ink[row * self.width_px + col]
    }

    /// 8-bit grayscale pixels, white background and dark ink.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.ink
            .iter()
            .map(|&v| (255.0 * (1.0 - v.clamp(0.0, 1.0)) + 0.5).floor() as u8)
            .collect()
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.to_gray8(),
            self.width_px as u32,
            self.height_px as u32,
            image::ExtendedColorType::L8,
        )?;
        Ok(())
    }
}

/// Pixel cell of a unit-square point; row 0 is the top of the image.
#[inline]
pub fn point_to_pixel(p: Point, width_px: usize, height_px: usize) -> (usize, usize) {
    let col = ((p.x * width_px as f64).floor().max(0.0) as usize).min(width_px - 1);
    let row = (((1.0 - p.y) * height_px as f64).floor().max(0.0) as usize).min(height_px - 1);
    (row, col)
}

/// Offsets of the cells a disc of the given diameter covers when centred on
/// a cell centre: every cell whose centre is within `diameter / 2`.
pub fn disc_stencil(diameter: f64) -> Vec<(isize, isize)> {
    let r = diameter / 2.0;
    let reach = r.floor() as isize;
    let r2 = r * r + 1e-9;
    let mut out = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            if (dr * dr + dc * dc) as f64 <= r2 {
                out.push((dr, dc));
            }
        }
    }
    out
}

/// Number of discs covering each cell.
pub fn coverage_counts(points: impl IntoIterator<Item = Point>, cfg: &RenderConfig) -> Vec<u32> {
    let (w, h) = (cfg.width_px, cfg.height_px);
    let mut centers = vec![0u32; w * h];
    for p in points {
        let (r, c) = point_to_pixel(p, w, h);
        centers[r * w + c] += 1;
    }
    let stencil = disc_stencil(cfg.point_size_px);
    if stencil.len() == 1 {
        return centers;
    }
    let mut counts = vec![0u32; w * h];
    for row in 0..h {
        for col in 0..w {
            let n = centers[row * w + col];
            if n == 0 {
                continue;
            }
            for &(dr, dc) in &stencil {
                let rr = row as isize + dr;
                let cc = col as isize + dc;
                if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w {
                    counts[rr as usize * w + cc as usize] += n;
                }
            }
        }
    }
    counts
}

pub fn render_points(points: impl IntoIterator<Item = Point>, cfg: &RenderConfig) -> InkImage {
    let counts = coverage_counts(points, cfg);
    let keep = 1.0 - cfg.opacity;
    // (1 - opacity)^c for every count that occurs, cached by count.
    let mut ink = Vec::with_capacity(counts.len());
    let mut cache: Vec<f64> = Vec::new();
    for &c in &counts {
        let c = c as usize;
        if c >= cache.len() {
            let start = cache.len();
            cache.extend((start..=c).map(|k| 1.0 - keep.powi(k as i32)));
        }
        ink.push(cache[c]);
    }
    InkImage { width_px: cfg.width_px, height_px: cfg.height_px, ink }
}

pub fn render(points: &[Point], cfg: &RenderConfig) -> InkImage {
    render_points(points.iter().copied(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(ps: f64, op: f64, w: usize, h: usize) -> RenderConfig {
        RenderConfig::new(ps, op, w, h).unwrap()
    }

    #[test]
    fn pixel_mapping() {
        assert_eq!(point_to_pixel(Point::new(0.0, 0.0), 100, 100), (99, 0));
        assert_eq!(point_to_pixel(Point::new(1.0, 1.0), 100, 100), (0, 99));
        assert_eq!(point_to_pixel(Point::new(0.5, 0.5), 10, 10), (5, 5));
    }

    #[test]
    fn single_opaque_pixel() {
        let img = render(&[Point::new(0.5, 0.5)], &cfg(1.0, 1.0, 100, 100));
        assert_eq!(img.get(50, 50), 1.0);
        assert_eq!(img.ink.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn coincident_points_composite() {
        let p = Point::new(0.3, 0.6);
        let img = render(&[p, p], &cfg(1.0, 0.5, 20, 20));
        let (r, c) = point_to_pixel(p, 20, 20);
        assert_eq!(img.get(r, c), 0.75);
    }

    #[test]
    fn disc_shapes() {
        assert_eq!(disc_stencil(1.0), vec![(0, 0)]);
        assert_eq!(disc_stencil(2.0).len(), 5);
        // Symmetric under 90 degree rotation.
        let s = disc_stencil(16.0);
        for &(r, c) in &s {
            assert!(s.contains(&(c, -r)));
        }
    }

    #[test]
    fn gray8_values() {
        let img = InkImage { width_px: 3, height_px: 1, ink: vec![0.0, 1.0, 0.5] };
        assert_eq!(img.to_gray8(), vec![255, 0, 128]);
    }

    #[test]
    fn png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let mut img = InkImage::blank(16, 16);
        img.ink[3] = 1.0;
        img.ink[4] = 0.5;
        img.write_png(&path).unwrap();
        let back = image::open(&path).unwrap();
        assert_eq!(back.color(), image::ColorType::L8);
        let px = back.into_luma8().into_raw();
        assert_eq!(px[0], 255);
        assert_eq!(px[3], 0);
        assert_eq!(px[4], 128);
    }

    #[test]
    fn invalid_configs() {
        assert!(RenderConfig::new(0.5, 0.5, 100, 100).is_err());
        assert!(RenderConfig::new(2.0, 0.0, 100, 100).is_err());
        assert!(RenderConfig::new(2.0, 1.5, 100, 100).is_err());
        assert!(RenderConfig::new(2.0, 0.5, 15, 100).is_err());
    }

    proptest::proptest! {
        #[test]
        fn order_invariant_and_bounded(
            pts in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..60),
            ps in 1.0f64..9.0,
            op in 0.05f64..=1.0,
        ) {
            let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
            let c = cfg(ps, op, 32, 24);
            let a = render(&pts, &c);
            let rev: Vec<Point> = pts.iter().rev().copied().collect();
            proptest::prop_assert_eq!(&a, &render(&rev, &c));
            proptest::prop_assert!(a.ink.iter().all(|&v| (0.0..=1.0).contains(&v)));
            // Sequential "over" compositing agrees with the closed form.
            let counts = coverage_counts(pts.iter().copied(), &c);
            for (&n, &v) in counts.iter().zip(&a.ink) {
                let mut ink = 0.0f64;
                for _ in 0..n { ink += op * (1.0 - ink); }
                proptest::prop_assert!((ink - v).abs() < 1e-12);
            }
            // More opacity never removes ink.
            let denser = render(&pts, &cfg(ps, (op + 0.1).min(1.0), 32, 24));
            proptest::prop_assert!(denser.ink.iter().zip(&a.ink).all(|(d, s)| d >= s));
        }
    }
}
