//! Saliency maps: the built-in center-surround model, the SALF file format,
//! and pointwise-max aggregation across stimulus configurations.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Point;
use crate::error::{Error, Result};
use crate::filter::{gaussian_blur, Boundary};
use crate::raster::{render, InkImage, RenderConfig};

/// Per-pixel attention values in `[0,1]`, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub width_px: usize,
    pub height_px: usize,
    pub values: Vec<f32>,
}

impl SaliencyMap {
    pub fn new(width_px: usize, height_px: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width_px * height_px {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width_px}x{height_px} map",
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ValueOutOfRange(format!("saliency value {v} at index {i}")));
        }
        Ok(SaliencyMap { width_px, height_px, values })
    }

    pub fn filled(width_px: usize, height_px: usize, value: f32) -> Self {
        SaliencyMap { width_px, height_px, values: vec![value; width_px * height_px] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width_px + col]
    }

    pub fn same_shape(&self, other: &SaliencyMap) -> bool {
        self.width_px == other.width_px && self.height_px == other.height_px
    }

    pub fn check_shape(&self, other: &SaliencyMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width_px, self.height_px, other.width_px, other.height_px
            )))
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

const SALF_MAGIC: &[u8] = b"SALF1\n";
const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

pub fn encode_salf(map: &SaliencyMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 4 * map.values.len());
    out.extend_from_slice(SALF_MAGIC);
    out.extend_from_slice(format!("{} {}\n", map.width_px, map.height_px).as_bytes());
    for v in &map.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take_line<'a>(bytes: &'a [u8], what: &str) -> Result<(&'a [u8], &'a [u8])> {
    match bytes.iter().position(|&b| b == b'\n') {
        Some(i) => Ok((&bytes[..i], &bytes[i + 1..])),
        None if bytes.is_empty() => Err(Error::UnexpectedEof),
        None => Err(Error::MalformedHeader(format!("unterminated {what} line"))),
    }
}

pub fn decode_salf(bytes: &[u8]) -> Result<SaliencyMap> {
    if bytes.len() < SALF_MAGIC.len() {
        return Err(if SALF_MAGIC.starts_with(bytes) {
            Error::UnexpectedEof
        } else {
            Error::MalformedHeader("missing SALF1 magic".into())
        });
    }
    if &bytes[..SALF_MAGIC.len()] != SALF_MAGIC {
        return Err(Error::MalformedHeader("missing SALF1 magic".into()));
    }
    let (dims, body) = take_line(&bytes[SALF_MAGIC.len()..], "dimension")?;
    let dims = std::str::from_utf8(dims).map_err(|_| Error::MalformedHeader("non-ASCII dimensions".into()))?;
    let parsed: Vec<usize> = dims
        .split(' ')
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::MalformedHeader(format!("bad dimension line {dims:?}")))?;
    let [width, height] = parsed[..] else {
        return Err(Error::MalformedHeader(format!("bad dimension line {dims:?}")));
    };
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    if body.len() < expected {
        return Err(Error::UnexpectedEof);
    }
    if body.len() > expected {
        return Err(Error::DimensionMismatch(format!(
            "{} trailing bytes after {width}x{height} values",
            body.len() - expected
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    SaliencyMap::new(width, height, values)
}

pub fn store_map(map: &SaliencyMap, path: &Path) -> Result<()> {
    fs::write(path, encode_salf(map)).map_err(|e| Error::io(path, e))
}

/// Loads a SALF file, or an 8/16-bit grayscale PNG scaled to `[0,1]`.
pub fn load_map(path: &Path) -> Result<SaliencyMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(PNG_MAGIC) {
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let values = match img {
            image::DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
            image::DynamicImage::ImageLuma16(g) => g.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
            other => {
                return Err(Error::invalid(format!(
                    "saliency PNG must be 8- or 16-bit grayscale, got {:?}",
                    other.color()
                )))
            }
        };
        return SaliencyMap::new(w, h, values);
    }
    decode_salf(&bytes)
}

/// Anything that maps a rendered scatterplot to a saliency map.
pub trait SaliencyModel: Sync {
    fn name(&self) -> &str;
    fn saliency(&self, img: &InkImage) -> SaliencyMap;
}

/// Multi-scale center-surround contrast: the sum over scale pairs of
/// `|G_c * img − G_s * img|`, divided by its maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSurround {
    pub scale_pairs: Vec<(f64, f64)>,
}

impl Default for CenterSurround {
    fn default() -> Self {
        CenterSurround { scale_pairs: vec![(1.0, 4.0), (2.0, 8.0), (4.0, 16.0)] }
    }
}

impl CenterSurround {
    /// Unnormalized contrast response.
    pub fn contrast(&self, img: &InkImage) -> Vec<f64> {
        let (w, h) = (img.width_px, img.height_px);
        let mut sigmas: Vec<f64> = self.scale_pairs.iter().flat_map(|&(c, s)| [c, s]).collect();
        sigmas.sort_by(f64::total_cmp);
        sigmas.dedup();
        let blurred: Vec<Vec<f64>> = sigmas
            .iter()
            .map(|&s| gaussian_blur(&img.ink, w, h, s, Boundary::Reflect))
            .collect();
        let lookup = |s: f64| &blurred[sigmas.iter().position(|&x| x == s).expect("sigma cached")];
        let mut acc = vec![0.0f64; w * h];
        for &(c, s) in &self.scale_pairs {
            let (gc, gs) = (lookup(c), lookup(s));
            for ((a, x), y) in acc.iter_mut().zip(gc).zip(gs) {
                *a += (x - y).abs();
            }
        }
        acc
    }
}

impl SaliencyModel for CenterSurround {
    fn name(&self) -> &str {
        "builtin"
    }

    fn saliency(&self, img: &InkImage) -> SaliencyMap {
        let acc = self.contrast(img);
        let max = acc.iter().cloned().fold(0.0f64, f64::max);
        // Flat images carry no contrast; rounding noise below this is zero.
        let values = if max <= 1e-12 {
            vec![0.0; acc.len()]
        } else {
            acc.iter().map(|&v| (v / max) as f32).collect()
        };
        SaliencyMap { width_px: img.width_px, height_px: img.height_px, values }
    }
}

/// Pointwise maximum over maps of identical shape.
pub fn aggregate(maps: &[SaliencyMap]) -> Result<SaliencyMap> {
    let (first, rest) = maps.split_first().ok_or_else(|| Error::Empty("no maps to aggregate".into()))?;
    let mut out = first.clone();
    for m in rest {
        out.check_shape(m)?;
        for (o, &v) in out.values.iter_mut().zip(&m.values) {
            *o = o.max(v);
        }
    }
    Ok(out)
}

/// Point sizes × opacities used to render stimuli.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusGrid {
    pub point_sizes: Vec<f64>,
    pub opacities: Vec<f64>,
}

impl Default for StimulusGrid {
    fn default() -> Self {
        StimulusGrid { point_sizes: vec![2.0, 4.0, 8.0, 16.0], opacities: vec![0.1, 0.4, 0.7, 1.0] }
    }
}

impl StimulusGrid {
    pub fn single(point_size: f64, opacity: f64) -> Self {
        StimulusGrid { point_sizes: vec![point_size], opacities: vec![opacity] }
    }

    pub fn len(&self) -> usize {
        self.point_sizes.len() * self.opacities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All configurations, point size major.
    pub fn configs(&self, width_px: usize, height_px: usize) -> Result<Vec<RenderConfig>> {
        if self.is_empty() {
            return Err(Error::Empty("stimulus grid has no configurations".into()));
        }
        self.point_sizes
            .iter()
            .flat_map(|&ps| self.opacities.iter().map(move |&op| RenderConfig::new(ps, op, width_px, height_px)))
            .collect()
    }
}

/// Renders the points under every grid configuration, runs the model on each
/// render and keeps the per-pixel maximum.
pub fn aggregate_saliency_for(
    points: &[Point],
    grid: &StimulusGrid,
    width_px: usize,
    height_px: usize,
    model: &dyn SaliencyModel,
) -> Result<SaliencyMap> {
    let configs = grid.configs(width_px, height_px)?;
    let maps: Vec<SaliencyMap> = configs
        .par_iter()
        .map(|cfg| model.saliency(&render(points, cfg)))
        .collect();
    aggregate(&maps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_img(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> InkImage {
        let mut img = InkImage::blank(w, h);
        for r in 0..h {
            for c in 0..w {
                img.ink[r * w + c] = f(r, c);
            }
        }
        img
    }

    #[test]
    fn blank_image_has_no_saliency() {
        let m = CenterSurround::default().saliency(&InkImage::blank(40, 30));
        assert!(m.values.iter().all(|&v| v == 0.0));
    }

    // Direct 2-D evaluation of Σ |G_c − G_s| with mirrored indexing.
    fn brute_contrast(img: &InkImage, pairs: &[(f64, f64)]) -> Vec<f64> {
        let (w, h) = (img.width_px, img.height_px);
        let fold = |i: isize, n: usize| {
            let m = i.rem_euclid(2 * n as isize) as usize;
            if m >= n { 2 * n - 1 - m } else { m }
        };
        let blur_at = |r: usize, c: usize, sigma: f64| {
            let rad = (3.0 * sigma).ceil() as isize;
            let g = |t: isize| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp();
            let norm: f64 = (-rad..=rad).map(g).sum();
            let mut acc = 0.0;
            for dr in -rad..=rad {
                for dc in -rad..=rad {
                    let v = img.get(fold(r as isize + dr, h), fold(c as isize + dc, w));
                    acc += g(dr) * g(dc) * v;
                }
            }
            acc / (norm * norm)
        };
        let mut out = vec![0.0; w * h];
        for r in 0..h {
            for c in 0..w {
                out[r * w + c] = pairs.iter().map(|&(a, b)| (blur_at(r, c, a) - blur_at(r, c, b)).abs()).sum();
            }
        }
        out
    }

    #[test]
    fn single_pixel_peaks_at_itself() {
        let (w, h, pr, pc) = (25, 19, 6, 13);
        let img = small_img(w, h, |r, c| if (r, c) == (pr, pc) { 1.0 } else { 0.0 });
        let model = CenterSurround::default();
        let want = brute_contrast(&img, &model.scale_pairs);
        let got = model.contrast(&img);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        let argmax = |v: &[f64]| (0..v.len()).max_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
        assert_eq!(argmax(&want), pr * w + pc);
        let map = model.saliency(&img);
        assert_eq!(map.get(pr, pc), 1.0);
        assert!(map.values.iter().all(|&v| v <= 1.0));
    }

    #[test]
    fn rotation_equivariance() {
        let n = 33;
        let img = small_img(n, n, |r, c| ((r * 7 + c * 3) % 5) as f64 / 4.0 * ((r + c) % 2) as f64);
        let rot = small_img(n, n, |r, c| img.get(n - 1 - c, r));
        let model = CenterSurround::default();
        let a = model.saliency(&img);
        let b = model.saliency(&rot);
        for r in 0..n {
            for c in 0..n {
                assert!((b.get(r, c) - a.get(n - 1 - c, r)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn constant_offset_invariance() {
        let img = small_img(24, 20, |r, c| if (r / 5 + c / 5) % 2 == 0 { 0.6 } else { 0.1 });
        let shifted = small_img(24, 20, |r, c| img.get(r, c) + 0.3);
        let model = CenterSurround::default();
        let (a, b) = (model.saliency(&img), model.saliency(&shifted));
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn salf_roundtrip_and_errors() {
        let m = SaliencyMap::new(3, 2, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.125]).unwrap();
        let bytes = encode_salf(&m);
        assert_eq!(&bytes[..10], b"SALF1\n3 2\n");
        assert_eq!(decode_salf(&bytes).unwrap(), m);

        let mut neg = bytes.clone();
        neg[10..14].copy_from_slice(&(-0.5f32).to_le_bytes());
        assert!(matches!(decode_salf(&neg), Err(Error::ValueOutOfRange(_))));
        assert!(decode_salf(&neg).unwrap_err().to_string().contains("value out of range"));

        let err = decode_salf(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::UnexpectedEof));
        assert_eq!(err.to_string(), "unexpected end of data");

        assert!(matches!(decode_salf(b"SALF2\n3 2\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_salf(b"SALF1\n3 x\n"), Err(Error::MalformedHeader(_))));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(decode_salf(&long), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn png_maps_load() {
        let dir = tempfile::tempdir().unwrap();
        let p8 = dir.path().join("m8.png");
        image::save_buffer(&p8, &[0u8, 51, 255, 102], 2, 2, image::ExtendedColorType::L8).unwrap();
        let m = load_map(&p8).unwrap();
        assert_eq!(m.values, vec![0.0, 0.2, 1.0, 0.4]);

        let p16 = dir.path().join("m16.png");
        let raw: Vec<u8> = [0u16, 65535].iter().flat_map(|v| v.to_be_bytes()).collect();
        image::save_buffer(&p16, &raw, 2, 1, image::ExtendedColorType::L16).unwrap();
        assert_eq!(load_map(&p16).unwrap().values, vec![0.0, 1.0]);
    }

    #[test]
    fn aggregation() {
        let a = SaliencyMap::filled(4, 4, 0.2);
        let b = SaliencyMap::filled(4, 4, 0.7);
        assert_eq!(aggregate(&[a.clone(), b.clone()]).unwrap(), b);
        assert_eq!(aggregate(&[a.clone()]).unwrap(), a);
        let mut h1 = SaliencyMap::filled(4, 4, 0.0);
        let mut h2 = SaliencyMap::filled(4, 4, 0.0);
        h1.values[1] = 1.0;
        h2.values[9] = 0.5;
        let u = aggregate(&[h1, h2]).unwrap();
        assert_eq!(u.values[1], 1.0);
        assert_eq!(u.values[9], 0.5);
        assert_eq!(u.values.iter().filter(|&&v| v > 0.0).count(), 2);
        assert!(aggregate(&[]).is_err());
        assert!(aggregate(&[a, SaliencyMap::filled(4, 5, 0.0)]).is_err());
    }

    #[test]
    fn grid_configs() {
        let g = StimulusGrid::default();
        assert_eq!(g.len(), 16);
        assert_eq!(g.configs(100, 80).unwrap().len(), 16);
        assert!(StimulusGrid { point_sizes: vec![], opacities: vec![0.5] }.configs(100, 80).is_err());
    }

    #[test]
    fn single_config_aggregate_is_model_output() {
        let pts = [Point::new(0.2, 0.3), Point::new(0.7, 0.8), Point::new(0.5, 0.5)];
        let model = CenterSurround::default();
        let agg = aggregate_saliency_for(&pts, &StimulusGrid::single(4.0, 0.4), 64, 48, &model).unwrap();
        let cfg = RenderConfig::new(4.0, 0.4, 64, 48).unwrap();
        assert_eq!(agg, model.saliency(&render(&pts, &cfg)));
    }

    proptest::proptest! {
        #[test]
        fn aggregate_is_a_semilattice(
            a in proptest::collection::vec(0.0f32..=1.0, 12),
            b in proptest::collection::vec(0.0f32..=1.0, 12),
            c in proptest::collection::vec(0.0f32..=1.0, 12),
        ) {
            let m = |v: &Vec<f32>| SaliencyMap::new(4, 3, v.clone()).unwrap();
            let (a, b, c) = (m(&a), m(&b), m(&c));
            let ab = aggregate(&[a.clone(), b.clone()]).unwrap();
            proptest::prop_assert_eq!(&ab, &aggregate(&[b.clone(), a.clone()]).unwrap());
            proptest::prop_assert_eq!(&aggregate(&[a.clone(), a.clone()]).unwrap(), &a);
            let left = aggregate(&[ab, c.clone()]).unwrap();
            let right = aggregate(&[a, aggregate(&[b, c]).unwrap()]).unwrap();
            proptest::prop_assert_eq!(left, right);
        }

        #[test]
        fn salf_roundtrip(w in 1usize..8, h in 1usize..8, seed in 0u64..1000) {
            let values: Vec<f32> = (0..w * h).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f32 / 999.0).collect();
            let m = SaliencyMap::new(w, h, values).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.salf");
            store_map(&m, &p).unwrap();
            let back = load_map(&p).unwrap();
            for (x, y) in m.values.iter().zip(&back.values) {
                proptest::prop_assert!((x - y).abs() <= 1e-7);
            }
        }
    }
}
