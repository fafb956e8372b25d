//! Perception weights: per-point saliency lookup, kernel density scores and
//! the adaptive density influence factor.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Point;
use crate::error::{Error, Result};
use crate::filter::{gaussian_blur_xy, Boundary};
use crate::raster::point_to_pixel;
use crate::saliency::SaliencyMap;
use crate::spatial::GridIndex;

/// Kernel contributions beyond this many bandwidths are below `exp(-32)`.
const KDE_CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DensityMethod {
    /// Exact pairwise sums up to `exact_threshold` points, the grid beyond.
    Auto { exact_threshold: usize, grid_resolution: usize },
    Exact,
    Grid { resolution: usize },
}

impl Default for DensityMethod {
    fn default() -> Self {
        DensityMethod::Auto { exact_threshold: 100_000, grid_resolution: 512 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdeMethod {
    Exact,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeInfo {
    pub bandwidth_x: f64,
    pub bandwidth_y: f64,
    pub method: KdeMethod,
    pub grid_resolution: Option<usize>,
}

/// Scott's rule for two dimensions: `σ_axis · n^(-1/6)`.
pub fn scott_bandwidths(points: &[Point]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in points {
        sx += (p.x - mx).powi(2);
        sy += (p.y - my).powi(2);
    }
    let dof = (n - 1.0).max(1.0);
    let factor = n.powf(-1.0 / 6.0);
    ((sx / dof).sqrt() * factor, (sy / dof).sqrt() * factor)
}

fn inv_two_h2(h: f64) -> f64 {
    if h > 0.0 {
        1.0 / (2.0 * h * h)
    } else {
        0.0
    }
}

fn max_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let max = v.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        v.iter_mut().for_each(|x| *x /= max);
    } else {
        v.iter_mut().for_each(|x| *x = 1.0);
    }
    v
}

/// Unnormalized Gaussian KDE at each point, truncated where every term is
/// below `exp(-32)` of the kernel peak.
pub fn exact_kde(points: &[Point], hx: f64, hy: f64) -> Vec<f64> {
    let (ax, ay) = (inv_two_h2(hx), inv_two_h2(hy));
    let reach = KDE_CUTOFF * hx.max(hy);
    let index = GridIndex::new(points, reach);
    points
        .par_iter()
        .map(|&p| {
            let mut acc = 0.0;
            index.for_each_within(p, reach, |j, _| {
                let q = points[j];
                let (dx, dy) = (p.x - q.x, p.y - q.y);
                acc += (-(ax * dx * dx + ay * dy * dy)).exp();
            });
            acc
        })
        .collect()
}

/// KDE approximated on a `resolution²` grid: cloud-in-cell histogram,
/// Gaussian blur at the bandwidth, bilinear readback.
pub fn grid_kde(points: &[Point], hx: f64, hy: f64, resolution: usize) -> Vec<f64> {
    let g = resolution.max(2);
    let gf = g as f64;
    let mut hist = vec![0.0f64; g * g];
    // Cell centres sit at (i + 0.5) / g.
    let locate = |v: f64| {
        let t = (v * gf - 0.5).clamp(0.0, gf - 1.0);
        let i0 = (t.floor() as usize).min(g - 2);
        (i0, t - i0 as f64)
    };
    for p in points {
        let (ix, fx) = locate(p.x);
        let (iy, fy) = locate(p.y);
        hist[iy * g + ix] += (1.0 - fx) * (1.0 - fy);
        hist[iy * g + ix + 1] += fx * (1.0 - fy);
        hist[(iy + 1) * g + ix] += (1.0 - fx) * fy;
        hist[(iy + 1) * g + ix + 1] += fx * fy;
    }
    let blurred = gaussian_blur_xy(&hist, g, g, hx * gf, hy * gf, Boundary::Zero);
    points
        .iter()
        .map(|p| {
            let (ix, fx) = locate(p.x);
            let (iy, fy) = locate(p.y);
            blurred[iy * g + ix] * (1.0 - fx) * (1.0 - fy)
                + blurred[iy * g + ix + 1] * fx * (1.0 - fy)
                + blurred[(iy + 1) * g + ix] * (1.0 - fx) * fy
                + blurred[(iy + 1) * g + ix + 1] * fx * fy
        })
        .collect()
}

/// Density score per point in `(0,1]`, divided by the maximum.
pub fn density_scores(points: &[Point], method: DensityMethod) -> Result<(Vec<f64>, KdeInfo)> {
    if points.len() < 2 {
        return Err(Error::invalid("density needs at least two points"));
    }
    let (hx, hy) = scott_bandwidths(points);
    let grid_res = match method {
        DensityMethod::Exact => None,
        DensityMethod::Grid { resolution } => Some(resolution),
        DensityMethod::Auto { exact_threshold, grid_resolution } => {
            (points.len() > exact_threshold).then_some(grid_resolution)
        }
    };
    let info = KdeInfo {
        bandwidth_x: hx,
        bandwidth_y: hy,
        method: if grid_res.is_some() { KdeMethod::Grid } else { KdeMethod::Exact },
        grid_resolution: grid_res,
    };
    if hx == 0.0 && hy == 0.0 {
        return Ok((vec![1.0; points.len()], info));
    }
    let raw = match grid_res {
        Some(res) => grid_kde(points, hx, hy, res),
        None => exact_kde(points, hx, hy),
    };
    Ok((max_normalize(raw), info))
}

fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Sigmoid calibration of the density influence factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub a: f64,
    pub v0: f64,
}

impl Default for GammaParams {
    fn default() -> Self {
        GammaParams { a: 50.0, v0: 0.05 }
    }
}

pub fn gamma_from_variance(variance: f64, params: GammaParams) -> f64 {
    1.0 / (1.0 + (-params.a * (variance - params.v0)).exp())
}

/// `1 / (1 + exp(-a (v - v0)))` with `v` the variance of the density scores.
pub fn adaptive_gamma(density_scores: &[f64], params: GammaParams) -> Result<f64> {
    if density_scores.is_empty() {
        return Err(Error::Empty("no density scores".into()));
    }
    Ok(gamma_from_variance(population_variance(density_scores), params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionWeights {
    pub weights: Vec<f64>,
    pub gamma_used: f64,
    pub saliency_scores: Vec<f64>,
    pub density_scores: Vec<f64>,
    pub kde: Option<KdeInfo>,
}

impl PerceptionWeights {
    /// `w = max(q_s, γ·q_d)` per point.
    pub fn combine(saliency_scores: Vec<f64>, density_scores: Vec<f64>, gamma: f64) -> Result<Self> {
        if saliency_scores.len() != density_scores.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} saliency scores vs {} density scores",
                saliency_scores.len(),
                density_scores.len()
            )));
        }
        let weights = saliency_scores
            .iter()
            .zip(&density_scores)
            .map(|(&s, &d)| s.max(gamma * d))
            .collect();
        Ok(PerceptionWeights { weights, gamma_used: gamma, saliency_scores, density_scores, kde: None })
    }

    /// Constant weights, mainly for tests and the unweighted reduction.
    pub fn uniform(n: usize, w: f64) -> Self {
        PerceptionWeights {
            weights: vec![w; n],
            gamma_used: 0.0,
            saliency_scores: vec![w; n],
            density_scores: vec![1.0; n],
            kde: None,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Writes `index,x,y,q_s,q_d,w_p` and a JSON sidecar next to it.
    pub fn write_csv(&self, points: &[Point], path: &Path, params: &WeightParams) -> Result<()> {
        if points.len() != self.len() {
            return Err(Error::DimensionMismatch(format!("{} points vs {} weights", points.len(), self.len())));
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut go = || -> std::io::Result<()> {
            writeln!(w, "index,x,y,q_s,q_d,w_p")?;
            for (i, p) in points.iter().enumerate() {
                writeln!(
                    w,
                    "{i},{},{},{},{},{}",
                    p.x, p.y, self.saliency_scores[i], self.density_scores[i], self.weights[i]
                )?;
            }
            w.flush()
        };
        go().map_err(|e| Error::io(path, e))?;
        let sidecar = WeightsSidecar { gamma_used: self.gamma_used, kde: self.kde, params: *params };
        let side = path.with_extension("json");
        std::fs::write(&side, serde_json::to_string(&sidecar)? + "\n").map_err(|e| Error::io(&side, e))
    }

    /// Reads a weights CSV; the sidecar supplies `gamma_used` when present.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse { line: 0, message: format!("{other:?}") },
        })?;
        let (mut qs, mut qd, mut wp) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| -> Result<f64> {
                rec.get(c).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                    line: i + 2,
                    message: format!("column {c} is not a number"),
                })
            };
            qs.push(field(3)?);
            qd.push(field(4)?);
            wp.push(field(5)?);
        }
        let side = path.with_extension("json");
        let (gamma_used, kde) = match std::fs::read_to_string(&side) {
            Ok(s) => {
                let v: serde_json::Value = serde_json::from_str(&s)?;
                (v["gamma_used"].as_f64().unwrap_or(f64::NAN), None)
            }
            Err(_) => (f64::NAN, None),
        };
        Ok(PerceptionWeights { weights: wp, gamma_used, saliency_scores: qs, density_scores: qd, kde })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct WeightParams {
    pub gamma: GammaParams,
    pub density: DensityMethod,
}

#[derive(Serialize)]
struct WeightsSidecar {
    gamma_used: f64,
    kde: Option<KdeInfo>,
    params: WeightParams,
}

/// Nearest-pixel lookup of each point in the aggregate saliency map.
pub fn saliency_scores(points: &[Point], map: &SaliencyMap) -> Vec<f64> {
    points
        .iter()
        .map(|&p| {
            let (r, c) = point_to_pixel(p, map.width_px, map.height_px);
            map.get(r, c) as f64
        })
        .collect()
}

/// Full weight derivation for a dataset against its aggregate saliency map.
/// The map's dimensions define the canvas the points are projected onto.
pub fn perception_weights(
    points: &[Point],
    agg_map: &SaliencyMap,
    canvas: (usize, usize),
    params: &WeightParams,
) -> Result<PerceptionWeights> {
    if (agg_map.width_px, agg_map.height_px) != canvas {
        return Err(Error::DimensionMismatch(format!(
            "saliency map is {}x{} but the canvas is {}x{}",
            agg_map.width_px, agg_map.height_px, canvas.0, canvas.1
        )));
    }
    let qs = saliency_scores(points, agg_map);
    let (qd, kde) = density_scores(points, params.density)?;
    let gamma = adaptive_gamma(&qd, params.gamma)?;
    let mut w = PerceptionWeights::combine(qs, qd, gamma)?;
    w.kde = Some(kde);
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn corners_are_equally_dense() {
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0)];
        let (s, _) = density_scores(&pts, DensityMethod::Exact).unwrap();
        for v in s {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_cluster_beats_isolated_point() {
        let pts = [Point::new(0.0, 0.5), Point::new(0.01, 0.5), Point::new(1.0, 0.5)];
        let (s, info) = density_scores(&pts, DensityMethod::Exact).unwrap();
        assert_eq!(info.bandwidth_y, 0.0);

        // Direct Scott-bandwidth sum as oracle.
        let xs = [0.0f64, 0.01, 1.0];
        let mean = xs.iter().sum::<f64>() / 3.0;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        let h = sd * 3f64.powf(-1.0 / 6.0);
        let raw: Vec<f64> = xs
            .iter()
            .map(|a| xs.iter().map(|b| (-(a - b) * (a - b) / (2.0 * h * h)).exp()).sum())
            .collect();
        let m = raw.iter().cloned().fold(0.0, f64::max);
        for (got, want) in s.iter().zip(raw.iter().map(|r| r / m)) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(s[0] > s[2] && s[1] > s[2]);
    }

    #[test]
    fn identical_points_are_all_one() {
        let pts = vec![Point::new(0.3, 0.3); 5];
        assert_eq!(density_scores(&pts, DensityMethod::Exact).unwrap().0, vec![1.0; 5]);
        assert!(density_scores(&pts[..1], DensityMethod::Exact).is_err());
    }

    fn blob(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = crate::rng::seeded(seed);
        let d = Normal::<f64>::new(0.5, 0.12).unwrap();
        (0..n)
            .map(|_| Point::new(d.sample(&mut rng).clamp(0.0, 1.0), d.sample(&mut rng).clamp(0.0, 1.0)))
            .collect()
    }

    fn brute_force_kde(points: &[Point], hx: f64, hy: f64) -> Vec<f64> {
        let raw: Vec<f64> = points
            .par_iter()
            .map(|p| {
                points
                    .iter()
                    .map(|q| (-((p.x - q.x).powi(2) / (2.0 * hx * hx) + (p.y - q.y).powi(2) / (2.0 * hy * hy))).exp())
                    .sum()
            })
            .collect();
        max_normalize(raw)
    }

    #[test]
    fn truncated_exact_matches_brute_force() {
        let pts = blob(2000, 3);
        let (hx, hy) = scott_bandwidths(&pts);
        let want = brute_force_kde(&pts, hx, hy);
        let (got, _) = density_scores(&pts, DensityMethod::Exact).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_approximation_close_to_exact() {
        let pts = blob(10_000, 11);
        let (hx, hy) = scott_bandwidths(&pts);
        let exact = brute_force_kde(&pts, hx, hy);
        let (grid, info) = density_scores(&pts, DensityMethod::Grid { resolution: 512 }).unwrap();
        assert_eq!(info.method, KdeMethod::Grid);
        let worst = grid.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst <= 0.1, "max abs deviation {worst}");
    }

    #[test]
    fn auto_switches_on_threshold() {
        let pts = blob(50, 1);
        let auto = DensityMethod::Auto { exact_threshold: 10, grid_resolution: 64 };
        assert_eq!(density_scores(&pts, auto).unwrap().1.method, KdeMethod::Grid);
        assert_eq!(density_scores(&pts, DensityMethod::default()).unwrap().1.method, KdeMethod::Exact);
    }

    #[test]
    fn gamma_values() {
        let p = GammaParams::default();
        let g0 = adaptive_gamma(&[0.4, 0.4, 0.4], p).unwrap();
        assert!((g0 - 1.0 / (1.0 + 2.5f64.exp())).abs() < 1e-12);
        assert!((g0 - 0.0759).abs() < 1e-4);
        assert!((gamma_from_variance(0.05, p) - 0.5).abs() < 1e-15);
        let g = gamma_from_variance(0.2, p);
        assert!((g - 1.0 / (1.0 + (-7.5f64).exp())).abs() < 1e-15);
        assert!((g - 0.99945).abs() < 1e-5);
        assert!(adaptive_gamma(&[], p).is_err());
    }

    #[test]
    fn combine_rule() {
        let w = PerceptionWeights::combine(vec![0.8, 0.1], vec![0.4, 0.9], 0.5).unwrap();
        assert_eq!(w.weights[0], 0.8);
        let w = PerceptionWeights::combine(vec![0.1], vec![0.9], 1.0).unwrap();
        assert_eq!(w.weights[0], 0.9);
    }

    #[test]
    fn zero_saliency_uniform_density() {
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0)];
        let map = SaliencyMap::filled(20, 20, 0.0);
        let w = perception_weights(&pts, &map, (20, 20), &WeightParams::default()).unwrap();
        for &v in &w.weights {
            assert!((v - w.gamma_used).abs() < 1e-12);
        }
        assert!(perception_weights(&pts, &map, (21, 20), &WeightParams::default()).is_err());
    }

    #[test]
    fn weights_csv_roundtrip() {
        let pts = [Point::new(0.1, 0.2), Point::new(0.9, 0.4)];
        let w = PerceptionWeights::combine(vec![0.3, 0.6], vec![1.0, 0.25], 0.4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("weights.csv");
        w.write_csv(&pts, &p, &WeightParams::default()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("index,x,y,q_s,q_d,w_p\n0,0.1,0.2,0.3,1,0.4\n"));
        let back = PerceptionWeights::read_csv(&p).unwrap();
        assert_eq!(back.weights, w.weights);
        assert_eq!(back.gamma_used, 0.4);
    }

    proptest::proptest! {
        #[test]
        fn weight_bounds(
            qs in proptest::collection::vec(0.0f64..=1.0, 1..30),
            seed in 0u64..100,
            gamma in 0.0f64..=1.0,
            scale in 0.01f64..=1.0,
        ) {
            let qd: Vec<f64> = qs.iter().enumerate().map(|(i, _)| ((i as u64 * 7919 + seed) % 101) as f64 / 100.0).collect();
            let w = PerceptionWeights::combine(qs.clone(), qd.clone(), gamma).unwrap();
            for i in 0..qs.len() {
                proptest::prop_assert!(w.weights[i] >= qs[i] && w.weights[i] >= gamma * qd[i]);
            }
            let scaled: Vec<f64> = qd.iter().map(|d| d * scale).collect();
            let ws = PerceptionWeights::combine(qs, scaled, gamma).unwrap();
            proptest::prop_assert!(ws.weights.iter().zip(&w.weights).all(|(a, b)| a <= b));
        }

        #[test]
        fn gamma_monotone(v1 in 0.0f64..0.25, v2 in 0.0f64..0.25) {
            let p = GammaParams::default();
            let (lo, hi) = if v1 <= v2 { (v1, v2) } else { (v2, v1) };
            proptest::prop_assert!(gamma_from_variance(lo, p) <= gamma_from_variance(hi, p));
        }
    }
}
