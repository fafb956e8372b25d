//! Image-level similarity between two saliency maps.

mod report;
mod transport;

pub use report::{ci95_half_width, evaluate, ConfigScores, Evaluator, MetricReport, Scores};
pub use transport::{emd_histograms, transport_cost};

use crate::error::{Error, Result};
use crate::saliency::SaliencyMap;

pub const SSIM_WINDOW: usize = 8;
pub const EMD_FACTOR: usize = 32;

const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// Mean structural similarity over non-overlapping 8×8 windows. Windows at
/// the right and bottom edges are clipped rather than dropped.
pub fn ssim(a: &SaliencyMap, b: &SaliencyMap) -> Result<f64> {
    a.check_shape(b)?;
    let (w, h) = (a.width_px, a.height_px);
    if w == 0 || h == 0 {
        return Err(Error::Empty("empty saliency map".into()));
    }
    let mut total = 0.0;
    let mut windows = 0usize;
    for r0 in (0..h).step_by(SSIM_WINDOW) {
        for c0 in (0..w).step_by(SSIM_WINDOW) {
            let (r1, c1) = ((r0 + SSIM_WINDOW).min(h), (c0 + SSIM_WINDOW).min(w));
            let n = ((r1 - r0) * (c1 - c0)) as f64;
            let (mut sa, mut sb) = (0.0, 0.0);
            for r in r0..r1 {
                for c in c0..c1 {
                    sa += a.get(r, c) as f64;
                    sb += b.get(r, c) as f64;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
            for r in r0..r1 {
                for c in c0..c1 {
                    let (x, y) = (a.get(r, c) as f64 - ma, b.get(r, c) as f64 - mb);
                    vaa += x * x;
                    vbb += y * y;
                    vab += x * y;
                }
            }
            let (vaa, vbb, vab) = (vaa / n, vbb / n, vab / n);
            // With C3 = C2/2 the contrast and structure terms collapse into one.
            total += ((2.0 * ma * mb + C1) * (2.0 * vab + C2)) / ((ma * ma + mb * mb + C1) * (vaa + vbb + C2));
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// Pearson correlation of the flattened maps.
pub fn cc(a: &SaliencyMap, b: &SaliencyMap) -> Result<f64> {
    a.check_shape(b)?;
    let n = a.values.len() as f64;
    let ma = a.values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mb = b.values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.values.iter().zip(&b.values) {
        let (x, y) = (x as f64 - ma, y as f64 - mb);
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::UndefinedCorrelation("a map has zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Values scaled to sum to one.
pub fn to_distribution(values: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::ValueOutOfRange(format!("distribution entry {v}")));
    }
    let sum: f64 = values.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::invalid("map has zero total mass"));
    }
    Ok(values.iter().map(|v| v / sum).collect())
}

fn distributions(a: &SaliencyMap, b: &SaliencyMap) -> Result<(Vec<f64>, Vec<f64>)> {
    a.check_shape(b)?;
    Ok((to_distribution(&a.to_f64())?, to_distribution(&b.to_f64())?))
}

/// Histogram intersection of the sum-normalized maps.
pub fn sim(a: &SaliencyMap, b: &SaliencyMap) -> Result<f64> {
    let (p, q) = distributions(a, b)?;
    Ok(histogram_intersection(&p, &q))
}

pub fn histogram_intersection(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(x, y)| x.min(*y)).sum::<f64>().clamp(0.0, 1.0)
}

/// Jensen-Shannon divergence in bits.
pub fn jsd(a: &SaliencyMap, b: &SaliencyMap) -> Result<f64> {
    let (p, q) = distributions(a, b)?;
    Ok(js_divergence(&p, &q))
}

pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let term = |x: f64, m: f64| if x > 0.0 { x * (x / m).log2() } else { 0.0 };
    let total: f64 = p
        .iter()
        .zip(q)
        .map(|(&x, &y)| {
            let m = 0.5 * (x + y);
            0.5 * term(x, m) + 0.5 * term(y, m)
        })
        .sum();
    total.clamp(0.0, 1.0)
}

/// Block averages over `factor`×`factor` tiles; edge tiles average whatever
/// pixels they hold. Returns (values, width, height).
pub fn block_average(map: &SaliencyMap, factor: usize) -> (Vec<f64>, usize, usize) {
    let (w, h) = (map.width_px, map.height_px);
    let (bw, bh) = (w.div_ceil(factor), h.div_ceil(factor));
    let mut sums = vec![0.0f64; bw * bh];
    let mut counts = vec![0usize; bw * bh];
    for r in 0..h {
        for c in 0..w {
            let k = (r / factor) * bw + c / factor;
            sums[k] += map.get(r, c) as f64;
            counts[k] += 1;
        }
    }
    let avg = sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect();
    (avg, bw, bh)
}

/// Earth mover's distance between the maps after downscaling by 32 per axis,
/// measured in downscaled-pixel units.
pub fn emd(a: &SaliencyMap, b: &SaliencyMap) -> Result<f64> {
    a.check_shape(b)?;
    let (p, w, h) = block_average(a, EMD_FACTOR);
    let (q, _, _) = block_average(b, EMD_FACTOR);
    emd_histograms(&p, &q, w, h)
}
