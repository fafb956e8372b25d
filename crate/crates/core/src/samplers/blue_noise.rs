//! Blue-noise sampling by dart throwing with a shrinking rejection radius.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_k, Sample};
use crate::dataset::{Dataset, Point};
use crate::error::{Error, Result};
use crate::rng;

/// Radii below this are treated as zero so coincident points can be taken.
const MIN_RADIUS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlueNoiseParams {
    /// Initial radius; `None` means `sqrt(1/k)`.
    pub r0: Option<f64>,
    pub max_fail: usize,
    pub shrink: f64,
}

impl Default for BlueNoiseParams {
    fn default() -> Self {
        BlueNoiseParams { r0: None, max_fail: 1000, shrink: 0.7 }
    }
}

/// Hash grid over accepted points with cell side equal to the radius.
struct Accepted {
    cell: f64,
    buckets: std::collections::HashMap<(i64, i64), Vec<Point>>,
}

impl Accepted {
    fn new(cell: f64) -> Self {
        Accepted { cell, buckets: Default::default() }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Point) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(p);
    }

    fn rebuild(&mut self, cell: f64) {
        let all: Vec<Point> = self.buckets.drain().flat_map(|(_, v)| v).collect();
        self.cell = cell;
        for p in all {
            self.insert(p);
        }
    }

    fn clear_of(&self, p: Point, r: f64) -> bool {
        let (cx, cy) = self.key(p);
        let r2 = r * r;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(b) = self.buckets.get(&(cx + dx, cy + dy)) {
                    if b.iter().any(|q| q.dist2(p) < r2) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

pub fn blue_noise(dataset: &Dataset, k: usize, params: &BlueNoiseParams, seed: u64) -> Result<Sample> {
    check_k(k, dataset.len())?;
    if !(params.shrink > 0.0 && params.shrink < 1.0) {
        return Err(Error::invalid(format!("shrink must be in (0,1), got {}", params.shrink)));
    }
    let r0 = params.r0.unwrap_or_else(|| (1.0 / k as f64).sqrt());
    if !(r0 >= 0.0) {
        return Err(Error::invalid(format!("r0 must be non-negative, got {r0}")));
    }
    let pts = dataset.points();
    let mut rng = rng::seeded(seed);
    let mut pool: Vec<usize> = (0..pts.len()).collect();
    let mut chosen = Vec::with_capacity(k);
    let mut r = if r0 < MIN_RADIUS { 0.0 } else { r0 };
    let mut grid = Accepted::new(r.max(MIN_RADIUS));
    let mut fails = 0usize;
    while chosen.len() < k {
        let slot = rng.random_range(0..pool.len());
        let p = pts[pool[slot]];
        if r == 0.0 || grid.clear_of(p, r) {
            chosen.push(pool.swap_remove(slot));
            grid.insert(p);
            fails = 0;
        } else {
            fails += 1;
            if fails >= params.max_fail.max(1) {
                r *= params.shrink;
                if r < MIN_RADIUS {
                    r = 0.0;
                } else {
                    grid.rebuild(r);
                }
                fails = 0;
            }
        }
    }
    let mut s = Sample::from_indices(dataset, chosen, "bluenoise", seed);
    s.params.insert("r0".into(), r0.into());
    s.params.insert("final_radius".into(), r.into());
    Ok(s)
}
