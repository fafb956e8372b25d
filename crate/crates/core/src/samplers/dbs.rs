//! Density-biased sampling: selection probability proportional to the
//! distance to the K-th nearest neighbour, so sparse regions are favoured.

use rand::Rng as _;
use rayon::prelude::*;

use super::{check_k, Sample};
use crate::dataset::{Dataset, Point};
use crate::error::{Error, Result};
use crate::rng;
use crate::spatial::GridIndex;

/// Distance from every point to its `neighbors`-th nearest other point.
pub fn knn_distances(points: &[Point], neighbors: usize) -> Vec<f64> {
    let index = GridIndex::with_density(points, neighbors.max(4));
    points
        .par_iter()
        .enumerate()
        .map(|(i, &p)| index.kth_nearest_distance(p, neighbors, Some(i)).unwrap_or(0.0))
        .collect()
}

pub fn dbs(dataset: &Dataset, k: usize, neighbors: usize, seed: u64) -> Result<Sample> {
    check_k(k, dataset.len())?;
    if neighbors < 1 || neighbors >= dataset.len() {
        return Err(Error::invalid(format!(
            "neighbour count K={neighbors} must be in [1, {})",
            dataset.len()
        )));
    }
    let dist = knn_distances(dataset.points(), neighbors);
    let mut rng = rng::seeded(seed);
    // Efraimidis-Spirakis: the k largest keys u^(1/w) are a weighted draw
    // without replacement. Zero-weight points rank after all positive ones,
    // in random order.
    let mut keyed: Vec<(bool, f64, usize)> = dist
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = 1.0 - rng.random::<f64>();
            if w > 0.0 {
                (true, u.ln() / w, i)
            } else {
                (false, u, i)
            }
        })
        .collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    let indices = keyed.into_iter().take(k).map(|(_, _, i)| i).collect();
    let mut s = Sample::from_indices(dataset, indices, "dbs", seed);
    s.params.insert("neighbors".into(), neighbors.into());
    Ok(s)
}
