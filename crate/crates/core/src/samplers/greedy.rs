//! Weighted farthest-first traversal, the shared engine behind PAwS and
//! Max-Min (GMM).
//!
//! Each step adds `argmax_y w_y · min_{x∈S} d(y, x)` over unselected points.
//! The min-distance cache is refreshed only against the newly added point,
//! giving `O(kn)` overall. Ties go to the lowest index.

use rayon::prelude::*;

use crate::dataset::Point;

const CHUNK: usize = 16 * 1024;

pub(crate) struct Traversal<'a> {
    points: &'a [Point],
    weights: Option<&'a [f64]>,
    min_dist: Vec<f64>,
    selected: Vec<bool>,
    order: Vec<usize>,
}

#[derive(Clone, Copy)]
struct Best {
    score: f64,
    index: usize,
}

impl Best {
    const NONE: Best = Best { score: f64::NEG_INFINITY, index: usize::MAX };

    #[inline]
    fn pick(a: Best, b: Best) -> Best {
        if b.score > a.score || (b.score == a.score && b.index < a.index) {
            b
        } else {
            a
        }
    }
}

impl<'a> Traversal<'a> {
    pub(crate) fn new(points: &'a [Point], weights: Option<&'a [f64]>) -> Self {
        let n = points.len();
        Traversal {
            points,
            weights,
            min_dist: vec![f64::INFINITY; n],
            selected: vec![false; n],
            order: Vec::new(),
        }
    }

    #[cfg(test)]
    pub(crate) fn min_dist(&self) -> &[f64] {
        &self.min_dist
    }

    #[cfg(test)]
    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    /// Adds `index` to the sample and returns the next greedy choice, if any
    /// unselected point remains.
    pub(crate) fn add(&mut self, index: usize) -> Option<usize> {
        debug_assert!(!self.selected[index]);
        self.selected[index] = true;
        self.min_dist[index] = 0.0;
        self.order.push(index);
        let newest = self.points[index];
        let points = self.points;
        let weights = self.weights;

        let best = self
            .min_dist
            .par_chunks_mut(CHUNK)
            .zip(self.selected.par_chunks(CHUNK))
            .enumerate()
            .map(|(c, (dist, sel))| {
                let base = c * CHUNK;
                let mut best = Best::NONE;
                for (j, (d, &s)) in dist.iter_mut().zip(sel).enumerate() {
                    if s {
                        continue;
                    }
                    let i = base + j;
                    let nd = points[i].dist(newest);
                    if nd < *d {
                        *d = nd;
                    }
                    let score = match weights {
                        Some(w) => w[i] * *d,
                        None => *d,
                    };
                    if score > best.score {
                        best = Best { score, index: i };
                    }
                }
                best
            })
            .reduce(|| Best::NONE, Best::pick);
        (best.index != usize::MAX).then_some(best.index)
    }

    /// Runs the traversal from `start` until `k` points are selected.
    pub(crate) fn run(mut self, start: usize, k: usize) -> Vec<usize> {
        let mut next = Some(start);
        while self.order.len() < k {
            match next {
                Some(i) => next = self.add(i),
                None => break,
            }
        }
        self.order
    }
}

pub(crate) fn farthest_first(points: &[Point], weights: Option<&[f64]>, k: usize, start: usize) -> Vec<usize> {
    Traversal::new(points, weights).run(start, k)
}
