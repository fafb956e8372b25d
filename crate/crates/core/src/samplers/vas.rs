//! Visualization-aware sampling with Expand + Shrink local search.
//!
//! Loss of a sample `S`: `Σ_x φ(min_{y∈S} ‖x − y‖)` with
//! `φ(t) = min(t, ε)²`. A candidate `c` is tried by adding it (expand) and
//! dropping whichever member then costs least to remove (shrink); the swap
//! is kept when the loss strictly drops. Because `φ` saturates at `ε`, every
//! evaluation only touches points within `ε` of the candidate.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_k, Sample};
use crate::dataset::{Dataset, Point};
use crate::error::{Error, Result};
use crate::rng;
use crate::spatial::GridIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VasParams {
    pub epsilon: f64,
    /// Maximum number of full passes over the candidates; 1 = single pass.
    pub max_iters: usize,
}

impl Default for VasParams {
    fn default() -> Self {
        VasParams { epsilon: std::f64::consts::SQRT_2 / 100.0, max_iters: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct VasRun {
    pub sample: Sample,
    /// Loss of the initial subset followed by the loss after each accepted swap.
    pub loss_trace: Vec<f64>,
    pub passes: usize,
}

/// Direct evaluation of the loss, `O(n·|S|)`.
pub fn vas_loss(points: &[Point], sample: &[usize], epsilon: f64) -> f64 {
    points
        .iter()
        .map(|x| {
            let d = sample.iter().map(|&s| x.dist(points[s])).fold(f64::INFINITY, f64::min);
            d.min(epsilon).powi(2)
        })
        .sum()
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

const NONE: usize = usize::MAX;

struct State<'a> {
    pts: &'a [Point],
    eps: f64,
    data: GridIndex,
    in_sample: Vec<bool>,
    members: Vec<usize>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    n1: Vec<usize>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    removal: Vec<f64>,
    order: BTreeSet<Key>,
    loss: f64,
    stamp: Vec<u32>,
    epoch: u32,
}

impl<'a> State<'a> {
    fn phi(&self, t: f64) -> f64 {
        let t = t.min(self.eps);
        t * t
    }

    fn cell(&self, p: Point) -> (i64, i64) {
        ((p.x / self.eps).floor() as i64, (p.y / self.eps).floor() as i64)
    }

    fn new(pts: &'a [Point], eps: f64, initial: &[usize]) -> Self {
        let n = pts.len();
        let mut s = State {
            pts,
            eps,
            data: GridIndex::new(pts, eps),
            in_sample: vec![false; n],
            members: initial.to_vec(),
            buckets: HashMap::new(),
            n1: vec![NONE; n],
            d1: vec![eps; n],
            d2: vec![eps; n],
            removal: vec![0.0; n],
            order: BTreeSet::new(),
            loss: 0.0,
            stamp: vec![0; n],
            epoch: 0,
        };
        for &y in initial {
            s.in_sample[y] = true;
            let c = s.cell(pts[y]);
            s.buckets.entry(c).or_default().push(y);
        }
        for x in 0..n {
            s.locate(x);
            s.loss += s.phi(s.d1[x]);
        }
        for &y in initial {
            s.removal[y] = s.removal_cost(y);
            s.order.insert(Key(s.removal[y], y));
        }
        s
    }

    /// Recomputes the nearest and second-nearest members within ε of `x`.
    fn locate(&mut self, x: usize) {
        let p = self.pts[x];
        let (cx, cy) = self.cell(p);
        let (mut b1, mut i1, mut b2) = (self.eps, NONE, self.eps);
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(list) = self.buckets.get(&(cx + dx, cy + dy)) {
                    for &y in list {
                        let d = p.dist(self.pts[y]);
                        if d < b1 || (d == b1 && i1 != NONE && y < i1) {
                            b2 = b1;
                            b1 = d;
                            i1 = y;
                        } else if d < b2 {
                            b2 = d;
                        }
                    }
                }
            }
        }
        self.n1[x] = if b1 < self.eps { i1 } else { NONE };
        self.d1[x] = b1;
        self.d2[x] = b2;
    }

    /// Loss increase from removing member `y` alone.
    fn removal_cost(&self, y: usize) -> f64 {
        let mut acc = 0.0;
        self.data.for_each_within(self.pts[y], self.eps, |x, _| {
            if self.n1[x] == y {
                acc += self.phi(self.d2[x]) - self.phi(self.d1[x]);
            }
        });
        acc
    }

    /// Loss after adding `c` and then dropping the cheapest member, plus
    /// the member that would be dropped.
    fn evaluate(&self, c: usize) -> (f64, usize) {
        let pc = self.pts[c];
        let mut delta_add = 0.0;
        let mut adj: HashMap<usize, f64> = HashMap::new();
        self.data.for_each_within(pc, self.eps, |x, d2c| {
            let dc = d2c.sqrt();
            let (d1, d2) = (self.d1[x], self.d2[x]);
            if dc < d1 {
                delta_add += self.phi(dc) - self.phi(d1);
                if self.n1[x] != NONE {
                    *adj.entry(self.n1[x]).or_default() -= self.phi(d2) - self.phi(d1);
                }
                *adj.entry(c).or_default() += self.phi(d1) - self.phi(dc);
            } else if dc < d2 && self.n1[x] != NONE {
                *adj.entry(self.n1[x]).or_default() += self.phi(dc) - self.phi(d2);
            }
        });
        let mut best = Key(adj.get(&c).copied().unwrap_or(0.0), c);
        if let Some(k) = self.order.iter().find(|k| !adj.contains_key(&k.1)) {
            best = best.min(*k);
        }
        for (&y, &dv) in &adj {
            if y != c {
                best = best.min(Key(self.removal[y] + dv, y));
            }
        }
        (self.loss + delta_add + best.0, best.1)
    }

    fn swap(&mut self, add: usize, remove: usize) {
        self.epoch += 1;
        let mut touched = Vec::new();
        for centre in [add, remove] {
            let epoch = self.epoch;
            let stamp = &mut self.stamp;
            self.data.for_each_within(self.pts[centre], self.eps, |x, _| {
                if stamp[x] != epoch {
                    stamp[x] = epoch;
                    touched.push(x);
                }
            });
        }
        touched.sort_unstable();

        self.in_sample[add] = true;
        self.in_sample[remove] = false;
        let slot = self.members.iter().position(|&m| m == remove).expect("member");
        self.members[slot] = add;
        let rc = self.cell(self.pts[remove]);
        if let Some(list) = self.buckets.get_mut(&rc) {
            list.retain(|&m| m != remove);
        }
        let ac = self.cell(self.pts[add]);
        self.buckets.entry(ac).or_default().push(add);

        let mut dirty: Vec<usize> = vec![add];
        for &x in &touched {
            if self.n1[x] != NONE {
                dirty.push(self.n1[x]);
            }
            self.loss -= self.phi(self.d1[x]);
            self.locate(x);
            self.loss += self.phi(self.d1[x]);
            if self.n1[x] != NONE {
                dirty.push(self.n1[x]);
            }
        }
        dirty.sort_unstable();
        dirty.dedup();
        self.order.remove(&Key(self.removal[remove], remove));
        for y in dirty {
            if y == remove || !self.in_sample[y] {
                continue;
            }
            if y != add {
                self.order.remove(&Key(self.removal[y], y));
            }
            self.removal[y] = self.removal_cost(y);
            self.order.insert(Key(self.removal[y], y));
        }
    }
}

pub fn vas_es(dataset: &Dataset, k: usize, params: &VasParams, seed: u64) -> Result<VasRun> {
    check_k(k, dataset.len())?;
    if !(params.epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {}", params.epsilon)));
    }
    let pts = dataset.points();
    let mut rng = rng::seeded(seed);
    let initial = rand::seq::index::sample(&mut rng, pts.len(), k).into_vec();
    let mut state = State::new(pts, params.epsilon, &initial);
    let mut trace = vec![state.loss];
    let mut candidates: Vec<usize> = (0..pts.len()).collect();
    let mut passes = 0;
    while passes < params.max_iters.max(1) && k < pts.len() {
        passes += 1;
        candidates.shuffle(&mut rng);
        let mut accepted = 0usize;
        for &c in &candidates {
            if state.in_sample[c] {
                continue;
            }
            let (new_loss, drop) = state.evaluate(c);
            if drop != c && new_loss < state.loss - 1e-12 * (1.0 + state.loss) {
                state.swap(c, drop);
                trace.push(state.loss);
                accepted += 1;
            }
        }
        if accepted == 0 {
            break;
        }
    }
    let mut sample = Sample::from_indices(dataset, state.members.clone(), "vas", seed);
    sample.params.insert("passes".into(), passes.into());
    sample.params.insert("final_loss".into(), state.loss.into());
    Ok(VasRun { sample, loss_trace: trace, passes })
}
