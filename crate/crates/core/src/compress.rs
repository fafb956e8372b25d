//! Perception-aware quad-tree compression and approximate PAwS over it.
//!
//! A box is split into four quadrants at its midpoint while either the
//! Chamfer distance between its points and a uniform draw inside it exceeds
//! `lambda`, or the variance of its points' perception weights exceeds
//! `sigma`. Each evaluation draw is seeded from the box's grid coordinates,
//! so the tree does not depend on traversal order and shrinks monotonically
//! as either threshold grows.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataset::Point;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::samplers::Sample;

/// Symmetric average nearest-neighbour distance between two point sets.
pub fn chamfer(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("chamfer distance of an empty set".into()));
    }
    Ok(0.5 * (mean_nearest(a, b) + mean_nearest(b, a)))
}

fn mean_nearest(from: &[Point], to: &[Point]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|p| to.iter().map(|q| p.dist2(*q)).fold(f64::INFINITY, f64::min).sqrt())
        .sum();
    total / from.len() as f64
}

/// Axis-aligned cell `[x0,x1) × [y0,y1)`, closed on the unit square's far edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub weight: f64,
    pub count: usize,
}

impl QuadBox {
    pub fn contains(&self, p: Point) -> bool {
        let in_x = p.x >= self.x0 && (p.x < self.x1 || (self.x1 >= 1.0 && p.x <= self.x1));
        let in_y = p.y >= self.y0 && (p.y < self.y1 || (self.y1 >= 1.0 && p.y <= self.y1));
        in_x && in_y
    }

    /// Closed-box test, used for synthesized points.
    pub fn covers(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// Quad-tree level, recovered from the side length.
    pub fn depth(&self) -> u32 {
        (1.0 / (self.x1 - self.x0)).log2().round() as u32
    }

    /// Integer grid coordinates at this box's level.
    pub fn grid_coords(&self) -> (u64, u64) {
        let side = self.x1 - self.x0;
        ((self.x0 / side).round() as u64, (self.y0 / side).round() as u64)
    }

    fn uniform(&self, rng: &mut Rng) -> Point {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        Point::new(self.x0 + u * (self.x1 - self.x0), self.y0 + v * (self.y1 - self.y0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionParams {
    pub lambda: f64,
    pub sigma: f64,
    pub seed: u64,
    pub eval_points: usize,
    pub min_leaf: usize,
    pub max_depth: u32,
}

impl PartitionParams {
    pub fn new(lambda: f64, sigma: f64, seed: u64) -> Self {
        PartitionParams { lambda, sigma, seed, eval_points: 64, min_leaf: 4, max_depth: 12 }
    }

    /// Named threshold pairs: low, medium and high compression.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let (l, s) = match name {
            "low" => (0.001, 0.001),
            "medium" => (0.002, 0.001),
            "high" => (0.003, 0.01),
            other => return Err(Error::invalid(format!("unknown compression preset {other:?}"))),
        };
        Ok(Self::new(l, s, seed))
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::invalid(format!(
                "thresholds must be positive, got lambda={} sigma={}",
                self.lambda, self.sigma
            )));
        }
        if self.eval_points == 0 {
            return Err(Error::invalid("eval_points must be at least 1"));
        }
        if self.max_depth > 30 {
            return Err(Error::invalid("max_depth must be at most 30"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub boxes: Vec<QuadBox>,
    pub params: PartitionParams,
}

/// The uniform draw a box is judged against. Depends only on the box's
/// position, its level and the global seed.
pub fn evaluation_draw(depth: u32, ix: u64, iy: u64, count: usize, params: &PartitionParams) -> Vec<Point> {
    let side = 1.0 / (1u64 << depth) as f64;
    let b = QuadBox {
        x0: ix as f64 * side,
        y0: iy as f64 * side,
        x1: (ix + 1) as f64 * side,
        y1: (iy + 1) as f64 * side,
        weight: 0.0,
        count: 0,
    };
    let mut rng = rng::seeded(rng::derive_seed(params.seed, &[depth as u64, ix, iy]));
    (0..count.min(params.eval_points)).map(|_| b.uniform(&mut rng)).collect()
}

fn weight_stats(ix: &[u32], weights: &[f64]) -> (f64, f64) {
    let n = ix.len() as f64;
    let mean = ix.iter().map(|&i| weights[i as usize]).sum::<f64>() / n;
    let var = ix.iter().map(|&i| (weights[i as usize] - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Whether a box with these members fails either homogeneity criterion.
pub fn needs_split(
    members: &[Point],
    member_weights: &[f64],
    depth: u32,
    ix: u64,
    iy: u64,
    params: &PartitionParams,
) -> bool {
    let n = member_weights.len() as f64;
    let mean = member_weights.iter().sum::<f64>() / n;
    let var = member_weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
    if var > params.sigma {
        return true;
    }
    let draw = evaluation_draw(depth, ix, iy, members.len(), params);
    chamfer(members, &draw).map(|d| d > params.lambda).unwrap_or(false)
}

struct Builder<'a> {
    points: &'a [Point],
    weights: &'a [f64],
    params: PartitionParams,
}

const PARALLEL_MIN: usize = 50_000;

impl Builder<'_> {
    fn build(&self, depth: u32, ix: u64, iy: u64, members: Vec<u32>) -> Vec<QuadBox> {
        if members.is_empty() {
            return Vec::new();
        }
        let side = 1.0 / (1u64 << depth) as f64;
        let (x0, y0) = (ix as f64 * side, iy as f64 * side);
        let (x1, y1) = ((ix + 1) as f64 * side, (iy + 1) as f64 * side);
        let (mean, var) = weight_stats(&members, self.weights);
        let leaf = QuadBox { x0, y0, x1, y1, weight: mean, count: members.len() };
        if members.len() <= self.params.min_leaf || depth >= self.params.max_depth {
            return vec![leaf];
        }
        let split = var > self.params.sigma || {
            let pts: Vec<Point> = members.iter().map(|&i| self.points[i as usize]).collect();
            let draw = evaluation_draw(depth, ix, iy, pts.len(), &self.params);
            chamfer(&pts, &draw).expect("non-empty sets") > self.params.lambda
        };
        if !split {
            return vec![leaf];
        }

        let (xm, ym) = (x0 + 0.5 * side, y0 + 0.5 * side);
        let mut quads: [Vec<u32>; 4] = Default::default();
        for &i in &members {
            let p = self.points[i as usize];
            let q = (p.x >= xm) as usize + 2 * (p.y >= ym) as usize;
            quads[q].push(i);
        }
        drop(members);
        let [sw, se, nw, ne] = quads;
        let child = |q: Vec<u32>, dx: u64, dy: u64| self.build(depth + 1, 2 * ix + dx, 2 * iy + dy, q);
        let big = sw.len() + se.len() + nw.len() + ne.len() >= PARALLEL_MIN;
        let (mut a, b, c, d) = if big {
            let ((a, b), (c, d)) = rayon::join(
                || rayon::join(|| child(sw, 0, 0), || child(se, 1, 0)),
                || rayon::join(|| child(nw, 0, 1), || child(ne, 1, 1)),
            );
            (a, b, c, d)
        } else {
            (child(sw, 0, 0), child(se, 1, 0), child(nw, 0, 1), child(ne, 1, 1))
        };
        a.extend(b);
        a.extend(c);
        a.extend(d);
        a
    }
}

/// Builds the compressed representation of `points` with per-point `weights`.
pub fn build_partition(points: &[Point], weights: &[f64], params: &PartitionParams) -> Result<Partition> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::Empty("cannot partition an empty dataset".into()));
    }
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!("{} points vs {} weights", points.len(), weights.len())));
    }
    let builder = Builder { points, weights, params: *params };
    let boxes = builder.build(0, 0, 0, (0..points.len() as u32).collect());
    Ok(Partition { boxes, params: *params })
}

impl Partition {
    /// Index of the box holding `p`, if any.
    pub fn locate(&self, p: Point) -> Option<usize> {
        self.boxes.iter().position(|b| b.contains(p))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut go = || -> std::io::Result<()> {
            writeln!(w, "x0,y0,x1,y1,weight,count")?;
            for b in &self.boxes {
                writeln!(w, "{},{},{},{},{},{}", b.x0, b.y0, b.x1, b.y1, b.weight, b.count)?;
            }
            w.flush()
        };
        go().map_err(|e| Error::io(path, e))?;
        let p = &self.params;
        let side = json!({
            "lambda": p.lambda,
            "sigma": p.sigma,
            "seed": p.seed,
            "eval_points": p.eval_points,
            "min_leaf": p.min_leaf,
            "max_depth": p.max_depth,
            "box_count": self.boxes.len(),
        });
        let sp = path.with_extension("json");
        std::fs::write(&sp, serde_json::to_string_pretty(&side)? + "\n").map_err(|e| Error::io(&sp, e))
    }

    /// Reads a partition CSV; thresholds come from the sidecar when present.
    pub fn read(path: &Path) -> Result<Partition> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "x0,y0,x1,y1,weight,count" => {}
            _ => return Err(Error::Parse { line: 1, message: "expected header x0,y0,x1,y1,weight,count".into() }),
        }
        let mut boxes = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| Error::Parse { line: i + 1, message: m.to_string() };
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let f = |c: usize| cells[c].parse::<f64>().map_err(|_| bad("not a number"));
            let b = QuadBox {
                x0: f(0)?,
                y0: f(1)?,
                x1: f(2)?,
                y1: f(3)?,
                weight: f(4)?,
                count: cells[5].parse().map_err(|_| bad("count is not an integer"))?,
            };
            if !(b.x0 < b.x1 && b.y0 < b.y1 && b.x0 >= 0.0 && b.y0 >= 0.0 && b.x1 <= 1.0 && b.y1 <= 1.0) {
                return Err(bad("box is not a non-empty subset of the unit square"));
            }
            boxes.push(b);
        }
        let side: serde_json::Value = std::fs::read_to_string(path.with_extension("json"))
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or_default();
        let num = |k: &str, d: f64| side[k].as_f64().unwrap_or(d);
        let params = PartitionParams {
            lambda: num("lambda", f64::INFINITY),
            sigma: num("sigma", f64::INFINITY),
            seed: side["seed"].as_u64().unwrap_or(0),
            eval_points: side["eval_points"].as_u64().unwrap_or(64) as usize,
            min_leaf: side["min_leaf"].as_u64().unwrap_or(4) as usize,
            max_depth: side["max_depth"].as_u64().unwrap_or(12) as u32,
        };
        Ok(Partition { boxes, params })
    }
}

/// Approximate PAwS: greedy weighted farthest-first selection over a pool of
/// `reps_per_box` uniform draws per box. A chosen representative is replaced
/// by a fresh draw from the same box. Only the partition is consulted.
pub fn appro_paws(partition: &Partition, k: usize, reps_per_box: usize, seed: u64) -> Result<Sample> {
    if k < 1 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if reps_per_box < 1 {
        return Err(Error::invalid("representatives per box must be at least 1"));
    }
    if partition.boxes.is_empty() {
        return Err(Error::Empty("partition has no boxes".into()));
    }
    let boxes = &partition.boxes;
    let mut rng = rng::seeded(seed);
    let mut pool: Vec<Point> = Vec::with_capacity(boxes.len() * reps_per_box);
    let mut owner: Vec<u32> = Vec::with_capacity(pool.capacity());
    for (bi, b) in boxes.iter().enumerate() {
        for _ in 0..reps_per_box {
            pool.push(b.uniform(&mut rng));
            owner.push(bi as u32);
        }
    }
    let weight: Vec<f64> = owner.iter().map(|&b| boxes[b as usize].weight).collect();
    let mut min_dist = vec![f64::INFINITY; pool.len()];
    let mut chosen: Vec<Point> = Vec::with_capacity(k);

    let mut pick = rng.random_range(0..pool.len());
    loop {
        let newest = pool[pick];
        chosen.push(newest);
        pool[pick] = boxes[owner[pick] as usize].uniform(&mut rng);
        if chosen.len() == k {
            break;
        }
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, (p, md)) in pool.iter().zip(min_dist.iter_mut()).enumerate() {
            if i == pick {
                *md = chosen.iter().map(|c| c.dist(*p)).fold(f64::INFINITY, f64::min);
            } else {
                let d = p.dist(newest);
                if d < *md {
                    *md = d;
                }
            }
            let score = weight[i] * *md;
            if score > best.0 {
                best = (score, i);
            }
        }
        pick = best.1;
    }
    debug_assert_eq!(pool.len(), boxes.len() * reps_per_box);
    let mut s = Sample::synthesized(chosen, "approx", seed);
    s.params.insert("reps_per_box".into(), reps_per_box.into());
    s.params.insert("box_count".into(), boxes.len().into());
    s.params.insert("pool_size".into(), pool.len().into());
    Ok(s)
}
