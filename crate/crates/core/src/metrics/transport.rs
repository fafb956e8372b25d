//! Exact balanced optimal transport by the transportation simplex method.
//!
//! The basis is a spanning tree over row and column nodes. Each pivot
//! recomputes node potentials from the tree, prices cells in blocks, and
//! pushes flow around the cycle closed by the entering cell. Long runs of
//! degenerate pivots switch pricing and ratio-test ties to Bland's rule.

use crate::error::{Error, Result};
use crate::metrics::to_distribution;

/// Minimal cost of moving `supply` onto `demand`, both with equal totals.
pub fn transport_cost(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<f64> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Ok(0.0);
    }
    if supply.iter().chain(demand).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Solver("masses must be finite and non-negative".into()));
    }
    let mut solver = Simplex::new(supply, demand, &cost);
    solver.run()?;
    Ok(solver.total_cost())
}

struct Simplex<'a, F> {
    m: usize,
    n: usize,
    cost: &'a F,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    // Tree scratch, rebuilt each pivot.
    adj_start: Vec<usize>,
    adj: Vec<(usize, usize)>,
    parent: Vec<(usize, usize)>,
    depth: Vec<usize>,
    pot: Vec<f64>,
    queue: Vec<usize>,
    cursor: usize,
}

const NONE: usize = usize::MAX;

impl<'a, F: Fn(usize, usize) -> f64> Simplex<'a, F> {
    fn new(supply: &[f64], demand: &[f64], cost: &'a F) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let (mut s, mut d) = (supply.to_vec(), demand.to_vec());
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        // Northwest corner start: always exactly m+n-1 basic cells.
        loop {
            let x = s[i].min(d[j]);
            cells.push((i, j));
            flow.push(x);
            s[i] -= x;
            d[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (i < m - 1 && s[i] <= d[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        let nodes = m + n;
        Simplex {
            m,
            n,
            cost,
            cells,
            flow,
            adj_start: vec![0; nodes + 1],
            adj: vec![(0, 0); 2 * (nodes - 1)],
            parent: vec![(NONE, NONE); nodes],
            depth: vec![0; nodes],
            pot: vec![0.0; nodes],
            queue: Vec::with_capacity(nodes),
            cursor: 0,
        }
    }

    fn total_cost(&self) -> f64 {
        self.cells.iter().zip(&self.flow).map(|(&(i, j), &x)| x * (self.cost)(i, j)).sum()
    }

    fn rebuild_tree(&mut self) -> Result<()> {
        let m = self.m;
        let nodes = m + self.n;
        self.adj_start.iter_mut().for_each(|v| *v = 0);
        for &(i, j) in &self.cells {
            self.adj_start[i + 1] += 1;
            self.adj_start[m + j + 1] += 1;
        }
        for k in 0..nodes {
            self.adj_start[k + 1] += self.adj_start[k];
        }
        let mut fill = self.adj_start.clone();
        for (b, &(i, j)) in self.cells.iter().enumerate() {
            self.adj[fill[i]] = (m + j, b);
            fill[i] += 1;
            self.adj[fill[m + j]] = (i, b);
            fill[m + j] += 1;
        }
        self.parent.iter_mut().for_each(|p| *p = (NONE, NONE));
        self.queue.clear();
        self.queue.push(0);
        self.parent[0] = (0, NONE);
        self.depth[0] = 0;
        self.pot[0] = 0.0;
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head];
            head += 1;
            for k in self.adj_start[u]..self.adj_start[u + 1] {
                let (v, b) = self.adj[k];
                if self.parent[v].0 != NONE {
                    continue;
                }
                let (i, j) = self.cells[b];
                // u_i + v_j = c_ij on basic cells.
                self.pot[v] = (self.cost)(i, j) - self.pot[u];
                self.parent[v] = (u, b);
                self.depth[v] = self.depth[u] + 1;
                self.queue.push(v);
            }
        }
        if self.queue.len() != nodes {
            return Err(Error::Solver("basis is not a spanning tree".into()));
        }
        Ok(())
    }

    fn reduced(&self, i: usize, j: usize) -> (f64, f64) {
        let c = (self.cost)(i, j);
        (c - self.pot[i] - self.pot[self.m + j], c)
    }

    fn entering(&mut self, bland: bool) -> Option<(usize, usize)> {
        let (m, n) = (self.m, self.n);
        let total = m * n;
        let neg = |rc: f64, c: f64| rc < -1e-10 * (1.0 + c.abs());
        if bland {
            return (0..total).map(|k| (k / n, k % n)).find(|&(i, j)| {
                let (rc, c) = self.reduced(i, j);
                neg(rc, c)
            });
        }
        let block = ((total as f64).sqrt() as usize).max(64).min(total);
        let mut best: Option<((usize, usize), f64)> = None;
        let mut k = self.cursor;
        for scanned in 1..=total {
            let (i, j) = (k / n, k % n);
            let (rc, c) = self.reduced(i, j);
            if neg(rc, c) && best.is_none_or(|(_, b)| rc < b) {
                best = Some(((i, j), rc));
            }
            k += 1;
            if k == total {
                k = 0;
            }
            if scanned % block == 0 && best.is_some() {
                break;
            }
        }
        self.cursor = k;
        best.map(|(cell, _)| cell)
    }

    /// Basic cells on the tree path from column `j` to row `i`, in order.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let (mut a, mut b) = (i, self.m + j);
        let mut from_row = Vec::new();
        let mut from_col = Vec::new();
        while self.depth[a] > self.depth[b] {
            from_row.push(self.parent[a].1);
            a = self.parent[a].0;
        }
        while self.depth[b] > self.depth[a] {
            from_col.push(self.parent[b].1);
            b = self.parent[b].0;
        }
        while a != b {
            from_row.push(self.parent[a].1);
            a = self.parent[a].0;
            from_col.push(self.parent[b].1);
            b = self.parent[b].0;
        }
        from_col.extend(from_row.into_iter().rev());
        from_col
    }

    fn run(&mut self) -> Result<()> {
        let nodes = self.m + self.n;
        let cap = 200 * nodes * nodes.max(50);
        let degenerate_limit = 5 * nodes;
        let mut degenerate = 0usize;
        for _ in 0..cap {
            self.rebuild_tree()?;
            let bland = degenerate > degenerate_limit;
            let Some((ei, ej)) = self.entering(bland) else {
                return Ok(());
            };
            let path = self.path(ei, ej);
            // Path cells alternate −, +, −, … starting next to column `ej`.
            let mut leave = NONE;
            let mut theta = f64::INFINITY;
            for &b in path.iter().step_by(2) {
                let x = self.flow[b];
                let better = x < theta
                    || (bland && x == theta && {
                        let (i, j) = self.cells[b];
                        let (li, lj) = self.cells[leave];
                        i * self.n + j < li * self.n + lj
                    });
                if better {
                    theta = x;
                    leave = b;
                }
            }
            for (t, &b) in path.iter().enumerate() {
                if t % 2 == 0 {
                    self.flow[b] -= theta;
                } else {
                    self.flow[b] += theta;
                }
            }
            self.cells[leave] = (ei, ej);
            self.flow[leave] = theta;
            if theta > 0.0 {
                degenerate = 0;
            } else {
                degenerate += 1;
            }
        }
        Err(Error::Solver(format!("no optimum after {cap} pivots")))
    }
}

/// Earth mover's distance between two row-major `width`×`height` histograms
/// with Euclidean ground distance between bin centers. Inputs are scaled to
/// unit mass first.
pub fn emd_histograms(p: &[f64], q: &[f64], width: usize, height: usize) -> Result<f64> {
    if p.len() != width * height || q.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "histograms of {} and {} bins for a {width}x{height} grid",
            p.len(),
            q.len()
        )));
    }
    let p = to_distribution(p)?;
    let q = to_distribution(q)?;
    // Mass shared by both bins stays put; with a metric ground cost this
    // leaves the optimum unchanged and shrinks the problem.
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for (k, (&a, &b)) in p.iter().zip(&q).enumerate() {
        let common = a.min(b);
        if a - common > 0.0 {
            src.push((k, a - common));
        }
        if b - common > 0.0 {
            dst.push((k, b - common));
        }
    }
    if src.is_empty() || dst.is_empty() {
        return Ok(0.0);
    }
    let center = |k: usize| ((k % width) as f64, (k / width) as f64);
    let supply: Vec<f64> = src.iter().map(|s| s.1).collect();
    let demand: Vec<f64> = dst.iter().map(|d| d.1).collect();
    let from: Vec<(f64, f64)> = src.iter().map(|s| center(s.0)).collect();
    let to: Vec<(f64, f64)> = dst.iter().map(|d| center(d.0)).collect();
    let cost = |i: usize, j: usize| {
        let (dx, dy) = (from[i].0 - to[j].0, from[i].1 - to[j].1);
        (dx * dx + dy * dy).sqrt()
    };
    transport_cost(&supply, &demand, cost)
}
