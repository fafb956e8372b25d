//! Uniform bucket grid over the unit square for radius and k-NN queries.

use std::collections::BinaryHeap;

use crate::dataset::Point;

#[derive(Debug, Clone)]
pub struct GridIndex {
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
    points: Vec<Point>,
}

#[derive(PartialEq, PartialOrd)]
struct Dist(f64);
impl Eq for Dist {}
impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl GridIndex {
    /// Buckets of side `cell`, clamped so the grid has at most ~4M cells.
    pub fn new(points: &[Point], cell: f64) -> Self {
        let cell = cell.max(1.0 / 2048.0);
        let nx = ((1.0 / cell).ceil() as usize).max(1);
        let ny = nx;
        let mut counts = vec![0u32; nx * ny + 1];
        let keys: Vec<usize> = points.iter().map(|&p| Self::key_of(p, cell, nx, ny)).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut items = vec![0u32; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        GridIndex { cell, nx, ny, starts, items, points: points.to_vec() }
    }

    /// Grid sized for roughly `per_cell` points per occupied cell of uniform data.
    pub fn with_density(points: &[Point], per_cell: usize) -> Self {
        let cells = (points.len() / per_cell.max(1)).max(1) as f64;
        Self::new(points, 1.0 / cells.sqrt())
    }

    fn key_of(p: Point, cell: f64, nx: usize, ny: usize) -> usize {
        let cx = ((p.x / cell).floor().max(0.0) as usize).min(nx - 1);
        let cy = ((p.y / cell).floor().max(0.0) as usize).min(ny - 1);
        cy * nx + cx
    }

    fn coords(&self, p: Point) -> (isize, isize) {
        let cx = ((p.x / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = ((p.y / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        (cx as isize, cy as isize)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    fn bucket(&self, cx: isize, cy: isize) -> &[u32] {
        if cx < 0 || cy < 0 || cx as usize >= self.nx || cy as usize >= self.ny {
            return &[];
        }
        let k = cy as usize * self.nx + cx as usize;
        &self.items[self.starts[k] as usize..self.starts[k + 1] as usize]
    }

    /// Calls `f(index, squared distance)` for every point within `radius` of `p`.
    pub fn for_each_within(&self, p: Point, radius: f64, mut f: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        let lo = self.coords(Point::new(p.x - radius, p.y - radius));
        let hi = self.coords(Point::new(p.x + radius, p.y + radius));
        for cy in lo.1..=hi.1 {
            for cx in lo.0..=hi.0 {
                for &i in self.bucket(cx, cy) {
                    let d2 = p.dist2(self.points[i as usize]);
                    if d2 <= r2 {
                        f(i as usize, d2);
                    }
                }
            }
        }
    }

    /// Distance from `p` to its `k`-th nearest indexed point, skipping index
    /// `exclude`. `None` if fewer than `k` candidates exist.
    pub fn kth_nearest_distance(&self, p: Point, k: usize, exclude: Option<usize>) -> Option<f64> {
        if k == 0 {
            return Some(0.0);
        }
        let (cx, cy) = self.coords(p);
        let mut heap: BinaryHeap<Dist> = BinaryHeap::with_capacity(k + 1);
        let max_ring = self.nx.max(self.ny) as isize;
        for ring in 0..=max_ring {
            let visit = |x: isize, y: isize, heap: &mut BinaryHeap<Dist>| {
                for &i in self.bucket(x, y) {
                    if Some(i as usize) == exclude {
                        continue;
                    }
                    let d2 = p.dist2(self.points[i as usize]);
                    if heap.len() < k {
                        heap.push(Dist(d2));
                    } else if d2 < heap.peek().map_or(f64::INFINITY, |d| d.0) {
                        heap.pop();
                        heap.push(Dist(d2));
                    }
                }
            };
            if ring == 0 {
                visit(cx, cy, &mut heap);
            } else {
                for x in cx - ring..=cx + ring {
                    visit(x, cy - ring, &mut heap);
                    visit(x, cy + ring, &mut heap);
                }
                for y in cy - ring + 1..cy + ring {
                    visit(cx - ring, y, &mut heap);
                    visit(cx + ring, y, &mut heap);
                }
            }
            if heap.len() == k {
                let bound = ring as f64 * self.cell;
                let kth = heap.peek().unwrap().0;
                if kth <= bound * bound {
                    return Some(kth.sqrt());
                }
            }
        }
        (heap.len() == k).then(|| heap.peek().unwrap().0.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = crate::rng::seeded(seed);
        (0..n).map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>().powi(3))).collect()
    }

    #[test]
    fn knn_matches_brute_force() {
        let pts = random_points(400, 1);
        for cell in [0.01, 0.05, 0.3, 1.0] {
            let g = GridIndex::new(&pts, cell);
            for i in (0..pts.len()).step_by(37) {
                for k in [1, 5, 50] {
                    let mut d: Vec<f64> = (0..pts.len()).filter(|&j| j != i).map(|j| pts[i].dist(pts[j])).collect();
                    d.sort_by(f64::total_cmp);
                    let got = g.kth_nearest_distance(pts[i], k, Some(i)).unwrap();
                    assert!((got - d[k - 1]).abs() < 1e-12, "cell {cell} k {k}");
                }
            }
        }
        let g = GridIndex::new(&pts[..3], 0.1);
        assert!(g.kth_nearest_distance(pts[0], 3, Some(0)).is_none());
    }

    #[test]
    fn radius_matches_brute_force() {
        let pts = random_points(300, 2);
        let g = GridIndex::with_density(&pts, 4);
        let q = Point::new(0.4, 0.1);
        let mut got = Vec::new();
        g.for_each_within(q, 0.12, |i, _| got.push(i));
        got.sort();
        let want: Vec<usize> = (0..pts.len()).filter(|&i| q.dist(pts[i]) <= 0.12).collect();
        assert_eq!(got, want);
    }
}
