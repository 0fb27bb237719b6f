//! Exact nearest-neighbour search in spectral embeddings.
//!
//! Distances are plain sums of squared coordinate differences accumulated in
//! coordinate order, and ties go to the lowest point index. The tree only
//! skips work when a lower bound is strictly worse than the current best, so
//! it returns exactly what the brute-force scan returns.

use nalgebra::DMatrix;
use rayon::prelude::*;

const LEAF_SIZE: usize = 12;

/// Squared distance, or `None` once the partial sum exceeds `bound`.
#[inline]
fn dist_within(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut s = 0.0;
    for (chunk_a, chunk_b) in a.chunks(8).zip(b.chunks(8)) {
        for (x, y) in chunk_a.iter().zip(chunk_b) {
            let d = x - y;
            s += d * d;
        }
        if s > bound {
            return None;
        }
    }
    Some(s)
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    dist_within(a, b, f64::INFINITY).unwrap()
}

#[inline]
fn better(d: f64, i: usize, best: (f64, usize)) -> bool {
    d < best.0 || (d == best.0 && i < best.1)
}

/// Row-major copy of the first `cols` columns of `m`.
pub fn rows_of(m: &DMatrix<f64>, cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * cols);
    for r in 0..m.nrows() {
        out.extend((0..cols).map(|c| m[(r, c)]));
    }
    out
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// Tree over the rows of `m`, restricted to its first `cols` columns.
    pub fn new(m: &DMatrix<f64>, cols: usize) -> Self {
        Self::from_rows(rows_of(m, cols), cols)
    }

    pub fn from_rows(points: Vec<f64>, dim: usize) -> Self {
        assert!(dim > 0 && points.len() % dim == 0);
        let n = points.len() / dim;
        let mut tree = KdTree {
            dim,
            points,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut dim = 0;
        let mut spread = -1.0;
        for d in 0..self.dim {
            let (lo, hi) = self.order[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.points[i * self.dim + d];
                (lo.min(v), hi.max(v))
            });
            if hi - lo > spread {
                spread = hi - lo;
                dim = d;
            }
        }
        if spread <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = (start + end) / 2;
        let (points, k) = (&self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * k + dim].total_cmp(&points[b * k + dim])
        });
        let value = self.points[self.order[mid] * k + dim];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// Index of the nearest stored row and its squared distance.
    pub fn nearest(&self, q: &[f64]) -> (usize, f64) {
        assert_eq!(q.len(), self.dim);
        let mut best = (f64::INFINITY, usize::MAX);
        if !self.is_empty() {
            self.search(0, q, &mut best);
        }
        (best.1, best.0)
    }

    fn search(&self, node: usize, q: &[f64], best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if let Some(d) = dist_within(q, self.point(i), best.0) {
                        if better(d, i, *best) {
                            *best = (d, i);
                        }
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.0 {
                    self.search(far, q, best);
                }
            }
        }
    }

    /// Nearest stored row for every row of `queries` (first `dim` columns).
    pub fn nearest_all(&self, queries: &DMatrix<f64>) -> Vec<usize> {
        let q = rows_of(queries, self.dim);
        q.par_chunks(self.dim).map(|row| self.nearest(row).0).collect()
    }
}

/// Reference scan: nearest row of `points` for each row of `queries`.
pub fn brute_force_nearest(points: &DMatrix<f64>, queries: &DMatrix<f64>, cols: usize) -> Vec<usize> {
    let p = rows_of(points, cols);
    let q = rows_of(queries, cols);
    q.par_chunks(cols)
        .map(|row| {
            let mut best = (f64::INFINITY, usize::MAX);
            for (i, pt) in p.chunks(cols).enumerate() {
                let d = squared_distance(row, pt);
                if better(d, i, best) {
                    best = (d, i);
                }
            }
            best.1
        })
        .collect()
}

/// Nearest among `candidates` (row indices of `points`, row-major with
/// `dim` columns); lowest index on ties.
pub fn nearest_among(points: &[f64], dim: usize, q: &[f64], candidates: &[usize]) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for &i in candidates {
        if let Some(d) = dist_within(q, &points[i * dim..(i + 1) * dim], best.0) {
            if better(d, i, best) {
                best = (d, i);
            }
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree_matches_brute_force_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, k) in &[(1usize, 3usize), (50, 2), (700, 10), (400, 40)] {
            let pts = DMatrix::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0));
            let qs = DMatrix::from_fn(300, k, |_, _| rng.gen_range(-1.2..1.2));
            let tree = KdTree::new(&pts, k);
            assert_eq!(tree.nearest_all(&qs), brute_force_nearest(&pts, &qs, k));
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // a grid of duplicated points: every query has exact ties
        let pts = DMatrix::from_fn(60, 2, |r, c| ((r % 6) as f64 + c as f64 * ((r / 6) % 2) as f64).floor());
        let qs = DMatrix::from_fn(40, 2, |r, c| ((r * 7 + c * 3) % 6) as f64 * 0.5);
        let tree = KdTree::new(&pts, 2);
        assert_eq!(tree.nearest_all(&qs), brute_force_nearest(&pts, &qs, 2));
        let same = DMatrix::from_element(30, 3, 1.0);
        let t2 = KdTree::new(&same, 3);
        assert_eq!(t2.nearest(&[0.0, 0.0, 0.0]).0, 0);
    }

    #[test]
    fn single_point_gives_constant_map() {
        let pts = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let qs = DMatrix::from_fn(5, 2, |r, c| (r + c) as f64);
        assert_eq!(KdTree::new(&pts, 2).nearest_all(&qs), vec![0; 5]);
    }

    proptest! {
        #[test]
        fn prop_tree_equals_scan(
            seed in 0u64..1000,
            n in 1usize..200,
            k in 1usize..12,
            coarse in proptest::bool::ANY,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draw = |rng: &mut ChaCha8Rng| {
                let v: f64 = rng.gen_range(-2.0..2.0);
                if coarse { v.round() } else { v }
            };
            let pts = DMatrix::from_fn(n, k, |_, _| draw(&mut rng));
            let qs = DMatrix::from_fn(25, k, |_, _| draw(&mut rng));
            let tree = KdTree::new(&pts, k);
            prop_assert_eq!(tree.nearest_all(&qs), brute_force_nearest(&pts, &qs, k));
            let all: Vec<usize> = (0..n).collect();
            let flat = rows_of(&pts, k);
            for r in 0..qs.nrows() {
                let q: Vec<f64> = qs.row(r).iter().copied().collect();
                prop_assert_eq!(nearest_among(&flat, k, &q, &all), tree.nearest(&q).0);
            }
        }
    }
}
