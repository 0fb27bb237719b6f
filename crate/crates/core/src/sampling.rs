//! Poisson-disk sampling and radius-limited geodesic distances on the edge
//! graph of a mesh.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{distance, Point3, TriMesh};

/// Edge graph of a mesh with Euclidean edge lengths.
///
/// Every Dijkstra run is counted, which lets callers verify that a stage
/// performed no distance computations.
#[derive(Debug)]
pub struct MeshGraph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    lengths: Vec<f64>,
    positions: Vec<Point3>,
    runs: AtomicUsize,
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, vertex)
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable per-thread buffers so local searches cost O(ball) rather than O(n).
struct Scratch {
    dist: Vec<f64>,
    touched: Vec<usize>,
    heap: BinaryHeap<HeapEntry>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            dist: vec![f64::INFINITY; n],
            touched: Vec::new(),
            heap: BinaryHeap::new(),
        }
    }
}

impl MeshGraph {
    pub fn new(mesh: &TriMesh) -> Self {
        let n = mesh.n_vertices();
        let edges = mesh.edges();
        let mut degree = vec![0usize; n + 1];
        for &(a, b) in &edges {
            degree[a + 1] += 1;
            degree[b + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree.clone();
        let mut fill = degree;
        let mut neighbors = vec![0usize; 2 * edges.len()];
        let mut lengths = vec![0.0; 2 * edges.len()];
        for &(a, b) in &edges {
            let len = distance(mesh.vertex(a), mesh.vertex(b));
            neighbors[fill[a]] = b;
            lengths[fill[a]] = len;
            fill[a] += 1;
            neighbors[fill[b]] = a;
            lengths[fill[b]] = len;
            fill[b] += 1;
        }
        MeshGraph {
            offsets,
            neighbors,
            lengths,
            positions: mesh.vertices().to_vec(),
            runs: AtomicUsize::new(0),
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[v]..self.offsets[v + 1];
        self.neighbors[span.clone()]
            .iter()
            .copied()
            .zip(self.lengths[span].iter().copied())
    }

    pub fn shortest_incident_edge(&self, v: usize) -> f64 {
        self.neighbors(v).map(|(_, l)| l).fold(f64::INFINITY, f64::min)
    }

    pub fn shortest_edge(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Number of Dijkstra runs performed on this graph so far.
    pub fn dijkstra_runs(&self) -> usize {
        self.runs.load(AtomicOrdering::Relaxed)
    }

    fn run_limited(&self, source: usize, limit: f64, prune: bool, s: &mut Scratch) -> Vec<(usize, f64)> {
        self.runs.fetch_add(1, AtomicOrdering::Relaxed);
        let origin = self.positions[source];
        // graph distances dominate straight-line distances; the slack guards
        // against rounding in the summed edge lengths
        let euclid_limit = limit * (1.0 + 1e-12);
        let mut settled = Vec::new();
        s.dist[source] = 0.0;
        s.touched.push(source);
        s.heap.push(HeapEntry {
            dist: 0.0,
            vertex: source,
        });
        while let Some(HeapEntry { dist, vertex }) = s.heap.pop() {
            if dist > s.dist[vertex] {
                continue;
            }
            settled.push((vertex, dist));
            for (nb, len) in self.neighbors(vertex) {
                let nd = dist + len;
                if nd > limit || nd >= s.dist[nb] {
                    continue;
                }
                if prune && distance(origin, self.positions[nb]) > euclid_limit {
                    continue;
                }
                if s.dist[nb].is_infinite() {
                    s.touched.push(nb);
                }
                s.dist[nb] = nd;
                s.heap.push(HeapEntry { dist: nd, vertex: nb });
            }
        }
        for &t in &s.touched {
            s.dist[t] = f64::INFINITY;
        }
        s.touched.clear();
        settled.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        settled
    }

    /// Shortest-path distances from `source` to every vertex within `limit`,
    /// sorted by `(distance, vertex)`. The search never leaves the Euclidean
    /// ball of radius `limit` around the source.
    pub fn local_distances(&self, source: usize, limit: f64) -> Vec<(usize, f64)> {
        let mut s = Scratch::new(self.n_vertices());
        self.run_limited(source, limit, true, &mut s)
    }

    /// Same as [`MeshGraph::local_distances`] without the Euclidean pruning.
    pub fn local_distances_unpruned(&self, source: usize, limit: f64) -> Vec<(usize, f64)> {
        let mut s = Scratch::new(self.n_vertices());
        self.run_limited(source, limit, false, &mut s)
    }

    /// Full single-source distances; unreachable vertices are infinite.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; self.n_vertices()];
        for (v, d) in self.local_distances_unpruned(source, f64::INFINITY) {
            out[v] = d;
        }
        out
    }

    fn many_local(&self, sources: &[usize], limit: f64) -> Vec<Vec<(usize, f64)>> {
        let n = self.n_vertices();
        sources
            .par_iter()
            .map_init(|| Scratch::new(n), |s, &src| self.run_limited(src, limit, true, s))
            .collect()
    }
}

/// `ρ₀ = 3·√(area / (p·π))`: three times the radius of a disk that would
/// tile the surface with `p` samples.
pub fn initial_radius(area: f64, p: usize) -> f64 {
    3.0 * (area / (p as f64 * PI)).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    /// Distinct vertex ids.
    pub indices: Vec<usize>,
    /// Per-sample support radius `ρⱼ`, at most `initial_radius`.
    pub radii: Vec<f64>,
    pub initial_radius: f64,
}

impl SampleSet {
    /// Samples with a uniform radius `ρ₀`.
    pub fn with_uniform_radius(indices: Vec<usize>, initial_radius: f64) -> Self {
        let radii = vec![initial_radius; indices.len()];
        SampleSet {
            indices,
            radii,
            initial_radius,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Vertex id → sample index.
    pub fn lookup(&self, n_vertices: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_vertices];
        for (j, &v) in self.indices.iter().enumerate() {
            out[v] = Some(j);
        }
        out
    }
}

/// Distances from each sample to the vertices of its `ρ₀` ball, sorted by
/// distance so that shrinking a radius is a prefix truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicRecord {
    per_sample: Vec<Vec<(usize, f64)>>,
    limit: f64,
}

impl GeodesicRecord {
    pub fn limit(&self) -> f64 {
        self.limit
    }

    pub fn n_samples(&self) -> usize {
        self.per_sample.len()
    }

    /// All recorded `(vertex, distance)` pairs for sample `j`.
    pub fn entries(&self, j: usize) -> &[(usize, f64)] {
        &self.per_sample[j]
    }

    /// Recorded pairs with distance strictly below `radius`.
    pub fn within(&self, j: usize, radius: f64) -> &[(usize, f64)] {
        let list = &self.per_sample[j];
        let end = list.partition_point(|&(_, d)| d < radius);
        &list[..end]
    }

    pub(crate) fn push(&mut self, entries: Vec<(usize, f64)>) {
        self.per_sample.push(entries);
    }

    /// Vertices with no sample `j` at distance `< radii[j]`.
    pub fn uncovered(&self, n_vertices: usize, radii: &[f64]) -> Vec<usize> {
        let mut covered = vec![false; n_vertices];
        for (j, &r) in radii.iter().enumerate() {
            for &(v, _) in self.within(j, r) {
                covered[v] = true;
            }
        }
        (0..n_vertices).filter(|&v| !covered[v]).collect()
    }
}

/// Runs the radius-limited Dijkstra from every sample, up to the initial
/// radius, in parallel. Results are ordered by sample index.
pub fn local_dijkstra(graph: &MeshGraph, samples: &SampleSet) -> GeodesicRecord {
    GeodesicRecord {
        per_sample: graph.many_local(&samples.indices, samples.initial_radius),
        limit: samples.initial_radius,
    }
}

/// Promotes vertices that no sample reaches to samples of radius `ρ₀`, each
/// with its own Dijkstra run, until every vertex is covered.
pub fn cover_unreached(
    graph: &MeshGraph,
    samples: &SampleSet,
    record: &GeodesicRecord,
) -> (SampleSet, GeodesicRecord) {
    let n = graph.n_vertices();
    let mut samples = samples.clone();
    let mut record = record.clone();
    let mut covered = vec![false; n];
    for (j, &r) in samples.radii.iter().enumerate() {
        for &(v, _) in record.within(j, r) {
            covered[v] = true;
        }
    }
    let mut scratch = Scratch::new(n);
    for v in 0..n {
        if covered[v] {
            continue;
        }
        let entries = graph.run_limited(v, samples.initial_radius, true, &mut scratch);
        for &(u, d) in &entries {
            if d < samples.initial_radius {
                covered[u] = true;
            }
        }
        covered[v] = true;
        samples.indices.push(v);
        samples.radii.push(samples.initial_radius);
        record.push(entries);
    }
    (samples, record)
}

fn dart_throw(graph: &MeshGraph, order: &[usize], radius: f64, scratch: &mut Scratch) -> Vec<usize> {
    let mut blocked = vec![false; graph.n_vertices()];
    let mut accepted = Vec::new();
    for &v in order {
        if blocked[v] {
            continue;
        }
        accepted.push(v);
        for (u, d) in graph.run_limited(v, radius, true, scratch) {
            if d < radius {
                blocked[u] = true;
            }
        }
    }
    accepted
}

/// Poisson-disk sample selection on mesh vertices.
///
/// Vertices are visited in a seeded random order and accepted when no
/// accepted sample lies within graph distance `r`; `r` is tuned by
/// bisection until the count is close to `target_count`. The result has
/// pairwise separation at least `r` and uniform radii `ρ₀`.
pub fn poisson_disk_sample(
    mesh: &TriMesh,
    graph: &MeshGraph,
    target_count: usize,
    seed: u64,
) -> Result<(SampleSet, f64)> {
    let n = mesh.n_vertices();
    if target_count == 0 {
        return Err(Error::Sampling("target count must be positive".into()));
    }
    if target_count > n {
        return Err(Error::Sampling(format!(
            "cannot draw {target_count} samples from a mesh with {n} vertices"
        )));
    }
    let rho0 = initial_radius(mesh.total_area(), target_count);
    if target_count == n {
        return Ok((SampleSet::with_uniform_radius((0..n).collect(), rho0), 0.0));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut scratch = Scratch::new(n);

    let lo_ok = 0.9 * target_count as f64;
    let hi_ok = 1.1 * target_count as f64;
    // maximal disk packings hold roughly one sample per 0.7·π·r² of area
    let mut radius = (mesh.total_area() / (0.7 * PI * target_count as f64)).sqrt();
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..60 {
        let picked = dart_throw(graph, &order, radius, &mut scratch);
        let count = picked.len() as f64;
        let gap = (count - target_count as f64).abs();
        if best
            .as_ref()
            .map_or(true, |(_, b)| gap < (b.len() as f64 - target_count as f64).abs())
        {
            best = Some((radius, picked));
        }
        if count >= lo_ok && count <= hi_ok {
            break;
        }
        if count > target_count as f64 {
            lo = radius;
        } else {
            hi = radius;
        }
        radius = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * radius };
    }
    let (radius, mut picked) = best.expect("at least one trial");
    let ratio = picked.len() as f64 / target_count as f64;
    if !(0.8..=1.2).contains(&ratio) {
        return Err(Error::Sampling(format!(
            "could not reach {target_count} samples (best {})",
            picked.len()
        )));
    }
    picked.sort_unstable();
    Ok((SampleSet::with_uniform_radius(picked, initial_radius(mesh.total_area(), target_count)), radius))
}
