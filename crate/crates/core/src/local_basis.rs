//! Partition-of-unity local functions and the adaptive-radius refinement.
//!
//! Each sample `vⱼ` carries an unnormalized bump `ũⱼ(x) = χ(d(x, vⱼ)/ρⱼ)`;
//! normalizing the bumps row-wise gives functions `uⱼ` that sum to one at
//! every vertex. The value `uⱼ(vⱼ)` is the *self-weight* of sample `j`.
//!
//! The adaptive scheme raises low self-weights by halving the radius of the
//! most influential neighbouring sample, reusing the stored geodesic
//! distances.

use std::path::Path;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::sampling::{cover_unreached, GeodesicRecord, MeshGraph, SampleSet};
use crate::sparse::CsrMatrix;

const MAGIC: &[u8; 8] = b"SFMBASE1";

/// Compactly supported radial profile `χ: [0, ∞) → [0, 1]` with `χ(0) = 1`
/// and `χ(t) = 0` for `t ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ChiProfile {
    /// `1 − 3t² + 2t³`
    #[default]
    Polynomial,
    /// `exp(1 − 1/(1 − t²))`
    SmoothBump,
}

impl ChiProfile {
    pub fn eval(self, t: f64) -> f64 {
        if t >= 1.0 {
            return 0.0;
        }
        let t = t.max(0.0);
        match self {
            ChiProfile::Polynomial => 1.0 - 3.0 * t * t + 2.0 * t * t * t,
            ChiProfile::SmoothBump => (1.0 - 1.0 / (1.0 - t * t)).exp(),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            ChiProfile::Polynomial => 0,
            ChiProfile::SmoothBump => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ChiProfile::Polynomial),
            1 => Some(ChiProfile::SmoothBump),
            _ => None,
        }
    }
}

pub fn eval_chi(profile: ChiProfile, t: f64) -> f64 {
    profile.eval(t)
}

/// Row-stochastic `n × p` matrix of local functions.
#[derive(Clone, Debug)]
pub struct LocalBasis {
    /// Rows are vertices, columns are samples.
    pub u: CsrMatrix,
    /// Sample vertex ids, column order.
    pub samples: Vec<usize>,
    /// `uⱼ(vⱼ)`
    pub self_weights: Vec<f64>,
    /// Final `ρⱼ`.
    pub radii: Vec<f64>,
    pub profile: ChiProfile,
    /// Self-weight threshold used by the adaptation, if any.
    pub threshold: Option<f64>,
}

impl LocalBasis {
    pub fn n_vertices(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.u.ncols()
    }

    pub fn min_self_weight(&self) -> f64 {
        self.self_weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_self_weight(&self) -> f64 {
        self.self_weights.iter().sum::<f64>() / self.self_weights.len() as f64
    }

    /// Largest `|Σⱼ U(i, j) − 1|` over all rows.
    pub fn partition_defect(&self) -> f64 {
        (0..self.u.nrows())
            .map(|r| (self.u.row(r).map(|(_, v)| v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `f̃ = Σⱼ f(vⱼ) uⱼ`: interpolates values given at the samples.
    pub fn interpolate(&self, sample_values: &[f64]) -> Vec<f64> {
        self.u.mul_vec(sample_values)
    }

    /// Binary cache: header, samples and radii, then the nonzeros of `U`
    /// column by column as `(row, col, value)`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = Writer::new(MAGIC);
        w.u64(self.n_vertices() as u64);
        w.u64(self.n_samples() as u64);
        w.f64(self.threshold.unwrap_or(f64::NAN));
        w.u64(self.profile.code() as u64);
        for &s in &self.samples {
            w.u64(s as u64);
        }
        w.f64s(&self.radii);
        let csc = self.u.transpose();
        w.u64(csc.nnz() as u64);
        for (col, row, v) in csc.triplets() {
            w.u64(row as u64);
            w.u64(col as u64);
            w.f64(v);
        }
        w.finish(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = Reader::open(path, MAGIC)?;
        let n = r.usize()?;
        let p = r.usize()?;
        let threshold = Some(r.f64()?).filter(|t| !t.is_nan());
        let profile = u8::try_from(r.u64()?)
            .ok()
            .and_then(ChiProfile::from_code)
            .ok_or_else(|| r.invalid("unknown profile"))?;
        let samples = (0..p).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let radii = r.f64s(p)?;
        let nnz = r.usize()?;
        let mut triplets = Vec::with_capacity(nnz.min(1 << 24));
        for _ in 0..nnz {
            let (row, col, v) = (r.usize()?, r.usize()?, r.f64()?);
            if row >= n || col >= p {
                return Err(r.invalid("entry out of range"));
            }
            triplets.push((row, col, v));
        }
        if samples.iter().any(|&s| s >= n) {
            return Err(r.invalid("sample out of range"));
        }
        r.finish()?;
        let u = CsrMatrix::from_triplets(n, p, &triplets);
        let self_weights = samples.iter().enumerate().map(|(j, &v)| u.get(v, j)).collect();
        Ok(LocalBasis {
            u,
            samples,
            self_weights,
            radii,
            profile,
            threshold,
        })
    }
}

/// `Ũ(i, j) = χ(d(xᵢ, vⱼ)/ρⱼ)` for recorded distances below `ρⱼ`.
pub fn build_unnormalized(
    record: &GeodesicRecord,
    radii: &[f64],
    profile: ChiProfile,
    n_vertices: usize,
) -> CsrMatrix {
    assert_eq!(record.n_samples(), radii.len());
    let mut triplets = Vec::new();
    for (j, &rho) in radii.iter().enumerate() {
        for &(v, d) in record.within(j, rho) {
            triplets.push((v, j, profile.eval(d / rho)));
        }
    }
    CsrMatrix::from_triplets(n_vertices, radii.len(), &triplets)
}

/// Divides every row of `Ũ` by its sum.
pub fn normalize_partition(
    unnormalized: &CsrMatrix,
    samples: &[usize],
    radii: &[f64],
    profile: ChiProfile,
) -> Result<LocalBasis> {
    let n = unnormalized.nrows();
    let mut rows = Vec::with_capacity(n);
    for r in 0..n {
        // sequential sum in column order; the adaptation loop mirrors it
        let mut sum = 0.0;
        for (_, v) in unnormalized.row(r) {
            sum += v;
        }
        if !(sum > 0.0) {
            return Err(Error::Coverage { vertex: r });
        }
        rows.push(unnormalized.row(r).map(|(c, v)| (c, v / sum)).collect());
    }
    let u = CsrMatrix::from_sorted_rows(unnormalized.ncols(), rows);
    let self_weights = samples.iter().enumerate().map(|(j, &v)| u.get(v, j)).collect();
    Ok(LocalBasis {
        u,
        samples: samples.to_vec(),
        self_weights,
        radii: radii.to_vec(),
        profile,
        threshold: None,
    })
}

/// Fixed-radius local functions (every `ρⱼ = ρ₀`), after promoting
/// unreached vertices to samples.
pub fn fixed_radius_basis(
    graph: &MeshGraph,
    samples: &SampleSet,
    record: &GeodesicRecord,
    profile: ChiProfile,
) -> Result<(SampleSet, GeodesicRecord, LocalBasis)> {
    let (samples, record) = cover_unreached(graph, samples, record);
    let ut = build_unnormalized(&record, &samples.radii, profile, graph.n_vertices());
    let basis = normalize_partition(&ut, &samples.indices, &samples.radii, profile)?;
    Ok((samples, record, basis))
}

#[derive(Clone, Debug)]
pub struct AdaptOptions {
    /// Minimum self-weight to reach.
    pub threshold: f64,
    pub profile: ChiProfile,
    /// Defaults to `50·p` when `None`.
    pub max_rounds: Option<usize>,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        AdaptOptions {
            threshold: 0.3,
            profile: ChiProfile::Polynomial,
            max_rounds: None,
        }
    }
}

/// State passed to the observer after every halving round.
pub struct RoundState<'a> {
    pub round: usize,
    /// Sample whose radius was halved.
    pub shrunk: usize,
    pub radii: &'a [f64],
    pub self_weights: &'a [f64],
}

#[derive(Clone, Debug)]
pub struct AdaptOutcome {
    pub samples: SampleSet,
    pub record: GeodesicRecord,
    pub basis: LocalBasis,
    pub rounds: usize,
    /// Vertices promoted to samples once the loop finished.
    pub added_after: Vec<usize>,
    /// Dijkstra runs issued during the adaptation (one per added sample).
    pub dijkstra_runs: usize,
}

/// Adaptive-radius local functions.
///
/// While some sample `k` has `uₖ(vₖ) < threshold`, the radius of the sample
/// with the largest `uᵢ(vₖ)`, `i ≠ k`, is halved (lowest index on ties;
/// never below the shortest edge at that sample, where its support shrinks
/// to the sample itself). Vertices left uncovered afterwards become samples
/// whose radius stops at the nearest existing sample, so they do not lower
/// any self-weight.
pub fn adapt_radii(
    graph: &MeshGraph,
    samples: &SampleSet,
    record: &GeodesicRecord,
    options: &AdaptOptions,
) -> Result<AdaptOutcome> {
    adapt_radii_observed(graph, samples, record, options, |_| {})
}

pub fn adapt_radii_observed(
    graph: &MeshGraph,
    samples: &SampleSet,
    record: &GeodesicRecord,
    options: &AdaptOptions,
    mut observer: impl FnMut(&RoundState<'_>),
) -> Result<AdaptOutcome> {
    if !(options.threshold > 0.0 && options.threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "self-weight threshold must lie in (0, 1), got {}",
            options.threshold
        )));
    }
    let runs_before = graph.dijkstra_runs();
    let n = graph.n_vertices();
    let profile = options.profile;
    let (mut samples, mut record) = cover_unreached(graph, samples, record);
    let p = samples.len();
    let lookup = samples.lookup(n);

    // incoming[k]: (i, d(vₖ, vᵢ)) for every sample i whose ρ₀-ball holds vₖ,
    // sorted by i; includes k itself at distance zero
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p];
    // outgoing[i]: samples inside the ρ₀-ball of i
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); p];
    for i in 0..p {
        for &(v, d) in record.entries(i) {
            if let Some(k) = lookup[v] {
                incoming[k].push((i, d));
                if k != i {
                    outgoing[i].push(k);
                }
            }
        }
    }
    for list in &mut incoming {
        list.sort_by_key(|&(i, _)| i);
    }

    let mut radii = samples.radii.clone();
    let row_sum = |k: usize, radii: &[f64]| -> f64 {
        let mut s = 0.0;
        for &(i, d) in &incoming[k] {
            if d < radii[i] {
                s += profile.eval(d / radii[i]);
            }
        }
        s
    };
    let mut self_weights: Vec<f64> = (0..p).map(|k| 1.0 / row_sum(k, &radii)).collect();
    let floors: Vec<f64> = samples
        .indices
        .iter()
        .map(|&v| graph.shortest_incident_edge(v))
        .collect();

    let max_rounds = options.max_rounds.unwrap_or(50 * p.max(1));
    let mut rounds = 0;
    loop {
        let worst = (0..p)
            .filter(|&k| self_weights[k] < options.threshold)
            .min_by(|&a, &b| self_weights[a].total_cmp(&self_weights[b]).then(a.cmp(&b)));
        let Some(k) = worst else { break };
        if rounds >= max_rounds {
            let offending = (0..p).filter(|&k| self_weights[k] < options.threshold).collect();
            return Err(Error::NonTermination { rounds, offending });
        }

        let mut best: Option<(usize, f64)> = None;
        for &(i, d) in &incoming[k] {
            if i == k || d >= radii[i] {
                continue;
            }
            let w = profile.eval(d / radii[i]);
            if best.map_or(true, |(_, bw)| w > bw) {
                best = Some((i, w));
            }
        }
        let Some((j, _)) = best else {
            // no neighbour influences k, so its self-weight is already one
            unreachable!("sample {k} below threshold without influencing neighbours");
        };
        radii[j] = (0.5 * radii[j]).max(floors[j]);
        for &k2 in &outgoing[j] {
            self_weights[k2] = 1.0 / row_sum(k2, &radii);
        }
        rounds += 1;
        observer(&RoundState {
            round: rounds,
            shrunk: j,
            radii: &radii,
            self_weights: &self_weights,
        });
    }
    samples.radii = radii;

    let mut covered = vec![false; n];
    for j in 0..p {
        for &(v, _) in record.within(j, samples.radii[j]) {
            covered[v] = true;
        }
    }
    let mut is_sample = lookup.iter().map(Option::is_some).collect::<Vec<_>>();
    let mut added_after = Vec::new();
    for v in 0..n {
        if covered[v] {
            continue;
        }
        let entries = graph.local_distances(v, samples.initial_radius);
        let radius = entries
            .iter()
            .filter(|&&(u, _)| u != v && is_sample[u])
            .map(|&(_, d)| d)
            .fold(samples.initial_radius, f64::min);
        for &(u, d) in &entries {
            if d < radius {
                covered[u] = true;
            }
        }
        is_sample[v] = true;
        samples.indices.push(v);
        samples.radii.push(radius);
        record.push(entries);
        added_after.push(v);
    }

    let ut = build_unnormalized(&record, &samples.radii, profile, n);
    let mut basis = normalize_partition(&ut, &samples.indices, &samples.radii, profile)?;
    basis.threshold = Some(options.threshold);
    debug_assert!(basis.min_self_weight() >= options.threshold);
    Ok(AdaptOutcome {
        samples,
        record,
        basis,
        rounds,
        added_after,
        dijkstra_runs: graph.dijkstra_runs() - runs_before,
    })
}
