//! ZoomOut refinement and conversion of spectral maps to vertex maps.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmap::{dense_fmap, restricted_matrix, FunctionalMap, MapKind, PointwiseMap};
use crate::knn::{self, KdTree};
use crate::local_basis::LocalBasis;
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZoomOutSchedule {
    pub k_init: usize,
    pub k_final: usize,
    pub step: usize,
}

impl Default for ZoomOutSchedule {
    fn default() -> Self {
        ZoomOutSchedule {
            k_init: 20,
            k_final: 100,
            step: 1,
        }
    }
}

impl ZoomOutSchedule {
    pub fn new(k_init: usize, k_final: usize, step: usize) -> Self {
        ZoomOutSchedule { k_init, k_final, step }
    }

    /// Checks `1 ≤ k_init ≤ k_final ≤ available`.
    pub fn validate(&self, available: usize) -> Result<()> {
        if self.k_init == 0 || self.step == 0 {
            return Err(Error::Schedule("k_init and step must be positive".into()));
        }
        if self.k_init > self.k_final {
            return Err(Error::Schedule(format!("k_init {} exceeds k_final {}", self.k_init, self.k_final)));
        }
        if self.k_final > available {
            return Err(Error::Schedule(format!(
                "k_final {} exceeds the {available} available eigenvectors",
                self.k_final
            )));
        }
        Ok(())
    }

    /// Sizes visited, always ending at `k_final`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (self.k_init..=self.k_final).step_by(self.step).collect();
        if v.last() != Some(&self.k_final) {
            v.push(self.k_final);
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct IterationStat {
    pub k: usize,
    pub elapsed: Duration,
    /// Entries of the map that changed in this iteration.
    pub changed: usize,
    /// `‖E_N C − Π E_M‖_F` after the map update.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct ZoomOutResult {
    pub fmap: FunctionalMap,
    pub map: PointwiseMap,
    pub iterations: Vec<IterationStat>,
}

/// For each row of `E_N C` (first `k` columns of `e_n`), the nearest row of
/// `E_M[:, :k]`.
pub fn pointwise_from_fmap(e_m: &DMatrix<f64>, e_n: &DMatrix<f64>, c: &DMatrix<f64>) -> PointwiseMap {
    let (k_n, k_m) = c.shape();
    assert!(e_n.ncols() >= k_n && e_m.ncols() >= k_m);
    let queries = e_n.columns(0, k_n) * c;
    let tree = KdTree::new(e_m, k_m);
    PointwiseMap::new(tree.nearest_all(&queries), e_m.nrows()).expect("tree returns stored rows")
}

fn embedding_residual(e_n: &DMatrix<f64>, c: &DMatrix<f64>, map: &PointwiseMap, e_m: &DMatrix<f64>) -> f64 {
    let (k_n, k_m) = c.shape();
    let q = e_n.columns(0, k_n) * c;
    let mut s = 0.0;
    for r in 0..q.nrows() {
        let t = map.get(r);
        for col in 0..k_m {
            let d = q[(r, col)] - e_m[(t, col)];
            s += d * d;
        }
    }
    s.sqrt()
}

fn changed(a: &PointwiseMap, b: &PointwiseMap) -> usize {
    a.as_slice().iter().zip(b.as_slice()).filter(|(x, y)| x != y).count()
}

/// Sample-level ZoomOut: alternates the restricted map at size `k` with a
/// nearest-neighbour update of the sample map. Only `p`-sized objects are
/// touched.
pub fn scalable_zoomout(
    phi_n: &DMatrix<f64>,
    a_bar_n: &CsrMatrix,
    phi_m: &DMatrix<f64>,
    init: &PointwiseMap,
    schedule: &ZoomOutSchedule,
) -> Result<ZoomOutResult> {
    schedule.validate(phi_n.ncols().min(phi_m.ncols()))?;
    if init.len() != phi_n.nrows() || init.target_len() != phi_m.nrows() {
        return Err(Error::Dimension(format!(
            "sample map {}→{} does not match {} and {} samples",
            init.len(),
            init.target_len(),
            phi_n.nrows(),
            phi_m.nrows()
        )));
    }
    let mut map = init.clone();
    let mut c = DMatrix::zeros(0, 0);
    let mut iterations = Vec::new();
    for k in schedule.sizes() {
        let t = Instant::now();
        c = restricted_matrix(phi_n, k, a_bar_n, &map, phi_m, k)?;
        let next = pointwise_from_fmap(phi_m, phi_n, &c);
        let elapsed = t.elapsed();
        iterations.push(IterationStat {
            k,
            elapsed,
            changed: changed(&map, &next),
            residual: embedding_residual(phi_n, &c, &next, phi_m),
        });
        map = next;
    }
    Ok(ZoomOutResult {
        fmap: FunctionalMap {
            matrix: c,
            kind: MapKind::Restricted,
        },
        map,
        iterations,
    })
}

/// Classic ZoomOut on full-resolution `A`-orthonormal bases.
pub fn standard_zoomout(
    psi_n: &DMatrix<f64>,
    mass_n: &[f64],
    psi_m: &DMatrix<f64>,
    init: &PointwiseMap,
    schedule: &ZoomOutSchedule,
) -> Result<ZoomOutResult> {
    schedule.validate(psi_n.ncols().min(psi_m.ncols()))?;
    let mut map = init.clone();
    let mut c = DMatrix::zeros(0, 0);
    let mut iterations = Vec::new();
    for k in schedule.sizes() {
        let t = Instant::now();
        c = dense_fmap(psi_n, k, mass_n, &map, psi_m, k)?;
        let next = pointwise_from_fmap(psi_m, psi_n, &c);
        let elapsed = t.elapsed();
        iterations.push(IterationStat {
            k,
            elapsed,
            changed: changed(&map, &next),
            residual: embedding_residual(psi_n, &c, &next, psi_m),
        });
        log::debug!("zoomout k={k}: residual {:.4e}", iterations.last().unwrap().residual);
        map = next;
    }
    Ok(ZoomOutResult {
        fmap: FunctionalMap {
            matrix: c,
            kind: MapKind::Exact,
        },
        map,
        iterations,
    })
}

/// Candidate images for dense conversion: for a vertex `x` of `N`, every
/// vertex of `M` in the support of `u_{T̄(j)}` for some `j` with
/// `u_j(x) > 0`. Sets are enumerated on demand from the sparse supports.
pub struct GuidedCandidates<'a> {
    basis_n: &'a LocalBasis,
    /// Columns of `U_M` as rows.
    supports_m: CsrMatrix,
    sample_map: &'a PointwiseMap,
}

impl<'a> GuidedCandidates<'a> {
    pub fn n_queries(&self) -> usize {
        self.basis_n.n_vertices()
    }

    /// Sorted candidate list for vertex `x`, written into `out`.
    pub fn candidates_into(&self, x: usize, out: &mut Vec<usize>) {
        out.clear();
        for (j, _) in self.basis_n.u.row(x) {
            out.extend(self.supports_m.row(self.sample_map.get(j)).map(|(y, _)| y));
        }
        out.sort_unstable();
        out.dedup();
    }

    pub fn candidates(&self, x: usize) -> Vec<usize> {
        let mut v = Vec::new();
        self.candidates_into(x, &mut v);
        v
    }
}

pub fn build_guided_candidates<'a>(
    basis_n: &'a LocalBasis,
    basis_m: &LocalBasis,
    sample_map: &'a PointwiseMap,
) -> Result<GuidedCandidates<'a>> {
    if sample_map.len() != basis_n.n_samples() || sample_map.target_len() != basis_m.n_samples() {
        return Err(Error::Dimension("sample map does not match the two bases".into()));
    }
    Ok(GuidedCandidates {
        basis_n,
        supports_m: basis_m.u.transpose(),
        sample_map,
    })
}

/// Dense vertex map from a refined spectral map: every row of `Ψ̄_N Ĉ` is
/// matched to its nearest row of `Ψ̄_M`, over all of `M` or over the guided
/// candidate set.
pub fn dense_conversion(
    psi_bar_n: &DMatrix<f64>,
    psi_bar_m: &DMatrix<f64>,
    c: &FunctionalMap,
    guided: Option<&GuidedCandidates<'_>>,
) -> Result<PointwiseMap> {
    let (k_n, k_m) = c.shape();
    if psi_bar_n.ncols() < k_n || psi_bar_m.ncols() < k_m {
        return Err(Error::Dimension(format!(
            "map is {k_n}×{k_m} but bases have {} and {} columns",
            psi_bar_n.ncols(),
            psi_bar_m.ncols()
        )));
    }
    let Some(guide) = guided else {
        return Ok(pointwise_from_fmap(psi_bar_m, psi_bar_n, &c.matrix));
    };
    if guide.n_queries() != psi_bar_n.nrows() {
        return Err(Error::Dimension("guided candidates built for another mesh".into()));
    }
    let queries = knn::rows_of(&(psi_bar_n.columns(0, k_n) * &c.matrix), k_m);
    let points = knn::rows_of(psi_bar_m, k_m);
    let assignment: Vec<usize> = queries
        .par_chunks(k_m)
        .enumerate()
        .map_init(Vec::new, |buf, (x, q)| {
            guide.candidates_into(x, buf);
            knn::nearest_among(&points, k_m, q, buf)
        })
        .collect();
    PointwiseMap::new(assignment, psi_bar_m.nrows())
}

/// Vertex map obtained by sending every vertex of `N` to the image of its
/// dominant sample (largest `u_j(x)`, lowest `j` on ties). Locally constant.
pub fn nearest_sample_map(basis_n: &LocalBasis, basis_m: &LocalBasis, sample_map: &PointwiseMap) -> PointwiseMap {
    let assignment = (0..basis_n.n_vertices())
        .map(|x| {
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for (j, w) in basis_n.u.row(x) {
                if w > best.0 {
                    best = (w, j);
                }
            }
            basis_m.samples[sample_map.get(best.1)]
        })
        .collect();
    PointwiseMap::new(assignment, basis_m.n_vertices()).expect("samples are vertices")
}

/// Sample-level map from a dense vertex map `T: N → M`: sample `j` of `N`
/// goes to the `M` sample whose local function is largest at `T(vⱼ)`.
pub fn restrict_to_samples(dense: &PointwiseMap, basis_n: &LocalBasis, basis_m: &LocalBasis) -> Result<PointwiseMap> {
    if dense.len() != basis_n.n_vertices() || dense.target_len() != basis_m.n_vertices() {
        return Err(Error::InitMap(format!(
            "initial map covers {}→{} vertices, meshes have {} and {}",
            dense.len(),
            dense.target_len(),
            basis_n.n_vertices(),
            basis_m.n_vertices()
        )));
    }
    let assignment = basis_n
        .samples
        .iter()
        .map(|&v| {
            let y = dense.get(v);
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for (i, w) in basis_m.u.row(y) {
                if w > best.0 {
                    best = (w, i);
                }
            }
            best.1
        })
        .collect();
    PointwiseMap::new(assignment, basis_m.n_samples())
}

/// Dense map induced by a sample map on the sample vertices themselves.
pub fn sample_map_vertices(sample_map: &PointwiseMap, basis_n: &LocalBasis, basis_m: &LocalBasis) -> Vec<(usize, usize)> {
    basis_n
        .samples
        .iter()
        .enumerate()
        .map(|(j, &v)| (v, basis_m.samples[sample_map.get(j)]))
        .collect()
}
