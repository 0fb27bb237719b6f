//! Functional maps and pointwise maps.
//!
//! Orientation: a functional map `C` (`K_N × K_M`) carries functions from
//! `M` to `N`, while the pointwise map it comes from runs the other way,
//! `T: N → M`, stored as one target index per source entry. Pulling a
//! function back through `T` is a row gather, so `Π` is never materialized.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::local_basis::LocalBasis;
use crate::sparse::CsrMatrix;

const MAGIC: &[u8; 8] = b"SFMCMAP1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Exact,
    Reduced,
    Restricted,
    FastLs,
    RestrictedReweighted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalMap {
    pub matrix: DMatrix<f64>,
    pub kind: MapKind,
}

impl FunctionalMap {
    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    /// Share of the squared Frobenius norm sitting on the diagonal.
    pub fn diagonal_mass(&self) -> f64 {
        let d: f64 = self.matrix.diagonal().iter().map(|v| v * v).sum();
        d / self.matrix.norm_squared()
    }

    /// One row per line, entries separated by spaces. Values print in their
    /// shortest round-trip form, so reading back is exact.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.matrix.nrows() {
            let row: Vec<String> = self.matrix.row(r).iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str, kind: MapKind) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::parse(i + 1, format!("{t:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::parse(i + 1, "ragged matrix row"));
                }
            }
            rows.push(row);
        }
        let (r, c) = (rows.len(), rows.first().map_or(0, Vec::len));
        Ok(FunctionalMap {
            matrix: DMatrix::from_fn(r, c, |i, j| rows[i][j]),
            kind,
        })
    }

    pub fn save_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Binary: rows, columns, then the entries row by row.
    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let mut w = Writer::new(MAGIC);
        w.u64(self.matrix.nrows() as u64);
        w.u64(self.matrix.ncols() as u64);
        for r in 0..self.matrix.nrows() {
            for c in 0..self.matrix.ncols() {
                w.f64(self.matrix[(r, c)]);
            }
        }
        w.finish(path)
    }

    pub fn load_binary(path: &Path, kind: MapKind) -> Result<Self> {
        let mut r = Reader::open(path, MAGIC)?;
        let rows = r.usize()?;
        let cols = r.usize()?;
        let data = r.f64s(rows * cols)?;
        r.finish()?;
        Ok(FunctionalMap {
            matrix: DMatrix::from_row_slice(rows, cols, &data),
            kind,
        })
    }
}

/// Vertex (or sample) assignment `T`: entry `i` is the image of source `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointwiseMap {
    assignment: Vec<usize>,
    target_len: usize,
}

impl PointwiseMap {
    pub fn new(assignment: Vec<usize>, target_len: usize) -> Result<Self> {
        if let Some(&bad) = assignment.iter().find(|&&t| t >= target_len) {
            return Err(Error::IndexRange {
                what: "pointwise map".into(),
                index: bad,
                limit: target_len,
            });
        }
        Ok(PointwiseMap {
            assignment,
            target_len,
        })
    }

    pub fn identity(n: usize) -> Self {
        PointwiseMap {
            assignment: (0..n).collect(),
            target_len: n,
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    pub fn get(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.assignment
    }

    pub fn distinct_images(&self) -> usize {
        let mut seen = vec![false; self.target_len];
        self.assignment.iter().filter(|&&t| !std::mem::replace(&mut seen[t], true)).count()
    }

    /// `Π E`: row `i` of the result is row `T(i)` of `e`.
    pub fn gather_rows(&self, e: &DMatrix<f64>, cols: usize) -> DMatrix<f64> {
        assert_eq!(e.nrows(), self.target_len);
        DMatrix::from_fn(self.len(), cols, |r, c| e[(self.assignment[r], c)])
    }

    /// One target index per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * 6);
        for t in &self.assignment {
            let _ = writeln!(out, "{t}");
        }
        out
    }

    /// Reads [`PointwiseMap::to_text`] output; `-1` entries come back as `None`.
    pub fn parse_entries(text: &str) -> Result<Vec<Option<usize>>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                let t = l.trim();
                if t == "-1" {
                    return Ok(None);
                }
                t.parse::<usize>()
                    .map(Some)
                    .map_err(|e| Error::parse(i + 1, format!("{t:?}: {e}")))
            })
            .collect()
    }
}

fn check_rows(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("{what}: {a} vs {b} rows")));
    }
    Ok(())
}

/// `C = Ψ_Nᵀ A_N Π Ψ_M`.
pub fn exact_fmap(
    psi_n: &DMatrix<f64>,
    mass_n: &[f64],
    pi: &PointwiseMap,
    psi_m: &DMatrix<f64>,
) -> Result<FunctionalMap> {
    Ok(FunctionalMap {
        matrix: dense_fmap(psi_n, psi_n.ncols(), mass_n, pi, psi_m, psi_m.ncols())?,
        kind: MapKind::Exact,
    })
}

/// `C̄ = Ψ̄_Nᵀ A_N Π Ψ̄_M` with lifted approximate eigenvectors.
pub fn reduced_fmap(
    psi_bar_n: &DMatrix<f64>,
    mass_n: &[f64],
    pi: &PointwiseMap,
    psi_bar_m: &DMatrix<f64>,
) -> Result<FunctionalMap> {
    Ok(FunctionalMap {
        matrix: dense_fmap(psi_bar_n, psi_bar_n.ncols(), mass_n, pi, psi_bar_m, psi_bar_m.ncols())?,
        kind: MapKind::Reduced,
    })
}

/// `Ψ_N[:, :k_n]ᵀ A_N Π Ψ_M[:, :k_m]`
pub fn dense_fmap(
    psi_n: &DMatrix<f64>,
    k_n: usize,
    mass_n: &[f64],
    pi: &PointwiseMap,
    psi_m: &DMatrix<f64>,
    k_m: usize,
) -> Result<DMatrix<f64>> {
    check_rows("source basis vs mass", psi_n.nrows(), mass_n.len())?;
    check_rows("source basis vs map", psi_n.nrows(), pi.len())?;
    check_rows("target basis vs map target", psi_m.nrows(), pi.target_len())?;
    let weighted = DMatrix::from_fn(psi_n.nrows(), k_n, |r, c| psi_n[(r, c)] * mass_n[r]);
    Ok(weighted.transpose() * pi.gather_rows(psi_m, k_m))
}

/// `Ĉ = Φ̄_Nᵀ Ā_N Π̄ Φ̄_M`, built from sample-level objects only.
pub fn restricted_fmap(
    phi_n: &DMatrix<f64>,
    a_bar_n: &CsrMatrix,
    pi_bar: &PointwiseMap,
    phi_m: &DMatrix<f64>,
) -> Result<FunctionalMap> {
    Ok(FunctionalMap {
        matrix: restricted_matrix(phi_n, phi_n.ncols(), a_bar_n, pi_bar, phi_m, phi_m.ncols())?,
        kind: MapKind::Restricted,
    })
}

/// Restricted map with the `M` coefficients replaced by the lifted basis
/// evaluated at the `M` sample vertices, so pointwise values are transported.
pub fn restricted_fmap_reweighted(
    phi_n: &DMatrix<f64>,
    a_bar_n: &CsrMatrix,
    pi_bar: &PointwiseMap,
    psi_bar_m_at_samples: &DMatrix<f64>,
) -> Result<FunctionalMap> {
    Ok(FunctionalMap {
        matrix: restricted_matrix(
            phi_n,
            phi_n.ncols(),
            a_bar_n,
            pi_bar,
            psi_bar_m_at_samples,
            psi_bar_m_at_samples.ncols(),
        )?,
        kind: MapKind::RestrictedReweighted,
    })
}

/// `Φ̄_N[:, :k_n]ᵀ Ā_N Π̄ Φ̄_M[:, :k_m]`
pub fn restricted_matrix(
    phi_n: &DMatrix<f64>,
    k_n: usize,
    a_bar_n: &CsrMatrix,
    pi_bar: &PointwiseMap,
    phi_m: &DMatrix<f64>,
    k_m: usize,
) -> Result<DMatrix<f64>> {
    check_rows("source coefficients vs reduced mass", phi_n.nrows(), a_bar_n.nrows())?;
    check_rows("source coefficients vs sample map", phi_n.nrows(), pi_bar.len())?;
    check_rows("target coefficients vs sample map target", phi_m.nrows(), pi_bar.target_len())?;
    let gathered = pi_bar.gather_rows(phi_m, k_m);
    let weighted = a_bar_n.mul_dense(&gathered);
    Ok(phi_n.columns(0, k_n).transpose() * weighted)
}

/// Rows of `Ψ̄ = U Φ̄` at the sample vertices only: `p × K`.
pub fn lifted_at_samples(basis: &LocalBasis, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(basis.n_samples(), coeffs.ncols());
    for (j, &v) in basis.samples.iter().enumerate() {
        for (i, w) in basis.u.row(v) {
            for c in 0..coeffs.ncols() {
                out[(j, c)] += w * coeffs[(i, c)];
            }
        }
    }
    out
}

/// Least-squares map `argmin_X ‖E_N X − G_M‖` where `E_N` holds the selected
/// source rows and `G_M` the matching target rows. Normal equations; a
/// `1e-10·trace` ridge is added only when the Gram matrix is nearly singular.
pub fn fast_ls_fmap(e_n: &DMatrix<f64>, g_m: &DMatrix<f64>) -> Result<FunctionalMap> {
    check_rows("fast least squares", e_n.nrows(), g_m.nrows())?;
    let k = e_n.ncols();
    let mut gram = e_n.transpose() * e_n;
    let rhs = e_n.transpose() * g_m;
    let eig = gram.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio > 1e-14) {
        return Err(Error::RankDeficient { ratio });
    }
    if ratio < 1e-10 {
        let ridge = 1e-10 * gram.trace();
        log::warn!("fast least-squares Gram matrix nearly singular (ratio {ratio:e}); adding ridge {ridge:e}");
        for i in 0..k {
            gram[(i, i)] += ridge;
        }
    }
    let chol = gram.cholesky().ok_or(Error::RankDeficient { ratio })?;
    Ok(FunctionalMap {
        matrix: chol.solve(&rhs),
        kind: MapKind::FastLs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::assemble_laplacian;
    use crate::spectral::solve_exact;
    use crate::shapes;

    #[test]
    fn identity_map_gives_identity_matrix() {
        let mesh = shapes::icosphere(2).normalize_area();
        let lap = assemble_laplacian(&mesh).unwrap();
        let ex = solve_exact(&lap, 12).unwrap();
        let pi = PointwiseMap::identity(mesh.n_vertices());
        let c = exact_fmap(&ex.vectors, &lap.mass, &pi, &ex.vectors).unwrap();
        assert!((c.matrix - DMatrix::identity(12, 12)).amax() < 1e-8);
    }

    #[test]
    fn relabelled_copy_gives_identity() {
        let mesh = shapes::capsule(10, 12, 2.0).normalize_area();
        let n = mesh.n_vertices();
        // reverse the vertex order
        let perm: Vec<usize> = (0..n).rev().collect();
        let verts: Vec<_> = perm.iter().map(|&i| mesh.vertex(i)).collect();
        let tris: Vec<_> = mesh.triangles().iter().map(|t| t.map(|i| n - 1 - i)).collect();
        let copy = crate::mesh::TriMesh::new(verts, tris).unwrap();
        let lap = assemble_laplacian(&mesh).unwrap();
        let ex = solve_exact(&lap, 8).unwrap();
        let permuted = DMatrix::from_fn(n, 8, |r, c| ex.vectors[(perm[r], c)]);
        let lap_copy = assemble_laplacian(&copy).unwrap();
        let pi = PointwiseMap::new(perm.clone(), n).unwrap();
        let c = exact_fmap(&permuted, &lap_copy.mass, &pi, &ex.vectors).unwrap();
        assert!((c.matrix - DMatrix::identity(8, 8)).amax() < 1e-8);
    }

    #[test]
    fn pointwise_map_validation_and_text() {
        assert!(matches!(
            PointwiseMap::new(vec![0, 5], 3),
            Err(Error::IndexRange { index: 5, limit: 3, .. })
        ));
        let m = PointwiseMap::new(vec![2, 0, 2], 3).unwrap();
        assert_eq!(m.distinct_images(), 2);
        let entries = PointwiseMap::parse_entries(&m.to_text()).unwrap();
        assert_eq!(entries, vec![Some(2), Some(0), Some(2)]);
        assert_eq!(PointwiseMap::parse_entries("3\n-1\n").unwrap(), vec![Some(3), None]);
        assert!(PointwiseMap::parse_entries("x\n").is_err());
    }

    #[test]
    fn functional_map_roundtrips() {
        let c = FunctionalMap {
            matrix: DMatrix::from_fn(3, 4, |r, c| (r as f64 + 0.1) / (c as f64 + 0.7) - 1e-17 * c as f64),
            kind: MapKind::Restricted,
        };
        let back = FunctionalMap::from_text(&c.to_text(), MapKind::Restricted).unwrap();
        assert_eq!(back, c);
        let path = std::env::temp_dir().join(format!("scalefm-cmap-{}.bin", std::process::id()));
        c.save_binary(&path).unwrap();
        assert_eq!(FunctionalMap::load_binary(&path, MapKind::Restricted).unwrap(), c);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn restricted_identity_and_reweighted_with_unit_self_weights() {
        let p = 5;
        let a_bar = CsrMatrix::identity(p);
        let phi = DMatrix::from_fn(p, 3, |r, c| ((r + 2 * c) as f64).sin());
        let pi = PointwiseMap::identity(p);
        let c = restricted_fmap(&phi, &a_bar, &pi, &phi).unwrap();
        assert!((&c.matrix - phi.transpose() * &phi).amax() < 1e-15);

        let basis = LocalBasis {
            u: CsrMatrix::identity(p),
            samples: (0..p).collect(),
            self_weights: vec![1.0; p],
            radii: vec![1.0; p],
            profile: Default::default(),
            threshold: None,
        };
        let at = lifted_at_samples(&basis, &phi);
        let rw = restricted_fmap_reweighted(&phi, &a_bar, &pi, &at).unwrap();
        assert_eq!(rw.matrix, c.matrix);
    }

    #[test]
    fn fast_ls_matches_projection_on_uniform_weights() {
        let mesh = shapes::flat_icosahedron(3).normalize_area();
        let lap = assemble_laplacian(&mesh).unwrap();
        let ex = solve_exact(&lap, 10).unwrap();
        let pi = PointwiseMap::identity(mesh.n_vertices());
        let g = pi.gather_rows(&ex.vectors, 10);
        let ls = fast_ls_fmap(&ex.vectors, &g).unwrap();
        assert!((ls.matrix - DMatrix::identity(10, 10)).amax() < 1e-8);
    }

    #[test]
    fn fast_ls_square_system_interpolates_and_detects_rank_loss() {
        let e = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0]);
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, 0.0, 1.0]);
        let x = fast_ls_fmap(&e, &g).unwrap();
        assert!((&e * &x.matrix - &g).amax() < 1e-12);
        let flat = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(fast_ls_fmap(&flat, &g), Err(Error::RankDeficient { .. })));
    }
}
