//! Laplace–Beltrami eigenbases: the reduced problem on the local-function
//! span and the exact problem on the full mesh.

use std::path::Path;

use nalgebra::DMatrix;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::linalg::{self, EigenOptions, EnvelopeCholesky};
use crate::local_basis::LocalBasis;
use crate::mesh::LaplacianPair;
use crate::sparse::CsrMatrix;

const MAGIC: &[u8; 8] = b"SFMSPEC1";

/// Reduced pencil sizes up to this are solved densely.
pub const DENSE_REDUCED_LIMIT: usize = 1500;

/// Largest mesh `solve_exact` accepts by default.
pub const EXACT_VERTEX_LIMIT: usize = 50_000;

#[derive(Clone, Debug)]
pub struct ReducedSpectrum {
    /// `Ā = UᵀAU`
    pub a_bar: CsrMatrix,
    /// `W̄ = UᵀWU`
    pub w_bar: CsrMatrix,
    pub eigenvalues: Vec<f64>,
    /// `Φ̄`, `p × K`, `Ā`-orthonormal.
    pub coeffs: DMatrix<f64>,
    /// `Ψ̄ = U Φ̄`, `n × K`.
    pub lifted: DMatrix<f64>,
}

impl ReducedSpectrum {
    pub fn compute(lap: &LaplacianPair, basis: &LocalBasis, k: usize) -> Result<Self> {
        let (a_bar, w_bar) = reduce_operators(lap, basis)?;
        let (eigenvalues, coeffs) = solve_reduced(&a_bar, &w_bar, k)?;
        let lifted = lift(basis, &coeffs);
        Ok(ReducedSpectrum {
            a_bar,
            w_bar,
            eigenvalues,
            coeffs,
            lifted,
        })
    }

    /// Rebuilds the spectrum from cached eigenpairs.
    pub fn from_parts(lap: &LaplacianPair, basis: &LocalBasis, eigenvalues: Vec<f64>, coeffs: DMatrix<f64>) -> Result<Self> {
        let (a_bar, w_bar) = reduce_operators(lap, basis)?;
        if coeffs.nrows() != basis.n_samples() || coeffs.ncols() != eigenvalues.len() {
            return Err(Error::Dimension(format!(
                "cached coefficients are {}×{}, expected {}×{}",
                coeffs.nrows(),
                coeffs.ncols(),
                basis.n_samples(),
                eigenvalues.len()
            )));
        }
        let lifted = lift(basis, &coeffs);
        Ok(ReducedSpectrum {
            a_bar,
            w_bar,
            eigenvalues,
            coeffs,
            lifted,
        })
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_samples(&self) -> usize {
        self.coeffs.nrows()
    }

    /// Binary cache: `(n, p, K)`, the eigenvalues, then `Φ̄` column-major.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = Writer::new(MAGIC);
        w.u64(self.lifted.nrows() as u64);
        w.u64(self.coeffs.nrows() as u64);
        w.u64(self.k() as u64);
        w.f64s(&self.eigenvalues);
        w.f64s(self.coeffs.as_slice());
        w.finish(path)
    }

    /// Reads `(n, p, eigenvalues, Φ̄)` back from [`ReducedSpectrum::save`].
    pub fn load_parts(path: &Path) -> Result<(usize, Vec<f64>, DMatrix<f64>)> {
        let mut r = Reader::open(path, MAGIC)?;
        let n = r.usize()?;
        let p = r.usize()?;
        let k = r.usize()?;
        if k > p || p > n {
            return Err(r.invalid("inconsistent header"));
        }
        let values = r.f64s(k)?;
        let coeffs = DMatrix::from_vec(p, k, r.f64s(p * k)?);
        r.finish()?;
        Ok((n, values, coeffs))
    }
}

#[derive(Clone, Debug)]
pub struct ExactSpectrum {
    pub eigenvalues: Vec<f64>,
    /// `Ψ`, `n × K`, `A`-orthonormal.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
}

/// `Ā = UᵀAU` and `W̄ = UᵀWU`, symmetrized as `(M + Mᵀ)/2`.
pub fn reduce_operators(lap: &LaplacianPair, basis: &LocalBasis) -> Result<(CsrMatrix, CsrMatrix)> {
    let u = &basis.u;
    if u.nrows() != lap.n() {
        return Err(Error::Dimension(format!(
            "basis has {} rows, Laplacian has {} vertices",
            u.nrows(),
            lap.n()
        )));
    }
    let ut = u.transpose();
    let au = {
        let rows = (0..u.nrows())
            .map(|r| u.row(r).map(|(c, v)| (c, v * lap.mass[r])).collect())
            .collect();
        CsrMatrix::from_sorted_rows(u.ncols(), rows)
    };
    let a_bar = symmetrize(&ut.mul_sparse(&au));
    let w_bar = symmetrize(&ut.mul_sparse(&lap.stiffness.mul_sparse(u)));
    Ok((a_bar, w_bar))
}

fn symmetrize(m: &CsrMatrix) -> CsrMatrix {
    let t = m.transpose();
    let triplets: Vec<_> = m
        .triplets()
        .chain(t.triplets())
        .map(|(r, c, v)| (r, c, 0.5 * v))
        .collect();
    CsrMatrix::from_triplets(m.nrows(), m.ncols(), &triplets)
}

/// `K` smallest eigenpairs of `W̄ φ̄ = λ̄ Ā φ̄`, `Ā`-orthonormal, first
/// clearly nonzero coefficient of each vector positive.
pub fn solve_reduced(a_bar: &CsrMatrix, w_bar: &CsrMatrix, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let p = a_bar.nrows();
    if k == 0 || k > p {
        return Err(Error::InvalidArgument(format!("cannot take {k} eigenpairs from {p} samples")));
    }
    let factor = EnvelopeCholesky::factor(a_bar).map_err(|_| Error::IllConditioned { ratio: 0.0 })?;
    let ratio = linalg::extreme_eigenvalue_ratio(p, |v| a_bar.mul_vec(v), |v| factor.solve_in_place(v));
    if ratio < 1e-12 {
        return Err(Error::IllConditioned { ratio });
    }
    let (values, mut vectors) = if p <= DENSE_REDUCED_LIMIT {
        linalg::dense_generalized(&w_bar.to_dense(), &a_bar.to_dense(), k)?
    } else {
        let res = linalg::smallest_generalized(w_bar, a_bar, k, &EigenOptions::default())?;
        (res.values, res.vectors)
    };
    linalg::fix_signs(&mut vectors);
    Ok((values, vectors))
}

/// `Ψ̄ = U Φ̄`
pub fn lift(basis: &LocalBasis, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
    basis.u.mul_dense(coeffs)
}

/// Exact eigenpairs by shift-invert subspace iteration around `σ = −1e-8`.
pub fn solve_exact(lap: &LaplacianPair, k: usize) -> Result<ExactSpectrum> {
    solve_exact_with(lap, k, EXACT_VERTEX_LIMIT)
}

pub fn solve_exact_with(lap: &LaplacianPair, k: usize, max_vertices: usize) -> Result<ExactSpectrum> {
    let n = lap.n();
    if n > max_vertices {
        return Err(Error::InvalidArgument(format!(
            "exact eigensolve limited to {max_vertices} vertices, mesh has {n}"
        )));
    }
    let mass = CsrMatrix::from_triplets(
        n,
        n,
        &lap.mass.iter().enumerate().map(|(i, &a)| (i, i, a)).collect::<Vec<_>>(),
    );
    let res = linalg::smallest_generalized(&lap.stiffness, &mass, k, &EigenOptions::default())?;
    let worst = res.residuals.iter().copied().fold(0.0, f64::max);
    if worst > 1e-6 {
        return Err(Error::Convergence {
            iterations: res.iterations,
            residual: worst,
        });
    }
    Ok(ExactSpectrum {
        eigenvalues: res.values,
        vectors: res.vectors,
        residuals: res.residuals,
    })
}

/// Largest deviation of `Bᵀ M B` from the identity, `M` diagonal.
pub fn orthonormality_defect_diag(b: &DMatrix<f64>, mass: &[f64]) -> f64 {
    let mut mb = b.clone();
    for (r, &a) in mass.iter().enumerate() {
        mb.row_mut(r).scale_mut(a);
    }
    (b.transpose() * mb - DMatrix::identity(b.ncols(), b.ncols())).amax()
}

/// Largest deviation of `Bᵀ M B` from the identity, `M` sparse.
pub fn orthonormality_defect(b: &DMatrix<f64>, m: &CsrMatrix) -> f64 {
    (b.transpose() * m.mul_dense(b) - DMatrix::identity(b.ncols(), b.ncols())).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_basis::{adapt_radii, AdaptOptions};
    use crate::mesh::assemble_laplacian;
    use crate::sampling::{local_dijkstra, poisson_disk_sample, MeshGraph};
    use crate::shapes;
    use std::f64::consts::PI;

    fn basis_for(mesh: &crate::mesh::TriMesh, p: usize) -> LocalBasis {
        let g = MeshGraph::new(mesh);
        let (s, _) = poisson_disk_sample(mesh, &g, p, 3).unwrap();
        let rec = local_dijkstra(&g, &s);
        adapt_radii(&g, &s, &rec, &AdaptOptions::default()).unwrap().basis
    }

    #[test]
    fn identity_basis_reproduces_operators() {
        let mesh = shapes::icosphere(1);
        let lap = assemble_laplacian(&mesh).unwrap();
        let n = mesh.n_vertices();
        let basis = LocalBasis {
            u: CsrMatrix::identity(n),
            samples: (0..n).collect(),
            self_weights: vec![1.0; n],
            radii: vec![0.0; n],
            profile: Default::default(),
            threshold: None,
        };
        let (a, w) = reduce_operators(&lap, &basis).unwrap();
        for r in 0..n {
            assert!((a.get(r, r) - lap.mass[r]).abs() < 1e-15);
        }
        assert!((w.to_dense() - lap.stiffness.to_dense()).amax() < 1e-15);
    }

    #[test]
    fn reduced_operators_keep_area_and_kernel() {
        let mesh = shapes::icosphere(3).normalize_area();
        let lap = assemble_laplacian(&mesh).unwrap();
        let basis = basis_for(&mesh, 150);
        let (a, w) = reduce_operators(&lap, &basis).unwrap();
        let ones = vec![1.0; a.nrows()];
        let total: f64 = a.mul_vec(&ones).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let w1 = w.mul_vec(&ones);
        assert!(w1.iter().all(|v| v.abs() < 1e-8));
        assert_eq!(a.asymmetry(), 0.0);
        assert_eq!(w.asymmetry(), 0.0);
    }

    #[test]
    fn reduced_spectrum_properties() {
        let mesh = shapes::icosphere(3).normalize_area();
        let lap = assemble_laplacian(&mesh).unwrap();
        let basis = basis_for(&mesh, 200);
        let spec = ReducedSpectrum::compute(&lap, &basis, 20).unwrap();
        assert!(spec.eigenvalues[0].abs() < 1e-6);
        assert!(orthonormality_defect(&spec.coeffs, &spec.a_bar) < 1e-8);
        assert!(orthonormality_defect_diag(&spec.lifted, &lap.mass) < 1e-8);
        // first vector is constant, positive by the sign convention
        let c = spec.lifted.column(0);
        assert!(c.min() > 0.0 && (c.max() - c.min()) < 1e-8);

        let exact = solve_exact(&lap, 20).unwrap();
        for (rb, r) in spec.eigenvalues.iter().zip(&exact.eigenvalues) {
            assert!(*rb >= r - 1e-8, "{rb} < {r}");
        }
        // sphere clusters 1, 3, 5, 7 with λ ∝ l(l+1); area 1 scales by 4π
        let scale = 4.0 * PI;
        for (l, range) in [(1.0, 1..4), (2.0, 4..9), (3.0, 9..16)] {
            for i in range {
                let rel = (spec.eigenvalues[i] / (scale * l * (l + 1.0)) - 1.0).abs();
                assert!(rel < 0.1, "λ̄{i} off by {rel}");
            }
        }
    }

    #[test]
    fn exact_grid_matches_neumann_spectrum() {
        let mesh = shapes::grid(32, 32, 1.0, 1.0);
        let lap = assemble_laplacian(&mesh).unwrap();
        let ex = solve_exact(&lap, 8).unwrap();
        let mut analytic: Vec<f64> = (0..4)
            .flat_map(|j| (0..4).map(move |k| PI * PI * (j * j + k * k) as f64))
            .collect();
        analytic.sort_by(f64::total_cmp);
        assert!(ex.eigenvalues[0].abs() < 1e-6);
        for i in 1..6 {
            let rel = (ex.eigenvalues[i] - analytic[i]).abs() / analytic[i];
            assert!(rel < 0.05, "λ{i} = {} vs {}", ex.eigenvalues[i], analytic[i]);
        }
        assert!(ex.residuals.iter().all(|&r| r <= 1e-6));
    }

    #[test]
    fn rigid_motion_leaves_spectra_unchanged() {
        let mesh = shapes::capsule(12, 16, 2.0);
        let moved = mesh
            .map_positions(|p| {
                let (c, s) = (0.6f64.cos(), 0.6f64.sin());
                [c * p[0] - s * p[1] + 3.0, s * p[0] + c * p[1] - 1.0, p[2] + 0.5]
            })
            .unwrap();
        let a = solve_exact(&assemble_laplacian(&mesh).unwrap(), 10).unwrap();
        let b = solve_exact(&assemble_laplacian(&moved).unwrap(), 10).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-8 * x.max(1.0));
        }
    }

    #[test]
    fn spectrum_cache_roundtrip() {
        let mesh = shapes::icosphere(2).normalize_area();
        let lap = assemble_laplacian(&mesh).unwrap();
        let basis = basis_for(&mesh, 60);
        let spec = ReducedSpectrum::compute(&lap, &basis, 10).unwrap();
        let path = std::env::temp_dir().join(format!("scalefm-spec-{}.bin", std::process::id()));
        spec.save(&path).unwrap();
        let (n, vals, coeffs) = ReducedSpectrum::load_parts(&path).unwrap();
        assert_eq!(n, mesh.n_vertices());
        assert_eq!(vals, spec.eigenvalues);
        assert_eq!(coeffs, spec.coeffs);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn too_many_eigenpairs_rejected() {
        let mesh = shapes::icosphere(1);
        let lap = assemble_laplacian(&mesh).unwrap();
        let basis = basis_for(&mesh, 10);
        let (a, w) = reduce_operators(&lap, &basis).unwrap();
        assert!(solve_reduced(&a, &w, a.nrows() + 1).is_err());
    }
}
