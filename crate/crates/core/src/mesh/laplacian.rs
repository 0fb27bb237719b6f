use super::{cross, dot, norm, sub, TriMesh};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Cotangent stiffness `W` and lumped mass `A` of a mesh, so that the
/// Laplace–Beltrami eigenproblem reads `W ψ = λ A ψ`.
#[derive(Clone, Debug)]
pub struct LaplacianPair {
    /// Symmetric positive semi-definite, zero row sums.
    pub stiffness: CsrMatrix,
    /// Diagonal of the lumped mass matrix.
    pub mass: Vec<f64>,
}

impl LaplacianPair {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    /// `xᵀ W x`
    pub fn dirichlet_energy(&self, x: &[f64]) -> f64 {
        let wx = self.stiffness.mul_vec(x);
        x.iter().zip(&wx).map(|(a, b)| a * b).sum()
    }

    /// `‖x‖²_A`
    pub fn mass_norm_sq(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.mass).map(|(v, a)| a * v * v).sum()
    }
}

/// Assembles the cotangent Laplacian with barycentric lumped mass.
///
/// Boundary edges get the single cotangent of their one incident triangle,
/// which is the natural (Neumann) condition. Negative weights from obtuse
/// angles are kept.
pub fn assemble_laplacian(mesh: &TriMesh) -> Result<LaplacianPair> {
    let verts = mesh.vertices();
    let tris = mesh.triangles();
    let areas = mesh.triangle_areas();
    let mean_area = areas.iter().sum::<f64>() / areas.len() as f64;
    let threshold = 1e-12 * mean_area;
    if let Some((t, &a)) = areas.iter().enumerate().find(|(_, &a)| a < threshold) {
        return Err(Error::DegenerateTriangle {
            triangle: t,
            area: a,
            threshold,
        });
    }

    let mut triplets = Vec::with_capacity(tris.len() * 12);
    for t in tris {
        for k in 0..3 {
            // corner k is opposite edge (i, j)
            let (c, i, j) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let e1 = sub(verts[i], verts[c]);
            let e2 = sub(verts[j], verts[c]);
            let cot = dot(e1, e2) / norm(cross(e1, e2));
            let w = 0.5 * cot;
            triplets.push((i, j, -w));
            triplets.push((j, i, -w));
            triplets.push((i, i, w));
            triplets.push((j, j, w));
        }
    }
    let n = mesh.n_vertices();
    Ok(LaplacianPair {
        stiffness: CsrMatrix::from_triplets(n, n, &triplets),
        mass: mesh.per_vertex_area().to_vec(),
    })
}
