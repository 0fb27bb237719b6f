//! Approximate Laplace–Beltrami eigenpairs from a few hundred samples,
//! next to the exact ones.

use std::time::Instant;

use scalefm::local_basis::{adapt_radii, AdaptOptions};
use scalefm::mesh::assemble_laplacian;
use scalefm::sampling::{local_dijkstra, poisson_disk_sample};
use scalefm::spectral::{orthonormality_defect_diag, solve_exact, ReducedSpectrum};
use scalefm::{shapes, MeshGraph};

fn main() -> scalefm::Result<()> {
    let mesh = shapes::icosphere(5);
    let lap = assemble_laplacian(&mesh)?;
    let graph = MeshGraph::new(&mesh);
    let k = 25;

    let t = Instant::now();
    let (samples, _) = poisson_disk_sample(&mesh, &graph, 500, 0)?;
    let record = local_dijkstra(&graph, &samples);
    let basis = adapt_radii(&graph, &samples, &record, &AdaptOptions::default())?.basis;
    let reduced = ReducedSpectrum::compute(&lap, &basis, k)?;
    let t_reduced = t.elapsed();

    let t = Instant::now();
    let exact = solve_exact(&lap, k)?;
    let t_exact = t.elapsed();

    println!("{} vertices, {} samples", mesh.n_vertices(), basis.n_samples());
    println!("reduced {t_reduced:.2?}, exact {t_exact:.2?}");
    println!("  i   exact      reduced    ℓ(ℓ+1)");
    for i in 0..k {
        let l = (i as f64).sqrt().floor();
        println!("{i:>3}   {:<9.4}  {:<9.4}  {}", exact.eigenvalues[i], reduced.eigenvalues[i], l * (l + 1.0));
    }
    println!("lifted basis A-orthonormality defect {:.1e}", orthonormality_defect_diag(&reduced.lifted, &lap.mass));
    Ok(())
}
