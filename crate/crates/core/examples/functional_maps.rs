//! The three spectral maps between a bent and a straight capsule for the
//! true correspondence: exact `C`, reduced `C̄` (lifted eigenvectors, full
//! mass) and restricted `Ĉ` (sample-level quantities only).

use scalefm::fmap::{exact_fmap, reduced_fmap, restricted_fmap, PointwiseMap};
use scalefm::local_basis::{adapt_radii, AdaptOptions};
use scalefm::mesh::assemble_laplacian;
use scalefm::metrics::estimation_delta;
use scalefm::sampling::{local_dijkstra, poisson_disk_sample};
use scalefm::spectral::{solve_exact, ReducedSpectrum};
use scalefm::zoomout::restrict_to_samples;
use scalefm::{shapes, LocalBasis, MeshGraph, TriMesh};

fn basis(mesh: &TriMesh, p: usize, seed: u64) -> scalefm::Result<LocalBasis> {
    let graph = MeshGraph::new(mesh);
    let (samples, _) = poisson_disk_sample(mesh, &graph, p, seed)?;
    let record = local_dijkstra(&graph, &samples);
    Ok(adapt_radii(&graph, &samples, &record, &AdaptOptions::default())?.basis)
}

fn main() -> scalefm::Result<()> {
    let k = 12;
    let (straight, bent) = shapes::bent_cylinder_pair(32, 64);
    let (n, m) = (bent.normalize_area(), straight.normalize_area());
    let (lap_n, lap_m) = (assemble_laplacian(&n)?, assemble_laplacian(&m)?);
    let pi = PointwiseMap::identity(n.n_vertices());

    let (en, em) = (solve_exact(&lap_n, k)?, solve_exact(&lap_m, k)?);
    let c = exact_fmap(&en.vectors, &lap_n.mass, &pi, &em.vectors)?;

    let (bn, bm) = (basis(&n, 300, 1)?, basis(&m, 300, 2)?);
    let (sn, sm) = (ReducedSpectrum::compute(&lap_n, &bn, k)?, ReducedSpectrum::compute(&lap_m, &bm, k)?);
    let c_bar = reduced_fmap(&sn.lifted, &lap_n.mass, &pi, &sm.lifted)?;
    let pi_bar = restrict_to_samples(&pi, &bn, &bm)?;
    let c_hat = restricted_fmap(&sn.coeffs, &sn.a_bar, &pi_bar, &sm.coeffs)?;

    // eigenvector signs are arbitrary, so compare magnitudes on the diagonal
    println!("diag |C|  {:?}", c.matrix.diagonal().iter().map(|v| format!("{:.2}", v.abs())).collect::<Vec<_>>());
    println!("diag |C̄|  {:?}", c_bar.matrix.diagonal().iter().map(|v| format!("{:.2}", v.abs())).collect::<Vec<_>>());
    println!("diag |Ĉ|  {:?}", c_hat.matrix.diagonal().iter().map(|v| format!("{:.2}", v.abs())).collect::<Vec<_>>());
    println!("Δ = ‖C̄ − Ĉ‖ = {:.4}", estimation_delta(&c_bar.matrix, &c_hat.matrix)?);
    println!("diagonal mass: C {:.3}, C̄ {:.3}, Ĉ {:.3}", c.diagonal_mass(), c_bar.diagonal_mass(), c_hat.diagonal_mass());
    Ok(())
}
