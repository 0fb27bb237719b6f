//! Refines a noisy initial map between a bent and a straight capsule at
//! sample level, then converts the result to a dense vertex map.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scalefm::fmap::PointwiseMap;
use scalefm::local_basis::{adapt_radii, AdaptOptions};
use scalefm::mesh::assemble_laplacian;
use scalefm::metrics::accuracy;
use scalefm::sampling::{local_dijkstra, poisson_disk_sample};
use scalefm::spectral::ReducedSpectrum;
use scalefm::zoomout::{dense_conversion, restrict_to_samples, scalable_zoomout, ZoomOutSchedule};
use scalefm::{shapes, LocalBasis, MeshGraph, TriMesh};

fn basis(mesh: &TriMesh, graph: &MeshGraph, p: usize, seed: u64) -> scalefm::Result<LocalBasis> {
    let (samples, _) = poisson_disk_sample(mesh, graph, p, seed)?;
    let record = local_dijkstra(graph, &samples);
    Ok(adapt_radii(graph, &samples, &record, &AdaptOptions::default())?.basis)
}

fn main() -> scalefm::Result<()> {
    let (straight, bent) = shapes::bent_cylinder_pair(60, 120);
    let (n, m) = (bent.normalize_area(), straight.normalize_area());
    let (graph_n, graph_m) = (MeshGraph::new(&n), MeshGraph::new(&m));
    let (lap_n, lap_m) = (assemble_laplacian(&n)?, assemble_laplacian(&m)?);
    let nv = n.n_vertices();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noisy: Vec<usize> = (0..nv).map(|i| if rng.gen_bool(0.2) { rng.gen_range(0..nv) } else { i }).collect();
    let init = PointwiseMap::new(noisy, nv)?;
    let gt: Vec<Option<usize>> = (0..nv).map(Some).collect();

    let t = Instant::now();
    let (bn, bm) = (basis(&n, &graph_n, 600, 1)?, basis(&m, &graph_m, 600, 2)?);
    let (sn, sm) = (ReducedSpectrum::compute(&lap_n, &bn, 60)?, ReducedSpectrum::compute(&lap_m, &bm, 60)?);
    println!("{nv} vertices, {} / {} samples, bases in {:.2?}", bn.n_samples(), bm.n_samples(), t.elapsed());

    let init_bar = restrict_to_samples(&init, &bn, &bm)?;
    let out = scalable_zoomout(&sn.coeffs, &sn.a_bar, &sm.coeffs, &init_bar, &ZoomOutSchedule::new(20, 60, 2))?;
    for s in out.iterations.iter().step_by(4) {
        println!("  k {:>3}: {:>4} changed, residual {:.3e}, {:.2?}", s.k, s.changed, s.residual, s.elapsed);
    }
    let t = Instant::now();
    let dense = dense_conversion(&sn.lifted, &sm.lifted, &out.fmap, None)?;
    println!("dense conversion {:.2?}", t.elapsed());
    println!("mean geodesic error: init {:.4}, refined {:.4}",
        accuracy(&init, &gt, &graph_m, None)?.mean,
        accuracy(&dense, &gt, &graph_m, None)?.mean);
    Ok(())
}
