//! Dense conversion restricted to candidates derived from the sample map,
//! against an unrestricted nearest-neighbour search over all of `M`.

use std::time::Instant;

use scalefm::fmap::PointwiseMap;
use scalefm::local_basis::{adapt_radii, AdaptOptions};
use scalefm::mesh::assemble_laplacian;
use scalefm::sampling::{local_dijkstra, poisson_disk_sample};
use scalefm::spectral::ReducedSpectrum;
use scalefm::zoomout::{build_guided_candidates, dense_conversion, restrict_to_samples, scalable_zoomout, ZoomOutSchedule};
use scalefm::{shapes, LocalBasis, MeshGraph, TriMesh};

fn basis(mesh: &TriMesh, p: usize, seed: u64) -> scalefm::Result<LocalBasis> {
    let graph = MeshGraph::new(mesh);
    let (samples, _) = poisson_disk_sample(mesh, &graph, p, seed)?;
    let record = local_dijkstra(&graph, &samples);
    Ok(adapt_radii(&graph, &samples, &record, &AdaptOptions::default())?.basis)
}

fn main() -> scalefm::Result<()> {
    let straight = shapes::subdivide(&shapes::capsule(60, 120, 2.0));
    let bent = shapes::bend(&straight, 1.1);
    let (n, m) = (bent.normalize_area(), straight.normalize_area());
    let (lap_n, lap_m) = (assemble_laplacian(&n)?, assemble_laplacian(&m)?);
    let (bn, bm) = (basis(&n, 800, 1)?, basis(&m, 800, 2)?);
    let (sn, sm) = (ReducedSpectrum::compute(&lap_n, &bn, 50)?, ReducedSpectrum::compute(&lap_m, &bm, 50)?);
    let init = restrict_to_samples(&PointwiseMap::identity(n.n_vertices()), &bn, &bm)?;
    let out = scalable_zoomout(&sn.coeffs, &sn.a_bar, &sm.coeffs, &init, &ZoomOutSchedule::new(20, 50, 5))?;

    let t = Instant::now();
    let full = dense_conversion(&sn.lifted, &sm.lifted, &out.fmap, None)?;
    let t_full = t.elapsed();
    let t = Instant::now();
    let guide = build_guided_candidates(&bn, &bm, &out.map)?;
    let guided = dense_conversion(&sn.lifted, &sm.lifted, &out.fmap, Some(&guide))?;
    let t_guided = t.elapsed();

    let mean_candidates =
        (0..n.n_vertices()).step_by(97).map(|x| guide.candidates(x).len()).sum::<usize>() as f64
            / n.n_vertices().div_ceil(97) as f64;
    let agree = full.as_slice().iter().zip(guided.as_slice()).filter(|(a, b)| a == b).count();
    println!("{} vertices on each side", n.n_vertices());
    println!("full search   {t_full:.2?}");
    println!("guided search {t_guided:.2?}, ~{mean_candidates:.0} candidates per vertex");
    println!("agreement     {:.2}%", 100.0 * agree as f64 / n.n_vertices() as f64);
    Ok(())
}
