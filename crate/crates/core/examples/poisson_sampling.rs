//! Poisson-disk samples on a torus and the truncated geodesic balls around
//! them.

use scalefm::sampling::{local_dijkstra, poisson_disk_sample};
use scalefm::{shapes, MeshGraph};

fn main() -> scalefm::Result<()> {
    let mesh = shapes::torus(96, 48, 1.0, 0.35).normalize_area();
    let graph = MeshGraph::new(&mesh);
    for target in [100, 400, 1600] {
        let (samples, separation) = poisson_disk_sample(&mesh, &graph, target, 7)?;
        let record = local_dijkstra(&graph, &samples);
        let ball: usize = (0..samples.len()).map(|j| record.entries(j).len()).sum();
        let uncovered = record.uncovered(mesh.n_vertices(), &samples.radii).len();
        println!(
            "target {target:>5}: got {:>5}, separation {separation:.4}, ρ₀ {:.4}, mean ball {:>5.1} v, uncovered {uncovered}",
            samples.len(),
            samples.initial_radius,
            ball as f64 / samples.len() as f64,
        );
    }
    println!("{} Dijkstra runs", graph.dijkstra_runs());
    Ok(())
}
