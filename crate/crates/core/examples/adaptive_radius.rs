//! Fixed-radius versus adaptive-radius local functions on a capsule.
//! Adaptation only truncates stored distances, so no new Dijkstra runs
//! happen while the radii shrink.

use scalefm::local_basis::{adapt_radii_observed, fixed_radius_basis, AdaptOptions};
use scalefm::sampling::{local_dijkstra, poisson_disk_sample};
use scalefm::{shapes, ChiProfile, MeshGraph};

fn main() -> scalefm::Result<()> {
    let mesh = shapes::capsule(48, 96, 2.0).normalize_area();
    let graph = MeshGraph::new(&mesh);
    let (samples, _) = poisson_disk_sample(&mesh, &graph, 600, 1)?;
    let record = local_dijkstra(&graph, &samples);

    for profile in [ChiProfile::Polynomial, ChiProfile::SmoothBump] {
        let (_, _, fixed) = fixed_radius_basis(&graph, &samples, &record, profile)?;
        let runs = graph.dijkstra_runs();
        let mut trace = Vec::new();
        let opts = AdaptOptions { profile, ..Default::default() };
        let out = adapt_radii_observed(&graph, &samples, &record, &opts, |s| {
            if s.round % 25 == 1 {
                trace.push((s.round, s.self_weights.iter().copied().fold(f64::INFINITY, f64::min)));
            }
        })?;
        println!("{profile:?}");
        println!("  fixed:    min self-weight {:.3}, mean {:.3}", fixed.min_self_weight(), fixed.mean_self_weight());
        println!(
            "  adaptive: min self-weight {:.3}, mean {:.3}, {} rounds, {} samples added",
            out.basis.min_self_weight(),
            out.basis.mean_self_weight(),
            out.rounds,
            out.added_after.len()
        );
        for (round, min) in trace {
            println!("    round {round:>4}: min {min:.3}");
        }
        println!(
            "  partition defect {:.1e}, new Dijkstra runs {}",
            out.basis.partition_defect(),
            graph.dijkstra_runs() - runs - out.dijkstra_runs
        );
    }
    Ok(())
}
