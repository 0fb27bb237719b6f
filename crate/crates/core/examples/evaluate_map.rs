//! Scores two maps against ground truth: the true correspondence with a
//! rotated seam, and a map that collapses onto a few vertices.

use scalefm::fmap::PointwiseMap;
use scalefm::mesh::assemble_laplacian;
use scalefm::metrics::{curve_to_text, EvalReport};
use scalefm::{shapes, MeshGraph};

fn main() -> scalefm::Result<()> {
    let (around, rings) = (40, 60);
    let (straight, bent) = shapes::bent_cylinder_pair(around, rings);
    let (n, m) = (bent.normalize_area(), straight.normalize_area());
    let lap_n = assemble_laplacian(&n)?;
    let graph_m = MeshGraph::new(&m);
    let nv = n.n_vertices();
    let gt: Vec<Option<usize>> = (0..nv).map(Some).collect();

    // ring vertices are laid out ring by ring; shift each ring by one slot
    let shifted: Vec<usize> = (0..nv)
        .map(|v| {
            let body = around * rings;
            if v < body { (v / around) * around + (v % around + 1) % around } else { v }
        })
        .collect();
    let collapsed: Vec<usize> = (0..nv).map(|v| v - v % 50).collect();

    for (name, map) in [("shifted", shifted), ("collapsed", collapsed)] {
        let map = PointwiseMap::new(map, nv)?;
        let (report, curve) = EvalReport::compute(&map, &gt, &n, &lap_n, &m, &graph_m, None)?;
        println!(
            "{name:<10} error {:.4}  coverage {:.3}  dirichlet {:.3}  distinct {}",
            report.mean_geodesic_error, report.coverage_ratio, report.dirichlet_energy, report.distinct_image_count
        );
        let text = curve_to_text(&curve);
        for line in text.lines().step_by(25) {
            println!("    {line}");
        }
    }
    Ok(())
}
