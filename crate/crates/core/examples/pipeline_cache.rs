//! Runs the matching pipeline twice on files written to a temporary
//! directory; the second run reuses the cached bases.

use scalefm::fmap::PointwiseMap;
use scalefm::mesh::write_off;
use scalefm::pipeline::{cmd_eval, cmd_match, PipelineConfig};
use scalefm::shapes;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("scalefm-pipeline-example");
    std::fs::create_dir_all(&dir)?;
    let (straight, bent) = shapes::bent_cylinder_pair(48, 96);
    let (src, dst, init) = (dir.join("bent.off"), dir.join("straight.off"), dir.join("id.map"));
    write_off(&bent, &src)?;
    write_off(&straight, &dst)?;
    let identity = PointwiseMap::identity(bent.n_vertices()).to_text();
    std::fs::write(&init, &identity)?;

    let cfg = PipelineConfig {
        samples: 500,
        k_init: 10,
        k_final: 40,
        cache_dir: Some(dir.join("cache")),
        ..Default::default()
    };
    for run in 1..=2 {
        let out = cmd_match(&src, &dst, &init, &cfg)?;
        let files = out.write(&dir.join("match"))?;
        println!("run {run}: wrote {} files", files.len());
        print!("{}", out.times.to_table());
    }
    let eval = cmd_eval(&dir.join("match.map"), &init, &src, &dst, None)?;
    println!("mean geodesic error {:.4}", eval.report.mean_geodesic_error);
    Ok(())
}
