//! Loads a mesh (or builds an icosphere) and prints basic facts about its
//! cotangent Laplacian and lumped mass.
//!
//!     cargo run --example mesh_laplacian [-- path/to/mesh.off]

use scalefm::mesh::{assemble_laplacian, load_mesh};
use scalefm::shapes;

fn main() -> scalefm::Result<()> {
    let mesh = match std::env::args().nth(1) {
        Some(path) => load_mesh(&path, None)?,
        None => shapes::icosphere(3),
    };
    let lap = assemble_laplacian(&mesh)?;
    let isolated = mesh.remap().isolated();
    println!("{} vertices, {} triangles, {} isolated", mesh.n_vertices(), mesh.n_triangles(), isolated.len());
    println!("total area      {:.6}", mesh.total_area());
    println!("mass range      [{:.3e}, {:.3e}]",
        lap.mass.iter().copied().fold(f64::INFINITY, f64::min),
        lap.mass.iter().copied().fold(0.0, f64::max));
    println!("W nonzeros      {}", lap.stiffness.nnz());
    println!("W asymmetry     {:e}", lap.stiffness.asymmetry());

    let ones = vec![1.0; mesh.n_vertices()];
    let w1 = lap.stiffness.mul_vec(&ones);
    println!("‖W·1‖∞          {:e}", w1.iter().fold(0.0f64, |m, v| m.max(v.abs())));

    // Dirichlet energy of the height function over its squared A-norm
    let z: Vec<f64> = mesh.vertices().iter().map(|p| p[2]).collect();
    println!("Rayleigh(z)     {:.4}", lap.dirichlet_energy(&z) / lap.mass_norm_sq(&z));
    Ok(())
}
