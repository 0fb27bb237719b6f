use proptest::prelude::*;

use scalefm::fmap::{restricted_fmap, PointwiseMap};
use scalefm::local_basis::{adapt_radii, AdaptOptions};
use scalefm::mesh::assemble_laplacian;
use scalefm::sampling::{local_dijkstra, poisson_disk_sample};
use scalefm::spectral::{solve_exact, ReducedSpectrum};
use scalefm::{shapes, ChiProfile, LocalBasis, MeshGraph, TriMesh};

/// Grid with interior vertices pushed around, so triangles are irregular
/// and some angles obtuse.
fn jittered_grid(nx: usize, ny: usize, amount: f64, seed: u64) -> TriMesh {
    let g = shapes::grid(nx, ny, 1.0, 1.0);
    let (hx, hy) = (1.0 / (nx - 1) as f64, 1.0 / (ny - 1) as f64);
    g.map_positions(|p| {
        let h = (p[0] * 92821.0 + p[1] * 68917.0 + seed as f64).sin() * 43758.5453;
        let (dx, dy) = (h.fract(), (h * 1.618).fract());
        let inside = p[0] > 1e-9 && p[0] < 1.0 - 1e-9 && p[1] > 1e-9 && p[1] < 1.0 - 1e-9;
        if inside {
            [p[0] + amount * hx * dx, p[1] + amount * hy * dy, 0.0]
        } else {
            p
        }
    })
    .unwrap()
}

fn adaptive(mesh: &TriMesh, p: usize, seed: u64, threshold: f64, profile: ChiProfile) -> LocalBasis {
    let graph = MeshGraph::new(mesh);
    let (samples, _) = poisson_disk_sample(mesh, &graph, p, seed).unwrap();
    let record = local_dijkstra(&graph, &samples);
    let opts = AdaptOptions { threshold, profile, max_rounds: None };
    adapt_radii(&graph, &samples, &record, &opts).unwrap().basis
}

fn rotate(mesh: &TriMesh, angle: f64, shift: [f64; 3]) -> TriMesh {
    let (s, c) = angle.sin_cos();
    mesh.map_positions(|p| [c * p[0] - s * p[2] + shift[0], p[1] + shift[1], s * p[0] + c * p[2] + shift[2]])
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_invariants(nx in 3usize..14, ny in 3usize..14, amount in 0.0f64..0.45, seed in 0u64..1000) {
        let mesh = jittered_grid(nx, ny, amount, seed);
        let lap = assemble_laplacian(&mesh).unwrap();
        let total = mesh.total_area();
        let sum: f64 = mesh.per_vertex_area().iter().sum();
        prop_assert!((sum - total).abs() <= 1e-10 * total);
        prop_assert_eq!(lap.stiffness.asymmetry(), 0.0);
        let ones = vec![1.0; mesh.n_vertices()];
        let w1 = lap.stiffness.mul_vec(&ones);
        let row_norm = (0..mesh.n_vertices())
            .map(|r| lap.stiffness.row(r).map(|(_, v)| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        prop_assert!(w1.iter().all(|v| v.abs() <= 1e-8 * row_norm));
        prop_assert!(lap.mass.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn adapted_basis_is_a_partition_above_threshold(
        n in 12usize..24,
        frac in 0.1f64..0.5,
        threshold in 0.1f64..0.6,
        bump in proptest::bool::ANY,
        seed in 0u64..500,
    ) {
        let mesh = jittered_grid(n, n, 0.3, seed);
        let p = ((n * n) as f64 * frac) as usize;
        let profile = if bump { ChiProfile::SmoothBump } else { ChiProfile::Polynomial };
        let basis = adaptive(&mesh, p, seed, threshold, profile);
        prop_assert!(basis.partition_defect() <= 1e-10);
        prop_assert!(basis.min_self_weight() >= threshold);
    }

    #[test]
    fn restricted_rows_bounded_by_target_coefficients(seed in 0u64..500, shift in 0usize..400) {
        let mesh = shapes::torus(24, 12, 1.0, 0.4);
        let lap = assemble_laplacian(&mesh).unwrap();
        let basis = adaptive(&mesh, 80, seed, 0.3, ChiProfile::Polynomial);
        let spec = ReducedSpectrum::compute(&lap, &basis, 12).unwrap();
        let p = basis.n_samples();
        let pi_bar = PointwiseMap::new((0..p).map(|j| (j * 7 + shift) % p).collect(), p).unwrap();
        let c = restricted_fmap(&spec.coeffs, &spec.a_bar, &pi_bar, &spec.coeffs).unwrap().matrix;
        // ‖Ĉ row i‖ ≤ Σⱼ |(Ā Φ̄)ⱼᵢ| · maxⱼ ‖Φ̄ row j‖
        let a_phi = spec.a_bar.mul_dense(&spec.coeffs);
        let max_row = (0..p).map(|j| spec.coeffs.row(j).norm()).fold(0.0, f64::max);
        for i in 0..c.nrows() {
            let bound = a_phi.column(i).abs().sum() * max_row;
            prop_assert!(c.row(i).norm() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn spectra_survive_rigid_motions(angle in 0.0f64..6.3, dx in -5.0f64..5.0, dz in -5.0f64..5.0) {
        let mesh = shapes::capsule(16, 20, 2.0);
        let moved = rotate(&mesh, angle, [dx, 1.0, dz]);
        let (lap, lap_moved) = (assemble_laplacian(&mesh).unwrap(), assemble_laplacian(&moved).unwrap());
        let (a, b) = (adaptive(&mesh, 90, 4, 0.3, ChiProfile::Polynomial), adaptive(&moved, 90, 4, 0.3, ChiProfile::Polynomial));
        prop_assert_eq!(&a.samples, &b.samples);
        let (ra, rb) = (ReducedSpectrum::compute(&lap, &a, 10).unwrap(), ReducedSpectrum::compute(&lap_moved, &b, 10).unwrap());
        let (ea, eb) = (solve_exact(&lap, 10).unwrap(), solve_exact(&lap_moved, 10).unwrap());
        for i in 0..10 {
            prop_assert!((ra.eigenvalues[i] - rb.eigenvalues[i]).abs() <= 1e-8);
            prop_assert!((ea.eigenvalues[i] - eb.eigenvalues[i]).abs() <= 1e-8);
            prop_assert!(ra.eigenvalues[i] >= ea.eigenvalues[i] - 1e-8);
        }
    }
}

#[test]
fn identity_restriction_reproduces_coefficients() {
    let mesh = shapes::icosphere(2);
    let lap = assemble_laplacian(&mesh).unwrap();
    let basis = adaptive(&mesh, 60, 1, 0.3, ChiProfile::Polynomial);
    let spec = ReducedSpectrum::compute(&lap, &basis, 15).unwrap();
    let p = basis.n_samples();
    let c = restricted_fmap(&spec.coeffs, &spec.a_bar, &PointwiseMap::identity(p), &spec.coeffs).unwrap().matrix;
    let coeffs = nalgebra::DVector::from_fn(15, |i, _| (i as f64 * 0.7).cos());
    assert!((&c * &coeffs - &coeffs).amax() < 1e-6);
}
