//! End-to-end acceptance criteria. Runs without the libtest harness so every
//! criterion prints a single PASS/FAIL line; the process fails if any does.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scalefm::fmap::{exact_fmap, fast_ls_fmap, reduced_fmap, restricted_fmap, PointwiseMap};
use scalefm::local_basis::{adapt_radii, adapt_radii_observed, build_unnormalized, fixed_radius_basis, AdaptOptions};
use scalefm::mesh::{assemble_laplacian, write_off};
use scalefm::metrics::{accuracy, estimation_delta, smoothness};
use scalefm::pipeline::{bounds_shapes, cmd_match, PipelineConfig, Shape};
use scalefm::sampling::{cover_unreached, local_dijkstra, poisson_disk_sample};
use scalefm::spectral::{orthonormality_defect, orthonormality_defect_diag, solve_exact, ReducedSpectrum};
use scalefm::zoomout::{
    build_guided_candidates, dense_conversion, nearest_sample_map, restrict_to_samples, scalable_zoomout,
    standard_zoomout, ZoomOutSchedule,
};
use scalefm::{shapes, ChiProfile, GeodesicRecord, LocalBasis, MeshGraph, SampleSet, TriMesh};

const PARTITION_TOL: f64 = 1e-10;
const PARTITION_BUDGET: Duration = Duration::from_secs(5);
const ORTHO_TOL: f64 = 1e-8;
const ORTHO_K: usize = 50;
const RITZ_TOL: f64 = 1e-8;
const RITZ_K: usize = 20;
const ANALYTIC_REL_TOL: f64 = 0.05;
const SELF_WEIGHT_MIN: f64 = 0.3;
const DELTA_RATIO_MAX: f64 = 0.2;
const PARITY_RATIO_MAX: f64 = 1.15;
const INIT_IMPROVEMENT_MIN: f64 = 2.0;
const PARITY_BUDGET: Duration = Duration::from_secs(60);
const ITERATION_TIME_CHANGE_MAX: f64 = 0.2;
const GUIDED_AGREEMENT_MIN: f64 = 0.99;
const FAST_LS_GAP_RATIO_MIN: f64 = 10.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

fn fixtures() -> Vec<(&'static str, TriMesh)> {
    let (straight, bent) = shapes::bent_cylinder_pair(24, 40);
    vec![
        ("icosphere", shapes::icosphere(3)),
        ("flat-icosahedron", shapes::flat_icosahedron(3)),
        ("grid", shapes::grid(32, 32, 1.0, 1.0)),
        ("torus", shapes::torus(48, 24, 1.0, 0.35)),
        ("capsule", straight),
        ("bent-capsule", bent),
    ]
}

fn fixture_samples(mesh: &TriMesh) -> usize {
    (mesh.n_vertices() / 4).max(120)
}

fn adaptive_basis(mesh: &TriMesh, graph: &MeshGraph, p: usize, seed: u64) -> (LocalBasis, GeodesicRecord) {
    let (samples, _) = poisson_disk_sample(mesh, graph, p, seed).unwrap();
    let record = local_dijkstra(graph, &samples);
    let out = adapt_radii(graph, &samples, &record, &AdaptOptions::default()).unwrap();
    (out.basis, out.record)
}

fn fixed_basis(mesh: &TriMesh, graph: &MeshGraph, p: usize, seed: u64) -> LocalBasis {
    let (samples, _) = poisson_disk_sample(mesh, graph, p, seed).unwrap();
    let record = local_dijkstra(graph, &samples);
    fixed_radius_basis(graph, &samples, &record, ChiProfile::Polynomial).unwrap().2
}

fn row_sum_defect(u: &scalefm::sparse::CsrMatrix) -> f64 {
    (0..u.nrows())
        .map(|r| {
            let s: f64 = u.row(r).map(|(_, v)| v).sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// 20% of the vertices sent to a uniformly random vertex.
fn corrupted_identity(n: usize, seed: u64) -> PointwiseMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..n)
        .map(|i| if rng.gen_bool(0.2) { rng.gen_range(0..n) } else { i })
        .collect();
    PointwiseMap::new(v, n).unwrap()
}

fn partition_of_unity() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut rounds = 0;
    for (_, mesh) in fixtures() {
        let graph = MeshGraph::new(&mesh);
        let (samples, _) = poisson_disk_sample(&mesh, &graph, fixture_samples(&mesh), 1).unwrap();
        let record = local_dijkstra(&graph, &samples);
        let (samples, record) = cover_unreached(&graph, &samples, &record);
        let n = mesh.n_vertices();
        let out = adapt_radii_observed(&graph, &samples, &record, &AdaptOptions::default(), |s| {
            let u = build_unnormalized(&record, s.radii, ChiProfile::Polynomial, n);
            let mut defect = 0.0f64;
            for r in 0..n {
                let row: Vec<f64> = u.row(r).map(|(_, v)| v).collect();
                let sum: f64 = row.iter().sum();
                let normalized: f64 = row.iter().map(|v| v / sum).sum();
                defect = defect.max((normalized - 1.0).abs());
            }
            worst = worst.max(defect);
            rounds += 1;
        })
        .unwrap();
        worst = worst.max(row_sum_defect(&out.basis.u));
    }
    let elapsed = t.elapsed();
    Outcome::new(
        worst <= PARTITION_TOL && elapsed < PARTITION_BUDGET,
        format!("max row-sum deviation {worst:.2e} over {rounds} rounds, {elapsed:.2?}"),
    )
}

fn orthonormality() -> Outcome {
    let (mut reduced, mut lifted) = (0.0f64, 0.0f64);
    for (_, mesh) in fixtures() {
        let graph = MeshGraph::new(&mesh);
        let lap = assemble_laplacian(&mesh).unwrap();
        let (basis, _) = adaptive_basis(&mesh, &graph, fixture_samples(&mesh), 1);
        let spec = ReducedSpectrum::compute(&lap, &basis, ORTHO_K).unwrap();
        reduced = reduced.max(orthonormality_defect(&spec.coeffs, &spec.a_bar));
        lifted = lifted.max(orthonormality_defect_diag(&spec.lifted, &lap.mass));
    }
    Outcome::new(
        reduced <= ORTHO_TOL && lifted <= ORTHO_TOL,
        format!("reduced defect {reduced:.2e}, lifted defect {lifted:.2e} at K={ORTHO_K}"),
    )
}

fn rayleigh_ritz() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut details = Vec::new();
    for (name, mesh) in [("icosphere", shapes::icosphere(3)), ("grid", shapes::grid(32, 32, 1.0, 1.0))] {
        let graph = MeshGraph::new(&mesh);
        let lap = assemble_laplacian(&mesh).unwrap();
        let (basis, _) = adaptive_basis(&mesh, &graph, 200, 1);
        let spec = ReducedSpectrum::compute(&lap, &basis, RITZ_K).unwrap();
        let exact = solve_exact(&lap, RITZ_K).unwrap();
        let margin = spec
            .eigenvalues
            .iter()
            .zip(&exact.eigenvalues)
            .map(|(a, e)| a - e)
            .fold(f64::INFINITY, f64::min);
        worst = worst.min(margin);
        details.push(format!("{name} ({} v) min(λ̄−λ) {margin:.2e}", mesh.n_vertices()));
    }
    Outcome::new(worst >= -RITZ_TOL, details.join(", "))
}

/// Indices where consecutive eigenvalues jump by more than 25%.
fn cluster_sizes(values: &[f64]) -> Vec<usize> {
    let mut sizes = vec![1];
    for w in values.windows(2) {
        if w[1] > 1.25 * w[0] {
            sizes.push(1);
        } else {
            *sizes.last_mut().unwrap() += 1;
        }
    }
    sizes
}

fn analytic_spectra() -> Outcome {
    let pi2 = std::f64::consts::PI.powi(2);
    let expected = [1.0, 1.0, 2.0, 4.0, 4.0].map(|m| m * pi2);
    let grid = shapes::grid(41, 41, 1.0, 1.0);
    let lap = assemble_laplacian(&grid).unwrap();
    let exact = solve_exact(&lap, 6).unwrap();
    let graph = MeshGraph::new(&grid);
    let (basis, _) = adaptive_basis(&grid, &graph, 600, 1);
    let reduced = ReducedSpectrum::compute(&lap, &basis, 6).unwrap();
    let rel = |values: &[f64]| {
        values[1..6]
            .iter()
            .zip(&expected)
            .map(|(v, e)| ((v - e) / e).abs())
            .fold(0.0, f64::max)
    };
    let (rel_exact, rel_reduced) = (rel(&exact.eigenvalues), rel(&reduced.eigenvalues));

    let sphere = shapes::icosphere(3);
    let lap = assemble_laplacian(&sphere).unwrap();
    let exact = solve_exact(&lap, 9).unwrap();
    let graph = MeshGraph::new(&sphere);
    let (basis, _) = adaptive_basis(&sphere, &graph, 300, 1);
    let reduced = ReducedSpectrum::compute(&lap, &basis, 9).unwrap();
    let clusters_exact = cluster_sizes(&exact.eigenvalues[1..]);
    let clusters_reduced = cluster_sizes(&reduced.eigenvalues[1..]);
    let spheres_ok = exact.eigenvalues[0].abs() < 1e-8
        && reduced.eigenvalues[0].abs() < 1e-8
        && clusters_exact == [3, 5]
        && clusters_reduced == [3, 5];
    Outcome::new(
        rel_exact <= ANALYTIC_REL_TOL && rel_reduced <= ANALYTIC_REL_TOL && spheres_ok,
        format!(
            "grid max rel. error exact {rel_exact:.3}, reduced {rel_reduced:.3}; \
             sphere clusters exact 1+{clusters_exact:?}, reduced 1+{clusters_reduced:?}"
        ),
    )
}

fn self_weight_guarantee() -> Outcome {
    let mut min_weight = f64::INFINITY;
    let mut monotone = true;
    let mut runs_in_rounds = 0;
    for (_, mesh) in fixtures() {
        let graph = MeshGraph::new(&mesh);
        let (samples, _) = poisson_disk_sample(&mesh, &graph, fixture_samples(&mesh), 2).unwrap();
        let record = local_dijkstra(&graph, &samples);
        let (samples, record) = cover_unreached(&graph, &samples, &record);
        let before = graph.dijkstra_runs();
        let mut previous: Option<Vec<f64>> = None;
        let out = adapt_radii_observed(&graph, &samples, &record, &AdaptOptions::default(), |s| {
            if let Some(prev) = &previous {
                monotone &= s.self_weights.iter().zip(prev).all(|(a, b)| *a >= *b);
            }
            previous = Some(s.self_weights.to_vec());
            runs_in_rounds = runs_in_rounds.max(graph.dijkstra_runs() - before);
        })
        .unwrap();
        min_weight = min_weight.min(out.basis.min_self_weight());
    }
    Outcome::new(
        min_weight >= SELF_WEIGHT_MIN && monotone && runs_in_rounds == 0,
        format!("min self-weight {min_weight:.3}, non-decreasing {monotone}, distance recomputations {runs_in_rounds}"),
    )
}

/// `Δ = ‖C̄ − Ĉ‖` for the bent → straight capsule pair with the identity
/// correspondence.
fn estimation_gap(adaptive: bool) -> f64 {
    const K: usize = 20;
    let (straight, bent) = shapes::bent_cylinder_pair(40, 80);
    let (mesh_n, mesh_m) = (bent.normalize_area(), straight.normalize_area());
    let n = mesh_n.n_vertices();
    let (lap_n, lap_m) = (assemble_laplacian(&mesh_n).unwrap(), assemble_laplacian(&mesh_m).unwrap());
    let (graph_n, graph_m) = (MeshGraph::new(&mesh_n), MeshGraph::new(&mesh_m));
    let (basis_n, basis_m) = if adaptive {
        (adaptive_basis(&mesh_n, &graph_n, 400, 1).0, adaptive_basis(&mesh_m, &graph_m, 400, 2).0)
    } else {
        (fixed_basis(&mesh_n, &graph_n, 400, 1), fixed_basis(&mesh_m, &graph_m, 400, 2))
    };
    let spec_n = ReducedSpectrum::compute(&lap_n, &basis_n, K).unwrap();
    let spec_m = ReducedSpectrum::compute(&lap_m, &basis_m, K).unwrap();
    let identity = PointwiseMap::identity(n);
    let pi_bar = restrict_to_samples(&identity, &basis_n, &basis_m).unwrap();
    let c_hat = restricted_fmap(&spec_n.coeffs, &spec_n.a_bar, &pi_bar, &spec_m.coeffs).unwrap();
    let c_bar = reduced_fmap(&spec_n.lifted, &lap_n.mass, &identity, &spec_m.lifted).unwrap();
    estimation_delta(&c_bar.matrix, &c_hat.matrix).unwrap()
}

fn adaptive_radius_gap() -> Outcome {
    let (adaptive, fixed) = (estimation_gap(true), estimation_gap(false));
    let ratio = adaptive / fixed;
    Outcome::new(
        ratio <= DELTA_RATIO_MAX,
        format!("Δ adaptive {adaptive:.4}, fixed {fixed:.4}, ratio {ratio:.3} (need ≤ {DELTA_RATIO_MAX})"),
    )
}

fn bound_satisfaction() -> Outcome {
    let cfg = PipelineConfig { samples: 150, bounds_k: 20, ..Default::default() };
    let mut failures = Vec::new();
    let mut worst_slack = f64::INFINITY;
    // a missing target means the source maps onto itself
    let mut cases: Vec<(String, Shape, Option<Shape>, PointwiseMap)> = fixtures()
        .into_iter()
        .map(|(name, mesh)| {
            let n = mesh.n_vertices();
            let shape = Shape::from_mesh(mesh, name);
            (format!("{name}/identity"), shape, None, PointwiseMap::identity(n))
        })
        .collect();
    let (straight, bent) = shapes::bent_cylinder_pair(24, 40);
    let n = bent.n_vertices();
    cases.push((
        "bent→straight".into(),
        Shape::from_mesh(bent, "bent"),
        Some(Shape::from_mesh(straight, "straight")),
        PointwiseMap::identity(n),
    ));
    let reflected: Vec<usize> = (0..32 * 32).map(|v| (v / 32) * 32 + (31 - v % 32)).collect();
    let grid = Shape::from_mesh(shapes::grid(32, 32, 1.0, 1.0), "grid");
    cases.push(("grid/reflection".into(), grid, None, PointwiseMap::new(reflected, 32 * 32).unwrap()));

    for (name, n, m, map) in &cases {
        let out = bounds_shapes(n, m.as_ref().unwrap_or(n), map, &cfg).unwrap();
        for c in &out.report.checks {
            worst_slack = worst_slack.min(c.slack());
            if !c.satisfied {
                failures.push(format!("{name}:{}", c.name));
            }
        }
        if out.exact_skipped {
            failures.push(format!("{name}:prop1 skipped"));
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!("{} cases, smallest rhs/lhs {worst_slack:.2}, failing {failures:?}", cases.len()),
    )
}

struct ParityRun {
    init_error: f64,
    scalable_error: f64,
    standard_error: f64,
    elapsed: Duration,
    distinct: usize,
    samples: usize,
    smooth_dense: f64,
    smooth_nearest: f64,
}

fn parity_run() -> ParityRun {
    let t = Instant::now();
    let (straight, bent) = shapes::bent_cylinder_pair(40, 80);
    let (mesh_n, mesh_m) = (bent.normalize_area(), straight.normalize_area());
    let n = mesh_n.n_vertices();
    let (lap_n, lap_m) = (assemble_laplacian(&mesh_n).unwrap(), assemble_laplacian(&mesh_m).unwrap());
    let (graph_n, graph_m) = (MeshGraph::new(&mesh_n), MeshGraph::new(&mesh_m));
    let gt: Vec<Option<usize>> = (0..n).map(Some).collect();
    let init = corrupted_identity(n, 1);
    let schedule = ZoomOutSchedule::new(20, 50, 1);

    let (basis_n, _) = adaptive_basis(&mesh_n, &graph_n, 400, 1);
    let (basis_m, _) = adaptive_basis(&mesh_m, &graph_m, 400, 2);
    let spec_n = ReducedSpectrum::compute(&lap_n, &basis_n, 50).unwrap();
    let spec_m = ReducedSpectrum::compute(&lap_m, &basis_m, 50).unwrap();
    let init_bar = restrict_to_samples(&init, &basis_n, &basis_m).unwrap();
    let out = scalable_zoomout(&spec_n.coeffs, &spec_n.a_bar, &spec_m.coeffs, &init_bar, &schedule).unwrap();
    let dense = dense_conversion(&spec_n.lifted, &spec_m.lifted, &out.fmap, None).unwrap();
    let nearest = nearest_sample_map(&basis_n, &basis_m, &out.map);

    let exact_n = solve_exact(&lap_n, 50).unwrap();
    let exact_m = solve_exact(&lap_m, 50).unwrap();
    let standard = standard_zoomout(&exact_n.vectors, &lap_n.mass, &exact_m.vectors, &init, &schedule).unwrap();

    let err = |map: &PointwiseMap| accuracy(map, &gt, &graph_m, None).unwrap().mean;
    ParityRun {
        init_error: err(&init),
        scalable_error: err(&dense),
        standard_error: err(&standard.map),
        elapsed: t.elapsed(),
        distinct: dense.distinct_images(),
        samples: basis_n.n_samples(),
        smooth_dense: smoothness(&dense, &lap_n, &mesh_m),
        smooth_nearest: smoothness(&nearest, &lap_n, &mesh_m),
    }
}

fn zoomout_parity(run: &ParityRun) -> Outcome {
    let ratio = run.scalable_error / run.standard_error;
    let beats_init = run.init_error >= INIT_IMPROVEMENT_MIN * run.scalable_error.max(run.standard_error);
    Outcome::new(
        ratio <= PARITY_RATIO_MAX && beats_init && run.elapsed < PARITY_BUDGET,
        format!(
            "error init {:.4}, scalable {:.4}, standard {:.4}, ratio {ratio:.3} (need ≤ {PARITY_RATIO_MAX}), {:.2?}",
            run.init_error, run.scalable_error, run.standard_error, run.elapsed
        ),
    )
}

fn sub_sample_accuracy(run: &ParityRun) -> Outcome {
    Outcome::new(
        run.distinct > run.samples && run.smooth_dense < run.smooth_nearest,
        format!(
            "{} distinct images for {} samples, Dirichlet energy {:.3} vs nearest-sample {:.3}",
            run.distinct, run.samples, run.smooth_dense, run.smooth_nearest
        ),
    )
}

struct Level {
    basis_n: LocalBasis,
    basis_m: LocalBasis,
    spec_n: ReducedSpectrum,
    spec_m: ReducedSpectrum,
    init: PointwiseMap,
}

fn prepare_level(mesh_n: &TriMesh, mesh_m: &TriMesh, samples: &[usize], rho0: f64) -> Level {
    let build = |mesh: &TriMesh| {
        let graph = MeshGraph::new(mesh);
        let set = SampleSet::with_uniform_radius(samples.to_vec(), rho0);
        let record = local_dijkstra(&graph, &set);
        let basis = adapt_radii(&graph, &set, &record, &AdaptOptions::default()).unwrap().basis;
        let lap = assemble_laplacian(mesh).unwrap();
        let spec = ReducedSpectrum::compute(&lap, &basis, 50).unwrap();
        (basis, spec)
    };
    let (basis_n, spec_n) = build(mesh_n);
    let (basis_m, spec_m) = build(mesh_m);
    let init = restrict_to_samples(&corrupted_identity(mesh_n.n_vertices(), 1), &basis_n, &basis_m).unwrap();
    Level { basis_n, basis_m, spec_n, spec_m, init }
}

impl Level {
    fn run(&self) -> (Duration, scalefm::zoomout::ZoomOutResult) {
        let schedule = ZoomOutSchedule::new(20, 50, 1);
        let out = scalable_zoomout(&self.spec_n.coeffs, &self.spec_n.a_bar, &self.spec_m.coeffs, &self.init, &schedule)
            .unwrap();
        let total: Duration = out.iterations.iter().map(|s| s.elapsed).sum();
        (total / out.iterations.len() as u32, out)
    }

    fn guided_agreement(&self, out: &scalefm::zoomout::ZoomOutResult) -> f64 {
        let (psi_n, psi_m) = (&self.spec_n.lifted, &self.spec_m.lifted);
        let brute = dense_conversion(psi_n, psi_m, &out.fmap, None).unwrap();
        let guide = build_guided_candidates(&self.basis_n, &self.basis_m, &out.map).unwrap();
        let guided = dense_conversion(psi_n, psi_m, &out.fmap, Some(&guide)).unwrap();
        let same = brute.as_slice().iter().zip(guided.as_slice()).filter(|(a, b)| a == b).count();
        same as f64 / brute.len() as f64
    }
}

fn scalability() -> Outcome {
    let straight = shapes::capsule(40, 80, 2.0);
    let fine_straight = shapes::subdivide(&straight);
    let (coarse_n, fine_n) = (shapes::bend(&straight, 1.1), shapes::bend(&fine_straight, 1.1));
    let graph = MeshGraph::new(&coarse_n);
    let (samples, _) = poisson_disk_sample(&coarse_n, &graph, 1000, 1).unwrap();
    let levels = [
        prepare_level(&coarse_n, &straight, &samples.indices, samples.initial_radius),
        prepare_level(&fine_n, &fine_straight, &samples.indices, samples.initial_radius),
    ];
    // interleaved best of five, so drift in machine load hits both levels alike
    let mut best = [Duration::MAX; 2];
    let mut agreement = 1.0f64;
    for round in 0..5 {
        for (i, level) in levels.iter().enumerate() {
            let (t, out) = level.run();
            best[i] = best[i].min(t);
            if round == 0 {
                agreement = agreement.min(level.guided_agreement(&out));
            }
        }
    }
    let (a, b) = (best[0].as_secs_f64(), best[1].as_secs_f64());
    let change = (b - a).abs() / a;
    Outcome::new(
        change < ITERATION_TIME_CHANGE_MAX && agreement >= GUIDED_AGREEMENT_MIN,
        format!(
            "per-iteration {:.2?} at {} v, {:.2?} at {} v (change {:.1}%), guided agreement {:.4}",
            best[0],
            coarse_n.n_vertices(),
            best[1],
            fine_n.n_vertices(),
            100.0 * change,
            agreement
        ),
    )
}

fn max_area_ratio(mesh: &TriMesh) -> f64 {
    let areas = mesh.triangle_areas();
    let (lo, hi) = areas.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &a| (l.min(a), h.max(a)));
    hi / lo
}

/// Every vertex goes to itself or to a random neighbour.
fn jitter_map(mesh: &TriMesh, seed: u64) -> PointwiseMap {
    let graph = MeshGraph::new(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..mesh.n_vertices())
        .map(|i| {
            let nb: Vec<usize> = graph.neighbors(i).map(|(j, _)| j).collect();
            if rng.gen_bool(0.5) { i } else { nb[rng.gen_range(0..nb.len())] }
        })
        .collect();
    PointwiseMap::new(v, mesh.n_vertices()).unwrap()
}

fn fast_ls_gap(mesh: &TriMesh) -> f64 {
    const K: usize = 20;
    let lap = assemble_laplacian(mesh).unwrap();
    let psi = solve_exact(&lap, K).unwrap().vectors;
    let pi = jitter_map(mesh, 3);
    let c = exact_fmap(&psi, &lap.mass, &pi, &psi).unwrap().matrix;
    let target: DMatrix<f64> = pi.gather_rows(&psi, K);
    let c_ls = fast_ls_fmap(&psi, &target).unwrap().matrix;
    (c_ls - c).norm()
}

fn fast_ls_non_convergence() -> Outcome {
    let uniform = shapes::flat_icosahedron(3).normalize_area();
    let mut beta = 0.5;
    let mut skewed = uniform.clone();
    while max_area_ratio(&skewed) < 100.0 {
        beta += 0.1;
        skewed = uniform
            .map_positions(|p| {
                let s = (beta * p[2]).exp();
                [p[0] * s, p[1] * s, p[2] * s]
            })
            .unwrap()
            .normalize_area();
    }
    let (gap_u, gap_s) = (fast_ls_gap(&uniform), fast_ls_gap(&skewed));
    let ratio = gap_s / gap_u;
    Outcome::new(
        ratio > FAST_LS_GAP_RATIO_MIN,
        format!(
            "gap uniform {gap_u:.3e}, skewed ({:.0}:1 area) {gap_s:.3e}, ratio {ratio:.1}",
            max_area_ratio(&skewed)
        ),
    )
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("scalefm-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (straight, bent) = shapes::bent_cylinder_pair(24, 40);
    let (src, dst, init) = (dir.join("bent.off"), dir.join("straight.off"), dir.join("init.map"));
    write_off(&bent, &src).unwrap();
    write_off(&straight, &dst).unwrap();
    let init_map = corrupted_identity(bent.n_vertices(), 7);
    std::fs::write(&init, init_map.to_text()).unwrap();

    let run = |tag: &str, cache: Option<PathBuf>| -> Vec<Vec<u8>> {
        let cfg = PipelineConfig { samples: 200, k_init: 10, k_final: 30, seed: 5, cache_dir: cache, ..Default::default() };
        let out = cmd_match(&src, &dst, &init, &cfg).unwrap();
        out.write(&dir.join(tag)).unwrap().iter().map(|p| std::fs::read(p).unwrap()).collect()
    };
    let cache = dir.join("cache");
    std::fs::create_dir_all(&cache).unwrap();
    let first = run("a", None);
    let second = run("b", None);
    let cold = run("c", Some(cache.clone()));
    let warm = run("d", Some(cache));
    std::fs::remove_dir_all(&dir).ok();
    let identical = first == second && first == cold && first == warm;
    Outcome::new(identical, format!("{} output files compared across 4 runs (2 with cache)", first.len()))
}

fn main() {
    let parity = std::cell::OnceCell::new();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("partition of unity", Box::new(partition_of_unity)),
        ("orthonormality", Box::new(orthonormality)),
        ("Rayleigh-Ritz domination", Box::new(rayleigh_ritz)),
        ("analytic spectra", Box::new(analytic_spectra)),
        ("self-weight guarantee", Box::new(self_weight_guarantee)),
        ("adaptive radius estimation gap", Box::new(adaptive_radius_gap)),
        ("bound satisfaction", Box::new(bound_satisfaction)),
        ("ZoomOut parity", Box::new(|| zoomout_parity(parity.get_or_init(parity_run)))),
        ("sub-sample accuracy", Box::new(|| sub_sample_accuracy(parity.get_or_init(parity_run)))),
        ("scalability", Box::new(scalability)),
        ("fast least-squares non-convergence", Box::new(fast_ls_non_convergence)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Outcome::new(false, format!("panicked: {msg}"))
            });
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "acceptance {:>2} {:<36} {}  {} [{:.1?}]",
            i + 1,
            name,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            t.elapsed()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
