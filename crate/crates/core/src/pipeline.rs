//! End-to-end stages behind the command-line tool, with an on-disk cache
//! for per-shape bases.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::bounds::{self, BoundReport, BoundsConfig, ShapeData};
use crate::error::{Error, Result};
use crate::fmap::{reduced_fmap, restricted_fmap, FunctionalMap, PointwiseMap};
use crate::local_basis::{adapt_radii, fixed_radius_basis, AdaptOptions, ChiProfile, LocalBasis};
use crate::mesh::{assemble_laplacian, load_mesh, LaplacianPair, TriMesh};
use crate::metrics::{curve_to_text, estimation_delta, EvalReport};
use crate::sampling::{local_dijkstra, poisson_disk_sample, GeodesicRecord, MeshGraph, SampleSet};
use crate::spectral::{solve_exact_with, ReducedSpectrum};
use crate::zoomout::{build_guided_candidates, dense_conversion, restrict_to_samples, scalable_zoomout, ZoomOutSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GuidedMode {
    /// Guided above [`PipelineConfig::guided_threshold`] source vertices.
    Auto,
    On,
    Off,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub samples: usize,
    pub k_init: usize,
    pub k_final: usize,
    pub self_weight_min: f64,
    pub chi: ChiProfile,
    pub seed: u64,
    pub guided: GuidedMode,
    pub guided_threshold: usize,
    pub cache_dir: Option<PathBuf>,
    /// `false` keeps every radius at `ρ₀`.
    pub adaptive: bool,
    /// Spectral size used by the bound checks.
    pub bounds_k: usize,
    /// Largest mesh for which exact eigenvectors are computed by `bounds`.
    pub exact_limit: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            samples: 3000,
            k_init: 20,
            k_final: 100,
            self_weight_min: 0.3,
            chi: ChiProfile::Polynomial,
            seed: 0,
            guided: GuidedMode::Auto,
            guided_threshold: 100_000,
            cache_dir: None,
            adaptive: true,
            bounds_k: 20,
            exact_limit: 20_000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument("--samples must be positive".into()));
        }
        if !(self.self_weight_min > 0.0 && self.self_weight_min < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "--self-weight-min must lie in (0, 1), got {}",
                self.self_weight_min
            )));
        }
        if self.bounds_k == 0 {
            return Err(Error::InvalidArgument("bounds spectral size must be positive".into()));
        }
        self.schedule().validate(self.k_final)
    }

    pub fn schedule(&self) -> ZoomOutSchedule {
        ZoomOutSchedule::new(self.k_init, self.k_final, 1)
    }

    fn use_guided(&self, n: usize) -> bool {
        match self.guided {
            GuidedMode::On => true,
            GuidedMode::Off => false,
            GuidedMode::Auto => n > self.guided_threshold,
        }
    }

    fn basis_fingerprint(&self, k: usize) -> String {
        format!(
            "scalefm-basis-v1|p={}|sw={:e}|chi={}|seed={}|k={}|adaptive={}",
            self.samples,
            self.self_weight_min,
            self.chi.code(),
            self.seed,
            k,
            self.adaptive
        )
    }
}

/// Wall time per stage, in the column layout Preprocess / LBO / ZoomOut /
/// Conversion. `None` marks a stage served from the cache or not run.
#[derive(Clone, Debug, Default)]
pub struct StageTimes {
    pub preprocess: Option<Duration>,
    pub lbo: Option<Duration>,
    pub zoomout: Option<Duration>,
    pub conversion: Option<Duration>,
    pub cached: bool,
}

impl StageTimes {
    pub fn total(&self) -> Duration {
        [self.preprocess, self.lbo, self.zoomout, self.conversion].iter().flatten().sum()
    }

    pub fn to_table(&self) -> String {
        let cell = |d: Option<Duration>, cached: bool| match d {
            Some(d) => format!("{:.3}", d.as_secs_f64()),
            None if cached => "cached".to_string(),
            None => "-".to_string(),
        };
        let mut s = String::new();
        let _ = writeln!(s, "{:>12} {:>12} {:>12} {:>12} {:>12}", "Preprocess", "LBO", "ZoomOut", "Conversion", "Total");
        let _ = writeln!(
            s,
            "{:>12} {:>12} {:>12} {:>12} {:>12.3}",
            cell(self.preprocess, self.cached),
            cell(self.lbo, self.cached),
            cell(self.zoomout, false),
            cell(self.conversion, false),
            self.total().as_secs_f64()
        );
        s
    }

    fn add_preprocess(&mut self, d: Duration) {
        *self.preprocess.get_or_insert(Duration::ZERO) += d;
    }

    fn add_lbo(&mut self, d: Duration) {
        *self.lbo.get_or_insert(Duration::ZERO) += d;
    }
}

/// A loaded, area-normalized shape.
pub struct Shape {
    pub path: PathBuf,
    pub mesh: TriMesh,
    pub lap: LaplacianPair,
    pub graph: MeshGraph,
    bytes_hash: [u8; 32],
}

impl Shape {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mesh = load_mesh(path, None)?.normalize_area();
        Ok(Self::from_parts(path.to_path_buf(), mesh, Sha256::digest(&bytes).into()))
    }

    /// In-memory shape; `tag` stands in for the file contents in cache keys.
    pub fn from_mesh(mesh: TriMesh, tag: &str) -> Self {
        let mesh = mesh.normalize_area();
        Self::from_parts(PathBuf::from(tag), mesh, Sha256::digest(tag.as_bytes()).into())
    }

    fn from_parts(path: PathBuf, mesh: TriMesh, bytes_hash: [u8; 32]) -> Self {
        let lap = assemble_laplacian(&mesh).expect("validated mesh has a Laplacian");
        let graph = MeshGraph::new(&mesh);
        Shape { path, mesh, lap, graph, bytes_hash }
    }

    fn cache_key(&self, cfg: &PipelineConfig, k: usize) -> String {
        let mut h = Sha256::new();
        h.update(self.bytes_hash);
        h.update(cfg.basis_fingerprint(k).as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-shape basis and reduced spectrum.
pub struct ShapeBasis {
    pub basis: LocalBasis,
    pub spectrum: ReducedSpectrum,
    /// Present when computed in this run; cached bases carry no record.
    pub record: Option<GeodesicRecord>,
    pub cached: bool,
    pub files: Option<BasisFiles>,
}

#[derive(Clone, Debug)]
pub struct BasisFiles {
    pub basis: PathBuf,
    pub spectrum: PathBuf,
    pub samples: PathBuf,
}

impl BasisFiles {
    fn new(dir: &Path, key: &str) -> Self {
        BasisFiles {
            basis: dir.join(format!("{key}.basis")),
            spectrum: dir.join(format!("{key}.spectrum")),
            samples: dir.join(format!("{key}.samples.txt")),
        }
    }
}

fn samples_text(basis: &LocalBasis) -> String {
    let mut s = String::new();
    for (v, r) in basis.samples.iter().zip(&basis.radii) {
        let _ = writeln!(s, "{v} {r:e}");
    }
    s
}

fn build_basis(shape: &Shape, samples: &SampleSet, cfg: &PipelineConfig) -> Result<(LocalBasis, GeodesicRecord)> {
    let record = local_dijkstra(&shape.graph, samples);
    if cfg.adaptive {
        let opts = AdaptOptions { threshold: cfg.self_weight_min, profile: cfg.chi, max_rounds: None };
        let out = adapt_radii(&shape.graph, samples, &record, &opts)?;
        Ok((out.basis, out.record))
    } else {
        let (_, record, basis) = fixed_radius_basis(&shape.graph, samples, &record, cfg.chi)?;
        Ok((basis, record))
    }
}

fn load_cached(shape: &Shape, files: &BasisFiles) -> Result<(LocalBasis, ReducedSpectrum)> {
    let basis = LocalBasis::load(&files.basis)?;
    if basis.n_vertices() != shape.mesh.n_vertices() {
        return Err(Error::Cache {
            path: files.basis.clone(),
            msg: "vertex count does not match the mesh".into(),
        });
    }
    let (n, values, coeffs) = ReducedSpectrum::load_parts(&files.spectrum)?;
    if n != shape.mesh.n_vertices() {
        return Err(Error::Cache {
            path: files.spectrum.clone(),
            msg: "vertex count does not match the mesh".into(),
        });
    }
    let spectrum = ReducedSpectrum::from_parts(&shape.lap, &basis, values, coeffs)?;
    Ok((basis, spectrum))
}

/// Samples, local functions and reduced spectrum with `k` eigenpairs,
/// served from the cache when possible.
pub fn shape_basis(shape: &Shape, cfg: &PipelineConfig, k: usize, times: &mut StageTimes) -> Result<ShapeBasis> {
    let files = cfg
        .cache_dir
        .as_ref()
        .map(|dir| BasisFiles::new(dir, &shape.cache_key(cfg, k)));
    if let Some(f) = &files {
        if f.basis.exists() && f.spectrum.exists() {
            match load_cached(shape, f) {
                Ok((basis, spectrum)) => {
                    times.cached = true;
                    return Ok(ShapeBasis { basis, spectrum, record: None, cached: true, files });
                }
                Err(e) => log::warn!("ignoring cache for {}: {e}", shape.path.display()),
            }
        }
    }
    let t = Instant::now();
    let (samples, _) = poisson_disk_sample(&shape.mesh, &shape.graph, cfg.samples.min(shape.mesh.n_vertices()), cfg.seed)?;
    let (basis, record) = build_basis(shape, &samples, cfg)?;
    times.add_preprocess(t.elapsed());
    let t = Instant::now();
    let spectrum = ReducedSpectrum::compute(&shape.lap, &basis, k)?;
    times.add_lbo(t.elapsed());
    if let Some(f) = &files {
        basis.save(&f.basis)?;
        spectrum.save(&f.spectrum)?;
        std::fs::write(&f.samples, samples_text(&basis)).map_err(|e| Error::io(&f.samples, e))?;
    }
    Ok(ShapeBasis { basis, spectrum, record: Some(record), cached: false, files })
}

pub struct BasisOutcome {
    pub shape: Shape,
    pub basis: ShapeBasis,
    pub times: StageTimes,
}

pub fn cmd_basis(mesh: &Path, cfg: &PipelineConfig) -> Result<BasisOutcome> {
    cfg.validate()?;
    let shape = Shape::load(mesh)?;
    let mut times = StageTimes::default();
    let basis = shape_basis(&shape, cfg, cfg.k_final, &mut times)?;
    Ok(BasisOutcome { shape, basis, times })
}

/// Reads a map file over the vertices of `source` (file numbering, `-1` for
/// unknown entries) into compact numbering on both sides.
pub fn read_map_entries(path: &Path, source: &TriMesh, target: &TriMesh) -> Result<Vec<Option<usize>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries = PointwiseMap::parse_entries(&text)?;
    let (rs, rt) = (source.remap(), target.remap());
    if entries.len() != rs.file_vertex_count() {
        return Err(Error::InitMap(format!(
            "{} has {} lines, source mesh has {} vertices",
            path.display(),
            entries.len(),
            rs.file_vertex_count()
        )));
    }
    let mut out = vec![None; source.n_vertices()];
    for (x, slot) in out.iter_mut().enumerate() {
        if let Some(t) = entries[rs.to_file(x)] {
            if t >= rt.file_vertex_count() {
                return Err(Error::IndexRange {
                    what: format!("map {}", path.display()),
                    index: t,
                    limit: rt.file_vertex_count(),
                });
            }
            *slot = Some(rt.to_compact(t).ok_or_else(|| {
                Error::InitMap(format!("target vertex {t} is not referenced by any triangle"))
            })?);
        }
    }
    Ok(out)
}

/// Map text in file numbering; unreferenced source vertices get `-1`.
pub fn map_file_text(map: &PointwiseMap, source: &TriMesh, target: &TriMesh) -> String {
    let (rs, rt) = (source.remap(), target.remap());
    let mut file = vec![None; rs.file_vertex_count()];
    for x in 0..map.len() {
        file[rs.to_file(x)] = Some(rt.to_file(map.get(x)));
    }
    let mut s = String::with_capacity(file.len() * 6);
    for e in file {
        match e {
            Some(t) => {
                let _ = writeln!(s, "{t}");
            }
            None => s.push_str("-1\n"),
        }
    }
    s
}

fn total_on_samples(entries: &[Option<usize>], basis: &LocalBasis, target_len: usize) -> Result<PointwiseMap> {
    let mut dense = vec![0; entries.len()];
    for (x, e) in entries.iter().enumerate() {
        dense[x] = e.unwrap_or(0);
    }
    for &v in &basis.samples {
        if entries[v].is_none() {
            return Err(Error::InitMap(format!("no initial image for sample vertex {v}")));
        }
    }
    PointwiseMap::new(dense, target_len)
}

pub struct MatchOutcome {
    pub source: Shape,
    pub target: Shape,
    pub dense: PointwiseMap,
    pub sample_map: PointwiseMap,
    pub fmap: FunctionalMap,
    pub basis_n: ShapeBasis,
    pub basis_m: ShapeBasis,
    pub guided: bool,
    pub times: StageTimes,
}

impl MatchOutcome {
    /// Writes `<stem>.map`, `<stem>.samples.map` and `<stem>.fmap`.
    pub fn write(&self, stem: &Path) -> Result<Vec<PathBuf>> {
        let with = |ext: &str| {
            let mut s = stem.as_os_str().to_owned();
            s.push(ext);
            PathBuf::from(s)
        };
        if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let dense = with(".map");
        std::fs::write(&dense, map_file_text(&self.dense, &self.source.mesh, &self.target.mesh))
            .map_err(|e| Error::io(&dense, e))?;
        let samples = with(".samples.map");
        let (sn, sm) = (&self.basis_n.basis.samples, &self.basis_m.basis.samples);
        let mut text = String::from("# source_sample target_sample source_vertex target_vertex\n");
        for j in 0..self.sample_map.len() {
            let i = self.sample_map.get(j);
            let (rs, rt) = (self.source.mesh.remap(), self.target.mesh.remap());
            let _ = writeln!(text, "{j} {i} {} {}", rs.to_file(sn[j]), rt.to_file(sm[i]));
        }
        std::fs::write(&samples, text).map_err(|e| Error::io(&samples, e))?;
        let fmap = with(".fmap");
        self.fmap.save_text(&fmap)?;
        Ok(vec![dense, samples, fmap])
    }
}

pub fn match_shapes(source: Shape, target: Shape, init: &[Option<usize>], cfg: &PipelineConfig) -> Result<MatchOutcome> {
    cfg.validate()?;
    if init.len() != source.mesh.n_vertices() {
        return Err(Error::InitMap(format!(
            "initial map has {} entries for {} vertices",
            init.len(),
            source.mesh.n_vertices()
        )));
    }
    let mut times = StageTimes::default();
    let basis_n = shape_basis(&source, cfg, cfg.k_final, &mut times)?;
    let basis_m = shape_basis(&target, cfg, cfg.k_final, &mut times)?;
    let init = total_on_samples(init, &basis_n.basis, target.mesh.n_vertices())?;
    let init_s = restrict_to_samples(&init, &basis_n.basis, &basis_m.basis)?;

    let t = Instant::now();
    let (sn, sm) = (&basis_n.spectrum, &basis_m.spectrum);
    let out = scalable_zoomout(&sn.coeffs, &sn.a_bar, &sm.coeffs, &init_s, &cfg.schedule())?;
    times.zoomout = Some(t.elapsed());

    let t = Instant::now();
    let guided = cfg.use_guided(source.mesh.n_vertices());
    let dense = if guided {
        let guide = build_guided_candidates(&basis_n.basis, &basis_m.basis, &out.map)?;
        dense_conversion(&sn.lifted, &sm.lifted, &out.fmap, Some(&guide))?
    } else {
        dense_conversion(&sn.lifted, &sm.lifted, &out.fmap, None)?
    };
    times.conversion = Some(t.elapsed());
    Ok(MatchOutcome {
        source,
        target,
        dense,
        sample_map: out.map,
        fmap: out.fmap,
        basis_n,
        basis_m,
        guided,
        times,
    })
}

pub fn cmd_match(source: &Path, target: &Path, init: &Path, cfg: &PipelineConfig) -> Result<MatchOutcome> {
    cfg.validate()?;
    let (sn, sm) = (Shape::load(source)?, Shape::load(target)?);
    let entries = read_map_entries(init, &sn.mesh, &sm.mesh)?;
    match_shapes(sn, sm, &entries, cfg)
}

pub struct EvalOutcome {
    pub report: EvalReport,
    pub curve: Vec<(f64, f64)>,
}

impl EvalOutcome {
    pub fn curve_text(&self) -> String {
        curve_to_text(&self.curve)
    }
}

/// Reads a list of 0-based source vertex ids (file numbering), one per line.
pub fn read_subset(path: &Path, source: &TriMesh) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let remap = source.remap();
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: usize = l.trim().parse().map_err(|e| Error::parse(i + 1, format!("{l:?}: {e}")))?;
            remap.to_compact(v).ok_or(Error::IndexRange {
                what: format!("subset {}", path.display()),
                index: v,
                limit: remap.file_vertex_count(),
            })
        })
        .collect()
}

pub fn cmd_eval(map: &Path, gt: &Path, source: &Path, target: &Path, subset: Option<&Path>) -> Result<EvalOutcome> {
    let (sn, sm) = (Shape::load(source)?, Shape::load(target)?);
    let entries = read_map_entries(map, &sn.mesh, &sm.mesh)?;
    let assignment = entries
        .iter()
        .enumerate()
        .map(|(x, e)| e.ok_or_else(|| Error::InitMap(format!("map has no image for vertex {x}"))))
        .collect::<Result<Vec<_>>>()?;
    let map = PointwiseMap::new(assignment, sm.mesh.n_vertices())?;
    let gt = read_map_entries(gt, &sn.mesh, &sm.mesh)?;
    let subset = subset.map(|p| read_subset(p, &sn.mesh)).transpose()?;
    let (report, curve) = EvalReport::compute(&map, &gt, &sn.mesh, &sn.lap, &sm.mesh, &sm.graph, subset.as_deref())?;
    Ok(EvalOutcome { report, curve })
}

pub struct BoundsOutcome {
    pub report: BoundReport,
    /// `‖C̄ − Ĉ‖` at the bounds spectral size.
    pub delta: f64,
    pub exact_skipped: bool,
}

impl BoundsOutcome {
    pub fn to_text(&self) -> String {
        let mut s = self.report.to_text();
        let _ = writeln!(s, "delta = {:e}", self.delta);
        if self.exact_skipped {
            s.push_str("prop1 = skipped (mesh above the exact-solve limit)\n");
        }
        s
    }
}

/// Bound checks for `map: N → M`. Samples on `M` are the images of the
/// samples of `N`, so the map is consistent with a sample-level map.
pub fn bounds_shapes(n: &Shape, m: &Shape, map: &PointwiseMap, cfg: &PipelineConfig) -> Result<BoundsOutcome> {
    cfg.validate()?;
    let k = cfg.bounds_k;
    let (samples, _) = poisson_disk_sample(&n.mesh, &n.graph, cfg.samples.min(n.mesh.n_vertices()), cfg.seed)?;
    let (basis_n, record_n) = build_basis(n, &samples, cfg)?;
    let mut seen = vec![false; m.mesh.n_vertices()];
    let images: Vec<usize> = basis_n
        .samples
        .iter()
        .map(|&v| map.get(v))
        .filter(|&t| !std::mem::replace(&mut seen[t], true))
        .collect();
    let rho0 = samples.initial_radius * (m.mesh.total_area() / n.mesh.total_area()).sqrt();
    let (basis_m, record_m) = build_basis(m, &SampleSet::with_uniform_radius(images, rho0), cfg)?;
    let spec_n = ReducedSpectrum::compute(&n.lap, &basis_n, k)?;
    let spec_m = ReducedSpectrum::compute(&m.lap, &basis_m, k)?;

    let small = n.mesh.n_vertices().max(m.mesh.n_vertices()) <= cfg.exact_limit;
    let exact = if small {
        Some((
            solve_exact_with(&n.lap, k, cfg.exact_limit)?.vectors,
            solve_exact_with(&m.lap, k, cfg.exact_limit)?.vectors,
        ))
    } else {
        log::info!("skipping the exact-basis check above {} vertices", cfg.exact_limit);
        None
    };
    let dn = ShapeData {
        mass: &n.lap.mass,
        basis: &basis_n,
        record: &record_n,
        spectrum: &spec_n,
        exact: exact.as_ref().map(|e| &e.0),
    };
    let dm = ShapeData {
        mass: &m.lap.mass,
        basis: &basis_m,
        record: &record_m,
        spectrum: &spec_m,
        exact: exact.as_ref().map(|e| &e.1),
    };
    let report = bounds::verify(&dn, &dm, map, &BoundsConfig { k, seed: cfg.seed, ..Default::default() })?;

    let pi_bar = bounds::sample_restriction(map, &basis_n, &basis_m)?;
    let c_hat = restricted_fmap(&spec_n.coeffs, &spec_n.a_bar, &pi_bar, &spec_m.coeffs)?;
    let c_bar = reduced_fmap(&spec_n.lifted, &n.lap.mass, map, &spec_m.lifted)?;
    let delta = estimation_delta(&c_bar.matrix, &c_hat.matrix)?;
    Ok(BoundsOutcome { report, delta, exact_skipped: !small })
}

pub fn cmd_bounds(source: &Path, target: &Path, map: &Path, cfg: &PipelineConfig) -> Result<BoundsOutcome> {
    cfg.validate()?;
    let (sn, sm) = (Shape::load(source)?, Shape::load(target)?);
    let entries = read_map_entries(map, &sn.mesh, &sm.mesh)?;
    let assignment = entries
        .iter()
        .enumerate()
        .map(|(x, e)| e.ok_or_else(|| Error::InitMap(format!("map has no image for vertex {x}"))))
        .collect::<Result<Vec<_>>>()?;
    let map = PointwiseMap::new(assignment, sm.mesh.n_vertices())?;
    bounds_shapes(&sn, &sm, &map, cfg)
}
