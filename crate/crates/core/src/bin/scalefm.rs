use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scalefm::pipeline::{self, GuidedMode, PipelineConfig};
use scalefm::{ChiProfile, Error};

#[derive(Parser)]
#[command(name = "scalefm", version, about = "Scalable functional-map correspondence between dense meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a mesh, build local functions and the reduced eigenbasis.
    Basis {
        mesh: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Refine an initial map between two meshes.
    Match {
        source: PathBuf,
        target: PathBuf,
        /// Initial map, one target vertex per source vertex (-1 allowed off samples).
        #[arg(long)]
        init: PathBuf,
        /// Output stem: writes <out>.map, <out>.samples.map and <out>.fmap.
        #[arg(long, default_value = "scalefm-out/match")]
        out: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Score a map against ground truth.
    Eval {
        source: PathBuf,
        target: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Source vertices to evaluate, one per line.
        #[arg(long)]
        subset: Option<PathBuf>,
        #[arg(long, default_value = "eval.json")]
        out: PathBuf,
        #[arg(long, default_value = "eval.curve.txt")]
        curve: PathBuf,
    },
    /// Check the approximation bounds for a map.
    Bounds {
        source: PathBuf,
        target: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Spectral size for the checks.
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Chi {
    Poly,
    Bump,
}

#[derive(Clone, Copy, ValueEnum)]
enum Guided {
    Auto,
    On,
    Off,
}

#[derive(Args)]
struct Opts {
    #[arg(long, default_value_t = 3000)]
    samples: usize,
    #[arg(long, default_value_t = 20)]
    k_init: usize,
    #[arg(long, default_value_t = 100)]
    k_final: usize,
    #[arg(long, default_value_t = 0.3)]
    self_weight_min: f64,
    #[arg(long, value_enum, default_value = "poly")]
    chi: Chi,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    guided: Guided,
    #[arg(long, default_value = ".scalefm-cache")]
    cache_dir: PathBuf,
    /// Keep every radius at its initial value.
    #[arg(long)]
    fixed_radius: bool,
    /// Print the per-stage timing table.
    #[arg(long)]
    timing: bool,
}

impl Opts {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            samples: self.samples,
            k_init: self.k_init,
            k_final: self.k_final,
            self_weight_min: self.self_weight_min,
            chi: match self.chi {
                Chi::Poly => ChiProfile::Polynomial,
                Chi::Bump => ChiProfile::SmoothBump,
            },
            seed: self.seed,
            guided: match self.guided {
                Guided::Auto => GuidedMode::Auto,
                Guided::On => GuidedMode::On,
                Guided::Off => GuidedMode::Off,
            },
            cache_dir: Some(self.cache_dir.clone()),
            adaptive: !self.fixed_radius,
            ..Default::default()
        }
    }
}

fn write(path: &Path, text: &str) -> scalefm::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn run(cli: Cli) -> scalefm::Result<ExitCode> {
    match cli.command {
        Command::Basis { mesh, opts } => {
            let out = pipeline::cmd_basis(&mesh, &opts.config())?;
            let b = &out.basis;
            println!(
                "{} vertices, {} samples, min self-weight {:.4}{}",
                out.shape.mesh.n_vertices(),
                b.basis.n_samples(),
                b.basis.min_self_weight(),
                if b.cached { " (cached)" } else { "" }
            );
            if let Some(f) = &b.files {
                println!("basis    {}\nspectrum {}\nsamples  {}", f.basis.display(), f.spectrum.display(), f.samples.display());
            }
            if opts.timing {
                print!("{}", out.times.to_table());
            }
        }
        Command::Match { source, target, init, out, opts } => {
            let res = pipeline::cmd_match(&source, &target, &init, &opts.config())?;
            for f in res.write(&out)? {
                println!("wrote {}", f.display());
            }
            if opts.timing {
                print!("{}", res.times.to_table());
            }
        }
        Command::Eval { source, target, map, gt, subset, out, curve } => {
            let res = pipeline::cmd_eval(&map, &gt, &source, &target, subset.as_deref())?;
            write(&out, &res.report.to_json())?;
            write(&curve, &res.curve_text())?;
            let r = &res.report;
            println!(
                "mean geodesic error {:.6e} over {} vertices, coverage {:.4}, dirichlet {:.4}",
                r.mean_geodesic_error, r.evaluated_vertices, r.coverage_ratio, r.dirichlet_energy
            );
        }
        Command::Bounds { source, target, map, out, k, opts } => {
            let cfg = PipelineConfig { bounds_k: k, ..opts.config() };
            let res = pipeline::cmd_bounds(&source, &target, &map, &cfg)?;
            let text = res.to_text();
            match out {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
            if !res.report.all_satisfied() {
                eprintln!("bound violated");
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Convergence { .. }
        | Error::IllConditioned { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::RankDeficient { .. }
        | Error::NonTermination { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
