use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdanm::experiment::{
    auto_tau, run_crb, run_doa, run_lse, write_crb_csv, write_csv_file, write_doa_csv,
    write_lse_csv, InitKind, ScenarioConfig, ScenarioKind,
};
use mdanm::io::{read_matrix, write_matrix};
use mdanm::rng::{substream, Stream};
use mdanm::solver::{solve, InitMode, Problem, SolverConfig};
use mdanm::toeplitz::DimSpec;
use mdanm::{Error, Result};
use nalgebra::DMatrix;
use rand::RngCore;

/// Gridless multidimensional frequency estimation.
#[derive(Parser)]
#[command(name = "mdanm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo frequency-estimation sweep; writes snr,admm_*,crb_* rows.
    LseSim(SimArgs),
    /// Direction-finding run; writes true and estimated angles.
    DoaSim(SimArgs),
    /// Cramér-Rao bound sweep over the configured scenes.
    Crb(SimArgs),
    /// Estimate frequencies from matrix files.
    Solve(SolveArgs),
}

#[derive(Args)]
struct SimArgs {
    /// TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    /// Observations `Y`.
    #[arg(long)]
    y: PathBuf,
    /// Compressor `Phi`; identity when absent.
    #[arg(long)]
    phi: Option<PathBuf>,
    /// Comma-separated `N_1,...,N_d`.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    /// Number of sources.
    #[arg(long)]
    sources: usize,
    #[arg(long)]
    tau: Option<f64>,
    /// Noise variance, used for `tau = sigma^0.8` when `--tau` is absent.
    #[arg(long)]
    noise_var: Option<f64>,
    /// TOML file whose [solver] and [music] sections apply.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    /// Write the covariance estimate `T(u*)` here.
    #[arg(long)]
    dump_t: Option<PathBuf>,
}

fn load_config(args: &SimArgs, kind: Option<ScenarioKind>) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::new(kind.unwrap_or(ScenarioKind::Lse)),
    };
    if let Some(k) = kind {
        if cfg.kind != k {
            return Err(Error::Config(format!(
                "config describes a {:?} scenario, expected {k:?}",
                cfg.kind
            )));
        }
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = Some(t);
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => write_csv_file(path, f),
        None => {
            let mut buf = Vec::new();
            f(&mut buf)?;
            std::io::stdout()
                .write_all(&buf)
                .map_err(|e| Error::Io { path: "<stdout>".into(), source: e })
        }
    }
}

fn solve_files(args: &SolveArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let dims = DimSpec::new(args.dims.clone())?;
    let y = read_matrix(&args.y)?;
    let phi = match &args.phi {
        Some(p) => read_matrix(p)?,
        None => DMatrix::identity(dims.size(), dims.size()),
    };
    let tau = match (args.tau, args.noise_var, cfg.solver.tau) {
        (Some(t), _, _) => t,
        (None, Some(v), _) => auto_tau(v),
        (None, None, Some(t)) => t,
        (None, None, None) => {
            return Err(Error::Config("give --tau or --noise-var".into()));
        }
    };
    let rho = args.rho.unwrap_or(cfg.solver.rho);
    let problem = Problem::new(dims.clone(), y, phi, tau, rho)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let init = match cfg.solver.init {
        InitKind::Zero => InitMode::Zero,
        InitKind::Gaussian => InitMode::Gaussian {
            seed: substream(seed, 0, 0, Stream::Init).next_u64(),
        },
    };
    let solver = SolverConfig {
        max_iters: args.max_iters.unwrap_or(cfg.solver.max_iters),
        primal_tol: cfg.solver.tol,
        early_stop: cfg.solver.early_stop,
        init,
    };
    let res = solve(&problem, &solver)?;
    if let Some(path) = &args.dump_t {
        write_matrix(path, &res.toeplitz)?;
    }
    let est = mdanm::extract::music_extract(&res.toeplitz, &dims, args.sources, &cfg.music.config())?;
    let mut out = String::new();
    for p in est.frequencies.points() {
        let coords: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        out.push_str(&coords.join(" "));
        out.push('\n');
    }
    print!("{out}");
    if !res.converged {
        eprintln!(
            "warning: relative primal residual above {} after {} iterations",
            solver.primal_tol,
            res.iterations()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::LseSim(args) => {
            let cfg = load_config(&args, Some(ScenarioKind::Lse))?;
            let report = run_lse(&cfg)?;
            emit(cfg.out.as_deref(), |w| write_lse_csv(&report.rows, w))
        }
        Command::DoaSim(args) => {
            let cfg = load_config(&args, Some(ScenarioKind::Doa))?;
            let rows = run_doa(&cfg)?;
            emit(cfg.out.as_deref(), |w| write_doa_csv(&rows, w))
        }
        Command::Crb(args) => {
            let cfg = load_config(&args, None)?;
            let rows = run_crb(&cfg)?;
            emit(cfg.out.as_deref(), |w| write_crb_csv(&rows, w))
        }
        Command::Solve(args) => solve_files(&args),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } | Error::Parse { .. } => 3,
        Error::Eigen => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
