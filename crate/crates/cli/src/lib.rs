//! `qjh` command-line front end.
//!
//! Each run resolves one [`RunConfig`]: flags override the TOML file, which
//! overrides defaults. Outputs are written atomically next to a
//! `manifest.json`; a summary JSON document goes to stdout.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
//! runtime failures.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

pub use config::{load_config, parse_config_str, ConfigError, FileConfig, RunConfig};
use output::OutputDir;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const DEFAULT_OUTPUT_DIR: &str = "qjh-out";

pub const COMMANDS: [&str; 6] = [
    "sample",
    "bench-gaussian",
    "bench-airy",
    "rmt-spacing",
    "sse-validate",
    "lindblad-evolve",
];

#[derive(Debug, Parser)]
#[command(
    name = "qjh",
    version,
    about = "Density-matrix preconditioned HMC and open quantum system numerics"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed; falls back to the config file, then QJH_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write SVG quick-plots.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw HMC samples from a target density.
    Sample(SampleArgs),
    /// KL-divergence trace on ill-conditioned Gaussians.
    BenchGaussian(BenchGaussianArgs),
    /// Airy eigenvalue errors and posterior calibration.
    BenchAiry(BenchAiryArgs),
    /// CUE eigenphase spacing histogram.
    RmtSpacing(RmtArgs),
    /// Martingale and unraveling checks for the stochastic equations.
    SseValidate(SseArgs),
    /// Lindblad evolution of a two-level model.
    LindbladEvolve(LindbladArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::BenchGaussian(_) => "bench-gaussian",
            Command::BenchAiry(_) => "bench-airy",
            Command::RmtSpacing(_) => "rmt-spacing",
            Command::SseValidate(_) => "sse-validate",
            Command::LindbladEvolve(_) => "lindblad-evolve",
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct SamplerArgs {
    /// Leapfrog step size ε.
    #[arg(long, visible_alias = "eps", allow_negative_numbers = true)]
    pub step_size: Option<f64>,
    /// Leapfrog steps per iteration ℓ.
    #[arg(long)]
    pub leapfrog: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Post-warmup draws per chain.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Use a fixed identity mass matrix.
    #[arg(long, conflicts_with = "precondition")]
    pub no_precondition: bool,
    /// Adapt the mass matrix with the density-matrix preconditioner.
    #[arg(long)]
    pub precondition: bool,
    /// Preconditioner mixing weight α.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Preconditioner unitary walk step δτ.
    #[arg(long, allow_negative_numbers = true)]
    pub dtau: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct SampleArgs {
    /// `std-normal` or `ill-gaussian`.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Log10 condition number of the ill-conditioned Gaussian.
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args, Default)]
pub struct BenchGaussianArgs {
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args, Default)]
pub struct BenchAiryArgs {
    #[arg(long)]
    pub modes: Option<usize>,
    /// Slope `a` of the potential.
    #[arg(long, allow_negative_numbers = true)]
    pub slope: Option<f64>,
    /// Grid intervals for the estimate.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Grid intervals for the reference values.
    #[arg(long)]
    pub reference_grid: Option<usize>,
    /// Calibration repetitions (0 skips calibration).
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub calibration_modes: Option<usize>,
    /// Observation noise σ.
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct RmtArgs {
    /// Matrix size N.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// `direct` or `walk`.
    #[arg(long)]
    pub sampler: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub dtau: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct SseArgs {
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_final: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct LindbladArgs {
    /// `amplitude-damping`, `dephasing` or `driven-damping`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub rate: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub drive: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_final: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
}

/// Parses argv (including the program name).
pub fn parse_args<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(args)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_sampler(cfg: &mut RunConfig, a: &SamplerArgs) {
    let s = &mut cfg.sampler;
    set(&mut s.step_size, a.step_size);
    set(&mut s.leapfrog_steps, a.leapfrog);
    set(&mut s.warmup, a.warmup);
    set(&mut s.iterations, a.iters);
    set(&mut s.chains, a.chains);
    let p = &mut cfg.preconditioner;
    if a.no_precondition {
        p.enabled = false;
    }
    if a.precondition {
        p.enabled = true;
    }
    set(&mut p.alpha, a.alpha);
    set(&mut p.dtau, a.dtau);
}

/// Merges file values and flags into one validated configuration.
pub fn resolve(cli: &Cli, file: FileConfig, env_seed: Option<&str>) -> Result<RunConfig, ConfigError> {
    let command = match (&cli.command, &file.command) {
        (Some(c), _) => c.name().to_string(),
        (None, Some(c)) if COMMANDS.contains(&c.as_str()) => c.clone(),
        (None, Some(c)) => {
            return Err(ConfigError(format!(
                "command: unknown subcommand {c:?}; expected one of {}",
                COMMANDS.join(", ")
            )))
        }
        (None, None) => {
            return Err(ConfigError(format!(
                "no subcommand given; expected one of {}",
                COMMANDS.join(", ")
            )))
        }
    };
    let mut cfg = RunConfig {
        command,
        seed: config::resolve_seed(cli.seed, file.seed, env_seed)?,
        output_dir: cli
            .out
            .clone()
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        threads: cli.threads.or(file.threads),
        svg: cli.svg || file.svg.unwrap_or(false),
        target: file.target,
        sampler: file.sampler,
        preconditioner: file.preconditioner,
        bench_gaussian: file.bench_gaussian,
        bench_airy: file.bench_airy,
        rmt: file.rmt,
        sse: file.sse,
        lindblad: file.lindblad,
    };
    match &cli.command {
        Some(Command::Sample(a)) => {
            set(&mut cfg.target.kind, a.target.clone());
            set(&mut cfg.target.dim, a.dim);
            set(&mut cfg.target.kappa, a.kappa);
            apply_sampler(&mut cfg, &a.sampler);
        }
        Some(Command::BenchGaussian(a)) => {
            set(&mut cfg.bench_gaussian.dims, a.dims.clone());
            set(&mut cfg.bench_gaussian.kappa, a.kappa);
            apply_sampler(&mut cfg, &a.sampler);
        }
        Some(Command::BenchAiry(a)) => {
            let b = &mut cfg.bench_airy;
            set(&mut b.modes, a.modes);
            set(&mut b.slope, a.slope);
            set(&mut b.grid, a.grid);
            set(&mut b.reference_grid, a.reference_grid);
            set(&mut b.calibration_reps, a.reps);
            set(&mut b.calibration_modes, a.calibration_modes);
            set(&mut b.sigma, a.sigma);
        }
        Some(Command::RmtSpacing(a)) => {
            let r = &mut cfg.rmt;
            set(&mut r.n, a.n);
            set(&mut r.samples, a.samples);
            set(&mut r.bins, a.bins);
            set(&mut r.sampler, a.sampler.clone());
            set(&mut r.dtau, a.dtau);
        }
        Some(Command::SseValidate(a)) => {
            set(&mut cfg.sse.paths, a.paths);
            set(&mut cfg.sse.dt, a.dt);
            set(&mut cfg.sse.t_final, a.t_final);
        }
        Some(Command::LindbladEvolve(a)) => {
            let l = &mut cfg.lindblad;
            set(&mut l.model, a.model.clone());
            set(&mut l.rate, a.rate);
            set(&mut l.drive, a.drive);
            set(&mut l.t_final, a.t_final);
            set(&mut l.dt, a.dt);
        }
        None => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads the config file named by `--config` (if any) and resolves.
pub fn load_run_config(cli: &Cli, env_seed: Option<&str>) -> Result<RunConfig, ConfigError> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => FileConfig::default(),
    };
    resolve(cli, file, env_seed)
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<qjh_core::Error> for CliError {
    fn from(e: qjh_core::Error) -> Self {
        match e {
            qjh_core::Error::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

/// Runs the configured command and returns the summary document.
pub fn execute(cfg: &RunConfig) -> Result<Value, CliError> {
    let body = || -> Result<Value, CliError> {
        let mut out = OutputDir::create(&cfg.output_dir)?;
        let results = commands::dispatch(cfg, &mut out)?;
        out.write_manifest(cfg)?;
        Ok(json!({
            "command": cfg.command,
            "seed": cfg.seed,
            "output_dir": cfg.output_dir,
            "config": cfg,
            "outputs": out.files(),
            "results": results,
        }))
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?
            .install(body),
        None => body(),
    }
}

/// Full CLI entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse_args(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let env_seed = std::env::var(config::SEED_ENV).ok();
    let cfg = match load_run_config(&cli, env_seed.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qjh: {e}");
            return EXIT_CONFIG;
        }
    };
    match execute(&cfg) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("qjh: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        parse_args(std::iter::once("qjh").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flag_overrides_file() {
        let file = parse_config_str("[sampler]\nstep_size = 0.1\n").unwrap();
        let cfg = resolve(&cli(&["sample", "--step-size", "0.2"]), file.clone(), None).unwrap();
        assert_eq!(cfg.sampler.step_size, 0.2);
        let cfg = resolve(&cli(&["sample"]), file, None).unwrap();
        assert_eq!(cfg.sampler.step_size, 0.1);
    }

    #[test]
    fn negative_step_size_is_a_config_error() {
        let err = resolve(&cli(&["sample", "--step-size", "-0.1"]), FileConfig::default(), None).unwrap_err();
        assert!(err.0.contains("step size"), "{err}");
        assert!(err.0.contains("sampler.step_size"), "{err}");
    }

    #[test]
    fn command_from_file() {
        let file = parse_config_str("command = \"rmt-spacing\"\n").unwrap();
        assert_eq!(resolve(&cli(&[]), file, None).unwrap().command, "rmt-spacing");
        let file = parse_config_str("command = \"nope\"\n").unwrap();
        assert!(resolve(&cli(&[]), file, None).unwrap_err().0.contains("command"));
        assert!(resolve(&cli(&[]), FileConfig::default(), None).is_err());
    }

    #[test]
    fn global_flags_after_subcommand() {
        let c = cli(&["rmt-spacing", "--seed", "9", "--svg", "--out", "x"]);
        let cfg = resolve(&c, FileConfig::default(), Some("3")).unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(cfg.svg);
        assert_eq!(cfg.output_dir, PathBuf::from("x"));
    }

    #[test]
    fn unknown_flag_is_rejected() {
        let err = parse_args(["qjh", "sample", "--bogus", "1"]).unwrap_err();
        assert!(err.use_stderr());
        assert!(err.to_string().contains("--bogus"));
    }

    #[test]
    fn dims_list() {
        let cfg = resolve(
            &cli(&["bench-gaussian", "--dims", "2,5,10"]),
            FileConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(cfg.bench_gaussian.dims, vec![2, 5, 10]);
    }
}
