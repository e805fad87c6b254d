//! Run configuration: TOML file, then command-line overrides, then
//! validation. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Seed used when neither flag, file nor `QJH_SEED` provides one.
pub const DEFAULT_SEED: u64 = 1;
pub const SEED_ENV: &str = "QJH_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub svg: Option<bool>,
    pub target: TargetConfig,
    pub sampler: SamplerConfig,
    pub preconditioner: PreconditionerConfig,
    pub bench_gaussian: BenchGaussianConfig,
    pub bench_airy: BenchAiryConfig,
    pub rmt: RmtConfig,
    pub sse: SseConfig,
    pub lindblad: LindbladConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    /// `std-normal` or `ill-gaussian`.
    pub kind: String,
    pub dim: usize,
    pub kappa: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            kind: "std-normal".into(),
            dim: 2,
            kappa: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub warmup: usize,
    /// Post-warmup draws per chain.
    pub iterations: usize,
    pub chains: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            step_size: 0.2,
            leapfrog_steps: 8,
            warmup: 1000,
            iterations: 5000,
            chains: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreconditionerConfig {
    pub enabled: bool,
    pub alpha: f64,
    pub dtau: f64,
}

impl Default for PreconditionerConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            alpha: 0.1,
            dtau: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchGaussianConfig {
    pub dims: Vec<usize>,
    pub kappa: f64,
}

impl Default for BenchGaussianConfig {
    fn default() -> Self {
        Self {
            dims: vec![10],
            kappa: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchAiryConfig {
    pub modes: usize,
    pub slope: f64,
    pub grid: usize,
    pub reference_grid: usize,
    pub calibration_reps: usize,
    pub calibration_modes: usize,
    pub sigma: f64,
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub warmup: usize,
    /// Post-warmup draws per calibration repetition.
    pub draws: usize,
}

impl Default for BenchAiryConfig {
    fn default() -> Self {
        Self {
            modes: 150,
            slope: 1.0,
            grid: 4000,
            reference_grid: 100_000,
            calibration_reps: 10,
            calibration_modes: 20,
            sigma: 0.01,
            step_size: 0.3,
            leapfrog_steps: 10,
            warmup: 200,
            draws: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmtConfig {
    pub n: usize,
    pub samples: usize,
    pub bins: usize,
    /// `direct` or `walk`.
    pub sampler: String,
    pub dtau: f64,
}

impl Default for RmtConfig {
    fn default() -> Self {
        Self {
            n: 2,
            samples: 100_000,
            bins: 32,
            sampler: "direct".into(),
            dtau: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SseConfig {
    pub paths: usize,
    pub dt: f64,
    pub t_final: f64,
}

impl Default for SseConfig {
    fn default() -> Self {
        Self {
            paths: 2000,
            dt: 1e-3,
            t_final: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LindbladConfig {
    /// `amplitude-damping`, `dephasing` or `driven-damping`.
    pub model: String,
    pub rate: f64,
    pub drive: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl Default for LindbladConfig {
    fn default() -> Self {
        Self {
            model: "amplitude-damping".into(),
            rate: 1.0,
            drive: 1.0,
            t_final: 5.0,
            dt: 1e-3,
        }
    }
}

/// Fully resolved configuration recorded in the summary and manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub svg: bool,
    pub target: TargetConfig,
    pub sampler: SamplerConfig,
    pub preconditioner: PreconditionerConfig,
    pub bench_gaussian: BenchGaussianConfig,
    pub bench_airy: BenchAiryConfig,
    pub rmt: RmtConfig,
    pub sse: SseConfig,
    pub lindblad: LindbladConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Parses TOML text; errors carry the line number or the unknown key.
pub fn parse_config_str(text: &str) -> Result<FileConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))
}

pub fn load_config(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
}

/// Flag over file over `QJH_SEED` over [`DEFAULT_SEED`].
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, env: Option<&str>) -> Result<u64, ConfigError> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| ConfigError(format!("{SEED_ENV}: not an unsigned integer: {v:?}"))),
        None => Ok(DEFAULT_SEED),
    }
}

fn check(ok: bool, key: &str, msg: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(format!("{key}: {msg}")))
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.sampler;
        check(
            positive(s.step_size),
            "sampler.step_size",
            &format!("step size must be positive, got {}", s.step_size),
        )?;
        check(s.leapfrog_steps >= 1, "sampler.leapfrog_steps", "must be at least 1")?;
        check(s.iterations >= 10, "sampler.iterations", "must be at least 10")?;
        check(s.chains >= 1, "sampler.chains", "must be at least 1")?;
        let p = &self.preconditioner;
        check(
            p.alpha > 0.0 && p.alpha <= 1.0,
            "preconditioner.alpha",
            "must lie in (0, 1]",
        )?;
        check(
            p.dtau >= 0.0 && p.dtau.is_finite(),
            "preconditioner.dtau",
            "must be non-negative",
        )?;
        let t = &self.target;
        check(
            matches!(t.kind.as_str(), "std-normal" | "ill-gaussian"),
            "target.kind",
            "expected \"std-normal\" or \"ill-gaussian\"",
        )?;
        check(t.dim >= 1 && t.dim <= 1000, "target.dim", "must lie in [1, 1000]")?;
        check(
            t.kind != "ill-gaussian" || t.dim >= 2,
            "target.dim",
            "ill-gaussian needs at least 2 dimensions",
        )?;
        check(t.kappa >= -1.0 && t.kappa <= 8.0, "target.kappa", "must lie in [-1, 8]")?;
        let g = &self.bench_gaussian;
        check(!g.dims.is_empty(), "bench_gaussian.dims", "must not be empty")?;
        check(
            g.dims.iter().all(|&d| (2..=500).contains(&d)),
            "bench_gaussian.dims",
            "each must lie in [2, 500]",
        )?;
        check(
            g.kappa >= -1.0 && g.kappa <= 8.0,
            "bench_gaussian.kappa",
            "must lie in [-1, 8]",
        )?;
        let a = &self.bench_airy;
        check(a.modes >= 1, "bench_airy.modes", "must be at least 1")?;
        check(positive(a.slope), "bench_airy.slope", "must be positive")?;
        check(
            a.grid >= 100 && a.grid >= 10 * a.modes,
            "bench_airy.grid",
            "must be at least max(100, 10 × modes)",
        )?;
        check(
            a.reference_grid >= a.grid,
            "bench_airy.reference_grid",
            "must be at least bench_airy.grid",
        )?;
        check(
            a.calibration_modes >= 1,
            "bench_airy.calibration_modes",
            "must be at least 1",
        )?;
        check(positive(a.sigma), "bench_airy.sigma", "must be positive")?;
        check(
            positive(a.step_size),
            "bench_airy.step_size",
            &format!("step size must be positive, got {}", a.step_size),
        )?;
        check(a.leapfrog_steps >= 1, "bench_airy.leapfrog_steps", "must be at least 1")?;
        check(a.draws >= 10, "bench_airy.draws", "must be at least 10")?;
        let r = &self.rmt;
        check(r.n >= 2, "rmt.n", "must be at least 2")?;
        check(r.samples >= 1000, "rmt.samples", "must be at least 1000")?;
        check(r.bins >= 1, "rmt.bins", "must be at least 1")?;
        check(
            matches!(r.sampler.as_str(), "direct" | "walk"),
            "rmt.sampler",
            "expected \"direct\" or \"walk\"",
        )?;
        check(positive(r.dtau), "rmt.dtau", "must be positive")?;
        let e = &self.sse;
        check(e.paths >= 2, "sse.paths", "must be at least 2")?;
        check(positive(e.dt), "sse.dt", "time step must be positive")?;
        check(
            positive(e.t_final) && e.t_final >= e.dt,
            "sse.t_final",
            "must be at least sse.dt",
        )?;
        let l = &self.lindblad;
        check(
            matches!(l.model.as_str(), "amplitude-damping" | "dephasing" | "driven-damping"),
            "lindblad.model",
            "expected \"amplitude-damping\", \"dephasing\" or \"driven-damping\"",
        )?;
        check(
            l.rate >= 0.0 && l.rate.is_finite(),
            "lindblad.rate",
            "must be non-negative",
        )?;
        check(l.drive.is_finite(), "lindblad.drive", "must be finite")?;
        check(positive(l.dt), "lindblad.dt", "time step must be positive")?;
        check(
            l.t_final >= 0.0 && l.t_final.is_finite(),
            "lindblad.t_final",
            "must be non-negative",
        )?;
        check(
            l.t_final == 0.0 || l.dt <= l.t_final,
            "lindblad.dt",
            "must not exceed lindblad.t_final",
        )?;
        check(self.threads != Some(0), "threads", "must be at least 1")?;
        Ok(())
    }
}
