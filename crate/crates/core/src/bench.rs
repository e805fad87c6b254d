//! Benchmarks: ill-conditioned Gaussian sampling with KL diagnostics, and
//! Airy-operator eigenvalue estimation with Bayesian calibration.

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::csv::Table;
use crate::rng::stream_rng;
use crate::sampler::{
    effective_sample_size, run_chain, run_chains, ChainOutput, DMPreconditioner, HMCConfig, MassMatrix, TargetDensity,
    Vector,
};
use crate::{Error, Result};

/// Largest accepted condition exponent.
pub const MAX_KAPPA: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: Vector,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianTarget {
    pub fn new(mean: Vector, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::shape(
                format!("{d}x{d} covariance"),
                format!("{}x{}", cov.nrows(), cov.ncols()),
            ));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let chol =
            Cholesky::new(cov.clone()).ok_or_else(|| Error::Domain("covariance is not positive definite".into()))?;
        let log_det = chol_log_det(&chol);
        let precision = chol.inverse();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self {
            mean,
            cov,
            precision,
            log_norm,
        })
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        let d = variances.len();
        Self::new(
            Vector::zeros(d),
            DMatrix::from_diagonal(&Vector::from_column_slice(variances)),
        )
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

impl TargetDensity for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, theta: &Vector) -> f64 {
        let r = theta - &self.mean;
        self.log_norm - 0.5 * r.dot(&(&self.precision * &r))
    }

    fn grad_log_density(&self, theta: &Vector) -> Vector {
        -(&self.precision * (theta - &self.mean))
    }
}

fn chol_log_det(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Haar-random orthogonal matrix (QR of a Gaussian matrix, signs fixed by
/// the diagonal of R).
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Zero-mean Gaussian with covariance eigenvalues log-spaced over
/// `[10⁻¹, 10^κ]` in a random orthogonal basis.
pub fn make_illconditioned_gaussian<R: Rng + ?Sized>(d: usize, kappa: f64, rng: &mut R) -> Result<GaussianTarget> {
    if d < 2 {
        return Err(Error::Validation("dimension must be at least 2".into()));
    }
    if !kappa.is_finite() || kappa > MAX_KAPPA {
        return Err(Error::Domain(format!(
            "condition exponent κ = {kappa} exceeds {MAX_KAPPA}; refused in double precision"
        )));
    }
    if kappa < -1.0 {
        return Err(Error::Validation("condition exponent must be at least −1".into()));
    }
    let eig: Vec<f64> = (0..d)
        .map(|i| 10f64.powf(-1.0 + (kappa + 1.0) * i as f64 / (d - 1) as f64))
        .collect();
    let q = random_orthogonal(d, rng);
    let cov = &q * DMatrix::from_diagonal(&Vector::from_vec(eig)) * q.transpose();
    GaussianTarget::new(Vector::zeros(d), cov)
}

/// `½(tr(Σ⁻¹Σ̂) + (μ−μ̂)ᵀΣ⁻¹(μ−μ̂) − k + ln(det Σ / det Σ̂))`, which is
/// `KL(N(μ̂, Σ̂) ‖ N(μ, Σ))`.
pub fn kl_gaussian(mu: &Vector, sigma: &DMatrix<f64>, mu_hat: &Vector, sigma_hat: &DMatrix<f64>) -> Result<f64> {
    let k = mu.len();
    if mu_hat.len() != k || sigma.nrows() != k || sigma_hat.nrows() != k {
        return Err(Error::shape(
            k,
            format!("{} / {} / {}", mu_hat.len(), sigma.nrows(), sigma_hat.nrows()),
        ));
    }
    let spd = |m: &DMatrix<f64>, name: &str| {
        Cholesky::new((m + m.transpose()) * 0.5)
            .ok_or_else(|| Error::Domain(format!("{name} is not positive definite")))
    };
    let c = spd(sigma, "reference covariance")?;
    let c_hat = spd(sigma_hat, "estimated covariance")?;
    let tr = c.solve(sigma_hat).trace();
    let dm = mu - mu_hat;
    let quad = dm.dot(&c.solve(&dm));
    let kl = 0.5 * (tr + quad - k as f64 + chol_log_det(&c) - chol_log_det(&c_hat));
    Ok(kl.max(0.0))
}

/// Pooled mean and unbiased covariance of the first `n` rows of each chain.
pub fn pooled_moments(chains: &[ChainOutput], n: usize) -> Result<(Vector, DMatrix<f64>)> {
    let d = chains.first().map(|c| c.samples.ncols()).unwrap_or(0);
    let total = n * chains.len();
    if total < 2 || chains.iter().any(|c| c.samples.nrows() < n) {
        return Err(Error::Validation("not enough draws for pooled moments".into()));
    }
    let mut mean = Vector::zeros(d);
    for c in chains {
        for r in 0..n {
            mean += c.samples.row(r).transpose();
        }
    }
    mean /= total as f64;
    let mut cov = DMatrix::zeros(d, d);
    for c in chains {
        for r in 0..n {
            let x = c.samples.row(r).transpose() - &mean;
            cov += &x * x.transpose();
        }
    }
    Ok((mean, cov / (total as f64 - 1.0)))
}

/// KL of the pooled first-`n` draws against the target.
pub fn pooled_kl(target: &GaussianTarget, chains: &[ChainOutput], n: usize) -> Result<f64> {
    let (m, c) = pooled_moments(chains, n)?;
    kl_gaussian(target.mean(), target.covariance(), &m, &c)
}

/// Geometric checkpoints `draws, draws/2, …` down to `min_draws`, ascending.
pub fn doubling_checkpoints(draws: usize, min_draws: usize) -> Vec<usize> {
    let mut out = vec![];
    let mut n = draws;
    while n >= min_draws.max(2) {
        out.push(n);
        n /= 2;
    }
    out.reverse();
    out
}

/// First post-warmup iteration count (on multiples of `stride`) at which the
/// pooled KL falls below `threshold`.
pub fn iterations_to_kl(
    target: &GaussianTarget,
    chains: &[ChainOutput],
    threshold: f64,
    stride: usize,
) -> Result<Option<usize>> {
    let draws = chains.iter().map(|c| c.samples.nrows()).min().unwrap_or(0);
    let stride = stride.max(1);
    let start = stride.max(target.dim() + 1);
    let mut n = start;
    while n <= draws {
        if pooled_kl(target, chains, n)? < threshold {
            return Ok(Some(n));
        }
        n += stride;
    }
    Ok(None)
}

#[derive(Debug, Clone)]
pub struct GaussianBenchSettings {
    pub dims: Vec<usize>,
    pub kappa: f64,
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub warmup: usize,
    /// Post-warmup draws per chain.
    pub draws: usize,
    pub chains: usize,
    pub preconditioned: bool,
    pub alpha: f64,
    pub dtau: f64,
    pub seed: u64,
}

impl Default for GaussianBenchSettings {
    fn default() -> Self {
        Self {
            dims: vec![10],
            kappa: 3.0,
            step_size: 0.2,
            leapfrog_steps: 8,
            warmup: 2000,
            draws: 10_000,
            chains: 8,
            preconditioned: true,
            alpha: 0.1,
            dtau: 0.01,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlRow {
    pub dimension: usize,
    pub checkpoint: usize,
    /// Post-warmup iterations per chain.
    pub iteration: usize,
    pub kl: f64,
}

#[derive(Debug, Clone)]
pub struct GaussianDimSummary {
    pub dimension: usize,
    pub final_kl: f64,
    pub acceptance_rate: f64,
    pub divergences: usize,
    pub min_ess: f64,
    /// Fraction of adjacent checkpoint pairs where KL decreased.
    pub decreasing_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct GaussianBenchReport {
    pub rows: Vec<KlRow>,
    pub summaries: Vec<GaussianDimSummary>,
}

impl GaussianBenchReport {
    pub fn to_table(&self) -> Result<Table> {
        let mut t = Table::new(&["dimension", "checkpoint", "iteration", "kl"])?;
        for r in &self.rows {
            t.push(vec![
                r.dimension.into(),
                r.checkpoint.into(),
                r.iteration.into(),
                r.kl.into(),
            ])?;
        }
        Ok(t)
    }
}

fn dim_seed(seed: u64, d: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(d as u64)
}

/// Warmup configuration shared by the benchmark runs: the walk step decays
/// to zero by the middle of warmup.
pub fn bench_preconditioner(d: usize, alpha: f64, dtau: f64, warmup: usize) -> Result<DMPreconditioner> {
    let mut pre = DMPreconditioner::new(d, alpha, dtau)?;
    pre.anneal = Some(warmup / 2);
    Ok(pre)
}

/// The Gaussian target used for dimension `d` of a benchmark run.
pub fn bench_target(d: usize, kappa: f64, seed: u64) -> Result<GaussianTarget> {
    let mut rng = stream_rng(dim_seed(seed, d), u64::MAX);
    make_illconditioned_gaussian(d, kappa, &mut rng)
}

pub fn run_gaussian_benchmark(settings: &GaussianBenchSettings) -> Result<GaussianBenchReport> {
    if settings.dims.is_empty() {
        return Err(Error::Config("at least one benchmark dimension is required".into()));
    }
    let per_dim: Vec<(Vec<KlRow>, GaussianDimSummary)> = settings
        .dims
        .iter()
        .map(|&d| {
            let target = bench_target(d, settings.kappa, settings.seed)?;
            let config = HMCConfig::new(
                d,
                settings.step_size,
                settings.leapfrog_steps,
                settings.warmup,
                settings.warmup + settings.draws,
                dim_seed(settings.seed, d),
            );
            let pre = if settings.preconditioned {
                Some(bench_preconditioner(d, settings.alpha, settings.dtau, settings.warmup)?)
            } else {
                None
            };
            let chains = run_chains(&target, &config, pre.as_ref(), settings.chains)?;
            let checkpoints = doubling_checkpoints(settings.draws, (4 * d).max(50).div_ceil(settings.chains));
            let rows: Vec<KlRow> = checkpoints
                .iter()
                .enumerate()
                .map(|(k, &n)| {
                    Ok(KlRow {
                        dimension: d,
                        checkpoint: k,
                        iteration: n,
                        kl: pooled_kl(&target, &chains, n)?,
                    })
                })
                .collect::<Result<_>>()?;
            let pairs = rows.len().saturating_sub(1);
            let decreasing = rows.windows(2).filter(|w| w[1].kl < w[0].kl).count();
            let mut min_ess = f64::INFINITY;
            for c in &chains {
                for j in 0..d {
                    let col: Vec<f64> = c.samples.column(j).iter().copied().collect();
                    if col.len() >= 10 {
                        min_ess = min_ess.min(effective_sample_size(&col)?.value);
                    }
                }
            }
            let summary = GaussianDimSummary {
                dimension: d,
                final_kl: rows.last().map(|r| r.kl).unwrap_or(f64::NAN),
                acceptance_rate: chains.iter().map(|c| c.acceptance_rate).sum::<f64>() / chains.len() as f64,
                divergences: chains.iter().map(|c| c.divergences).sum(),
                min_ess,
                decreasing_fraction: if pairs == 0 {
                    1.0
                } else {
                    decreasing as f64 / pairs as f64
                },
            };
            Ok((rows, summary))
        })
        .collect::<Result<_>>()?;
    let mut rows = vec![];
    let mut summaries = vec![];
    for (r, s) in per_dim {
        rows.extend(r);
        summaries.push(s);
    }
    Ok(GaussianBenchReport { rows, summaries })
}

/// `−y'' + a x y = λ y` on `[0, L]` with Dirichlet ends, `n` grid intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryProblem {
    pub slope: f64,
    pub length: f64,
    pub intervals: usize,
}

/// Minimum grid intervals.
pub const MIN_INTERVALS: usize = 100;

/// Asymptotic magnitude of the `k`-th zero of Ai (1-based).
pub fn airy_zero_estimate(k: usize) -> f64 {
    let t = 1.5 * std::f64::consts::PI * (k as f64 - 0.25);
    t.powf(2.0 / 3.0) * (1.0 + 5.0 / (48.0 * t * t))
}

impl AiryProblem {
    pub fn new(slope: f64, length: f64, intervals: usize) -> Result<Self> {
        if !(slope > 0.0) || !slope.is_finite() {
            return Err(Error::Validation("Airy slope a must be positive".into()));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Validation("domain length must be positive".into()));
        }
        if intervals < MIN_INTERVALS {
            return Err(Error::Validation(format!(
                "grid needs at least {MIN_INTERVALS} intervals"
            )));
        }
        Ok(Self {
            slope,
            length,
            intervals,
        })
    }

    /// Domain `L = λ_m/a + 10 a^{−1/3}` long enough for the first `modes`
    /// eigenfunctions to decay.
    pub fn for_modes(slope: f64, modes: usize, intervals: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Validation("at least one mode is required".into()));
        }
        if !(slope > 0.0) {
            return Err(Error::Validation("Airy slope a must be positive".into()));
        }
        let scale = slope.powf(-1.0 / 3.0);
        Self::new(slope, scale * (airy_zero_estimate(modes) + 10.0), intervals)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.intervals as f64
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self {
            intervals: self.intervals * factor,
            ..*self
        }
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    /// Number of eigenvalues strictly below `x` (Sturm count via the `LDLᵀ`
    /// pivots of `T − xI`).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.dim() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            d = self.diag[i] - x - if i == 0 { 0.0 } else { b2 / d };
            if d == 0.0 {
                d = -f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `m` smallest eigenvalues, ascending.
    pub fn smallest(&self, m: usize) -> Result<Vec<f64>> {
        if m > self.dim() {
            return Err(Error::Validation(format!(
                "requested {m} eigenvalues of a {}-dimensional matrix",
                self.dim()
            )));
        }
        let vals: Vec<f64> = (0..m).into_par_iter().map(|k| self.eigenvalue(k)).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                step: 0,
                reason: "non-finite eigenvalue".into(),
            });
        }
        Ok(vals)
    }
}

/// Central-difference discretization on the interior nodes `x_i = i h`.
pub fn airy_discretize(prob: &AiryProblem) -> SymTridiagonal {
    let h = prob.spacing();
    let inv_h2 = 1.0 / (h * h);
    let n = prob.intervals - 1;
    SymTridiagonal {
        diag: (1..=n).map(|i| 2.0 * inv_h2 + prob.slope * i as f64 * h).collect(),
        off: vec![-inv_h2; n.saturating_sub(1)],
    }
}

fn check_resolution(prob: &AiryProblem, m: usize) -> Result<()> {
    if m == 0 || m * 10 > prob.intervals {
        return Err(Error::Validation(format!(
            "{m} eigenvalues on {} intervals violates the resolution guard m ≤ n/10",
            prob.intervals
        )));
    }
    Ok(())
}

/// The `m` smallest eigenvalues on the problem's own grid, no extrapolation.
pub fn airy_raw_eigenvalues(prob: &AiryProblem, m: usize) -> Result<Vec<f64>> {
    check_resolution(prob, m)?;
    airy_discretize(prob).smallest(m)
}

/// `(4 λ_{2n} − λ_n) / 3` for the `m` smallest eigenvalues.
pub fn airy_eigenvalues(prob: &AiryProblem, m: usize) -> Result<Vec<f64>> {
    let coarse = airy_raw_eigenvalues(prob, m)?;
    let fine = airy_raw_eigenvalues(&prob.refined(2), m)?;
    Ok(coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryPrior {
    pub log_a_mean: f64,
    pub log_a_sd: f64,
    pub log_sigma_mean: f64,
    pub log_sigma_sd: f64,
}

impl Default for AiryPrior {
    fn default() -> Self {
        Self {
            log_a_mean: 0.0,
            log_a_sd: 1.0,
            log_sigma_mean: -4.0,
            log_sigma_sd: 2.0,
        }
    }
}

/// Posterior over `(log a, log σ)` for observations `Y_i = λ_i(a) + σ ε_i`.
///
/// The discrete operator on `[0, L a^{−1/3}]` equals `a^{2/3}` times the one
/// for `a = 1` on `[0, L]`, so the model spectrum is a scaled copy of a
/// single reference solve.
#[derive(Debug, Clone)]
pub struct AiryPosterior {
    observed: Vec<f64>,
    reference: Vec<f64>,
    pub prior: AiryPrior,
    pub fd_step: f64,
}

pub fn airy_posterior(observed: &[f64], prior: AiryPrior, template: &AiryProblem) -> Result<AiryPosterior> {
    let reference_prob = AiryProblem {
        slope: 1.0,
        length: template.length * template.slope.cbrt(),
        intervals: template.intervals,
    };
    let reference = airy_eigenvalues(&reference_prob, observed.len())?;
    AiryPosterior::with_reference(observed, reference, prior)
}

impl AiryPosterior {
    pub fn with_reference(observed: &[f64], reference: Vec<f64>, prior: AiryPrior) -> Result<Self> {
        if observed.len() != reference.len() || observed.is_empty() {
            return Err(Error::shape(reference.len(), observed.len()));
        }
        if !(prior.log_a_sd > 0.0 && prior.log_sigma_sd > 0.0) {
            return Err(Error::Config("prior standard deviations must be positive".into()));
        }
        Ok(Self {
            observed: observed.to_vec(),
            reference,
            prior,
            fd_step: 1e-5,
        })
    }

    pub fn model(&self, a: f64) -> Vec<f64> {
        let s = a.powf(2.0 / 3.0);
        self.reference.iter().map(|r| s * r).collect()
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// Least-squares `a` and residual RMS `σ`.
    pub fn least_squares(&self) -> (f64, f64) {
        let num: f64 = self.observed.iter().zip(&self.reference).map(|(y, r)| y * r).sum();
        let den: f64 = self.reference.iter().map(|r| r * r).sum();
        let scale = (num / den).max(f64::MIN_POSITIVE);
        let a = scale.powf(1.5);
        let rss: f64 = self
            .observed
            .iter()
            .zip(&self.reference)
            .map(|(y, r)| (y - scale * r).powi(2))
            .sum();
        let sigma = (rss / self.observed.len() as f64).sqrt().max(1e-12);
        (a, sigma)
    }

    /// Negative Hessian of the log posterior by central differences.
    pub fn neg_hessian(&self, at: &Vector) -> DMatrix<f64> {
        let h = 1e-4;
        let mut hess = DMatrix::zeros(2, 2);
        for j in 0..2 {
            let mut up = at.clone();
            let mut dn = at.clone();
            up[j] += h;
            dn[j] -= h;
            let g = (self.grad_log_density(&up) - self.grad_log_density(&dn)) / (2.0 * h);
            hess.set_column(j, &(-g));
        }
        (&hess + hess.transpose()) * 0.5
    }
}

impl TargetDensity for AiryPosterior {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, theta: &Vector) -> f64 {
        let (log_a, log_sigma) = (theta[0], theta[1]);
        let p = &self.prior;
        let prior = -0.5 * ((log_a - p.log_a_mean) / p.log_a_sd).powi(2)
            - 0.5 * ((log_sigma - p.log_sigma_mean) / p.log_sigma_sd).powi(2);
        let sigma = log_sigma.exp();
        let scale = (2.0 * log_a / 3.0).exp();
        let rss: f64 = self
            .observed
            .iter()
            .zip(&self.reference)
            .map(|(y, r)| (y - scale * r).powi(2))
            .sum();
        let m = self.observed.len() as f64;
        prior - 0.5 * rss / (sigma * sigma) - m * log_sigma - 0.5 * m * (2.0 * std::f64::consts::PI).ln()
    }

    fn grad_log_density(&self, theta: &Vector) -> Vector {
        let h = self.fd_step;
        Vector::from_fn(2, |j, _| {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            (self.log_density(&up) - self.log_density(&dn)) / (2.0 * h)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub index: usize,
    pub exact: f64,
    pub estimate: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

/// Per-index absolute and relative errors, in input order.
pub fn eigen_error_report(estimated: &[f64], exact: &[f64]) -> Result<Vec<ErrorRow>> {
    if estimated.len() != exact.len() {
        return Err(Error::shape(exact.len(), estimated.len()));
    }
    Ok(estimated
        .iter()
        .zip(exact)
        .enumerate()
        .map(|(i, (&est, &ex))| {
            let abs_err = (est - ex).abs();
            ErrorRow {
                index: i + 1,
                exact: ex,
                estimate: est,
                abs_err,
                rel_err: if ex != 0.0 { abs_err / ex.abs() } else { abs_err },
            }
        })
        .collect())
}

pub fn error_table(rows: &[ErrorRow]) -> Result<Table> {
    let mut t = Table::new(&["index", "exact", "estimate", "abs_err", "rel_err"])?;
    for r in rows {
        t.push(vec![
            r.index.into(),
            r.exact.into(),
            r.estimate.into(),
            r.abs_err.into(),
            r.rel_err.into(),
        ])?;
    }
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct CalibrationSettings {
    pub a_star: f64,
    pub sigma: f64,
    pub modes: usize,
    pub repetitions: usize,
    pub intervals: usize,
    pub prior: AiryPrior,
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub warmup: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            a_star: 1.0,
            sigma: 0.01,
            modes: 20,
            repetitions: 10,
            intervals: 2000,
            prior: AiryPrior::default(),
            step_size: 0.3,
            leapfrog_steps: 10,
            warmup: 200,
            iterations: 2200,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationRun {
    pub a_mean: f64,
    pub a_sd: f64,
    pub sigma_mean: f64,
    pub acceptance_rate: f64,
    pub covered: bool,
    /// Post-warmup draws of `(a, σ)`.
    pub samples: Vec<(f64, f64)>,
}

/// Synthetic-data calibration: each repetition draws `Y = λ(a*) + σ ε`,
/// samples the posterior with HMC (mass from the Hessian at the
/// least-squares point) and checks `|E[a] − a*| ≤ 2 sd(a)`.
pub fn calibrate_airy(settings: &CalibrationSettings) -> Result<Vec<CalibrationRun>> {
    let template = AiryProblem::for_modes(1.0, settings.modes, settings.intervals)?;
    let reference = airy_eigenvalues(&template, settings.modes)?;
    let truth: Vec<f64> = reference.iter().map(|r| settings.a_star.powf(2.0 / 3.0) * r).collect();
    (0..settings.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(settings.seed, rep as u64);
            let y: Vec<f64> = truth
                .iter()
                .map(|t| t + settings.sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let post = AiryPosterior::with_reference(&y, reference.clone(), settings.prior)?;
            let (a0, s0) = post.least_squares();
            let start = Vector::from_vec(vec![a0.ln(), s0.ln()]);
            let hess = post.neg_hessian(&start);
            let mass = if MassMatrix::new(hess.clone()).is_ok() {
                hess
            } else {
                DMatrix::identity(2, 2)
            };
            let mut config = HMCConfig::new(
                2,
                settings.step_size,
                settings.leapfrog_steps,
                settings.warmup,
                settings.iterations,
                settings.seed,
            );
            config.mass = mass;
            config.initial = Some(start);
            let out = run_chain(&post, &config, None, &mut rng)?;
            let samples: Vec<(f64, f64)> = out.samples.row_iter().map(|r| (r[0].exp(), r[1].exp())).collect();
            let n = samples.len() as f64;
            let a_mean = samples.iter().map(|s| s.0).sum::<f64>() / n;
            let a_sd = (samples.iter().map(|s| (s.0 - a_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let sigma_mean = samples.iter().map(|s| s.1).sum::<f64>() / n;
            Ok(CalibrationRun {
                a_mean,
                a_sd,
                sigma_mean,
                acceptance_rate: out.acceptance_rate,
                covered: (a_mean - settings.a_star).abs() <= 2.0 * a_sd,
                samples,
            })
        })
        .collect()
}

/// Reference eigenvalues on a fine grid with the same extrapolation.
pub fn airy_reference(slope: f64, modes: usize, intervals: usize) -> Result<Vec<f64>> {
    airy_eigenvalues(&AiryProblem::for_modes(slope, modes, intervals)?, modes)
}

/// The `modes` smallest eigenvalues from integrating `y'' = (x − λ) y`
/// inward from `x = x_max` with RK4 and bisecting on `y(0) = 0`
/// (slope `a = 1`).
pub fn airy_shooting_eigenvalues(modes: usize, x_max: f64, steps: usize) -> Vec<f64> {
    let y_at_zero = |lambda: f64| -> f64 {
        let h = x_max / steps as f64;
        let f = |x: f64, y: f64, dy: f64| (dy, (x - lambda) * y);
        // Start on the decaying branch: y ≈ 0, y' small and negative.
        let (mut y, mut dy) = (1e-30, -1e-30 * (x_max - lambda).max(0.0).sqrt());
        let mut x = x_max;
        for _ in 0..steps {
            let (k1y, k1d) = f(x, y, dy);
            let (k2y, k2d) = f(x - 0.5 * h, y - 0.5 * h * k1y, dy - 0.5 * h * k1d);
            let (k3y, k3d) = f(x - 0.5 * h, y - 0.5 * h * k2y, dy - 0.5 * h * k2d);
            let (k4y, k4d) = f(x - h, y - h * k3y, dy - h * k3d);
            y -= h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            dy -= h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            x -= h;
            let s = y.abs().max(dy.abs());
            if s > 1e100 {
                y /= s;
                dy /= s;
            }
        }
        y / y.abs().max(dy.abs())
    };
    let mut out = Vec::with_capacity(modes);
    let mut lo = 0.5;
    let grid = 0.05;
    let mut f_lo = y_at_zero(lo);
    while out.len() < modes {
        let hi = lo + grid;
        let f_hi = y_at_zero(hi);
        if f_lo.signum() != f_hi.signum() {
            let (mut a, mut b, mut fa) = (lo, hi, f_lo);
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                let fm = y_at_zero(mid);
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            out.push(0.5 * (a + b));
        }
        lo = hi;
        f_lo = f_hi;
    }
    out
}
