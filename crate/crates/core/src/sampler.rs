//! Hamiltonian Monte Carlo with a pluggable mass matrix and the
//! density-matrix preconditioner.
//!
//! Energy convention:
//! `H(θ, p) = −log π(θ) + ½ log((2π)^D |M|) + ½ pᵀ M⁻¹ p`,
//! momenta refreshed from `N(0, M)` every iteration.
//!
//! The preconditioner keeps a `D×D` density matrix `ρ` that tracks the
//! normalized precision of the warmup draws. Every adaptation epoch it is
//! conjugated by one CUE walk increment and mixed toward the current
//! precision estimate; the mass matrix is `M = s (Re ρ + ε I)` with
//! `s = tr Σ̂⁻¹`. Everything is frozen once warmup ends.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::density::{project_to_density, DensityMatrix};
use crate::numkernel::{real, CMatrix, Hermitian};
use crate::rmt::{cue_step_with_increment, UnitaryWalkState};
use crate::rng::{stream_rng, StreamRng};
use crate::{Error, Result};

pub type Vector = DVector<f64>;

/// `|ΔH|` beyond which a proposal is rejected as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Log density with gradient.
pub trait TargetDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, theta: &Vector) -> f64;
    fn grad_log_density(&self, theta: &Vector) -> Vector;
}

/// Target assembled from two closures.
pub struct FnTarget<F, G> {
    pub dim: usize,
    pub log_density: F,
    pub grad: G,
}

impl<F, G> TargetDensity for FnTarget<F, G>
where
    F: Fn(&Vector) -> f64 + Sync,
    G: Fn(&Vector) -> Vector + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, theta: &Vector) -> f64 {
        (self.log_density)(theta)
    }
    fn grad_log_density(&self, theta: &Vector) -> Vector {
        (self.grad)(theta)
    }
}

/// Standard normal in `D` dimensions.
#[derive(Debug, Clone, Copy)]
pub struct StdNormal(pub usize);

impl TargetDensity for StdNormal {
    fn dim(&self) -> usize {
        self.0
    }
    fn log_density(&self, theta: &Vector) -> f64 {
        -0.5 * theta.norm_squared() - 0.5 * self.0 as f64 * (2.0 * std::f64::consts::PI).ln()
    }
    fn grad_log_density(&self, theta: &Vector) -> Vector {
        -theta
    }
}

/// Largest relative discrepancy between the analytic gradient and central
/// differences of the log density at `theta`.
pub fn gradient_check<T: TargetDensity + ?Sized>(target: &T, theta: &Vector, h: f64) -> f64 {
    let g = target.grad_log_density(theta);
    let mut worst = 0.0f64;
    for j in 0..theta.len() {
        let mut up = theta.clone();
        let mut dn = theta.clone();
        up[j] += h;
        dn[j] -= h;
        let fd = (target.log_density(&up) - target.log_density(&dn)) / (2.0 * h);
        worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
    }
    worst
}

/// SPD mass matrix with its Cholesky factor and inverse.
#[derive(Debug, Clone)]
pub struct MassMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    inverse: DMatrix<f64>,
    log_det: f64,
}

impl MassMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Config("mass matrix must be square and non-empty".into()));
        }
        if !matrix.iter().all(|x| x.is_finite())
            || (&matrix - matrix.transpose()).amax() > 1e-12 * matrix.amax().max(1.0)
        {
            return Err(Error::Config("mass matrix must be finite and symmetric".into()));
        }
        let chol = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::Config("mass matrix is not positive definite (Cholesky failed)".into()))?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let inverse = chol.inverse();
        Ok(Self {
            matrix,
            chol,
            inverse,
            log_det,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Draw from `N(0, M)`.
    pub fn sample_momentum<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let z = Vector::from_fn(self.dim(), |_, _| rng.sample(StandardNormal));
        self.chol.l() * z
    }
}

pub fn hamiltonian<T: TargetDensity + ?Sized>(theta: &Vector, p: &Vector, target: &T, mass: &MassMatrix) -> f64 {
    let d = mass.dim() as f64;
    -target.log_density(theta)
        + 0.5 * (d * (2.0 * std::f64::consts::PI).ln() + mass.log_det())
        + 0.5 * p.dot(&(mass.inverse() * p))
}

#[derive(Debug, Clone)]
pub struct LeapfrogResult {
    pub theta: Vector,
    pub p: Vector,
    /// Non-finite gradient or position encountered.
    pub divergent: bool,
}

/// `ℓ` steps of half-kick / drift / half-kick with step `ε`.
pub fn leapfrog<T: TargetDensity + ?Sized>(
    theta: &Vector,
    p: &Vector,
    target: &T,
    mass: &MassMatrix,
    eps: f64,
    steps: usize,
) -> LeapfrogResult {
    let mut theta = theta.clone();
    let mut p = p.clone();
    let finite = |v: &Vector| v.iter().all(|x| x.is_finite());
    let mut grad = target.grad_log_density(&theta);
    if !finite(&grad) {
        return LeapfrogResult {
            theta,
            p,
            divergent: true,
        };
    }
    for _ in 0..steps {
        p += &grad * (0.5 * eps);
        theta += mass.inverse() * &p * eps;
        grad = target.grad_log_density(&theta);
        if !finite(&grad) || !finite(&theta) {
            return LeapfrogResult {
                theta,
                p,
                divergent: true,
            };
        }
        p += &grad * (0.5 * eps);
    }
    LeapfrogResult {
        theta,
        p,
        divergent: false,
    }
}

/// `min(1, exp(H_current − H_proposed))`.
pub fn acceptance_probability(h_current: f64, h_proposed: f64) -> f64 {
    let delta = h_current - h_proposed;
    if delta >= 0.0 {
        1.0
    } else {
        delta.exp()
    }
}

#[derive(Debug, Clone)]
pub struct HMCConfig {
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub mass: DMatrix<f64>,
    /// Adaptation iterations; their draws are discarded.
    pub warmup: usize,
    /// Total iterations including warmup.
    pub iterations: usize,
    pub seed: u64,
    /// Starting point; the origin when absent.
    pub initial: Option<Vector>,
}

impl HMCConfig {
    pub fn new(dim: usize, step_size: f64, leapfrog_steps: usize, warmup: usize, iterations: usize, seed: u64) -> Self {
        Self {
            step_size,
            leapfrog_steps,
            mass: DMatrix::identity(dim, dim),
            warmup,
            iterations,
            seed,
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Config(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if self.leapfrog_steps == 0 {
            return Err(Error::Config("leapfrog steps must be at least 1".into()));
        }
        if self.warmup >= self.iterations {
            return Err(Error::Config(format!(
                "warmup ({}) must be smaller than iterations ({})",
                self.warmup, self.iterations
            )));
        }
        MassMatrix::new(self.mass.clone())?;
        Ok(())
    }
}

/// Current position with cached log density and gradient.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub theta: Vector,
    pub log_density: f64,
    pub grad: Vector,
    pub iteration: usize,
    pub accepted: usize,
    pub divergences: usize,
}

impl ChainState {
    pub fn new<T: TargetDensity + ?Sized>(target: &T, theta: Vector) -> Result<Self> {
        if theta.len() != target.dim() {
            return Err(Error::shape(target.dim(), theta.len()));
        }
        let log_density = target.log_density(&theta);
        if !log_density.is_finite() {
            return Err(Error::Sampler("log density is not finite at the initial point".into()));
        }
        Ok(Self {
            grad: target.grad_log_density(&theta),
            theta,
            log_density,
            iteration: 0,
            accepted: 0,
            divergences: 0,
        })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iteration == 0 {
            0.0
        } else {
            self.accepted as f64 / self.iteration as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Rejected,
    Divergent,
}

/// One HMC iteration: fresh momentum, leapfrog proposal, Metropolis test.
pub fn hmc_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    state: &mut ChainState,
    target: &T,
    mass: &MassMatrix,
    step_size: f64,
    leapfrog_steps: usize,
    rng: &mut R,
) -> StepOutcome {
    let p0 = mass.sample_momentum(rng);
    let h0 = hamiltonian(&state.theta, &p0, target, mass);
    let prop = leapfrog(&state.theta, &p0, target, mass, step_size, leapfrog_steps);
    let u: f64 = rng.random();
    state.iteration += 1;
    let h1 = if prop.divergent {
        f64::NAN
    } else {
        hamiltonian(&prop.theta, &prop.p, target, mass)
    };
    let dh = h1 - h0;
    if !dh.is_finite() || dh.abs() > DIVERGENCE_THRESHOLD {
        state.divergences += 1;
        return StepOutcome::Divergent;
    }
    if u < acceptance_probability(h0, h1) {
        state.log_density = target.log_density(&prop.theta);
        state.grad = target.grad_log_density(&prop.theta);
        state.theta = prop.theta;
        state.accepted += 1;
        StepOutcome::Accepted
    } else {
        StepOutcome::Rejected
    }
}

/// Iterations between preconditioner refreshes.
pub const ADAPT_EPOCH: usize = 10;

#[derive(Debug, Clone)]
pub struct DMPreconditioner {
    rho: DensityMatrix,
    walk: UnitaryWalkState,
    pub alpha: f64,
    pub dtau: f64,
    /// Relative floor `ε` in `M = s (Re ρ + ε I)`.
    pub floor: f64,
    /// Updates over which the walk step decays linearly to zero; `None`
    /// keeps it constant.
    pub anneal: Option<usize>,
    count: usize,
    mean: Vector,
    scatter: DMatrix<f64>,
    updates: usize,
    frozen: bool,
}

impl DMPreconditioner {
    pub fn new(dim: usize, alpha: f64, dtau: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("preconditioner dimension must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("mixing rate must lie in (0, 1], got {alpha}")));
        }
        Ok(Self {
            rho: DensityMatrix::maximally_mixed(dim),
            walk: UnitaryWalkState::new(dim, dtau)?,
            alpha,
            dtau,
            floor: 1e-8,
            anneal: None,
            count: 0,
            mean: Vector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
            updates: 0,
            frozen: false,
        })
    }

    /// `α = 0.1`, `δτ = 0.01`.
    pub fn with_defaults(dim: usize) -> Self {
        Self::new(dim, 0.1, 0.01).expect("defaults are valid")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Running sample covariance, once at least two draws are in.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        (self.count >= 2).then(|| &self.scatter / (self.count as f64 - 1.0))
    }

    /// Normalized regularized precision `Σ̂⁻¹ / tr Σ̂⁻¹` and its scale
    /// `tr Σ̂⁻¹`; `None` until the scatter has full rank.
    pub fn precision_target(&self) -> Option<(DensityMatrix, f64)> {
        if self.count <= self.dim() {
            return None;
        }
        precision_target(&self.covariance()?)
    }

    fn current_dtau(&self) -> f64 {
        match self.anneal {
            Some(horizon) if horizon > 0 => self.dtau * (1.0 - self.updates as f64 / horizon as f64).max(0.0),
            Some(_) => 0.0,
            None => self.dtau,
        }
    }

    /// Absorbs one draw; every [`ADAPT_EPOCH`] draws refreshes `ρ`.
    pub fn dm_update<R: Rng + ?Sized>(&mut self, theta: &Vector, rng: &mut R) -> Result<bool> {
        if self.frozen {
            return Err(Error::Sampler("preconditioner is frozen".into()));
        }
        if theta.len() != self.dim() {
            return Err(Error::shape(self.dim(), theta.len()));
        }
        self.count += 1;
        let delta = theta - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = theta - &self.mean;
        self.scatter += &delta * delta2.transpose();
        self.updates += 1;
        if !self.updates.is_multiple_of(ADAPT_EPOCH) {
            return Ok(false);
        }
        self.walk.dtau = self.current_dtau();
        let (walk, v) = cue_step_with_increment(&self.walk, rng)?;
        self.walk = walk;
        let target = self
            .precision_target()
            .map(|(t, _)| t)
            .unwrap_or_else(|| DensityMatrix::maximally_mixed(self.dim()));
        self.rho = dm_mix(&self.rho, &v, &target, self.alpha)?;
        Ok(true)
    }

    /// `M = s (Re ρ + ε I)` with `s = tr Σ̂⁻¹`, or `s = D` before the scatter
    /// has full rank.
    pub fn mass_from_rho(&self) -> Result<MassMatrix> {
        let s = self.precision_target().map(|(_, s)| s).unwrap_or(self.dim() as f64);
        mass_from_rho(&self.rho, s, self.floor)
    }
}

/// `Σ⁻¹/tr Σ⁻¹` for the regularized `Σ + 1e-6 tr(Σ)/D I`, with `tr Σ⁻¹`.
pub fn precision_target(cov: &DMatrix<f64>) -> Option<(DensityMatrix, f64)> {
    let d = cov.nrows();
    let reg = cov + DMatrix::identity(d, d) * (1e-6 * cov.trace() / d as f64);
    let precision = Cholesky::new(reg)?.inverse();
    let s = precision.trace();
    if !(s.is_finite() && s > 0.0) {
        return None;
    }
    let herm = Hermitian::from_real_symmetric(&((&precision + precision.transpose()) * (0.5 / s))).ok()?;
    project_to_density(&herm).ok().map(|rho| (rho, s))
}

/// `project((1 − α) V ρ V† + α ρ_target)`.
pub fn dm_mix(rho: &DensityMatrix, v: &CMatrix, target: &DensityMatrix, alpha: f64) -> Result<DensityMatrix> {
    let rotated = v * rho.matrix() * v.adjoint();
    let mixed = rotated * real(1.0 - alpha) + target.matrix() * real(alpha);
    project_to_density(&Hermitian::hermitize(&mixed))
}

/// `M = s (Re ρ + ε I)`.
pub fn mass_from_rho(rho: &DensityMatrix, scale: f64, floor: f64) -> Result<MassMatrix> {
    let d = rho.dim();
    let re = rho.matrix().map(|z| z.re);
    let sym = (&re + re.transpose()) * 0.5 + DMatrix::identity(d, d) * floor;
    MassMatrix::new(sym * scale)
}

/// Post-warmup draws and diagnostics of one chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// One row per post-warmup draw.
    pub samples: DMatrix<f64>,
    pub acceptance_rate: f64,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub final_mass: DMatrix<f64>,
    pub preconditioner: Option<DMPreconditioner>,
}

/// Runs one chain. With a preconditioner, `ρ` and `M` adapt on every warmup
/// draw and freeze when warmup ends; the config's mass is ignored in that
/// case.
pub fn run_chain<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    config: &HMCConfig,
    preconditioner: Option<DMPreconditioner>,
    rng: &mut R,
) -> Result<ChainOutput> {
    config.validate()?;
    let d = target.dim();
    if config.mass.nrows() != d {
        return Err(Error::shape(d, config.mass.nrows()));
    }
    let mut pre = preconditioner;
    let mut mass = match &pre {
        Some(p) if p.dim() != d => return Err(Error::shape(d, p.dim())),
        Some(p) => p.mass_from_rho()?,
        None => MassMatrix::new(config.mass.clone())?,
    };
    let start = config.initial.clone().unwrap_or_else(|| Vector::zeros(d));
    let mut state = ChainState::new(target, start)?;
    let kept = config.iterations - config.warmup;
    let mut samples = DMatrix::zeros(kept, d);
    let mut warmup_divergences = 0;
    for it in 0..config.iterations {
        if it == config.warmup {
            if config.warmup > 0 && warmup_divergences == config.warmup {
                return Err(Error::Sampler(format!(
                    "all {} warmup iterations diverged; reduce the step size",
                    config.warmup
                )));
            }
            if let Some(p) = pre.as_mut() {
                p.freeze();
            }
            state.accepted = 0;
            state.iteration = 0;
            state.divergences = 0;
        }
        let outcome = hmc_step(&mut state, target, &mass, config.step_size, config.leapfrog_steps, rng);
        if it < config.warmup {
            if outcome == StepOutcome::Divergent {
                warmup_divergences += 1;
            }
            if let Some(p) = pre.as_mut() {
                if p.dm_update(&state.theta, rng)? {
                    mass = p.mass_from_rho()?;
                }
            }
        } else {
            samples.row_mut(it - config.warmup).copy_from(&state.theta.transpose());
        }
    }
    Ok(ChainOutput {
        samples,
        acceptance_rate: state.acceptance_rate(),
        divergences: state.divergences,
        warmup_divergences,
        final_mass: mass.matrix().clone(),
        preconditioner: pre,
    })
}

/// Runs `chains` independent chains in parallel, chain `k` on RNG stream
/// `k` of `config.seed`; results are in chain order.
pub fn run_chains<T: TargetDensity + ?Sized>(
    target: &T,
    config: &HMCConfig,
    preconditioner: Option<&DMPreconditioner>,
    chains: usize,
) -> Result<Vec<ChainOutput>> {
    if chains == 0 {
        return Err(Error::Config("at least one chain is required".into()));
    }
    (0..chains)
        .into_par_iter()
        .map(|k| {
            let mut rng: StreamRng = stream_rng(config.seed, k as u64);
            run_chain(target, config, preconditioner.cloned(), &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    pub value: f64,
    /// Set for constant series, where the value is reported as 1.
    pub constant: bool,
}

/// Effective sample size with Geyer's initial positive sequence estimator.
pub fn effective_sample_size(series: &[f64]) -> Result<Ess> {
    let n = series.len();
    if n < 10 {
        return Err(Error::Validation("ESS needs at least 10 draws".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(c0 > 0.0) || c0 < 1e-300 {
        return Ok(Ess {
            value: 1.0,
            constant: true,
        });
    }
    let autocorr = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n as f64 * c0)
    };
    // Γ_k = ρ_{2k} + ρ_{2k+1}, summed while positive.
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let gamma = autocorr(2 * k) + autocorr(2 * k + 1);
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        k += 1;
    }
    let tau = tau.max(1.0 / n as f64);
    Ok(Ess {
        value: n as f64 / tau,
        constant: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn correlated() -> FnTarget<impl Fn(&Vector) -> f64 + Sync, impl Fn(&Vector) -> Vector + Sync> {
        // precision [[2, 0.6], [0.6, 1]] plus a quartic bump
        FnTarget {
            dim: 2,
            log_density: |t: &Vector| -(t[0] * t[0] + 0.6 * t[0] * t[1] + 0.5 * t[1] * t[1]) - 0.05 * t[0].powi(4),
            grad: |t: &Vector| {
                Vector::from_vec(vec![-2.0 * t[0] - 0.6 * t[1] - 0.2 * t[0].powi(3), -0.6 * t[0] - t[1]])
            },
        }
    }

    #[test]
    fn hamiltonian_examples() {
        let m = MassMatrix::identity(1);
        let z = Vector::zeros(1);
        let h = hamiltonian(&z, &z, &StdNormal(1), &m);
        assert!((h - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        let mass = MassMatrix::new(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        let z2 = Vector::zeros(2);
        let p = Vector::from_vec(vec![3.0, 0.0]);
        let dh = hamiltonian(&z2, &p, &StdNormal(2), &mass) - hamiltonian(&z2, &z2, &StdNormal(2), &mass);
        assert!((dh - 0.5 * 9.0 / 4.0).abs() < 1e-14);
        let q = Vector::from_vec(vec![0.3, -1.2]);
        assert_eq!(
            hamiltonian(&q, &p, &correlated(), &mass),
            hamiltonian(&q, &(-&p), &correlated(), &mass)
        );
    }

    #[test]
    fn mass_must_be_spd() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(MassMatrix::new(bad), Err(Error::Config(_))));
    }

    #[test]
    fn leapfrog_reversible() {
        let mass = MassMatrix::new(DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.7])).unwrap();
        let t0 = Vector::from_vec(vec![0.4, -0.9]);
        let p0 = Vector::from_vec(vec![1.1, 0.3]);
        let fwd = leapfrog(&t0, &p0, &correlated(), &mass, 0.1, 25);
        let back = leapfrog(&fwd.theta, &(-&fwd.p), &correlated(), &mass, 0.1, 25);
        assert!((back.theta - t0).amax() < 1e-10);
        assert!((back.p + p0).amax() < 1e-10);
    }

    #[test]
    fn leapfrog_energy_error_is_second_order() {
        let m = MassMatrix::identity(1);
        let t0 = Vector::from_vec(vec![1.0]);
        let p0 = Vector::from_vec(vec![0.5]);
        let err = |eps: f64| {
            let steps = (1.0 / eps).round() as usize;
            let r = leapfrog(&t0, &p0, &StdNormal(1), &m, eps, steps);
            (hamiltonian(&r.theta, &r.p, &StdNormal(1), &m) - hamiltonian(&t0, &p0, &StdNormal(1), &m)).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn acceptance_spot_values() {
        assert_eq!(acceptance_probability(1.0, 1.0), 1.0);
        assert_eq!(acceptance_probability(0.0, std::f64::consts::LN_2), 0.5);
        assert_eq!(acceptance_probability(2.0, 1.0), 1.0);
    }

    #[test]
    fn small_step_acceptance_is_high() {
        let cfg = HMCConfig::new(1, 0.1, 10, 100, 10_100, 3);
        let mut rng = stream_rng(3, 0);
        let out = run_chain(&StdNormal(1), &cfg, None, &mut rng).unwrap();
        assert!(out.acceptance_rate > 0.95, "{}", out.acceptance_rate);
    }

    #[test]
    fn std_normal_moments() {
        let cfg = HMCConfig::new(2, 0.2, 10, 500, 10_500, 4);
        let mut rng = stream_rng(4, 0);
        let out = run_chain(&StdNormal(2), &cfg, None, &mut rng).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = out.samples.column(j).iter().copied().collect();
            let ess = effective_sample_size(&col).unwrap().value;
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (col.len() as f64 - 1.0);
            assert!(mean.abs() < 4.0 / ess.sqrt(), "mean {mean}, ess {ess}");
            assert!((var - 1.0).abs() < 0.1, "var {var}");
        }
    }

    #[test]
    fn deterministic_replay() {
        let cfg = HMCConfig::new(2, 0.3, 5, 100, 600, 5);
        let pre = DMPreconditioner::with_defaults(2);
        let run = || run_chains(&correlated(), &cfg, Some(&pre), 3).unwrap();
        let (a, b) = (run(), run());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.samples, y.samples);
        }
    }

    #[test]
    fn constant_offset_changes_nothing() {
        let shifted = FnTarget {
            dim: 2,
            log_density: |t: &Vector| correlated().log_density(t) + 17.25,
            grad: |t: &Vector| correlated().grad_log_density(t),
        };
        let cfg = HMCConfig::new(2, 0.3, 8, 50, 1050, 6);
        let a = run_chain(&correlated(), &cfg, None, &mut stream_rng(6, 0)).unwrap();
        let b = run_chain(&shifted, &cfg, None, &mut stream_rng(6, 0)).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn config_validation() {
        let mut cfg = HMCConfig::new(2, -0.1, 5, 10, 20, 0);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("step size"), "{err}");
        cfg.step_size = 0.1;
        cfg.warmup = 20;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn all_divergent_warmup_aborts() {
        let cfg = HMCConfig::new(1, 1e3, 10, 20, 40, 0);
        let err = run_chain(&StdNormal(1), &cfg, None, &mut stream_rng(0, 0)).unwrap_err();
        assert!(matches!(err, Error::Sampler(_)));
    }

    #[test]
    fn preconditioner_starts_isotropic() {
        let pre = DMPreconditioner::with_defaults(3);
        assert!((pre.rho().matrix() - DensityMatrix::maximally_mixed(3).matrix()).norm() < 1e-15);
        let m = pre.mass_from_rho().unwrap();
        assert!((m.matrix() - DMatrix::identity(3, 3)).amax() < 1e-7);
    }

    #[test]
    fn dm_mix_hand_example() {
        let cov = DMatrix::from_diagonal(&Vector::from_vec(vec![1.0, 100.0]));
        let (target, s) = precision_target(&cov).unwrap();
        let rho = dm_mix(
            &DensityMatrix::maximally_mixed(2),
            &CMatrix::identity(2, 2),
            &target,
            1.0,
        )
        .unwrap();
        assert!((rho.matrix()[(0, 0)].re - 1.0 / 1.01).abs() < 1e-6);
        assert!((rho.matrix()[(1, 1)].re - 0.01 / 1.01).abs() < 1e-6);
        let m = mass_from_rho(&rho, s, 1e-8).unwrap();
        let minv = m.inverse();
        assert!((minv[(0, 0)] - 1.0).abs() < 1e-3 && (minv[(1, 1)] - 100.0).abs() < 1e-1);
    }

    #[test]
    fn rho_stays_valid_under_long_adaptation() {
        let mut pre = DMPreconditioner::new(3, 0.1, 0.05).unwrap();
        let mut rng = stream_rng(8, 0);
        for k in 0..10_000 {
            let theta = Vector::from_fn(3, |i, _| {
                rng.sample::<f64, _>(StandardNormal) * (1.0 + i as f64) + k as f64 * 1e-4
            });
            pre.dm_update(&theta, &mut rng).unwrap();
        }
        let rho = pre.rho();
        assert!((rho.hermitian().trace() - 1.0).abs() < 1e-9);
        assert!(crate::numkernel::hermitian_eig(rho.hermitian()).unwrap().min() >= 0.0);
        pre.freeze();
        assert!(pre.dm_update(&Vector::zeros(3), &mut rng).is_err());
    }

    #[test]
    fn adapted_mass_recovers_covariance() {
        let target = FnTarget {
            dim: 2,
            log_density: |t: &Vector| -0.5 * (t[0] * t[0] + t[1] * t[1] / 100.0),
            grad: |t: &Vector| Vector::from_vec(vec![-t[0], -t[1] / 100.0]),
        };
        let cfg = HMCConfig::new(2, 0.25, 12, 2000, 4000, 9);
        let mut pre = DMPreconditioner::with_defaults(2);
        pre.anneal = Some(1000);
        let out = run_chain(&target, &cfg, Some(pre), &mut stream_rng(9, 0)).unwrap();
        let minv = MassMatrix::new(out.final_mass.clone()).unwrap().inverse().clone();
        assert!(minv[(0, 0)] > 0.5 && minv[(0, 0)] < 2.0, "{minv}");
        assert!(minv[(1, 1)] > 50.0 && minv[(1, 1)] < 200.0, "{minv}");
        assert!(out.preconditioner.unwrap().is_frozen());
    }

    #[test]
    fn ess_iid_and_ar1() {
        let mut rng = stream_rng(10, 0);
        let iid: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let e = effective_sample_size(&iid).unwrap();
        assert!((e.value / 1e4 - 1.0).abs() < 0.15, "{}", e.value);

        let mut x = 0.0;
        let ar: Vec<f64> = (0..100_000)
            .map(|_| {
                x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let e = effective_sample_size(&ar).unwrap();
        let expect = 1e5 / 19.0;
        assert!((e.value / expect - 1.0).abs() < 0.25, "{} vs {expect}", e.value);

        let c = effective_sample_size(&[2.0; 50]).unwrap();
        assert!(c.constant && c.value == 1.0);
        assert!(effective_sample_size(&[1.0; 5]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn unit_jacobian(t0 in -1.0f64..1.0, t1 in -1.0f64..1.0, p0 in -1.0f64..1.0, p1 in -1.0f64..1.0) {
            let mass = MassMatrix::new(DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.3, 0.8])).unwrap();
            let map = |z: &[f64; 4]| -> [f64; 4] {
                let r = leapfrog(
                    &Vector::from_vec(vec![z[0], z[1]]),
                    &Vector::from_vec(vec![z[2], z[3]]),
                    &correlated(), &mass, 0.1, 10,
                );
                [r.theta[0], r.theta[1], r.p[0], r.p[1]]
            };
            let z = [t0, t1, p0, p1];
            let h = 1e-5;
            let mut jac = DMatrix::<f64>::zeros(4, 4);
            for c in 0..4 {
                let mut up = z;
                let mut dn = z;
                up[c] += h;
                dn[c] -= h;
                let (fu, fd) = (map(&up), map(&dn));
                for r in 0..4 {
                    jac[(r, c)] = (fu[r] - fd[r]) / (2.0 * h);
                }
            }
            prop_assert!((jac.determinant() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn mass_from_any_rho_is_spd(e in prop::collection::vec(-1.0f64..1.0, 18), s in 0.1f64..100.0) {
            let a = CMatrix::from_fn(3, 3, |r, c| crate::numkernel::c64(e[r * 3 + c], e[9 + r * 3 + c]));
            let pos = &a * a.adjoint() + CMatrix::identity(3, 3) * real(1e-12);
            let tr = crate::numkernel::trace(&pos).re;
            let rho = DensityMatrix::from_matrix(pos * real(1.0 / tr)).unwrap();
            prop_assert!(mass_from_rho(&rho, s, 1e-8).is_ok());
        }

        #[test]
        fn gradient_matches_finite_differences(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            prop_assert!(gradient_check(&correlated(), &Vector::from_vec(vec![a, b]), 1e-5) < 1e-5);
        }
    }
}
