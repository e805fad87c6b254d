//! Stochastic Schrödinger equations and their ensemble averages.
//!
//! All integrators are Euler-Maruyama and take their noise as an explicit
//! [`WienerPath`] (or [`OUPath`]), so each one is a deterministic function of
//! its inputs. Ensemble helpers run paths in parallel with one RNG stream per
//! path and reduce in path order.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::density::{project_to_density, DensityMatrix};
use crate::lindblad::{rk4_step, DensityTrajectory, LindbladModel};
use crate::numkernel::{c64, commutator, hermitian_eig, real, trace, CMatrix, CVector, Hermitian, C64};
use crate::rng::{stream_rng, StreamRng};
use crate::{Error, Result};

/// Norm below which a state is treated as zero and replaced by `e_0`.
pub const DEGENERATE_NORM: f64 = 1e-14;
/// Negative eigenvalue of a stochastic-master-equation state that gets the
/// step flagged.
pub const POSITIVITY_FLAG: f64 = -1e-6;
/// Upper bound on stored history entries (`steps × dim²`) for
/// [`nonmarkovian_evolve`].
pub const MAX_HISTORY_ENTRIES: usize = 20_000_000;

pub type OperatorFn = Box<dyn Fn(f64) -> CMatrix + Send + Sync>;
pub type HamiltonianFn = Box<dyn Fn(f64) -> Hermitian + Send + Sync>;

/// `H(t)` and noise operators `R_j(t)`.
pub struct SseModel {
    dim: usize,
    hamiltonian: HamiltonianFn,
    noise_ops: Vec<OperatorFn>,
}

impl std::fmt::Debug for SseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SseModel")
            .field("dim", &self.dim)
            .field("channels", &self.noise_ops.len())
            .finish()
    }
}

impl SseModel {
    pub fn new(dim: usize, hamiltonian: HamiltonianFn, noise_ops: Vec<OperatorFn>) -> Result<Self> {
        let model = Self {
            dim,
            hamiltonian,
            noise_ops,
        };
        model.check_shapes(0.0)?;
        Ok(model)
    }

    /// Time-independent model.
    pub fn constant(hamiltonian: Hermitian, noise_ops: Vec<CMatrix>) -> Result<Self> {
        let dim = hamiltonian.dim();
        let ops = noise_ops
            .into_iter()
            .map(|r| Box::new(move |_t: f64| r.clone()) as OperatorFn)
            .collect();
        Self::new(dim, Box::new(move |_t| hamiltonian.clone()), ops)
    }

    fn check_shapes(&self, t: f64) -> Result<()> {
        let h = (self.hamiltonian)(t);
        if h.dim() != self.dim {
            return Err(Error::shape(self.dim, h.dim()));
        }
        for (j, r) in self.noise_ops.iter().enumerate() {
            let r = r(t);
            if r.nrows() != self.dim || r.ncols() != self.dim {
                return Err(Error::shape(
                    format!("{0}x{0} noise operator", self.dim),
                    format!("R_{j} is {}x{}", r.nrows(), r.ncols()),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> usize {
        self.noise_ops.len()
    }

    pub fn hamiltonian_at(&self, t: f64) -> Hermitian {
        (self.hamiltonian)(t)
    }

    pub fn noise_at(&self, t: f64) -> Vec<CMatrix> {
        self.noise_ops.iter().map(|r| r(t)).collect()
    }

    /// Lindblad model with `H(t)` and jumps `R_j(t)` frozen at `t`.
    pub fn lindblad_at(&self, t: f64) -> Result<LindbladModel> {
        LindbladModel::new(self.hamiltonian_at(t), self.noise_at(t))
    }
}

/// `K(t) = −iH(t) − ½ Σ_j R_j(t)† R_j(t)`.
pub fn drift_operator(model: &SseModel, t: f64) -> CMatrix {
    let mut k = model.hamiltonian_at(t).matrix() * c64(0.0, -1.0);
    for r in model.noise_at(t) {
        k -= r.adjoint() * &r * real(0.5);
    }
    k
}

/// Brownian increments on a uniform grid, `dW_j ~ N(0, dt)`, stored step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    pub dt: f64,
    pub steps: usize,
    pub channels: usize,
    increments: Vec<f64>,
}

impl WienerPath {
    pub fn sample<R: Rng + ?Sized>(channels: usize, steps: usize, dt: f64, rng: &mut R) -> Result<Self> {
        check_dt(dt)?;
        let sd = dt.sqrt();
        let increments = (0..channels * steps)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            dt,
            steps,
            channels,
            increments,
        })
    }

    pub fn zeros(channels: usize, steps: usize, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        Ok(Self {
            dt,
            steps,
            channels,
            increments: vec![0.0; channels * steps],
        })
    }

    pub fn from_increments(channels: usize, dt: f64, increments: Vec<f64>) -> Result<Self> {
        check_dt(dt)?;
        if channels == 0 || !increments.len().is_multiple_of(channels) {
            return Err(Error::Validation(
                "increment count is not a multiple of the channel count".into(),
            ));
        }
        Ok(Self {
            dt,
            steps: increments.len() / channels,
            channels,
            increments,
        })
    }

    /// Increment of channel `j` over step `n`.
    pub fn increment(&self, n: usize, j: usize) -> f64 {
        self.increments[n * self.channels + j]
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| n as f64 * self.dt).collect()
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Validation("time step must be positive".into()));
    }
    Ok(())
}

/// Stationary Ornstein-Uhlenbeck path `dX = −γX dt + dW` together with the
/// Wiener increments that drive it.
#[derive(Debug, Clone)]
pub struct OUPath {
    pub gamma: f64,
    pub values: Vec<f64>,
    pub driving: WienerPath,
}

/// Exact discretization of the stationary OU process on `steps` steps of
/// size `dt`, started from `N(0, 1/(2γ))`.
///
/// Each step draws the Wiener increment `ΔW` and the OU innovation
/// `∫ e^{−γ(t−s)} dW(s)` jointly, so [`OUPath::driving`] is the same noise
/// that moves `X`.
pub fn sample_ou_path<R: Rng + ?Sized>(gamma: f64, steps: usize, dt: f64, rng: &mut R) -> Result<OUPath> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Validation("OU rate γ must be positive".into()));
    }
    check_dt(dt)?;
    let decay = (-gamma * dt).exp();
    let var_innov = -(-2.0 * gamma * dt).exp_m1() / (2.0 * gamma);
    let cov = -(-gamma * dt).exp_m1() / gamma;
    let beta = cov / dt;
    let resid_sd = (var_innov - cov * cov / dt).max(0.0).sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut increments = Vec::with_capacity(steps);
    let z: f64 = rng.sample(StandardNormal);
    values.push(z / (2.0 * gamma).sqrt());
    for n in 0..steps {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let dw = dt.sqrt() * z1;
        let innov = beta * dw + resid_sd * z2;
        values.push(decay * values[n] + innov);
        increments.push(dw);
    }
    Ok(OUPath {
        gamma,
        values,
        driving: WienerPath::from_increments(1, dt, increments)?,
    })
}

/// Pure-state trajectory on a uniform grid.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CVector>,
    pub norms: Vec<f64>,
    /// Steps whose state norm fell below [`DEGENERATE_NORM`].
    pub degenerate_steps: Vec<usize>,
}

impl StateTrajectory {
    fn start(psi0: &CVector, capacity: usize) -> Self {
        let mut t = Self {
            times: Vec::with_capacity(capacity),
            states: Vec::with_capacity(capacity),
            norms: Vec::with_capacity(capacity),
            degenerate_steps: vec![],
        };
        t.times.push(0.0);
        t.norms.push(psi0.norm());
        t.states.push(psi0.clone());
        t
    }

    pub fn last(&self) -> &CVector {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// `|ψ⟩⟨ψ|` (unnormalized) at step `n`.
    pub fn projector(&self, n: usize) -> CMatrix {
        let psi = &self.states[n];
        psi * psi.adjoint()
    }
}

fn check_state(psi: &CVector, dim: usize) -> Result<()> {
    if psi.len() != dim {
        return Err(Error::shape(dim, psi.len()));
    }
    if !psi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Validation("initial state has non-finite entries".into()));
    }
    Ok(())
}

fn check_path(model: &SseModel, path: &WienerPath) -> Result<()> {
    if path.channels != model.channels() {
        return Err(Error::shape(
            format!("{} noise channels", model.channels()),
            format!("{} path channels", path.channels),
        ));
    }
    Ok(())
}

fn finite_or_fail(psi: &CVector, step: usize) -> Result<()> {
    if psi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Integration {
            step,
            reason: "state overflowed or became NaN".into(),
        })
    }
}

/// `ψ / ‖ψ‖`, or `e_0` when the norm is below [`DEGENERATE_NORM`].
pub fn normalized(psi: &CVector) -> (CVector, bool) {
    let n = psi.norm();
    if n < DEGENERATE_NORM {
        let mut e0 = CVector::zeros(psi.len());
        if !psi.is_empty() {
            e0[0] = real(1.0);
        }
        (e0, true)
    } else {
        (psi / real(n), false)
    }
}

/// Euler-Maruyama for `dψ = Kψ dt + Σ_j R_j ψ dW_j`.
pub fn integrate_lsse(model: &SseModel, psi0: &CVector, path: &WienerPath) -> Result<StateTrajectory> {
    check_state(psi0, model.dim())?;
    check_path(model, path)?;
    if !(psi0.norm() > 0.0) {
        return Err(Error::Validation("initial state must be nonzero".into()));
    }
    let dt = path.dt;
    let mut traj = StateTrajectory::start(psi0, path.steps + 1);
    let mut psi = psi0.clone();
    for n in 0..path.steps {
        let t = n as f64 * dt;
        let k = drift_operator(model, t);
        let mut next = &psi + &k * &psi * real(dt);
        for (j, r) in model.noise_at(t).iter().enumerate() {
            next += r * &psi * real(path.increment(n, j));
        }
        finite_or_fail(&next, n + 1)?;
        psi = next;
        let norm = psi.norm();
        if norm < DEGENERATE_NORM {
            traj.degenerate_steps.push(n + 1);
        }
        traj.times.push((n + 1) as f64 * dt);
        traj.norms.push(norm);
        traj.states.push(psi.clone());
    }
    Ok(traj)
}

/// Squared norms predicted along an LSSE trajectory by the exponential
/// martingale `‖ψ0‖² exp{Σ_j [∫ m_j dW_j − ½ ∫ m_j² ds]}` with
/// `m_j = 2 Re⟨ψ̂|R_j ψ̂⟩`, using Itô sums on the path's grid.
pub fn predicted_squared_norms(model: &SseModel, traj: &StateTrajectory, path: &WienerPath) -> Result<Vec<f64>> {
    check_path(model, path)?;
    let dt = path.dt;
    let mut exponent = 0.0;
    let n0 = traj.norms[0] * traj.norms[0];
    let mut out = Vec::with_capacity(traj.states.len());
    out.push(n0);
    for n in 0..path.steps.min(traj.states.len() - 1) {
        let (hat, _) = normalized(&traj.states[n]);
        for (j, r) in model.noise_at(n as f64 * dt).iter().enumerate() {
            let m = 2.0 * hat.dotc(&(r * &hat)).re;
            exponent += m * path.increment(n, j) - 0.5 * m * m * dt;
        }
        out.push(n0 * exponent.exp());
    }
    Ok(out)
}

/// Euler-Maruyama for the normalized (nonlinear) SSE driven by the
/// reweighted Wiener process `Ŵ`, renormalizing after every step:
///
/// `dψ̂ = Σ_j (R_j − Re η_j) ψ̂ dŴ_j + K ψ̂ dt + Σ_j (Re η_j R_j − ½ (Re η_j)²) ψ̂ dt`
/// with `η_j = ⟨ψ̂|R_j ψ̂⟩`.
pub fn integrate_nonlinear_sse(model: &SseModel, psi0: &CVector, path: &WienerPath) -> Result<StateTrajectory> {
    check_state(psi0, model.dim())?;
    check_path(model, path)?;
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(
            "nonlinear SSE needs a unit-norm initial state".into(),
        ));
    }
    let dt = path.dt;
    let mut traj = StateTrajectory::start(psi0, path.steps + 1);
    let mut psi = psi0.clone();
    for n in 0..path.steps {
        let t = n as f64 * dt;
        let k = drift_operator(model, t);
        let mut next = &psi + &k * &psi * real(dt);
        for (j, r) in model.noise_at(t).iter().enumerate() {
            let rpsi = r * &psi;
            let eta = psi.dotc(&rpsi).re;
            next += (&rpsi * real(eta) - &psi * real(0.5 * eta * eta)) * real(dt);
            next += (&rpsi - &psi * real(eta)) * real(path.increment(n, j));
        }
        finite_or_fail(&next, n + 1)?;
        let (hat, degenerate) = normalized(&next);
        if degenerate {
            traj.degenerate_steps.push(n + 1);
        }
        psi = hat;
        traj.times.push((n + 1) as f64 * dt);
        traj.norms.push(psi.norm());
        traj.states.push(psi.clone());
    }
    Ok(traj)
}

/// Density-matrix trajectory of the stochastic master equation.
#[derive(Debug, Clone)]
pub struct SmeTrajectory {
    pub times: Vec<f64>,
    /// Projected onto valid density matrices.
    pub states: Vec<DensityMatrix>,
    /// Steps where the integration state had an eigenvalue below
    /// [`POSITIVITY_FLAG`] before projection.
    pub flagged_steps: Vec<usize>,
}

/// `v_j = tr((R_j + R_j†) ϱ)`.
pub fn measurement_mean(r: &CMatrix, rho: &CMatrix) -> f64 {
    trace(&((r + r.adjoint()) * rho)).re
}

/// Euler-Maruyama for
/// `dϱ = 𝓛[ϱ] dt + Σ_j (R_j ϱ + ϱ R_j† − v_j ϱ) dŴ_j`.
///
/// The recursion runs on the Hermitized, trace-renormalized Euler state;
/// every stored state is its projection onto density matrices.
pub fn integrate_stochastic_master(model: &SseModel, rho0: &DensityMatrix, path: &WienerPath) -> Result<SmeTrajectory> {
    if rho0.dim() != model.dim() {
        return Err(Error::shape(model.dim(), rho0.dim()));
    }
    check_path(model, path)?;
    let dt = path.dt;
    let mut times = Vec::with_capacity(path.steps + 1);
    let mut states = Vec::with_capacity(path.steps + 1);
    let mut flagged_steps = vec![];
    times.push(0.0);
    states.push(rho0.clone());
    let mut rho = rho0.matrix().clone();
    for n in 0..path.steps {
        let t = n as f64 * dt;
        let lindblad = model.lindblad_at(t)?;
        let mut next = &rho + lindblad.apply(&rho) * real(dt);
        for (j, r) in lindblad.jumps().iter().enumerate() {
            let v = measurement_mean(r, &rho);
            let kick = r * &rho + &rho * r.adjoint() - &rho * real(v);
            next += kick * real(path.increment(n, j));
        }
        if !next.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Integration {
                step: n + 1,
                reason: "state overflowed or became NaN".into(),
            });
        }
        let tr = trace(&next).re;
        let herm = Hermitian::hermitize(&(next * real(1.0 / tr)));
        if hermitian_eig(&herm)?.min() < POSITIVITY_FLAG {
            flagged_steps.push(n + 1);
        }
        states.push(project_to_density(&herm)?);
        rho = herm.into_matrix();
        times.push((n + 1) as f64 * dt);
    }
    Ok(SmeTrajectory {
        times,
        states,
        flagged_steps,
    })
}

/// Euler-Maruyama for the OU-driven SSE
/// `dψ = [−i(H0 − γX(t)L) − ½L²] ψ dt − iLψ dW`.
///
/// `ou` supplies `X(t)` and `path` the increments `dW`; pass
/// `&ou.driving` for the coupled model where `W` is the noise driving `X`.
pub fn integrate_ou_sse(
    h0: &Hermitian,
    l: &Hermitian,
    gamma: f64,
    psi0: &CVector,
    ou: &OUPath,
    path: &WienerPath,
) -> Result<StateTrajectory> {
    let dim = h0.dim();
    if l.dim() != dim {
        return Err(Error::shape(dim, l.dim()));
    }
    check_state(psi0, dim)?;
    if path.channels != 1 {
        return Err(Error::shape("1 noise channel", path.channels));
    }
    if ou.values.len() < path.steps + 1 {
        return Err(Error::shape(
            format!("OU path with at least {} points", path.steps + 1),
            ou.values.len(),
        ));
    }
    let dt = path.dt;
    let lm = l.matrix();
    let base = h0.matrix() * c64(0.0, -1.0) - lm * lm * real(0.5);
    let noise = lm * c64(0.0, -1.0);
    let mut traj = StateTrajectory::start(psi0, path.steps + 1);
    let mut psi = psi0.clone();
    for n in 0..path.steps {
        let k = &base + lm * c64(0.0, gamma * ou.values[n]);
        let next = &psi + &k * &psi * real(dt) + &noise * &psi * real(path.increment(n, 0));
        finite_or_fail(&next, n + 1)?;
        psi = next;
        let norm = psi.norm();
        if norm < DEGENERATE_NORM {
            traj.degenerate_steps.push(n + 1);
        }
        traj.times.push((n + 1) as f64 * dt);
        traj.norms.push(norm);
        traj.states.push(psi.clone());
    }
    Ok(traj)
}

/// Column-major superoperator matrix of the linear map `f` on `d×d`
/// operators.
fn superoperator(d: usize, f: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let mut s = CMatrix::zeros(d * d, d * d);
    for col in 0..d * d {
        let mut e = CMatrix::zeros(d, d);
        e[(col % d, col / d)] = real(1.0);
        let img = f(&e);
        for (row, z) in img.iter().enumerate() {
            s[(row, col)] = *z;
        }
    }
    s
}

fn as_vec(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

fn as_mat(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Approximated non-Markovian master equation for the OU-driven SSE:
///
/// `dη/dt = −i[H0, η] − ½[L, [L, η]] + (γ/2) ∫₀ᵗ [L, e^{(𝓛_M − γ)(t−s)} [L, η(s)]] ds`
///
/// with `𝓛_M` the Lindblad generator with Hamiltonian `H0` and jump `L`.
/// The memory integral uses the trapezoidal rule over the full stored
/// history; `e^{𝓛_M Δ}` is applied with sub-stepped RK4. Time stepping is
/// Heun's predictor-corrector.
pub fn nonmarkovian_evolve(
    h0: &Hermitian,
    l: &Hermitian,
    gamma: f64,
    eta0: &DensityMatrix,
    t_final: f64,
    dt: f64,
) -> Result<DensityTrajectory> {
    let d = h0.dim();
    if l.dim() != d || eta0.dim() != d {
        return Err(Error::shape(d, format!("L {}, η0 {}", l.dim(), eta0.dim())));
    }
    check_dt(dt)?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Validation("OU rate γ must be positive".into()));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::Validation("final time must be non-negative".into()));
    }
    let steps = (t_final / dt).round() as usize;
    let dt = if steps > 0 { t_final / steps as f64 } else { dt };
    if (steps + 1).saturating_mul(d * d) > MAX_HISTORY_ENTRIES {
        return Err(Error::Config(format!(
            "memory history of {} steps × {} entries exceeds {MAX_HISTORY_ENTRIES}; use a coarser grid or shorter horizon",
            steps + 1,
            d * d
        )));
    }
    let mean_model = LindbladModel::new(h0.clone(), vec![l.matrix().clone()])?;
    let lm = l.matrix();

    // One-step propagator of the mean generator as a superoperator, built
    // from RK4 sub-steps small enough for the generator's scale.
    let gen_scale = h0.matrix().norm() + lm.norm_squared();
    let substeps = ((dt * gen_scale / 0.05).ceil() as usize).max(1);
    let h_sub = dt / substeps as f64;
    let propagator = superoperator(d, |e| {
        let mut x = e.clone();
        for _ in 0..substeps {
            x = rk4_step(&x, h_sub, |y| mean_model.apply(y));
        }
        x
    });

    let comm_l = |x: &CMatrix| lm * x - x * lm;
    // Propagated history: operands[k] = e^{𝓛_M (t_n − s_k)} [L, η(s_k)].
    let mut operands: Vec<CVector> = Vec::with_capacity(steps + 1);
    let decay = (-gamma * dt).exp();
    let memory = |ops: &[CVector]| -> CMatrix {
        let n = ops.len();
        let mut acc = CVector::zeros(d * d);
        if n < 2 {
            return CMatrix::zeros(d, d);
        }
        // weight for s_k at current time t_{n-1}: e^{−γ(n−1−k)dt} · trapezoid
        let mut w = 1.0;
        for k in (0..n).rev() {
            let trap = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            acc += &ops[k] * real(trap * w * dt);
            w *= decay;
        }
        as_mat(&acc, d)
    };
    let rhs =
        |eta: &CMatrix, integral: &CMatrix| -> CMatrix { mean_model.apply(eta) + comm_l(integral) * real(0.5 * gamma) };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(eta0.clone());
    let mut eta = eta0.matrix().clone();
    operands.push(as_vec(&comm_l(&eta)));
    for n in 0..steps {
        let f_now = rhs(&eta, &memory(&operands));
        let predictor = &eta + &f_now * real(dt);
        for op in operands.iter_mut() {
            *op = &propagator * &*op;
        }
        operands.push(as_vec(&comm_l(&predictor)));
        let f_pred = rhs(&predictor, &memory(&operands));
        let next = &eta + (f_now + f_pred) * real(0.5 * dt);
        let next = (&next + next.adjoint()) * real(0.5);
        if !next.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Integration {
                step: n + 1,
                reason: "state overflowed or became NaN".into(),
            });
        }
        *operands.last_mut().expect("just pushed") = as_vec(&comm_l(&next));
        eta = next;
        times.push((n + 1) as f64 * dt);
        states.push(project_to_density(&Hermitian::hermitize(&eta))?);
    }
    Ok(DensityTrajectory { times, states })
}

/// Averages per-path matrix sequences over `paths` independent RNG streams.
///
/// `sample` returns one matrix per recorded time; paths run in parallel and
/// are summed in path order, so the result does not depend on scheduling.
pub fn ensemble_mean<F>(paths: usize, seed: u64, sample: F) -> Result<Vec<CMatrix>>
where
    F: Fn(&mut StreamRng) -> Result<Vec<CMatrix>> + Sync,
{
    if paths == 0 {
        return Err(Error::Validation("ensemble needs at least one path".into()));
    }
    let per_path: Vec<Vec<CMatrix>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            sample(&mut rng)
        })
        .collect::<Result<_>>()?;
    let mut acc = per_path[0].clone();
    for path in &per_path[1..] {
        if path.len() != acc.len() {
            return Err(Error::Validation("paths recorded different numbers of states".into()));
        }
        for (a, m) in acc.iter_mut().zip(path) {
            *a += m;
        }
    }
    let scale = real(1.0 / paths as f64);
    Ok(acc.into_iter().map(|m| m * scale).collect())
}

/// Mean and standard error of a scalar per-path statistic, in path order.
pub fn ensemble_scalar<F>(paths: usize, seed: u64, sample: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&mut StreamRng) -> Result<Vec<f64>> + Sync,
{
    if paths < 2 {
        return Err(Error::Validation("scalar ensemble needs at least two paths".into()));
    }
    let per_path: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            sample(&mut rng)
        })
        .collect::<Result<_>>()?;
    let k = per_path[0].len();
    let data = DMatrix::from_fn(paths, k, |r, c| per_path[r][c]);
    let mut means = Vec::with_capacity(k);
    let mut ses = Vec::with_capacity(k);
    for c in 0..k {
        let col = data.column(c);
        let mean = col.mean();
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (paths as f64 - 1.0);
        means.push(mean);
        ses.push((var / paths as f64).sqrt());
    }
    Ok((means, ses))
}

/// Indices on a grid of `steps` steps of size `dt` closest to `times`.
pub fn grid_indices(times: &[f64], dt: f64) -> Vec<usize> {
    times.iter().map(|t| (t / dt).round() as usize).collect()
}

/// `|ψ⟩⟨ψ|` helper for arbitrary vectors.
pub fn outer(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

/// `[L, X]` exposed for the memory-kernel oracle in tests.
pub fn l_commutator(l: &Hermitian, x: &CMatrix) -> Result<CMatrix> {
    commutator(l.matrix(), x)
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<SseModel>();
    let _ = C64::new(0.0, 0.0);
}
