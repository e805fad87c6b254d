//! Gaussian and circular unitary ensembles.
//!
//! GUE scaling: diagonal entries `N(0, 1/N)`, off-diagonal real and imaginary
//! parts `N(0, 1/(2N))`, so that `E[(1/N) tr M²] = 1`. With that scaling the
//! walk `U ← U exp(i √δτ M)` has `δτ` as its only time scale.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::numkernel::{c64, expm_skew_hermitian, unitarity_error, CMatrix, Hermitian};
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Unitarity drift that triggers a polar re-unitarization.
pub const UNITARITY_TOL: f64 = 1e-8;
/// Steps between unconditional re-unitarizations.
pub const REUNITARIZE_EVERY: u64 = 100;

#[derive(Debug, Clone)]
pub struct GueSample {
    pub matrix: Hermitian,
}

pub fn sample_gue<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<GueSample> {
    if n == 0 {
        return Err(Error::Validation("GUE dimension must be at least 1".into()));
    }
    let diag_sd = (1.0 / n as f64).sqrt();
    let off_sd = (0.5 / n as f64).sqrt();
    let mut m = CMatrix::zeros(n, n);
    for j in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        m[(j, j)] = c64(diag_sd * d, 0.0);
        for k in (j + 1)..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = c64(off_sd * re, off_sd * im);
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
        }
    }
    Ok(GueSample {
        matrix: Hermitian::new(m)?,
    })
}

/// State of the incremental CUE walk `U(τ + δτ) = U(τ) exp(i √δτ M(τ))`.
#[derive(Debug, Clone)]
pub struct UnitaryWalkState {
    pub u: CMatrix,
    pub tau: f64,
    pub dtau: f64,
    steps: u64,
}

impl UnitaryWalkState {
    pub fn new(dim: usize, dtau: f64) -> Result<Self> {
        if !(dtau >= 0.0) || !dtau.is_finite() {
            return Err(Error::Validation("walk step must be non-negative".into()));
        }
        Ok(Self {
            u: CMatrix::identity(dim, dim),
            tau: 0.0,
            dtau,
            steps: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }
}

/// Nearest unitary in Frobenius norm (`W V†` from `A = W Σ V†`).
pub fn polar_unitary(a: &CMatrix) -> Result<CMatrix> {
    let svd = a.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(w), Some(vt)) => Ok(w * vt),
        _ => Err(Error::Validation("SVD failed during re-unitarization".into())),
    }
}

/// Draws one walk increment `V = exp(i √δτ M)` with fresh GUE `M`.
pub fn cue_increment<R: Rng + ?Sized>(dim: usize, dtau: f64, rng: &mut R) -> Result<CMatrix> {
    if dtau == 0.0 {
        return Ok(CMatrix::identity(dim, dim));
    }
    let m = sample_gue(dim, rng)?;
    expm_skew_hermitian(&m.matrix, -dtau.sqrt())
}

/// Advances the walk by one step, returning the new state and the increment
/// that was applied.
pub fn cue_step_with_increment<R: Rng + ?Sized>(
    state: &UnitaryWalkState,
    rng: &mut R,
) -> Result<(UnitaryWalkState, CMatrix)> {
    let n = state.dim();
    if state.dtau == 0.0 {
        return Ok((state.clone(), CMatrix::identity(n, n)));
    }
    let v = cue_increment(n, state.dtau, rng)?;
    let mut u = &state.u * &v;
    let steps = state.steps + 1;
    if steps.is_multiple_of(REUNITARIZE_EVERY) || unitarity_error(&u) > UNITARITY_TOL {
        u = polar_unitary(&u)?;
    }
    Ok((
        UnitaryWalkState {
            u,
            tau: state.tau + state.dtau,
            dtau: state.dtau,
            steps,
        },
        v,
    ))
}

pub fn cue_step<R: Rng + ?Sized>(state: &UnitaryWalkState, rng: &mut R) -> Result<UnitaryWalkState> {
    cue_step_with_increment(state, rng).map(|(s, _)| s)
}

/// Eigenphases of a unitary matrix in `(−π, π]`, ascending.
pub fn eigenphases(u: &CMatrix) -> Result<Vec<f64>> {
    crate::numkernel::ensure_square(u)?;
    let err = unitarity_error(u);
    if !(err < UNITARITY_TOL) {
        return Err(Error::Validation(format!(
            "eigenphases need a unitary matrix (‖U†U − I‖ = {err:e})"
        )));
    }
    let n = u.nrows();
    let schur = nalgebra::linalg::Schur::try_new(u.clone(), 1e-15, 100_000)
        .ok_or_else(|| Error::Validation("Schur decomposition did not converge".into()))?;
    let (_, t) = schur.unpack();
    let mut phases: Vec<f64> = (0..n)
        .map(|k| {
            let z = t[(k, k)];
            let a = z.im.atan2(z.re);
            if a <= -PI {
                PI
            } else {
                a
            }
        })
        .collect();
    phases.sort_by(f64::total_cmp);
    Ok(phases)
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn sample_cue_direct<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::Validation("CUE dimension must be at least 1".into()));
    }
    let sd = 0.5f64.sqrt();
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(sd * re, sd * im)
    });
    let qr = z.qr();
    let (q, r) = qr.unpack();
    let phases = DVector::from_fn(n, |k, _| {
        let d = r[(k, k)];
        if d.norm() > 0.0 {
            d / c64(d.norm(), 0.0)
        } else {
            c64(1.0, 0.0)
        }
    });
    Ok(q * CMatrix::from_diagonal(&phases))
}

/// Minimum number of phase sets accepted by [`spacing_statistics`].
pub const MIN_SPACING_SETS: usize = 1000;

/// Histogram of unfolded nearest-neighbour eigenphase spacings.
#[derive(Debug, Clone)]
pub struct SpacingHistogram {
    pub bin_edges: Vec<f64>,
    /// Probability density per bin, normalized over all spacings (including
    /// those beyond the histogram range).
    pub density: Vec<f64>,
    pub mean_spacing: f64,
    /// All unfolded spacings, in input order.
    pub spacings: Vec<f64>,
}

impl SpacingHistogram {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn fraction_below(&self, s: f64) -> f64 {
        self.spacings.iter().filter(|&&x| x < s).count() as f64 / self.spacings.len() as f64
    }

    /// Largest absolute density difference between two histograms on the
    /// same bins.
    pub fn sup_distance(&self, other: &SpacingHistogram) -> f64 {
        self.density
            .iter()
            .zip(&other.density)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Upper end of the spacing histogram, in unfolded units.
pub const SPACING_RANGE: f64 = 4.0;

/// Unfolded spacings (gaps times `N/2π`, including the wrap-around gap) of
/// each phase set, histogrammed on `[0, 4]`.
pub fn spacing_statistics(phase_sets: &[Vec<f64>], bins: usize) -> Result<SpacingHistogram> {
    if phase_sets.len() < MIN_SPACING_SETS {
        return Err(Error::Validation(format!(
            "spacing statistics need at least {MIN_SPACING_SETS} phase sets, got {}",
            phase_sets.len()
        )));
    }
    if bins == 0 {
        return Err(Error::Validation("histogram needs at least one bin".into()));
    }
    let mut spacings = Vec::new();
    for set in phase_sets {
        let n = set.len();
        if n < 2 {
            return Err(Error::Validation("each phase set needs at least two phases".into()));
        }
        let mut sorted = set.clone();
        sorted.sort_by(f64::total_cmp);
        let unfold = n as f64 / (2.0 * PI);
        for w in sorted.windows(2) {
            spacings.push((w[1] - w[0]) * unfold);
        }
        spacings.push((sorted[0] + 2.0 * PI - sorted[n - 1]) * unfold);
    }
    let width = SPACING_RANGE / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in &spacings {
        if (0.0..SPACING_RANGE).contains(&s) {
            counts[((s / width) as usize).min(bins - 1)] += 1;
        }
    }
    let total = spacings.len() as f64;
    Ok(SpacingHistogram {
        bin_edges: (0..=bins).map(|k| k as f64 * width).collect(),
        density: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        mean_spacing: spacings.iter().sum::<f64>() / total,
        spacings,
    })
}

/// Phase sets from independent Haar samples, one RNG stream per sample.
pub fn direct_phase_ensemble(n: usize, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            eigenphases(&sample_cue_direct(n, &mut rng)?)
        })
        .collect()
}

/// Settings for harvesting phase sets from long-run CUE walks.
#[derive(Debug, Clone, Copy)]
pub struct WalkSchedule {
    pub dtau: f64,
    /// Steps discarded before the first harvest.
    pub burn_in: usize,
    /// Steps between harvests.
    pub thin: usize,
    /// Independent walks; samples are split evenly among them.
    pub walks: usize,
}

impl Default for WalkSchedule {
    fn default() -> Self {
        Self {
            dtau: 0.05,
            burn_in: 200,
            thin: 40,
            walks: 64,
        }
    }
}

/// Phase sets harvested from independent walks started at the identity.
pub fn walk_phase_ensemble(n: usize, samples: usize, schedule: WalkSchedule, seed: u64) -> Result<Vec<Vec<f64>>> {
    if schedule.walks == 0 || schedule.thin == 0 {
        return Err(Error::Validation("walk schedule needs walks ≥ 1 and thin ≥ 1".into()));
    }
    let per_walk = samples.div_ceil(schedule.walks);
    let chunks: Result<Vec<Vec<Vec<f64>>>> = (0..schedule.walks)
        .into_par_iter()
        .map(|w| {
            let mut rng = stream_rng(seed, w as u64);
            let mut state = UnitaryWalkState::new(n, schedule.dtau)?;
            for _ in 0..schedule.burn_in {
                state = cue_step(&state, &mut rng)?;
            }
            let mut out = Vec::with_capacity(per_walk);
            for _ in 0..per_walk {
                for _ in 0..schedule.thin {
                    state = cue_step(&state, &mut rng)?;
                }
                out.push(eigenphases(&state.u)?);
            }
            Ok(out)
        })
        .collect();
    let mut all: Vec<Vec<f64>> = chunks?.into_iter().flatten().collect();
    all.truncate(samples);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{c64, trace};
    use crate::rng::stream_rng;

    #[test]
    fn gue_is_hermitian_and_scaled() {
        let mut rng = stream_rng(1, 0);
        let n = 8;
        let mut acc = 0.0;
        let draws = 1000;
        for _ in 0..draws {
            let g = sample_gue(n, &mut rng).unwrap();
            let m = g.matrix.matrix();
            assert!((m - m.adjoint()).norm() < 1e-15);
            acc += trace(&(m * m)).re / n as f64;
        }
        let mean = acc / draws as f64;
        assert!((mean - 1.0).abs() < 0.05, "E[(1/N) tr M²] = {mean}");
    }

    #[test]
    fn gue_entries_centered() {
        let mut rng = stream_rng(2, 0);
        let n = 3;
        let draws = 10_000;
        let mut sum = CMatrix::zeros(n, n);
        for _ in 0..draws {
            sum += sample_gue(n, &mut rng).unwrap().matrix.matrix();
        }
        let mean = sum / c64(draws as f64, 0.0);
        // diag sd = 1/√3, off-diagonal component sd = 1/√6
        let se_diag = (1.0f64 / 3.0).sqrt() / (draws as f64).sqrt();
        let se_off = (1.0f64 / 6.0).sqrt() / (draws as f64).sqrt();
        for j in 0..n {
            for k in 0..n {
                let se = if j == k { se_diag } else { se_off };
                assert!(mean[(j, k)].re.abs() < 4.0 * se);
                assert!(mean[(j, k)].im.abs() < 4.0 * se);
            }
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let mut rng = stream_rng(3, 0);
        let s = UnitaryWalkState::new(3, 0.0).unwrap();
        let next = cue_step(&s, &mut rng).unwrap();
        assert_eq!(next.u, s.u);
        assert_eq!(next.tau, 0.0);
    }

    #[test]
    fn walk_stays_unitary() {
        let mut rng = stream_rng(4, 0);
        let mut s = UnitaryWalkState::new(4, 0.01).unwrap();
        for _ in 0..10_000 {
            s = cue_step(&s, &mut rng).unwrap();
        }
        assert!(unitarity_error(&s.u) < 1e-8);
        assert!((s.tau - 100.0).abs() < 1e-9);
    }

    #[test]
    fn phase_variance_grows_linearly() {
        // Mean squared eigenphase of a walk from the identity is ≈ τ while
        // phases stay well inside (−π, π].
        let n = 4;
        let walks = 200;
        let dtau = 0.005;
        let checkpoints = [20usize, 40, 60, 80];
        let mut msq = vec![0.0; checkpoints.len()];
        for w in 0..walks {
            let mut rng = stream_rng(5, w as u64);
            let mut s = UnitaryWalkState::new(n, dtau).unwrap();
            let mut step = 0;
            for (c, &target) in checkpoints.iter().enumerate() {
                while step < target {
                    s = cue_step(&s, &mut rng).unwrap();
                    step += 1;
                }
                let ph = eigenphases(&s.u).unwrap();
                msq[c] += ph.iter().map(|x| x * x).sum::<f64>() / n as f64;
            }
        }
        let taus: Vec<f64> = checkpoints.iter().map(|&k| k as f64 * dtau).collect();
        let ys: Vec<f64> = msq.iter().map(|m| m / walks as f64).collect();
        // least-squares slope through the origin
        let slope = taus.iter().zip(&ys).map(|(t, y)| t * y).sum::<f64>() / taus.iter().map(|t| t * t).sum::<f64>();
        assert!((slope - 1.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn eigenphase_examples() {
        let id = CMatrix::identity(3, 3);
        assert!(eigenphases(&id).unwrap().iter().all(|p| p.abs() < 1e-12));

        let d = CMatrix::from_diagonal(&DVector::from_vec(vec![c64(0.0, 1.0), c64(0.0, -1.0)]));
        let ph = eigenphases(&d).unwrap();
        assert!((ph[0] + PI / 2.0).abs() < 1e-12 && (ph[1] - PI / 2.0).abs() < 1e-12);

        let mut rng = stream_rng(6, 0);
        let u = sample_cue_direct(5, &mut rng).unwrap();
        let alpha: f64 = 0.7;
        let a = eigenphases(&u).unwrap();
        let b = eigenphases(&(&u * c64(alpha.cos(), alpha.sin()))).unwrap();
        let wrap = |x: f64| (x + PI).rem_euclid(2.0 * PI) - PI;
        let mut shifted: Vec<f64> = a.iter().map(|&x| wrap(x + alpha)).collect();
        shifted.sort_by(f64::total_cmp);
        for (x, y) in shifted.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }

        assert!(eigenphases(&(id * c64(2.0, 0.0))).is_err());
    }

    #[test]
    fn direct_cue_is_unitary() {
        let mut rng = stream_rng(7, 0);
        for n in 1..8 {
            let u = sample_cue_direct(n, &mut rng).unwrap();
            assert!(unitarity_error(&u) < 1e-12);
            assert!((u.determinant().norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn spacing_needs_enough_samples() {
        let sets = vec![vec![0.0, 1.0]; 10];
        assert!(spacing_statistics(&sets, 10).is_err());
    }

    #[test]
    fn spacing_mean_is_unit() {
        let sets = direct_phase_ensemble(6, 2000, 8).unwrap();
        let h = spacing_statistics(&sets, 40).unwrap();
        assert!((h.mean_spacing - 1.0).abs() < 1e-2);
    }

    #[test]
    fn direct_phases_uniform_chi_square() {
        let sets = direct_phase_ensemble(10, 10_000, 9).unwrap();
        let bins = 16;
        let mut counts = vec![0usize; bins];
        let mut total = 0usize;
        for set in &sets {
            for &p in set {
                let k = (((p + PI) / (2.0 * PI)) * bins as f64) as usize;
                counts[k.min(bins - 1)] += 1;
                total += 1;
            }
        }
        let expected = total as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // χ²(15) 0.99 quantile
        assert!(chi2 < 30.58, "chi2 = {chi2}");
    }

    #[test]
    fn small_spacings_are_suppressed() {
        let sets = direct_phase_ensemble(8, 100_000, 10).unwrap();
        let h = spacing_statistics(&sets, 40).unwrap();
        assert!(h.fraction_below(0.1) < 0.002, "{}", h.fraction_below(0.1));
    }
}
