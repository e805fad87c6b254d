//! Density matrices and information-geometric quantities on them.

use nalgebra::DMatrix;

use crate::numkernel::{
    anticommutator, commutator, expm_skew_hermitian, hermitian_eig, real, trace, unitarity_error, CMatrix, CVector,
    Hermitian, Spectrum, C64,
};
use crate::{Error, Result};

/// Tolerance for the unit-trace and positivity checks on [`DensityMatrix`].
pub const DENSITY_TOL: f64 = 1e-12;

/// QFI pairs with `ρ_i + ρ_j` below this are skipped.
pub const QFI_PAIR_FLOOR: f64 = 1e-12;

/// Eigenvalue floor for `0·log 0 = 0` in relative entropy.
pub const ENTROPY_FLOOR: f64 = 1e-15;

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Hermitian);

impl DensityMatrix {
    /// Validates trace and spectrum of an already Hermitian matrix.
    pub fn new(h: Hermitian) -> Result<Self> {
        let tr = h.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::Validation(format!("density matrix trace {tr} != 1")));
        }
        let spec = hermitian_eig(&h)?;
        if spec.min() < -DENSITY_TOL {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {:e}",
                spec.min()
            )));
        }
        Ok(DensityMatrix(h))
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(Hermitian::new(m)?)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(Hermitian::identity(dim).scale(1.0 / dim as f64))
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let n2 = psi.norm_squared();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::Domain("pure state from zero or non-finite vector".into()));
        }
        Ok(DensityMatrix(Hermitian::hermitize(
            &(psi * psi.adjoint() * real(1.0 / n2)),
        )))
    }

    pub fn from_diagonal(p: &[f64]) -> Result<Self> {
        Self::new(Hermitian::from_diagonal(p))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn hermitian(&self) -> &Hermitian {
        &self.0
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    /// `tr(ρ A)`.
    pub fn expectation(&self, a: &CMatrix) -> C64 {
        trace(&(self.matrix() * a))
    }

    /// `U ρ U†`; the caller promises `U` is unitary.
    pub fn evolve_unitary(&self, u: &CMatrix) -> Result<Self> {
        Ok(DensityMatrix(self.0.conjugate_by(u)?))
    }
}

/// Clamps negative eigenvalues to zero and renormalizes to unit trace.
pub fn project_to_density(a: &Hermitian) -> Result<DensityMatrix> {
    let spec = hermitian_eig(a)?;
    let clamped: Vec<f64> = spec.values.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Domain(
            "cannot project a matrix with no positive eigenvalues".into(),
        ));
    }
    let projected = Spectrum {
        values: clamped.iter().map(|x| x / total).collect(),
        vectors: spec.vectors,
    };
    Ok(DensityMatrix(Hermitian::hermitize(&projected.reconstruct())))
}

/// `ρ = Σ λ_i |ψ_i⟩⟨ψ_i|` with `λ` ascending.
#[derive(Debug, Clone)]
pub struct EigenEnsemble {
    pub probabilities: Vec<f64>,
    pub states: CMatrix,
}

impl EigenEnsemble {
    pub fn reconstruct(&self) -> CMatrix {
        Spectrum {
            values: self.probabilities.clone(),
            vectors: self.states.clone(),
        }
        .reconstruct()
    }
}

/// Eigen-ensemble form of a density matrix. Round-off negatives are zeroed
/// and the weights renormalized so they form a probability vector.
pub fn eigen_ensemble(rho: &DensityMatrix) -> Result<EigenEnsemble> {
    let spec = hermitian_eig(rho.hermitian())?;
    let clamped: Vec<f64> = spec.values.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    Ok(EigenEnsemble {
        probabilities: clamped.into_iter().map(|x| x / total).collect(),
        states: spec.vectors,
    })
}

/// Quantum Fisher information of the one-parameter family generated by `h`
/// at `ρ`, in the eigen-ensemble form
/// `Σ_i 4ρ_i Var_i(H) − Σ_{i≠j} 8ρ_iρ_j/(ρ_i+ρ_j) |⟨ψ_i|H|ψ_j⟩|²`.
pub fn qfim(rho: &DensityMatrix, h: &Hermitian) -> Result<f64> {
    if rho.dim() != h.dim() {
        return Err(Error::shape(rho.dim(), h.dim()));
    }
    let ens = eigen_ensemble(rho)?;
    let v = &ens.states;
    // Generator and its square in the eigenbasis of ρ.
    let hb = v.adjoint() * h.matrix() * v;
    let h2b = &hb * &hb;
    let p = &ens.probabilities;
    let n = p.len();
    let mut variance_part = 0.0;
    for i in 0..n {
        let mean = hb[(i, i)].re;
        variance_part += 4.0 * p[i] * (h2b[(i, i)].re - mean * mean);
    }
    let mut coherence_part = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let s = p[i] + p[j];
            if s < QFI_PAIR_FLOOR {
                continue;
            }
            coherence_part += 8.0 * p[i] * p[j] / s * hb[(i, j)].norm_sqr();
        }
    }
    Ok(variance_part - coherence_part)
}

/// `H = i (∂θ U†) U` at `θ0` by central differences, then Hermitized.
///
/// With `U(θ) = exp(−iθA)` this returns `−A`.
pub fn generator_from_family<F>(family: F, theta0: f64, h: f64) -> Result<Hermitian>
where
    F: Fn(f64) -> CMatrix,
{
    if !(h > 0.0) {
        return Err(Error::Validation("finite-difference step must be positive".into()));
    }
    let samples = [family(theta0 - h), family(theta0), family(theta0 + h)];
    for (k, u) in samples.iter().enumerate() {
        crate::numkernel::ensure_square(u)?;
        let err = unitarity_error(u);
        if !(err < 1e-8) {
            return Err(Error::Validation(format!(
                "family sample {k} is not unitary (‖U†U − I‖ = {err:e})"
            )));
        }
    }
    let d_adj = (samples[2].adjoint() - samples[0].adjoint()) * real(1.0 / (2.0 * h));
    let x = d_adj * &samples[1] * C64::i();
    Ok(Hermitian::hermitize(&x))
}

/// Quantum relative entropy `tr ρ(log ρ − log σ)` with its support status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeEntropy {
    /// Natural-log value; `+∞` when `supp ρ ⊄ supp σ`.
    pub value: f64,
    pub support_violation: bool,
}

pub fn quantum_relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<RelativeEntropy> {
    if rho.dim() != sigma.dim() {
        return Err(Error::shape(rho.dim(), sigma.dim()));
    }
    let a = hermitian_eig(rho.hermitian())?;
    let b = hermitian_eig(sigma.hermitian())?;
    // overlap[i][j] = |⟨a_i|b_j⟩|²
    let overlap = a.vectors.adjoint() * &b.vectors;
    let mut value = 0.0;
    for (i, &p) in a.values.iter().enumerate() {
        if p < ENTROPY_FLOOR {
            continue;
        }
        value += p * p.ln();
        for (j, &q) in b.values.iter().enumerate() {
            let w = p * overlap[(i, j)].norm_sqr();
            if q < ENTROPY_FLOOR {
                if w > ENTROPY_FLOOR {
                    return Ok(RelativeEntropy {
                        value: f64::INFINITY,
                        support_violation: true,
                    });
                }
                continue;
            }
            value -= w * q.ln();
        }
    }
    Ok(RelativeEntropy {
        value: value.max(0.0),
        support_violation: false,
    })
}

/// BKM metric from finite differences of relative entropy.
#[derive(Debug, Clone)]
pub struct BkmMetric {
    pub matrix: DMatrix<f64>,
    /// Set when the symmetrized result has an eigenvalue below `−1e-5·max(1, ‖G‖)`,
    /// which means the step is too large for the family's curvature.
    pub indefinite: bool,
}

/// `G_jk = ∂²/∂θ_j∂θ_k D(ρ_θ0 ‖ ρ_θ)` at `θ = θ0`, by second-order central
/// differences in the second argument.
pub fn bkm_metric<F>(family: F, theta0: &[f64], h: f64) -> Result<BkmMetric>
where
    F: Fn(&[f64]) -> Result<DensityMatrix>,
{
    if !(h > 0.0) {
        return Err(Error::Validation("finite-difference step must be positive".into()));
    }
    let base = family(theta0)?;
    let k = theta0.len();
    let divergence = |offsets: &[(usize, f64)]| -> Result<f64> {
        let mut theta = theta0.to_vec();
        for &(idx, delta) in offsets {
            theta[idx] += delta;
        }
        let d = quantum_relative_entropy(&base, &family(&theta)?)?;
        if d.support_violation {
            return Err(Error::Domain(
                "relative entropy is infinite along the family; BKM metric undefined".into(),
            ));
        }
        Ok(d.value)
    };
    let mut g = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let plus = divergence(&[(j, h)])?;
        let minus = divergence(&[(j, -h)])?;
        g[(j, j)] = (plus + minus) / (h * h);
        for l in 0..j {
            let pp = divergence(&[(j, h), (l, h)])?;
            let pm = divergence(&[(j, h), (l, -h)])?;
            let mp = divergence(&[(j, -h), (l, h)])?;
            let mm = divergence(&[(j, -h), (l, -h)])?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            g[(j, l)] = v;
            g[(l, j)] = v;
        }
    }
    let min_eig = if k == 0 {
        0.0
    } else {
        g.clone().symmetric_eigen().eigenvalues.min()
    };
    let scale = g.norm().max(1.0);
    Ok(BkmMetric {
        indefinite: min_eig < -1e-5 * scale,
        matrix: g,
    })
}

/// `κ_ρ(A, B) = ½ tr(ρ{A, B})`.
pub fn generalized_covariance(rho: &DensityMatrix, a: &Hermitian, b: &Hermitian) -> Result<f64> {
    let ac = anticommutator(a.matrix(), b.matrix())?;
    if ac.nrows() != rho.dim() {
        return Err(Error::shape(rho.dim(), ac.nrows()));
    }
    let v = rho.expectation(&ac) * real(0.5);
    debug_assert!(v.im.abs() < 1e-10 * (1.0 + v.re.abs()));
    Ok(v.re)
}

/// `ρ_θ = U_θ ρ0 U_θ†` with `U_θ = exp(−iθA)`.
#[derive(Debug, Clone)]
pub struct UnitaryFamily {
    pub generator: Hermitian,
    pub base: DensityMatrix,
}

impl UnitaryFamily {
    pub fn new(generator: Hermitian, base: DensityMatrix) -> Result<Self> {
        if generator.dim() != base.dim() {
            return Err(Error::shape(base.dim(), generator.dim()));
        }
        Ok(Self { generator, base })
    }

    pub fn unitary(&self, theta: f64) -> Result<CMatrix> {
        expm_skew_hermitian(&self.generator, theta)
    }

    pub fn state(&self, theta: f64) -> Result<DensityMatrix> {
        self.base.evolve_unitary(&self.unitary(theta)?)
    }
}

/// Closed-form `∂θ ρ_θ = i U_θ [G, ρ0] U_θ†`, where `G = i(∂θU†)U = −A` is the
/// family's generator in the convention of [`generator_from_family`].
pub fn unitary_family_derivative(fam: &UnitaryFamily, theta: f64) -> Result<Hermitian> {
    let u = fam.unitary(theta)?;
    let g = -fam.generator.matrix();
    let comm = commutator(&g, fam.base.matrix())?;
    Ok(Hermitian::hermitize(&(&u * comm * u.adjoint() * C64::i())))
}

/// Classical Fisher information `Sᵀ Σ⁻¹ S` for a Gaussian model.
pub fn classical_fim(s: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.nrows() != sigma.ncols() || s.nrows() != sigma.nrows() {
        return Err(Error::shape(
            format!("S with {} rows", sigma.nrows()),
            format!("{}x{}", s.nrows(), s.ncols()),
        ));
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("covariance is not symmetric positive definite".into()))?;
    let j = s.transpose() * chol.solve(s);
    Ok((&j + j.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{c64, pauli};
    use proptest::prelude::*;

    fn ket(entries: &[C64]) -> CVector {
        CVector::from_column_slice(entries)
    }

    fn random_density(n: usize, e: &[f64]) -> DensityMatrix {
        let b = CMatrix::from_fn(n, n, |r, c| {
            let k = r * n + c;
            c64(e[(2 * k) % e.len()], e[(2 * k + 1) % e.len()])
        });
        let m = &b * b.adjoint() + CMatrix::identity(n, n) * real(1e-3);
        project_to_density(&Hermitian::hermitize(&m)).unwrap()
    }

    #[test]
    fn projection_examples() {
        let mixed = DensityMatrix::maximally_mixed(3);
        let p = project_to_density(mixed.hermitian()).unwrap();
        assert!((p.matrix() - mixed.matrix()).norm() < 1e-14);

        let pure = DensityMatrix::pure(&ket(&[c64(0.6, 0.0), c64(0.0, 0.8)])).unwrap();
        let p = project_to_density(pure.hermitian()).unwrap();
        assert!((p.matrix() - pure.matrix()).norm() < 1e-14);

        // Hand oracle: (0.5, 0.6, −0.1) → (0.5, 0.6, 0)/1.1
        let p = project_to_density(&Hermitian::from_diagonal(&[0.5, 0.6, -0.1])).unwrap();
        let d = p.matrix().diagonal();
        assert!((d[0].re - 0.5 / 1.1).abs() < 1e-14);
        assert!((d[1].re - 0.6 / 1.1).abs() < 1e-14);
        assert!(d[2].re.abs() < 1e-14);
        assert!((d[0].re - 0.4545).abs() < 1e-4 && (d[1].re - 0.5455).abs() < 1e-4);

        let twice = project_to_density(p.hermitian()).unwrap();
        assert!((twice.matrix() - p.matrix()).norm() < 1e-14);

        assert!(matches!(
            project_to_density(&Hermitian::from_diagonal(&[-1.0, 0.0])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::from_diagonal(&[0.5, 0.6]).is_err());
        assert!(DensityMatrix::from_diagonal(&[1.1, -0.1]).is_err());
        assert!(DensityMatrix::from_diagonal(&[0.25, 0.75]).is_ok());
    }

    #[test]
    fn ensemble_examples() {
        let e = eigen_ensemble(&DensityMatrix::maximally_mixed(2)).unwrap();
        assert!(e.probabilities.iter().all(|p| (p - 0.5).abs() < 1e-14));
        let e = eigen_ensemble(&DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap()).unwrap();
        assert!(e.probabilities[0].abs() < 1e-14 && (e.probabilities[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn qfim_examples() {
        let x = Hermitian::new(pauli::x()).unwrap();
        let z = Hermitian::new(pauli::z()).unwrap();
        assert!(qfim(&DensityMatrix::maximally_mixed(2), &x).unwrap().abs() < 1e-14);
        let zero = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert!((qfim(&zero, &x).unwrap() - 4.0).abs() < 1e-12);
        let diag = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        assert!(qfim(&diag, &z).unwrap().abs() < 1e-14);
    }

    /// Brute-force QFI via `2 Σ_{ij} (p_i − p_j)²/(p_i + p_j) |H_ij|²`.
    fn qfi_oracle(rho: &DensityMatrix, h: &Hermitian) -> f64 {
        let e = eigen_ensemble(rho).unwrap();
        let hb = e.states.adjoint() * h.matrix() * &e.states;
        let p = &e.probabilities;
        let mut f = 0.0;
        for i in 0..p.len() {
            for j in 0..p.len() {
                let s = p[i] + p[j];
                if s > 1e-12 {
                    f += 2.0 * (p[i] - p[j]).powi(2) / s * hb[(i, j)].norm_sqr();
                }
            }
        }
        f
    }

    proptest! {
        #[test]
        fn qfim_matches_alternate_form(e in prop::collection::vec(-1.0f64..1.0, 40), n in 2usize..5) {
            let rho = random_density(n, &e);
            let h = Hermitian::hermitize(&CMatrix::from_fn(n, n, |r, c| c64(e[(r + 5 * c) % 40], e[(3 * r + c + 7) % 40])));
            let q = qfim(&rho, &h).unwrap();
            prop_assert!(q >= -1e-10);
            prop_assert!((q - qfi_oracle(&rho, &h)).abs() < 1e-9 * (1.0 + h.matrix().norm_squared()));
            let shifted = h.add(&Hermitian::identity(n).scale(2.7)).unwrap();
            prop_assert!((qfim(&rho, &shifted).unwrap() - q).abs() < 1e-9);
        }

        #[test]
        fn relative_entropy_nonnegative(e in prop::collection::vec(-1.0f64..1.0, 32)) {
            let rho = random_density(3, &e);
            let sigma = random_density(3, &e[7..]);
            let d = quantum_relative_entropy(&rho, &sigma).unwrap();
            prop_assert!(d.value >= 0.0);
            prop_assert!(quantum_relative_entropy(&rho, &rho).unwrap().value < 1e-10);
        }

        #[test]
        fn covariance_symmetric(e in prop::collection::vec(-1.0f64..1.0, 24)) {
            let rho = random_density(3, &e);
            let a = Hermitian::hermitize(&CMatrix::from_fn(3, 3, |r, c| c64(e[r + c], e[2 * r + c])));
            let b = Hermitian::hermitize(&CMatrix::from_fn(3, 3, |r, c| c64(e[r * c + 1], e[r + 3 * c])));
            let ab = generalized_covariance(&rho, &a, &b).unwrap();
            let ba = generalized_covariance(&rho, &b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_examples() {
        let u0 = pauli::x();
        let g = generator_from_family(|_| u0.clone(), 0.3, 1e-4).unwrap();
        assert!(g.matrix().norm() < 1e-12);

        let z = Hermitian::new(pauli::z()).unwrap();
        let g = generator_from_family(|t| expm_skew_hermitian(&z, t).unwrap(), 0.4, 1e-4).unwrap();
        assert!((g.matrix() + pauli::z()).norm() < 1e-7);

        assert!(generator_from_family(|_| pauli::x() * real(2.0), 0.0, 1e-3).is_err());
    }

    #[test]
    fn relative_entropy_examples() {
        let pure = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        let d = quantum_relative_entropy(&pure, &mixed).unwrap();
        assert!((d.value - std::f64::consts::LN_2).abs() < 1e-14);

        let skew = DensityMatrix::from_diagonal(&[0.9, 0.1]).unwrap();
        let d = quantum_relative_entropy(&mixed, &skew).unwrap();
        let expected = 0.5 * ((0.5f64 / 0.9).ln() + (0.5f64 / 0.1).ln());
        assert!((d.value - expected).abs() < 1e-14);
        assert!((d.value - 0.5108).abs() < 1e-4);

        let d = quantum_relative_entropy(&mixed, &pure).unwrap();
        assert!(d.support_violation && d.value.is_infinite());
    }

    fn qubit_family(theta: &[f64]) -> Result<DensityMatrix> {
        let fam = UnitaryFamily::new(
            Hermitian::new(pauli::x()).unwrap(),
            DensityMatrix::from_diagonal(&[0.8, 0.2]).unwrap(),
        )?;
        fam.state(theta[0])
    }

    #[test]
    fn bkm_constant_family_is_zero() {
        let rho = DensityMatrix::from_diagonal(&[0.7, 0.3]).unwrap();
        let g = bkm_metric(|_| Ok(rho.clone()), &[0.1, 0.2], 1e-3).unwrap();
        assert!(g.matrix.norm() < 1e-12);
        assert!(!g.indefinite);
    }

    #[test]
    fn bkm_qubit_family_matches_grid_fit() {
        let g = bkm_metric(qubit_family, &[0.0], 1e-3).unwrap();
        // Oracle: least-squares quartic fit of D(θ) on a fine grid; G = 2 c2.
        let thetas: Vec<f64> = (-20..=20).map(|k| k as f64 * 2.5e-3).collect();
        let base = qubit_family(&[0.0]).unwrap();
        let ds: Vec<f64> = thetas
            .iter()
            .map(|&t| {
                quantum_relative_entropy(&base, &qubit_family(&[t]).unwrap())
                    .unwrap()
                    .value
            })
            .collect();
        let design = DMatrix::from_fn(thetas.len(), 5, |r, c| thetas[r].powi(c as i32));
        let rhs = nalgebra::DVector::from_vec(ds);
        let coef = design.svd(true, true).solve(&rhs, 1e-18).unwrap();
        let fit = 2.0 * coef[2];
        assert!(
            (g.matrix[(0, 0)] - fit).abs() < 1e-4 * fit,
            "{} vs {fit}",
            g.matrix[(0, 0)]
        );
        // Spectral closed form Σ_{i≠j} (p_i − p_j)(ln p_i − ln p_j)|A_ij|² = 2·0.6·ln 4.
        let closed = 2.0 * 0.6 * 4f64.ln();
        assert!((g.matrix[(0, 0)] - closed).abs() < 1e-4 * closed);
    }

    #[test]
    fn bkm_two_parameter_symmetric() {
        let fam = |t: &[f64]| -> Result<DensityMatrix> {
            let u = expm_skew_hermitian(
                &Hermitian::hermitize(&(pauli::x() * real(t[0]) + pauli::y() * real(t[1]))),
                1.0,
            )?;
            DensityMatrix::from_diagonal(&[0.7, 0.3])?.evolve_unitary(&u)
        };
        let g = bkm_metric(fam, &[0.1, -0.2], 1e-3).unwrap();
        assert!((g.matrix[(0, 1)] - g.matrix[(1, 0)]).abs() < 1e-6);
        assert!(!g.indefinite);
    }

    #[test]
    fn covariance_examples() {
        let i = Hermitian::identity(2);
        let rho = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        assert!((generalized_covariance(&rho, &i, &i).unwrap() - 1.0).abs() < 1e-14);
        let x = Hermitian::new(pauli::x()).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!((generalized_covariance(&mixed, &x, &x).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unitary_derivative_examples() {
        let x = Hermitian::new(pauli::x()).unwrap();
        let fam = UnitaryFamily::new(x.clone(), DensityMatrix::maximally_mixed(2)).unwrap();
        assert!(unitary_family_derivative(&fam, 0.5).unwrap().matrix().norm() < 1e-14);

        let fam = UnitaryFamily::new(x, DensityMatrix::from_diagonal(&[0.8, 0.2]).unwrap()).unwrap();
        let theta = 0.3;
        let d = unitary_family_derivative(&fam, theta).unwrap();
        assert!(trace(d.matrix()).norm() < 1e-14);
        let h = 1e-4;
        let fd =
            (fam.state(theta + h).unwrap().matrix() - fam.state(theta - h).unwrap().matrix()) * real(1.0 / (2.0 * h));
        assert!((d.matrix() - fd).norm() < 1e-6);
    }

    #[test]
    fn classical_fim_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert!((classical_fim(&i2, &i2).unwrap() - &i2).norm() < 1e-14);
        assert!((classical_fim(&(&i2 * 2.0), &i2).unwrap() - &i2 * 4.0).norm() < 1e-14);
        let col = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!((classical_fim(&col, &i2).unwrap()[(0, 0)] - 2.0).abs() < 1e-14);
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let inv = sigma.clone().try_inverse().unwrap();
        assert!((classical_fim(&i2, &sigma).unwrap() - inv).norm() < 1e-12);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(classical_fim(&i2, &singular), Err(Error::Domain(_))));
    }
}
