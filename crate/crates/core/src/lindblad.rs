//! GKSL (Lindblad) master-equation evolution with a fixed-step RK4
//! integrator.

use crate::density::{project_to_density, DensityMatrix};
use crate::numkernel::{ensure_finite, ensure_square, hermitian_eig, real, trace, CMatrix, Hermitian, C64};
use crate::{Error, Result};

/// Hamiltonian plus jump operators `L_k`.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    hamiltonian: Hermitian,
    jumps: Vec<CMatrix>,
}

impl LindbladModel {
    pub fn new(hamiltonian: Hermitian, jumps: Vec<CMatrix>) -> Result<Self> {
        let dim = hamiltonian.dim();
        for (k, l) in jumps.iter().enumerate() {
            if ensure_square(l)? != dim {
                return Err(Error::shape(
                    format!("{dim}x{dim} jump operator"),
                    format!("jump {k} is {}x{}", l.nrows(), l.ncols()),
                ));
            }
            ensure_finite(l)?;
        }
        Ok(Self { hamiltonian, jumps })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &Hermitian {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[CMatrix] {
        &self.jumps
    }

    /// Generator applied to an arbitrary operator (not necessarily a state).
    /// Used for propagating memory-kernel operands that are not density
    /// matrices.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let h = self.hamiltonian.matrix();
        let mut out = (h * rho - rho * h) * C64::new(0.0, -1.0);
        for l in &self.jumps {
            let ld = l.adjoint();
            let ldl = &ld * l;
            out += l * rho * &ld - (&ldl * rho + rho * &ldl) * real(0.5);
        }
        out
    }
}

/// `−i[H, ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
pub fn lindblad_rhs(model: &LindbladModel, rho: &DensityMatrix) -> Result<Hermitian> {
    if rho.dim() != model.dim() {
        return Err(Error::shape(model.dim(), rho.dim()));
    }
    Ok(Hermitian::hermitize(&model.apply(rho.matrix())))
}

/// One classical RK4 step of `dX/dt = f(X)` for a linear operator-valued
/// right-hand side.
pub(crate) fn rk4_step(x: &CMatrix, dt: f64, f: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let k1 = f(x);
    let k2 = f(&(x + &k1 * real(0.5 * dt)));
    let k3 = f(&(x + &k2 * real(0.5 * dt)));
    let k4 = f(&(x + &k3 * real(dt)));
    x + (k1 + (k2 + k3) * real(2.0) + k4) * real(dt / 6.0)
}

/// States on a uniform time grid.
#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl DensityTrajectory {
    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory always holds the initial state")
    }
}

/// Fixed-step RK4 integration from `0` to `t_final`.
///
/// The raw integration state is kept unprojected; each stored state is the
/// projection of the raw state onto valid density matrices. A trace drift
/// beyond `1e-6` aborts with an integration error.
pub fn evolve(model: &LindbladModel, rho0: &DensityMatrix, t_final: f64, dt: f64) -> Result<DensityTrajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Validation("time step must be positive".into()));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::Validation("final time must be non-negative".into()));
    }
    if rho0.dim() != model.dim() {
        return Err(Error::shape(model.dim(), rho0.dim()));
    }
    let steps = (t_final / dt).round() as usize;
    let dt = if steps > 0 { t_final / steps as f64 } else { dt };
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(rho0.clone());
    let mut raw = rho0.matrix().clone();
    for step in 1..=steps {
        raw = rk4_step(&raw, dt, |x| {
            let y = model.apply(x);
            (&y + y.adjoint()) * real(0.5)
        });
        let drift = (trace(&raw).re - 1.0).abs();
        if !(drift <= 1e-6) {
            return Err(Error::Integration {
                step,
                reason: format!("trace drift {drift:e}; reduce the time step"),
            });
        }
        times.push(step as f64 * dt);
        states.push(project_to_density(&Hermitian::hermitize(&raw))?);
    }
    Ok(DensityTrajectory { times, states })
}

/// Smallest eigenvalue across a trajectory.
pub fn min_eigenvalue(traj: &DensityTrajectory) -> Result<f64> {
    let mut m = f64::INFINITY;
    for s in &traj.states {
        m = m.min(hermitian_eig(s.hermitian())?.min());
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{c64, pauli, CVector};
    use proptest::prelude::*;

    fn damping() -> LindbladModel {
        LindbladModel::new(Hermitian::zeros(2), vec![pauli::lowering()]).unwrap()
    }

    fn excited() -> DensityMatrix {
        DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap()
    }

    #[test]
    fn von_neumann_without_jumps() {
        let h = Hermitian::new(pauli::x()).unwrap();
        let model = LindbladModel::new(h.clone(), vec![]).unwrap();
        let rho = DensityMatrix::from_diagonal(&[0.8, 0.2]).unwrap();
        let rhs = lindblad_rhs(&model, &rho).unwrap();
        let expect = (h.matrix() * rho.matrix() - rho.matrix() * h.matrix()) * c64(0.0, -1.0);
        assert!((rhs.matrix() - expect).norm() < 1e-15);
    }

    #[test]
    fn amplitude_damping_rate() {
        let rhs = lindblad_rhs(&damping(), &excited()).unwrap();
        assert!((rhs.matrix()[(0, 0)].re + 1.0).abs() < 1e-15);
        assert!((rhs.matrix()[(1, 1)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_is_constant() {
        let model = LindbladModel::new(Hermitian::new(pauli::z()).unwrap(), vec![]).unwrap();
        let traj = evolve(&model, &DensityMatrix::maximally_mixed(2), 1.0, 1e-2).unwrap();
        for s in &traj.states {
            assert!((s.matrix() - DensityMatrix::maximally_mixed(2).matrix()).norm() < 1e-14);
        }
    }

    #[test]
    fn amplitude_damping_analytic() {
        let traj = evolve(&damping(), &excited(), 1.0, 1e-3).unwrap();
        let ee = traj.last().matrix()[(0, 0)].re;
        assert!((ee - (-1.0f64).exp()).abs() < 1e-6);
        assert!(min_eigenvalue(&traj).unwrap() >= -1e-9);
        assert_eq!(traj.times.len(), 1001);
    }

    #[test]
    fn rejects_bad_schedule_and_shapes() {
        assert!(evolve(&damping(), &excited(), 1.0, 0.0).is_err());
        assert!(evolve(&damping(), &excited(), -1.0, 0.1).is_err());
        assert!(LindbladModel::new(Hermitian::zeros(2), vec![CMatrix::zeros(3, 3)]).is_err());
        let model = LindbladModel::new(Hermitian::zeros(3), vec![]).unwrap();
        assert!(lindblad_rhs(&model, &excited()).is_err());
    }

    #[test]
    fn blowup_is_reported() {
        // Strong non-normal dissipation with a huge step makes RK4 unstable.
        let model = LindbladModel::new(Hermitian::zeros(2), vec![pauli::lowering() * real(30.0)]).unwrap();
        let err = evolve(&model, &excited(), 1.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }), "{err}");
    }

    proptest! {
        #[test]
        fn rhs_traceless_hermitian(e in prop::collection::vec(-1.0f64..1.0, 36)) {
            let n = 3;
            let h = Hermitian::hermitize(&CMatrix::from_fn(n, n, |r, c| c64(e[r * n + c], e[9 + r * n + c])));
            let l = CMatrix::from_fn(n, n, |r, c| c64(e[18 + r * n + c], e[27 + c * n + r]));
            let psi = CVector::from_fn(n, |r, _| c64(e[r] + 0.1, e[r + 5]));
            let model = LindbladModel::new(h, vec![l]).unwrap();
            let rho = DensityMatrix::pure(&psi).unwrap();
            let rhs = lindblad_rhs(&model, &rho).unwrap();
            prop_assert!(rhs.trace().abs() < 1e-12);
        }
    }
}
