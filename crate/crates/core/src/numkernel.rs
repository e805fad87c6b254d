//! Dense complex linear algebra shared by every other module.
//!
//! Matrix functions (exponential, logarithm) all go through the Hermitian
//! eigendecomposition, so unitarity and Hermiticity of the results hold by
//! construction. Matrices here are at most a few hundred rows.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Absolute Hermiticity tolerance, scaled by `max(1, max |a_jk|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 100_000;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `‖A†A − I‖_F`.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMatrix::identity(n, n)).norm()
}

pub fn ensure_square(a: &CMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::shape("square matrix", format!("{}x{}", a.nrows(), a.ncols())));
    }
    Ok(a.nrows())
}

pub fn ensure_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation("matrix has non-finite entries".into()))
    }
}

/// A square complex matrix equal to its conjugate transpose.
///
/// Construction checks Hermiticity within [`HERMITIAN_TOL`] and then stores
/// the exactly Hermitized matrix `(A + A†)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    pub fn new(a: CMatrix) -> Result<Self> {
        ensure_square(&a)?;
        ensure_finite(&a)?;
        let scale = max_abs(&a).max(1.0);
        let n = a.nrows();
        for j in 0..n {
            for k in j..n {
                let d = (a[(j, k)] - a[(k, j)].conj()).norm();
                if d > HERMITIAN_TOL * scale {
                    return Err(Error::Validation(format!(
                        "matrix is not Hermitian: |a[{j},{k}] - conj(a[{k},{j}])| = {d:e}"
                    )));
                }
            }
        }
        Ok(Self::hermitize(&a))
    }

    /// Takes the Hermitian part `(A + A†)/2` without any check.
    pub fn hermitize(a: &CMatrix) -> Self {
        Hermitian((a + a.adjoint()) * real(0.5))
    }

    pub fn from_real_symmetric(a: &DMatrix<f64>) -> Result<Self> {
        Self::new(a.map(real))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let v = DVector::from_iterator(d.len(), d.iter().map(|&x| real(x)));
        Hermitian(CMatrix::from_diagonal(&v))
    }

    pub fn identity(dim: usize) -> Self {
        Hermitian(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Hermitian(CMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Real trace.
    pub fn trace(&self) -> f64 {
        trace(&self.0).re
    }

    pub fn scale(&self, s: f64) -> Self {
        Hermitian(&self.0 * real(s))
    }

    pub fn add(&self, other: &Hermitian) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::shape(self.dim(), other.dim()));
        }
        Ok(Hermitian(&self.0 + &other.0))
    }

    /// `V A V†`, which is Hermitian for any `V`.
    pub fn conjugate_by(&self, v: &CMatrix) -> Result<Self> {
        if v.ncols() != self.dim() {
            return Err(Error::shape(self.dim(), v.ncols()));
        }
        Ok(Self::hermitize(&(v * &self.0 * v.adjoint())))
    }
}

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// a unitary matrix whose columns are the matching eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    /// `V f(Λ) V†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let d = DVector::from_iterator(self.values.len(), self.values.iter().map(|&x| f(x)));
        let scaled = &self.vectors * CMatrix::from_diagonal(&d);
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(real)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
pub fn hermitian_eig(a: &Hermitian) -> Result<Spectrum> {
    let n = a.dim();
    if n == 0 {
        return Ok(Spectrum {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(a.matrix().clone(), EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::Validation("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum { values, vectors })
}

/// `exp(−i t H)`, unitary by construction.
pub fn expm_skew_hermitian(h: &Hermitian, t: f64) -> Result<CMatrix> {
    let spec = hermitian_eig(h)?;
    Ok(spec.map(|x| C64::from_polar(1.0, -t * x)))
}

/// Principal logarithm of a positive-definite Hermitian matrix.
///
/// Eigenvalues in `[−floor, floor)` are raised to `floor` before the log;
/// anything more negative, or a floor at or below `1e-300`, is a domain
/// error. The default floor is `1e-12 · tr(A) / dim`.
pub fn logm_positive_definite(a: &Hermitian, floor: Option<f64>) -> Result<Hermitian> {
    let n = a.dim();
    let floor = floor.unwrap_or_else(|| 1e-12 * a.trace() / n.max(1) as f64);
    let spec = hermitian_eig(a)?;
    let mut logs = Vec::with_capacity(n);
    for &lam in &spec.values {
        if lam < -floor.abs() {
            return Err(Error::Domain(format!("logm of matrix with eigenvalue {lam:e}")));
        }
        let clamped = lam.max(floor);
        if clamped <= 1e-300 {
            return Err(Error::Domain(format!(
                "logm eigenvalue {lam:e} not positive after flooring at {floor:e}"
            )));
        }
        logs.push(clamped.ln());
    }
    let log_spec = Spectrum {
        values: logs,
        vectors: spec.vectors,
    };
    Ok(Hermitian::hermitize(&log_spec.reconstruct()))
}

fn ensure_conformable(a: &CMatrix, b: &CMatrix) -> Result<()> {
    ensure_square(a)?;
    if a.shape() != b.shape() {
        return Err(Error::shape(
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    Ok(())
}

/// `[A, B] = AB − BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_conformable(a, b)?;
    Ok(a * b - b * a)
}

/// `{A, B} = AB + BA`.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_conformable(a, b)?;
    Ok(a * b + b * a)
}

/// Trace distance `½‖A − B‖₁` between two Hermitian matrices.
pub fn trace_distance(a: &Hermitian, b: &Hermitian) -> Result<f64> {
    let diff = Hermitian::hermitize(&(a.matrix() - b.matrix()));
    let spec = hermitian_eig(&diff)?;
    Ok(0.5 * spec.values.iter().map(|x| x.abs()).sum::<f64>())
}

/// Pauli matrices and a few standard qubit operators.
pub mod pauli {
    use super::{c64, real, CMatrix};

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)])
    }

    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[real(0.0), c64(0.0, -1.0), c64(0.0, 1.0), real(0.0)])
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)])
    }

    /// Lowering operator `|g⟩⟨e|` with `|e⟩ = |0⟩`, `|g⟩ = |1⟩`.
    pub fn lowering() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[real(0.0), real(0.0), real(1.0), real(0.0)])
    }
}
