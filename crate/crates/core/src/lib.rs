//! Density-matrix preconditioned Hamiltonian Monte Carlo, plus the
//! open-quantum-system numerics it is built from.
//!
//! Modules, bottom-up:
//!
//! - [`numkernel`]: dense complex linear algebra (Hermitian eigensolver,
//!   exponentials and logarithms through the spectrum, commutators).
//! - [`density`]: density matrices, quantum Fisher information, the
//!   Bogoliubov-Kubo-Mori metric and quantum relative entropy.
//! - [`lindblad`]: GKSL master-equation evolution.
//! - [`sse`]: linear and nonlinear stochastic Schrödinger equations, the
//!   stochastic master equation, Ornstein-Uhlenbeck driven unravelings and
//!   an approximated non-Markovian master equation.
//! - [`rmt`]: GUE sampling, the incremental CUE walk and eigenphase spacing
//!   statistics.
//! - [`sampler`]: HMC with a pluggable mass matrix and the density-matrix
//!   preconditioner.
//! - [`bench`]: ill-conditioned Gaussian and Airy-operator benchmarks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod csv;
pub mod density;
mod error;
pub mod lindblad;
pub mod numkernel;
pub mod rmt;
pub mod rng;
pub mod sampler;
pub mod sse;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
