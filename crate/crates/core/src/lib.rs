//! Numerical laboratory for the dispersionless Lax reduction of the Benney
//! moment chain.
//!
//! The crate is organised bottom-up:
//!
//! - [`polyfam`]: the normalized polynomial family `F(p, U)`, its critical
//!   points, critical values, strata and critical-value Jacobians.
//! - [`spectral`]: the matrix `A(U)` of the quasi-linear system, its
//!   characteristic polynomial, hyperbolicity regimes and genuine
//!   nonlinearity.
//! - [`reduction`]: the strictly hyperbolic 2×2 reduction for `n = 4` and its
//!   lift to the Lax polynomial.
//! - [`solver`]: periodic time integration and residual/characteristic
//!   diagnostics.
//! - [`wavegen`]: exact traveling-wave and autonomous solutions.
//! - [`io`]: CSV frame format shared with the command-line harness.

pub mod io;
pub mod polyfam;
pub mod reduction;
pub mod solver;
pub mod spectral;
pub mod wavegen;

mod assign;
mod roots;

pub use num_complex::Complex64;
pub use polyfam::{CriticalPoint, CriticalSet, LaxPoly, PolyError};
pub use reduction::ReducedState;
pub use solver::{FieldState, Grid1D, SolverConfig, Trajectory};
pub use spectral::{Regime, SpectralData};
