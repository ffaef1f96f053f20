//! Pinned acceptance tolerances and problem sizes.

/// c1: relative agreement of `det(pI - A(U))` with `F_p`.
pub const CHARPOLY_REL: f64 = 1e-10;
pub const CHARPOLY_SAMPLES: usize = 1000;
pub const CHARPOLY_DEGREES: std::ops::RangeInclusive<usize> = 2..=8;
pub const CHARPOLY_SECONDS: f64 = 10.0;

/// c2: closed-form reduced eigenvalues against a dense solve.
pub const REDUCED_EIG_ABS: f64 = 1e-12;
/// c2: closed-form nonlinearity against a finite difference, relative to
/// `max(1, |value|)`.
pub const REDUCED_NL_REL: f64 = 1e-6;
/// c2: `|v|` below this is excluded from the nonlinearity comparison.
pub const REDUCED_NL_BAND: f64 = 1e-3;
pub const REDUCED_GRID_POINTS: usize = 101;
pub const REDUCED_BOX: (f64, f64) = (-2.0, 2.0);

/// c3: lifted residual convergence.
pub const LIFT_GRIDS: [usize; 3] = [256, 512, 1024];
pub const LIFT_TMAX: f64 = 0.2;
pub const LIFT_ORDER: f64 = 0.8;
pub const LIFT_SECONDS: f64 = 60.0;

/// c4: critical-value Jacobian.
pub const JACOBIAN_ENTRY: f64 = 1e-6;
pub const JACOBIAN_SAMPLES: usize = 200;
pub const JACOBIAN_DEGREES: [usize; 3] = [3, 4, 5];
pub const JACOBIAN_STEP: f64 = 1e-6;
pub const JACOBIAN_MIN_GAP: f64 = 0.1;
pub const VANDERMONDE_GAP: f64 = 1e-3;
pub const VANDERMONDE_REL: f64 = 1e-6;

/// c5: one-sided difference quotients at the double critical point.
pub const DOUBLE_ROOT_STATE: [f64; 3] = [-1.5, 2.0, 0.0];
pub const DOUBLE_ROOT_STEPS: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
pub const DOUBLE_ROOT_ERR: f64 = 1e-3;
/// c5: errors below this count as converged when judging monotonicity.
pub const DOUBLE_ROOT_FLOOR: f64 = 1e-6;

/// c6: constant-value continuation.
pub const CONTINUATION_NORM: f64 = 1e-10;
pub const CONTINUATION_SAMPLES: usize = 100;

/// c7: autonomous stationary state.
pub const AUTONOMOUS_GRIDS: [usize; 3] = [128, 256, 512];
pub const AUTONOMOUS_TMAX: f64 = 1.0;
pub const AUTONOMOUS_AMP: f64 = 0.1;
pub const AUTONOMOUS_ORDER: f64 = 1.8;
pub const RESIDUAL_P: [f64; 3] = [-1.0, 0.0, 1.0];

/// c8: characteristic drift reduction per grid doubling.
pub const DRIFT_FACTOR: f64 = 1.5;
pub const DRIFT_X0_REDUCED: f64 = 0.25;
pub const DRIFT_X0_LAX: f64 = 0.5;
pub const DRIFT_INDEX_LAX: usize = 1;

/// c9: agreement of the zero-speed family with the H-polynomial state.
pub const FAMILY_ABS: f64 = 1e-14;

/// c10: conservation of grid sums.
pub const CONSERVATION_REL: f64 = 1e-13;
pub const CONSERVATION_STEPS: usize = 10_000;
pub const CONSERVATION_GRID: usize = 256;
