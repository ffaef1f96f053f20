//! Exact traveling-wave and autonomous solutions.
//!
//! A traveling wave `U(x - mu t)` whose components are functions of `u1`
//! satisfies, row by row,
//!
//! ```text
//! d u_(k+1) / d u1 = mu d u_k / d u1 + (n - k + 1) u_(k-1),   u_0 = 0,
//! ```
//!
//! which is integrated exactly over the rationals, one component at a time.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::solver::{FieldState, Trajectory};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum WaveError {
    #[error("traveling waves need n >= 2, got n = {0}")]
    DegreeTooSmall(usize),
    #[error("expected {expected} integration constants (c2..cn), got {found}")]
    ConstantCount { expected: usize, found: usize },
    #[error("value {0} is not finite")]
    NonFinite(f64),
    #[error(
        "speed {mu} admits only constant profiles ({dichotomy}); \
         refusing a nonconstant u1 profile"
    )]
    Refused { mu: f64, dichotomy: Dichotomy },
    #[error("autonomous construction needs odd n, got n = {0}")]
    EvenDegree(usize),
    #[error("at most {max} lower-order coefficients for n = {n}, got {given}")]
    TooManyLowerTerms { n: usize, max: usize, given: usize },
    #[error("profile is empty")]
    EmptyProfile,
}

/// Polynomial in `u1` with exact rational coefficients, ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatPoly {
    coeffs: Vec<BigRational>,
}

/// Exact rational value of a finite float.
pub fn rational(x: f64) -> Result<BigRational, WaveError> {
    BigRational::from_float(x).ok_or(WaveError::NonFinite(x))
}

fn int(k: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(k))
}

impl RatPoly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        Self::new(vec![c])
    }

    /// The polynomial `u1`.
    pub fn var() -> Self {
        Self::new(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let zero = BigRational::zero();
        Self::new(
            (0..len)
                .map(|i| self.coeffs.get(i).unwrap_or(&zero) + other.coeffs.get(i).unwrap_or(&zero))
                .collect(),
        )
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-BigRational::one()))
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * int(i))
                .collect(),
        )
    }

    /// Antiderivative vanishing at `u1 = 0`.
    pub fn integral(&self) -> Self {
        let mut c = Vec::with_capacity(self.coeffs.len() + 1);
        c.push(BigRational::zero());
        c.extend(self.coeffs.iter().enumerate().map(|(i, a)| a / int(i + 1)));
        Self::new(c)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.to_f64().iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Coefficients rounded to `f64`, ascending.
    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::NAN))
            .collect()
    }
}

impl fmt::Display for RatPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = c.abs();
            let unit = a.is_one() && i > 0;
            if !unit {
                write!(f, "{a}")?;
            }
            match i {
                0 => {}
                1 if unit => write!(f, "u1")?,
                1 => write!(f, "*u1")?,
                _ if unit => write!(f, "u1^{i}")?,
                _ => write!(f, "*u1^{i}")?,
            }
        }
        Ok(())
    }
}

/// Components `u_1, ..., u_n` as polynomials in `u1`. `constants` holds
/// `c_2, ..., c_n`.
pub fn travelwave_components(
    n: usize,
    mu: &BigRational,
    constants: &[BigRational],
) -> Result<Vec<RatPoly>, WaveError> {
    if n < 2 {
        return Err(WaveError::DegreeTooSmall(n));
    }
    if constants.len() != n - 1 {
        return Err(WaveError::ConstantCount {
            expected: n - 1,
            found: constants.len(),
        });
    }
    let mut u = Vec::with_capacity(n);
    u.push(RatPoly::var());
    u.push(
        RatPoly::var()
            .scale(mu)
            .add(&RatPoly::constant(constants[0].clone())),
    );
    // u has 1-based names: u[k - 1] is u_k
    for k in 2..n {
        let next = u[k - 1]
            .scale(mu)
            .add(&u[k - 2].integral().scale(&int(n - k + 1)))
            .add(&RatPoly::constant(constants[k - 1].clone()));
        u.push(next);
    }
    u.truncate(n);
    Ok(u)
}

/// Row residuals of the profile equations for rows `1..n-1`, each of which
/// must be the zero polynomial.
pub fn chain_residuals(n: usize, mu: &BigRational, polys: &[RatPoly]) -> Vec<RatPoly> {
    (1..n)
        .map(|k| {
            let lower = if k >= 2 {
                polys[k - 2].scale(&int(n - k + 1))
            } else {
                RatPoly::zero()
            };
            polys[k]
                .derivative()
                .sub(&polys[k - 1].derivative().scale(mu))
                .sub(&lower)
        })
        .collect()
}

/// The last row, `mu u_n' + u_(n-1)`, which has no further component to
/// absorb it.
pub fn closure_residual(n: usize, mu: &BigRational, polys: &[RatPoly]) -> RatPoly {
    polys[n - 1].derivative().scale(mu).add(&polys[n - 2])
}

/// `F_p(mu)` with the component polynomials substituted:
/// `mu^n + sum_(j<n) (n - j) u_j mu^(n-j-1)`.
pub fn eigen_constraint(n: usize, mu: &BigRational, polys: &[RatPoly]) -> RatPoly {
    let mut pow = vec![BigRational::one()];
    for _ in 0..n {
        let next = pow.last().unwrap() * mu;
        pow.push(next);
    }
    let mut out = RatPoly::constant(pow[n].clone());
    for j in 1..n {
        out = out.add(&polys[j - 1].scale(&(int(n - j) * &pow[n - j - 1])));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dichotomy {
    /// Constraint and closure vanish identically: every profile `u1(x)`
    /// gives a wave.
    Family,
    /// The constraint (or the closure) is a nonconstant polynomial, so `u1`
    /// must sit at one of its roots.
    ConstantsOnly,
    /// The constraint is a nonzero constant: `mu` is never an eigenvalue.
    NoNonconstant,
}

impl fmt::Display for Dichotomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dichotomy::Family => "free family",
            Dichotomy::ConstantsOnly => "constants only",
            Dichotomy::NoNonconstant => "no nonconstant wave",
        })
    }
}

pub fn dichotomy(constraint: &RatPoly, closure: &RatPoly) -> Dichotomy {
    if !constraint.is_constant() {
        Dichotomy::ConstantsOnly
    } else if !constraint.is_zero() {
        Dichotomy::NoNonconstant
    } else if closure.is_zero() {
        Dichotomy::Family
    } else {
        Dichotomy::ConstantsOnly
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TravelWaveSpec {
    pub n: usize,
    pub mu: f64,
    pub u1_profile: Vec<f64>,
    /// `c_2, ..., c_n`.
    pub constants: Vec<f64>,
    pub component_polys: Vec<RatPoly>,
    pub constraint: RatPoly,
    pub dichotomy: Dichotomy,
}

impl TravelWaveSpec {
    /// Component arrays `u_k(u1(x))`.
    pub fn field_state(&self) -> FieldState {
        FieldState {
            components: self
                .component_polys
                .iter()
                .map(|p| self.u1_profile.iter().map(|&x| p.eval(x)).collect())
                .collect(),
        }
    }
}

/// Builds the traveling-wave state for a sampled `u1` profile. Nonconstant
/// profiles are refused unless the speed admits a free family.
pub fn generate_profile(
    n: usize,
    mu: f64,
    constants: &[f64],
    u1_profile: &[f64],
) -> Result<TravelWaveSpec, WaveError> {
    if u1_profile.is_empty() {
        return Err(WaveError::EmptyProfile);
    }
    if let Some(&bad) = u1_profile.iter().find(|x| !x.is_finite()) {
        return Err(WaveError::NonFinite(bad));
    }
    let mu_q = rational(mu)?;
    let c_q = constants
        .iter()
        .map(|&c| rational(c))
        .collect::<Result<Vec<_>, _>>()?;
    let polys = travelwave_components(n, &mu_q, &c_q)?;
    let constraint = eigen_constraint(n, &mu_q, &polys);
    let closure = closure_residual(n, &mu_q, &polys);
    let kind = dichotomy(&constraint, &closure);
    let nonconstant = u1_profile.iter().any(|&x| x != u1_profile[0]);
    if nonconstant && kind != Dichotomy::Family {
        return Err(WaveError::Refused {
            mu,
            dichotomy: kind,
        });
    }
    Ok(TravelWaveSpec {
        n,
        mu,
        u1_profile: u1_profile.to_vec(),
        constants: constants.to_vec(),
        component_polys: polys,
        constraint,
        dichotomy: kind,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients `(u1, ..., un)` of `F = (2^m/(n+1)) H^m + sum_(k<m) c_k H^k`
/// with `H = p²/2 + u`, `m = (n+1)/2`, at one value of `u`.
pub fn autonomous_coeffs(n: usize, u: f64, lower: &[f64]) -> Result<Vec<f64>, WaveError> {
    if n < 2 {
        return Err(WaveError::DegreeTooSmall(n));
    }
    if n % 2 == 0 {
        return Err(WaveError::EvenDegree(n));
    }
    let m = (n + 1) / 2;
    if lower.len() > m {
        return Err(WaveError::TooManyLowerTerms {
            n,
            max: m,
            given: lower.len(),
        });
    }
    // full[d] is the coefficient of p^d
    let mut full = vec![0.0; n + 2];
    let mut add_power = |k: usize, weight: f64| {
        for j in 0..=k {
            full[2 * j] += weight * binomial(k, j) * 0.5f64.powi(j as i32) * u.powi((k - j) as i32);
        }
    };
    add_power(m, 2f64.powi(m as i32) / (n + 1) as f64);
    for (k, &c) in lower.iter().enumerate() {
        add_power(k, c);
    }
    Ok((1..=n).map(|k| full[n - k]).collect())
}

/// Stationary state built from a potential sampled on a grid.
pub fn autonomous_from_potential(
    n: usize,
    u_samples: &[f64],
    lower: &[f64],
) -> Result<FieldState, WaveError> {
    if let Some(&bad) = u_samples.iter().chain(lower).find(|x| !x.is_finite()) {
        return Err(WaveError::NonFinite(bad));
    }
    let mut components = vec![Vec::with_capacity(u_samples.len()); n];
    for &u in u_samples {
        for (k, c) in autonomous_coeffs(n, u, lower)?.into_iter().enumerate() {
            components[k].push(c);
        }
    }
    if u_samples.is_empty() {
        autonomous_coeffs(n, 0.0, lower)?;
    }
    Ok(FieldState { components })
}

/// `max_t || U(t, .) - U(0, . - mu t) ||_inf`, shifting by periodic linear
/// interpolation.
pub fn verify_traveling(traj: &Trajectory, mu: f64) -> f64 {
    let Some(first) = traj.frames.first() else {
        return 0.0;
    };
    let cells = traj.grid.cells;
    let dx = traj.grid.dx();
    let mut worst: f64 = 0.0;
    for frame in &traj.frames {
        let shift = mu * (frame.t - first.t) / dx;
        let whole = shift.floor();
        let frac = shift - whole;
        let offset = (whole as i64).rem_euclid(cells as i64) as usize;
        for (now, init) in frame.state.components.iter().zip(&first.state.components) {
            for i in 0..cells {
                // value of U(0) at x_i - shift dx
                let a = init[(i + 2 * cells - offset) % cells];
                let b = init[(i + 2 * cells - offset - 1) % cells];
                let shifted = a + frac * (b - a);
                worst = worst.max((now[i] - shifted).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{simulate_2x2, simulate_quasilinear, Grid1D, SolverConfig};
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn q(x: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(x))
    }

    fn poly(c: &[i64]) -> RatPoly {
        RatPoly::new(c.iter().map(|&x| q(x)).collect())
    }

    #[test]
    fn n3_mu0() {
        let p = travelwave_components(3, &q(0), &[q(0), q(7)]).unwrap();
        assert_eq!(p[1], RatPoly::zero());
        assert_eq!(p[2], poly(&[7, 0, 1]));
        let constraint = eigen_constraint(3, &q(0), &p);
        assert!(constraint.is_zero());
        assert_eq!(
            dichotomy(&constraint, &closure_residual(3, &q(0), &p)),
            Dichotomy::Family
        );
    }

    #[test]
    fn n3_mu1_constants_only() {
        let p = travelwave_components(3, &q(1), &[q(0), q(0)]).unwrap();
        assert_eq!(p[1], poly(&[0, 1]));
        assert_eq!(p[2], poly(&[0, 1, 1]));
        let constraint = eigen_constraint(3, &q(1), &p);
        assert_eq!(constraint, poly(&[1, 3]));
        assert_eq!(constraint.to_string(), "3*u1 + 1");
        assert!(chain_residuals(3, &q(1), &p).iter().all(RatPoly::is_zero));
        let err = generate_profile(3, 1.0, &[0.0, 0.0], &[0.1, 0.2]).unwrap_err();
        assert!(matches!(
            err,
            WaveError::Refused {
                dichotomy: Dichotomy::ConstantsOnly,
                ..
            }
        ));
        // a constant profile is still accepted
        assert!(generate_profile(3, 1.0, &[0.0, 0.0], &[0.1, 0.1]).is_ok());
    }

    #[test]
    fn n2_mu0_is_degenerate() {
        let p = travelwave_components(2, &q(0), &[q(0)]).unwrap();
        let constraint = eigen_constraint(2, &q(0), &p);
        assert_eq!(constraint, RatPoly::var());
        assert_eq!(
            dichotomy(&constraint, &closure_residual(2, &q(0), &p)),
            Dichotomy::ConstantsOnly
        );
    }

    #[test]
    fn nonzero_constant_constraint() {
        // n = 2, mu = 1, c2 = -1: u2 = u1 - 1 and F_p(1) = 1 + u1 - (u1) ... compute
        let p = travelwave_components(2, &q(1), &[q(-1)]).unwrap();
        let constraint = eigen_constraint(2, &q(1), &p);
        // F_p = p² + u1, so F_p(1) = 1 + u1: nonconstant
        assert_eq!(constraint, poly(&[1, 1]));
        let zero = RatPoly::zero();
        assert_eq!(
            dichotomy(&RatPoly::constant(q(2)), &zero),
            Dichotomy::NoNonconstant
        );
    }

    #[test]
    fn bad_arguments() {
        assert_eq!(
            travelwave_components(1, &q(0), &[]),
            Err(WaveError::DegreeTooSmall(1))
        );
        assert!(matches!(
            travelwave_components(4, &q(0), &[q(0)]),
            Err(WaveError::ConstantCount {
                expected: 3,
                found: 1
            })
        ));
        assert!(matches!(
            generate_profile(3, f64::NAN, &[0.0, 0.0], &[0.0]),
            Err(WaveError::NonFinite(_))
        ));
        assert_eq!(
            autonomous_coeffs(4, 0.1, &[]),
            Err(WaveError::EvenDegree(4))
        );
        assert!(matches!(
            autonomous_coeffs(3, 0.1, &[1.0, 2.0, 3.0]),
            Err(WaveError::TooManyLowerTerms { .. })
        ));
    }

    #[test]
    fn autonomous_examples() {
        let u = 0.1 * (TAU * 0.3).cos();
        let c = autonomous_coeffs(3, u, &[]).unwrap();
        assert_eq!(c.len(), 3);
        assert!((c[0] - u).abs() < 1e-16 && c[1] == 0.0 && (c[2] - u * u).abs() < 1e-17);

        let u = 0.37;
        let c = autonomous_coeffs(5, u, &[]).unwrap();
        let oracle = [u, 0.0, 2.0 * u * u, 0.0, 4.0 * u.powi(3) / 3.0];
        for (a, b) in c.iter().zip(oracle) {
            assert!((a - b).abs() < 1e-15, "{c:?}");
        }
        // lower term c1 H shifts u1 by c1 / 2 for n = 3
        let c = autonomous_coeffs(3, u, &[0.0, 0.4]).unwrap();
        assert!((c[0] - (u + 0.2)).abs() < 1e-15);
        assert_eq!(c[1], 0.0);

        let s = autonomous_from_potential(3, &[0.2; 20], &[]).unwrap();
        for comp in &s.components {
            assert!(comp.iter().all(|x| *x == comp[0]));
        }
    }

    #[test]
    fn autonomous_state_has_zero_residual_polynomial() {
        // for mu = 0 the traveling-wave family with c = 0 reproduces the
        // autonomous state with no lower terms, for every odd n
        for n in [3usize, 5, 7] {
            let c = vec![q(0); n - 1];
            let p = travelwave_components(n, &q(0), &c).unwrap();
            for u in [-0.4, 0.15, 0.9] {
                let a = autonomous_coeffs(n, u, &[]).unwrap();
                for k in 0..n {
                    assert!((p[k].eval(u) - a[k]).abs() < 1e-12, "n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn traveling_drift() {
        let grid = Grid1D::unit(64).unwrap();
        let cfg = SolverConfig::with_tmax(0.2);
        let constant = FieldState::constant(&[1.0, 0.5], 64);
        let traj = simulate_2x2(grid, &constant, &cfg).unwrap();
        assert!(verify_traveling(&traj, 0.7) < 1e-14);

        let u = grid.sample(|x| -0.5 + 0.1 * (TAU * x).cos());
        let spec = generate_profile(3, 0.0, &[0.0, 0.0], &u).unwrap();
        let traj = simulate_quasilinear(grid, &spec.field_state(), &cfg).unwrap();
        assert!(verify_traveling(&traj, 0.0) < 1e-3);

        let smooth = FieldState::new(vec![
            grid.sample(|x| 1.0 + 0.5 * (TAU * x).sin()),
            grid.sample(|x| 0.5 + 0.3 * (TAU * x).cos()),
        ])
        .unwrap();
        let traj = simulate_2x2(grid, &smooth, &SolverConfig::with_tmax(0.3)).unwrap();
        assert!(verify_traveling(&traj, 0.0) > 0.05);
    }

    #[test]
    fn shift_by_whole_cells_is_exact() {
        let grid = Grid1D::unit(16).unwrap();
        let base = grid.sample(|x| (TAU * x).sin());
        let frames = (0..3)
            .map(|k| {
                let shifted: Vec<f64> = (0..16).map(|i| base[(i + 16 - 2 * k) % 16]).collect();
                crate::solver::Frame {
                    t: k as f64,
                    state: FieldState::new(vec![shifted]).unwrap(),
                }
            })
            .collect();
        let mut traj = simulate_2x2(
            grid,
            &FieldState::constant(&[1.0, 1.0], 16),
            &SolverConfig::with_tmax(0.01),
        )
        .unwrap();
        traj.frames = frames;
        assert_eq!(verify_traveling(&traj, 2.0 / 16.0), 0.0);
    }

    fn small_rational() -> impl Strategy<Value = BigRational> {
        (-20i64..20, 1i64..6).prop_map(|(a, b)| BigRational::new(BigInt::from(a), BigInt::from(b)))
    }

    proptest! {
        #[test]
        fn recursion_is_an_exact_identity(
            n in 2usize..8,
            mu in small_rational(),
            c in proptest::collection::vec(small_rational(), 7),
        ) {
            let p = travelwave_components(n, &mu, &c[..n - 1]).unwrap();
            prop_assert_eq!(p.len(), n);
            for r in chain_residuals(n, &mu, &p) {
                prop_assert!(r.is_zero());
            }
        }

        #[test]
        fn refusal_for_nonzero_speed(n in 2usize..7, mu in 1i64..5) {
            let mu = q(mu);
            let p = travelwave_components(n, &mu, &vec![q(0); n - 1]).unwrap();
            let kind = dichotomy(&eigen_constraint(n, &mu, &p), &closure_residual(n, &mu, &p));
            prop_assert_ne!(kind, Dichotomy::Family);
        }
    }
}
