//! The strictly hyperbolic 2×2 reduction for `n = 4`:
//!
//! ```text
//! w_t + (w v)_x = 0
//! v_t + (w²/2 - 3v²/2)_x = 0
//! ```
//!
//! A state `(w, v)` lifts to the quintic `F = (p - f)²(p - g)²(p - a) / 5`
//! with `f = v + √5 w`, `g = v - √5 w`, `a = -4v`, whose coefficients solve the
//! four-component Lax system whenever `(w, v)` solves the reduced one.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polyfam::LaxPoly;
use crate::solver::{self, CharField, FieldState, Frame, SolverError, Trajectory};
use crate::spectral::{QuasiLinear, SpectralError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ReductionError {
    #[error("the reduced system is not strictly hyperbolic at the origin")]
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub w: f64,
    pub v: f64,
}

impl ReducedState {
    pub fn new(w: f64, v: f64) -> Self {
        Self { w, v }
    }

    /// `R = sqrt(4v² + w²)`.
    pub fn radius(&self) -> f64 {
        (4.0 * self.v * self.v + self.w * self.w).sqrt()
    }

    pub fn is_strictly_hyperbolic(&self) -> bool {
        self.w != 0.0 || self.v != 0.0
    }

    /// Spectral radius of the flux Jacobian, `|v| + R`.
    pub fn max_speed(&self) -> f64 {
        self.v.abs() + self.radius()
    }

    fn check(&self) -> Result<(), ReductionError> {
        if self.is_strictly_hyperbolic() {
            Ok(())
        } else {
            Err(ReductionError::Origin)
        }
    }
}

/// Roots of the lifted quintic and the half-sum / half-difference variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorData {
    pub f: f64,
    pub g: f64,
    pub a: f64,
    pub h: f64,
    pub q: f64,
}

pub fn factors(s: ReducedState) -> FactorData {
    let h = 5f64.sqrt() * s.w;
    let q = s.v;
    let f = q + h;
    let g = q - h;
    FactorData {
        f,
        g,
        a: -2.0 * (f + g),
        h,
        q,
    }
}

/// Potential `u = u1 = -2(v² + w²)`.
pub fn potential(s: ReducedState) -> f64 {
    -2.0 * (s.v * s.v + s.w * s.w)
}

/// Potential from the factor roots, `-(3f² + 4fg + 3g²) / 5`.
pub fn potential_from_factors(fd: &FactorData) -> f64 {
    -(3.0 * fd.f * fd.f + 4.0 * fd.f * fd.g + 3.0 * fd.g * fd.g) / 5.0
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients `(u1, u2, u3, u4)` of `(p - f)²(p - g)²(p - a) / 5`.
pub fn lift_coeffs(s: ReducedState) -> [f64; 4] {
    let fd = factors(s);
    // (p - f)(p - g) = p² - 2v p + (v² - 5w²) has exact symmetric coefficients
    let quad = [1.0, -(fd.f + fd.g), s.v * s.v - 5.0 * s.w * s.w];
    let quartic = convolve(&quad, &quad);
    let quintic = convolve(&quartic, &[1.0, -fd.a]);
    debug_assert_eq!(quintic.len(), 6);
    [
        quintic[2] / 5.0,
        quintic[3] / 5.0,
        quintic[4] / 5.0,
        quintic[5] / 5.0,
    ]
}

pub fn lift(s: ReducedState) -> LaxPoly {
    LaxPoly::new(lift_coeffs(s).to_vec()).expect("lift of a finite state is a finite quintic")
}

/// `(w v, w²/2 - 3v²/2)`.
pub fn flux(s: ReducedState) -> (f64, f64) {
    (s.w * s.v, 0.5 * s.w * s.w - 1.5 * s.v * s.v)
}

/// Flux Jacobian `[[v, w], [w, -3v]]` in the variables `(w, v)`.
pub fn matrix2(s: ReducedState) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[s.v, s.w, s.w, -3.0 * s.v])
}

/// `(lambda_1, lambda_2) = (-v + R, -v - R)`.
pub fn eigs2(s: ReducedState) -> (f64, f64) {
    let r = s.radius();
    (-s.v + r, -s.v - r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigvec {
    pub vector: [f64; 2],
    /// The closed-form vector vanished (`w = 0`) and the coordinate
    /// eigenvector was substituted.
    pub substituted: bool,
}

/// `xi_1 = (w, R - 2v)`, replaced by `(1, 0)` where it vanishes (`w = 0`,
/// `v > 0`).
pub fn eigvec1(s: ReducedState) -> Result<Eigvec, ReductionError> {
    s.check()?;
    let xi = [s.w, s.radius() - 2.0 * s.v];
    if xi == [0.0, 0.0] {
        return Ok(Eigvec {
            vector: [1.0, 0.0],
            substituted: true,
        });
    }
    Ok(Eigvec {
        vector: xi,
        substituted: false,
    })
}

/// `xi_2 = (w, -R - 2v)`, replaced by `(1, 0)` where it vanishes (`w = 0`,
/// `v < 0`).
pub fn eigvec2(s: ReducedState) -> Result<Eigvec, ReductionError> {
    s.check()?;
    let xi = [s.w, -s.radius() - 2.0 * s.v];
    if xi == [0.0, 0.0] {
        return Ok(Eigvec {
            vector: [1.0, 0.0],
            substituted: true,
        });
    }
    Ok(Eigvec {
        vector: xi,
        substituted: false,
    })
}

/// `d lambda_1 (xi_1) = 6v(R - 2v)/R`.
pub fn nonlinearity1(s: ReducedState) -> Result<f64, ReductionError> {
    s.check()?;
    let r = s.radius();
    Ok(6.0 * s.v * (r - 2.0 * s.v) / r)
}

/// `d lambda_2 (xi_2) = 6v(R + 2v)/R`.
pub fn nonlinearity2(s: ReducedState) -> Result<f64, ReductionError> {
    s.check()?;
    let r = s.radius();
    Ok(6.0 * s.v * (r + 2.0 * s.v) / r)
}

/// The reduced system as a [`QuasiLinear`] system in `(w, v)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReducedSystem;

fn as_state(state: &[f64]) -> Result<ReducedState, SpectralError> {
    match state {
        [w, v] => Ok(ReducedState::new(*w, *v)),
        _ => Err(SpectralError::DimensionMismatch {
            expected: 2,
            found: state.len(),
        }),
    }
}

impl QuasiLinear for ReducedSystem {
    fn dim(&self) -> usize {
        2
    }

    fn matrix(&self, state: &[f64]) -> DMatrix<f64> {
        matrix2(ReducedState::new(state[0], state[1]))
    }

    fn real_eigenvalues(&self, state: &[f64]) -> Result<Vec<f64>, SpectralError> {
        let (l1, l2) = eigs2(as_state(state)?);
        Ok(vec![l2, l1])
    }

    fn eigenvector(&self, state: &[f64], lambda: f64) -> Result<DVector<f64>, SpectralError> {
        let s = as_state(state)?;
        let (l1, l2) = eigs2(s);
        let xi = if (lambda - l1).abs() <= (lambda - l2).abs() {
            eigvec1(s)
        } else {
            eigvec2(s)
        }
        .map_err(|_| SpectralError::DegenerateEigenvector { lambda })?;
        Ok(DVector::from_row_slice(&xi.vector))
    }
}

/// Which characteristic family of the reduced system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// `lambda_1 = -v + R`.
    First,
    /// `lambda_2 = -v - R`.
    Second,
}

/// Riemann invariant of one family: the lifted quintic evaluated at the
/// family's eigenvalue, which is a critical point of it.
pub fn riemann_invariant(s: ReducedState, family: Family) -> f64 {
    let (l1, l2) = eigs2(s);
    let lambda = match family {
        Family::First => l1,
        Family::Second => l2,
    };
    lift(s).eval(num_complex::Complex64::new(lambda, 0.0)).re
}

/// Characteristic speed and Riemann-invariant fields of one family over a
/// reduced trajectory.
pub fn characteristic_fields(traj: &Trajectory, family: Family) -> (CharField, CharField) {
    let mut speed = Vec::with_capacity(traj.frames.len());
    let mut invariant = Vec::with_capacity(traj.frames.len());
    for frame in &traj.frames {
        let w = &frame.state.components[0];
        let v = &frame.state.components[1];
        let mut sp = Vec::with_capacity(w.len());
        let mut inv = Vec::with_capacity(w.len());
        for (w, v) in w.iter().zip(v) {
            let s = ReducedState::new(*w, *v);
            if s.is_strictly_hyperbolic() && w.is_finite() && v.is_finite() {
                let (l1, l2) = eigs2(s);
                sp.push(Some(if family == Family::First { l1 } else { l2 }));
                inv.push(Some(riemann_invariant(s, family)));
            } else {
                sp.push(None);
                inv.push(None);
            }
        }
        speed.push(sp);
        invariant.push(inv);
    }
    (speed, invariant)
}

/// Framewise lift of a reduced trajectory to the four-component Lax system.
pub fn lift_trajectory(traj: &Trajectory) -> Result<Trajectory, SolverError> {
    if traj.frames.first().map(|f| f.state.components.len()) != Some(2) {
        return Err(SolverError::ComponentCount {
            expected: 2,
            found: traj.frames.first().map_or(0, |f| f.state.components.len()),
        });
    }
    let frames = traj
        .frames
        .iter()
        .map(|frame| {
            let w = &frame.state.components[0];
            let v = &frame.state.components[1];
            let mut components = vec![Vec::with_capacity(w.len()); 4];
            for (w, v) in w.iter().zip(v) {
                let c = lift_coeffs(ReducedState::new(*w, *v));
                for (k, comp) in components.iter_mut().enumerate() {
                    comp.push(c[k]);
                }
            }
            Frame {
                t: frame.t,
                state: FieldState { components },
            }
        })
        .collect();
    Ok(Trajectory {
        grid: traj.grid,
        frames,
        meta: traj.meta.clone(),
    })
}

/// Residuals of `f_t + f f_x + u_x = 0` and `g_t + g g_x + u_x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgResidual {
    pub f_sup: f64,
    pub g_sup: f64,
    pub f_l2: f64,
    pub g_l2: f64,
    /// Largest `|u from factors - u from (w, v)|` over all samples.
    pub potential_mismatch: f64,
}

pub fn fg_residual(traj: &Trajectory) -> Result<FgResidual, SolverError> {
    solver::require_frames(traj, 3)?;
    let to_fields = |frame: &Frame| {
        let w = &frame.state.components[0];
        let v = &frame.state.components[1];
        let mut f = Vec::with_capacity(w.len());
        let mut g = Vec::with_capacity(w.len());
        let mut u = Vec::with_capacity(w.len());
        let mut mismatch: f64 = 0.0;
        for (w, v) in w.iter().zip(v) {
            let s = ReducedState::new(*w, *v);
            let fd = factors(s);
            let u_direct = potential(s);
            mismatch = mismatch.max((potential_from_factors(&fd) - u_direct).abs());
            f.push(fd.f);
            g.push(fd.g);
            u.push(u_direct);
        }
        (f, g, u, mismatch)
    };
    let fields: Vec<_> = traj.frames.iter().map(to_fields).collect();
    let dx = traj.grid.dx();
    let cells = traj.grid.cells;
    let mut out = FgResidual {
        f_sup: 0.0,
        g_sup: 0.0,
        f_l2: 0.0,
        g_l2: 0.0,
        potential_mismatch: fields.iter().map(|x| x.3).fold(0.0, f64::max),
    };
    let mut count = 0usize;
    for k in 1..traj.frames.len() - 1 {
        let (wm, _, wp) =
            solver::time_weights(traj.frames[k - 1].t, traj.frames[k].t, traj.frames[k + 1].t);
        let (f, g, u, _) = &fields[k];
        for i in 0..cells {
            let ip = (i + 1) % cells;
            let im = (i + cells - 1) % cells;
            let ux = (u[ip] - u[im]) / (2.0 * dx);
            let ft = wm * (fields[k - 1].0[i] - f[i]) + wp * (fields[k + 1].0[i] - f[i]);
            let gt = wm * (fields[k - 1].1[i] - g[i]) + wp * (fields[k + 1].1[i] - g[i]);
            let rf = ft + f[i] * (f[ip] - f[im]) / (2.0 * dx) + ux;
            let rg = gt + g[i] * (g[ip] - g[im]) / (2.0 * dx) + ux;
            out.f_sup = out.f_sup.max(rf.abs());
            out.g_sup = out.g_sup.max(rg.abs());
            out.f_l2 += rf * rf;
            out.g_l2 += rg * rg;
            count += 1;
        }
    }
    out.f_l2 = (out.f_l2 / count as f64).sqrt();
    out.g_l2 = (out.g_l2 / count as f64).sqrt();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfam::{critical_points, DEFAULT_CLUSTER_TOL};
    use crate::spectral::{genuine_nonlinearity, Normalization};
    use num_complex::Complex64;

    fn st(w: f64, v: f64) -> ReducedState {
        ReducedState::new(w, v)
    }

    /// Expansion of (1/5) prod (p - r_i) by repeated synthetic multiplication.
    fn expand_oracle(roots: &[f64]) -> Vec<f64> {
        let mut c = vec![1.0];
        for r in roots {
            let mut next = vec![0.0; c.len() + 1];
            for (i, x) in c.iter().enumerate() {
                next[i] += x;
                next[i + 1] -= r * x;
            }
            c = next;
        }
        c.iter().map(|x| x / 5.0).collect()
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift_coeffs(st(0.0, 0.0)), [0.0; 4]);
        let u = lift_coeffs(st(0.0, 1.0));
        let fd = factors(st(0.0, 1.0));
        assert_eq!((fd.f, fd.g, fd.a), (1.0, 1.0, -4.0));
        let expect = [-2.0, 4.0, -3.0, 0.8];
        for (a, b) in u.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{u:?}");
        }
    }

    #[test]
    fn lift_matches_expanded_product() {
        for &(w, v) in &[(0.3, -1.2), (1.0, 1.0), (-2.0, 0.5), (0.7, 0.0)] {
            let s = st(w, v);
            let fd = factors(s);
            let e = expand_oracle(&[fd.f, fd.f, fd.g, fd.g, fd.a]);
            assert!((e[0] - 0.2).abs() < 1e-15);
            assert!(e[1].abs() < 1e-13, "p^4 coefficient {}", e[1]);
            let u = lift_coeffs(s);
            for k in 0..4 {
                assert!((u[k] - e[k + 2]).abs() < 1e-12 * (1.0 + e[k + 2].abs()));
            }
            assert!((u[0] - potential(s)).abs() <= 4.0 * f64::EPSILON * (1.0 + u[0].abs()));
            assert!((potential_from_factors(&fd) - potential(s)).abs() < 1e-13);
            assert!((fd.h - (fd.f - fd.g) / 2.0).abs() < 1e-15);
            assert!((fd.q - (fd.f + fd.g) / 2.0).abs() < 1e-15);
            assert!((fd.h / 5f64.sqrt() - w).abs() < 1e-15);
        }
    }

    #[test]
    fn factor_roots_are_critical_points_of_the_lift() {
        for &(w, v) in &[(0.3, -1.2), (1.0, 1.0), (-2.0, 0.5)] {
            let s = st(w, v);
            let fd = factors(s);
            let f = lift(s);
            for r in [fd.f, fd.g] {
                let fp = f.eval_derivative(1, Complex64::new(r, 0.0));
                assert!(fp.norm() < 1e-12, "F_p({r}) = {fp}");
                assert!(f.eval(Complex64::new(r, 0.0)).norm() < 1e-12);
            }
            // the remaining critical points are the reduced eigenvalues
            let (l1, l2) = eigs2(s);
            for l in [l1, l2] {
                assert!(f.eval_derivative(1, Complex64::new(l, 0.0)).norm() < 1e-11);
            }
            let cs = critical_points(&f, DEFAULT_CLUSTER_TOL).unwrap();
            assert_eq!(cs.signature.iter().sum::<usize>(), 4);
        }
    }

    #[test]
    fn flux_examples() {
        assert_eq!(flux(st(1.0, 1.0)), (1.0, -1.0));
        assert_eq!(flux(st(3.0, 0.0)), (0.0, 4.5));
        assert_eq!(flux(st(0.0, 2.0)), (0.0, -6.0));
    }

    #[test]
    fn flux_jacobian_by_finite_differences() {
        let s = st(0.8, -0.35);
        let h = 1e-6;
        let m = matrix2(s);
        let dw = {
            let (a, b) = flux(st(s.w + h, s.v));
            let (c, d) = flux(st(s.w - h, s.v));
            ((a - c) / (2.0 * h), (b - d) / (2.0 * h))
        };
        let dv = {
            let (a, b) = flux(st(s.w, s.v + h));
            let (c, d) = flux(st(s.w, s.v - h));
            ((a - c) / (2.0 * h), (b - d) / (2.0 * h))
        };
        assert!((m[(0, 0)] - dw.0).abs() < 1e-9);
        assert!((m[(1, 0)] - dw.1).abs() < 1e-9);
        assert!((m[(0, 1)] - dv.0).abs() < 1e-9);
        assert!((m[(1, 1)] - dv.1).abs() < 1e-9);
    }

    #[test]
    fn eigen_examples() {
        assert_eq!(eigs2(st(3.0, 2.0)), (3.0, -7.0));
        assert_eq!(eigs2(st(0.0, 1.0)), (1.0, -3.0));
        assert_eq!(eigs2(st(0.0, 0.0)), (0.0, 0.0));
        assert_eq!(eigvec1(st(3.0, 2.0)).unwrap().vector, [3.0, 1.0]);
        assert_eq!(eigvec1(st(1.0, 0.0)).unwrap().vector, [1.0, 1.0]);
        let e = eigvec1(st(0.0, 1.0)).unwrap();
        assert_eq!(e.vector, [1.0, 0.0]);
        assert!(e.substituted);
        assert_eq!(eigvec1(st(0.0, 0.0)), Err(ReductionError::Origin));
        assert_eq!(nonlinearity1(st(0.0, 0.0)), Err(ReductionError::Origin));
    }

    #[test]
    fn eigenvectors_solve_the_matrix() {
        for &(w, v) in &[(3.0, 2.0), (1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (-0.4, 0.9)] {
            let s = st(w, v);
            let (l1, l2) = eigs2(s);
            let m = matrix2(s);
            for (l, xi) in [(l1, eigvec1(s).unwrap()), (l2, eigvec2(s).unwrap())] {
                let x = DVector::from_row_slice(&xi.vector);
                assert!((&m * &x - &x * l).norm() <= 1e-12, "({w},{v})");
                assert!(x.norm() > 0.0);
            }
        }
    }

    #[test]
    fn nonlinearity_closed_form_vs_finite_differences() {
        let nl = nonlinearity1(st(3.0, 2.0)).unwrap();
        assert!((nl - 2.4).abs() < 1e-15);
        let fd =
            genuine_nonlinearity(&ReducedSystem, &[3.0, 2.0], 1, Normalization::Natural).unwrap();
        assert!((fd - 2.4).abs() < 1e-6 * 2.4, "{fd}");
        assert_eq!(nonlinearity1(st(1.0, 0.0)).unwrap(), 0.0);
        assert_eq!(nonlinearity1(st(-1.7, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn sign_of_nonlinearity_follows_v() {
        for i in -10..=10 {
            for j in -10..=10 {
                let s = st(0.2 * i as f64, 0.2 * j as f64);
                if s.w == 0.0 {
                    continue;
                }
                let nl = nonlinearity1(s).unwrap();
                assert_eq!(
                    nl.signum() * (nl != 0.0) as i32 as f64,
                    s.v.signum() * (s.v != 0.0) as i32 as f64
                );
            }
        }
    }

    #[test]
    fn second_family_mirrors_the_first() {
        for &(w, v) in &[(0.5, 0.3), (-1.2, 0.8), (2.0, -0.1)] {
            let first =
                genuine_nonlinearity(&ReducedSystem, &[w, v], 1, Normalization::Natural).unwrap();
            let second =
                genuine_nonlinearity(&ReducedSystem, &[w, -v], 0, Normalization::Natural).unwrap();
            assert!(
                (first + second).abs() < 1e-7 * (1.0 + first.abs()),
                "{first} {second}"
            );
            assert!((nonlinearity2(st(w, -v)).unwrap() + first).abs() < 1e-7 * (1.0 + first.abs()));
        }
    }
}
