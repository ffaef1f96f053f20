//! Spectral structure of the quasi-linear system `U_t + A(U) U_x = 0`.
//!
//! `A(U)` has `+1` on the superdiagonal and `-(n-k+1) u_(k-1)` in the first
//! column of row `k`; its characteristic polynomial is `F_p(p, U)`.
//! Eigenvalues are taken from the roots of `F_p` (see [`crate::polyfam`]); the
//! matrix itself is only used through its characteristic polynomial and its
//! explicit right eigenvectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polyfam::{self, CriticalSet, LaxPoly, PolyError, DEFAULT_CLUSTER_TOL};
use crate::solver::FieldState;

/// Relative finite-difference step for nonlinearity: `h = 1e-5 (1 + |U|)`.
pub const NONLINEARITY_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("state has {found} components, system expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("eigenvalue index {index} is not available: only {count} real eigenvalues")]
    NotReal { index: usize, count: usize },
    #[error("real eigenvalue {index} is not simple (gap {gap:e})")]
    NotSimple { index: usize, gap: f64 },
    #[error("real eigenvalue {index} left the real axis within the finite-difference stencil")]
    BranchLost { index: usize },
    #[error("eigenvector for eigenvalue {lambda} is degenerate")]
    DegenerateEigenvector { lambda: f64 },
    #[error("no frames supplied")]
    NoFrames,
}

/// `A(U)` exactly as in the quasi-linear system, `n = U.len()`.
pub fn build_a(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut a = DMatrix::zeros(n, n);
    for k in 0..n {
        if k + 1 < n {
            a[(k, k + 1)] = 1.0;
        }
        if k >= 1 {
            a[(k, 0)] = -((n - k) as f64) * u[k - 1];
        }
    }
    a
}

/// Coefficients of `det(pI - M)` in descending order (Samuelson-Berkowitz,
/// division free).
pub fn charpoly(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(
        n,
        m.ncols(),
        "characteristic polynomial of a non-square matrix"
    );
    if n == 0 {
        return vec![1.0];
    }
    let mut poly = vec![1.0, -m[(0, 0)]];
    for r in 1..n {
        // Partition the leading (r+1)x(r+1) block as [[A_r, C], [R, a_rr]].
        let a_r = m.view((0, 0), (r, r));
        let col = m.view((0, r), (r, 1)).into_owned();
        let row = m.view((r, 0), (1, r)).into_owned();
        let mut toeplitz = Vec::with_capacity(r + 2);
        toeplitz.push(1.0);
        toeplitz.push(-m[(r, r)]);
        let mut power = col.clone();
        for _ in 0..r {
            toeplitz.push(-(&row * &power)[(0, 0)]);
            power = &a_r * power;
        }
        let mut next = vec![0.0; r + 2];
        for (i, slot) in next.iter_mut().enumerate() {
            *slot = (0..=i.min(r)).map(|j| toeplitz[i - j] * poly[j]).sum();
        }
        poly = next;
    }
    poly
}

/// `charpoly(A(U)) - F_p(., U)`, coefficientwise.
pub fn charpoly_residual(u: &[f64]) -> Result<Vec<f64>, PolyError> {
    let f = LaxPoly::new(u.to_vec())?;
    let lhs = charpoly(&build_a(u));
    Ok(lhs
        .iter()
        .zip(f.derivative_coeffs())
        .map(|(a, b)| a - b)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// All eigenvalues real and pairwise separated by more than `gap_tol`.
    StrictlyHyperbolic,
    /// `n` odd, exactly one real eigenvalue, the rest in conjugate pairs.
    OneRealRegime,
    /// All eigenvalues real, at least two of them coinciding.
    DegenerateReal,
    MixedOther,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealEigen {
    pub value: f64,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    /// With multiplicity, lexicographic in (Re, Im).
    pub eigenvalues: Vec<Complex64>,
    pub regime: Regime,
    /// Some gap lies within a factor 10 above `gap_tol`.
    pub borderline: bool,
    pub gap_tol: f64,
    /// The unique real eigenvalue and its unit right eigenvector, if any.
    pub real_eigen: Option<RealEigen>,
    /// `(lambda_i, d lambda_i (xi_i))` for every simple real eigenvalue, with
    /// unit eigenvectors.
    pub nonlinearity: Vec<(f64, f64)>,
}

pub fn default_gap_tol(eigenvalues: &[Complex64]) -> f64 {
    let max = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    1e-8 * (1.0 + max)
}

fn regime_of(eigs: &[Complex64], gap_tol: f64) -> (Regime, bool) {
    let n = eigs.len();
    let mut borderline = false;
    let mut near = |gap: f64| {
        if gap > gap_tol && gap <= 10.0 * gap_tol {
            borderline = true;
        }
    };
    let mut real: Vec<f64> = Vec::new();
    for z in eigs {
        near(z.im.abs());
        if z.im.abs() <= gap_tol {
            real.push(z.re);
        }
    }
    real.sort_by(f64::total_cmp);
    let mut min_gap = f64::INFINITY;
    for w in real.windows(2) {
        let g = w[1] - w[0];
        near(g);
        min_gap = min_gap.min(g);
    }
    let regime = if real.len() == n {
        if min_gap > gap_tol {
            Regime::StrictlyHyperbolic
        } else {
            Regime::DegenerateReal
        }
    } else if n % 2 == 1 && real.len() == 1 {
        Regime::OneRealRegime
    } else {
        Regime::MixedOther
    };
    (regime, borderline)
}

/// Regime census of a single state.
pub fn classify_state(u: &[f64], gap_tol: Option<f64>) -> Result<SpectralData, SpectralError> {
    let f = LaxPoly::new(u.to_vec())?;
    let cs = polyfam::critical_points(&f, DEFAULT_CLUSTER_TOL)?;
    let eigenvalues = cs.expanded();
    let gap_tol = gap_tol.unwrap_or_else(|| default_gap_tol(&eigenvalues));
    let (regime, borderline) = regime_of(&eigenvalues, gap_tol);

    let sys = LaxSystem::new(u.len());
    let real = sys.real_eigenvalues(u)?;
    let real_eigen = if real.len() == 1 {
        let vector = sys.eigenvector(u, real[0])?;
        Some(RealEigen {
            value: real[0],
            vector: normalize(vector, Normalization::Unit)
                .iter()
                .copied()
                .collect(),
        })
    } else {
        None
    };
    let nonlinearity = (0..real.len())
        .filter_map(|i| {
            genuine_nonlinearity(&sys, u, i, Normalization::Unit)
                .ok()
                .map(|d| (real[i], d))
        })
        .collect();

    Ok(SpectralData {
        eigenvalues,
        regime,
        borderline,
        gap_tol,
        real_eigen,
        nonlinearity,
    })
}

/// A quasi-linear system `W_t + M(W) W_x = 0` with enough spectral
/// information to measure genuine nonlinearity.
pub trait QuasiLinear {
    fn dim(&self) -> usize;
    fn matrix(&self, state: &[f64]) -> DMatrix<f64>;
    /// Real eigenvalues in ascending order, with multiplicity.
    fn real_eigenvalues(&self, state: &[f64]) -> Result<Vec<f64>, SpectralError>;
    /// A right eigenvector for the real eigenvalue `lambda`, in the system's
    /// natural scaling.
    fn eigenvector(&self, state: &[f64], lambda: f64) -> Result<DVector<f64>, SpectralError>;
}

/// The `n`-component system generated by the Lax polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaxSystem {
    pub n: usize,
}

impl LaxSystem {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    fn check(&self, state: &[f64]) -> Result<(), SpectralError> {
        if state.len() == self.n {
            Ok(())
        } else {
            Err(SpectralError::DimensionMismatch {
                expected: self.n,
                found: state.len(),
            })
        }
    }
}

impl QuasiLinear for LaxSystem {
    fn dim(&self) -> usize {
        self.n
    }

    fn matrix(&self, state: &[f64]) -> DMatrix<f64> {
        build_a(state)
    }

    fn real_eigenvalues(&self, state: &[f64]) -> Result<Vec<f64>, SpectralError> {
        self.check(state)?;
        let cs = polyfam::critical_points(&LaxPoly::new(state.to_vec())?, DEFAULT_CLUSTER_TOL)?;
        let mut real: Vec<f64> = cs
            .expanded()
            .into_iter()
            .filter(|z| z.im == 0.0)
            .map(|z| z.re)
            .collect();
        real.sort_by(f64::total_cmp);
        Ok(real)
    }

    /// `xi_1 = 1`, `xi_(k+1) = lambda xi_k + (n-k+1) u_(k-1)`.
    fn eigenvector(&self, state: &[f64], lambda: f64) -> Result<DVector<f64>, SpectralError> {
        self.check(state)?;
        let n = self.n;
        let mut xi = DVector::zeros(n);
        xi[0] = 1.0;
        for k in 1..n {
            let coupling = if k >= 2 {
                (n - k + 1) as f64 * state[k - 2]
            } else {
                0.0
            };
            xi[k] = lambda * xi[k - 1] + coupling;
        }
        Ok(xi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// Unit Euclidean norm, first nonzero component positive.
    Unit,
    /// Whatever scaling the system's eigenvector formula produces.
    Natural,
}

pub fn normalize(mut v: DVector<f64>, how: Normalization) -> DVector<f64> {
    if how == Normalization::Unit {
        let norm = v.norm();
        if norm > 0.0 {
            v /= norm;
        }
        if let Some(first) = v.iter().copied().find(|x| *x != 0.0) {
            if first < 0.0 {
                v = -v;
            }
        }
    }
    v
}

fn simple_real(sys: &impl QuasiLinear, state: &[f64], index: usize) -> Result<f64, SpectralError> {
    let real = sys.real_eigenvalues(state)?;
    if index >= real.len() {
        return Err(SpectralError::NotReal {
            index,
            count: real.len(),
        });
    }
    let lambda = real[index];
    let gap = real
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != index)
        .map(|(_, x)| (x - lambda).abs())
        .fold(f64::INFINITY, f64::min);
    if gap <= 1e-8 * (1.0 + lambda.abs()) {
        return Err(SpectralError::NotSimple { index, gap });
    }
    Ok(lambda)
}

fn shifted_eigenvalue(
    sys: &impl QuasiLinear,
    state: &[f64],
    dir: &DVector<f64>,
    h: f64,
    index: usize,
    count: usize,
) -> Result<f64, SpectralError> {
    let moved: Vec<f64> = state
        .iter()
        .zip(dir.iter())
        .map(|(s, d)| s + h * d)
        .collect();
    let real = sys.real_eigenvalues(&moved)?;
    if real.len() != count {
        return Err(SpectralError::BranchLost { index });
    }
    Ok(real[index])
}

/// `d lambda_i (xi_i)`: derivative of the `index`-th real eigenvalue (ascending
/// order) along its own right eigenvector, by central differences with one
/// Richardson extrapolation.
pub fn genuine_nonlinearity(
    sys: &impl QuasiLinear,
    state: &[f64],
    index: usize,
    how: Normalization,
) -> Result<f64, SpectralError> {
    if state.len() != sys.dim() {
        return Err(SpectralError::DimensionMismatch {
            expected: sys.dim(),
            found: state.len(),
        });
    }
    let lambda = simple_real(sys, state, index)?;
    let count = sys.real_eigenvalues(state)?.len();
    let xi = normalize(sys.eigenvector(state, lambda)?, how);
    if xi.norm() == 0.0 {
        return Err(SpectralError::DegenerateEigenvector { lambda });
    }
    let norm_u = state.iter().map(|x| x * x).sum::<f64>().sqrt();
    let h = NONLINEARITY_STEP * (1.0 + norm_u);
    let central = |h: f64| -> Result<f64, SpectralError> {
        let plus = shifted_eigenvalue(sys, state, &xi, h, index, count)?;
        let minus = shifted_eigenvalue(sys, state, &xi, -h, index, count)?;
        Ok((plus - minus) / (2.0 * h))
    };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// A maximal run of cells `[start, end)` in one frame sharing a regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRegion {
    pub frame: usize,
    pub start: usize,
    pub end: usize,
    pub regime: Regime,
}

/// Critical-value (Riemann invariant) fields over a sequence of frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiemannFields {
    /// `regimes[frame][cell]`.
    pub regimes: Vec<Vec<Regime>>,
    /// `eigenvalues[frame][branch][cell]`, branches continued along each row.
    pub eigenvalues: Vec<Vec<Vec<Complex64>>>,
    /// `values[frame][branch][cell] = F(eigenvalues[frame][branch][cell])`.
    pub values: Vec<Vec<Vec<Complex64>>>,
    /// Critical value at the unique real critical point, where there is one.
    pub rho: Vec<Vec<Option<f64>>>,
    pub regions: Vec<RegimeRegion>,
    /// One regime over every cell of every frame.
    pub consistent: bool,
    /// Frames whose rows could not be continued unambiguously; those rows keep
    /// the per-cell lexicographic order.
    pub untracked_frames: Vec<usize>,
}

impl RiemannFields {
    /// `(lambda, r)` of the `index`-th real eigenvalue in ascending order at
    /// one cell, if present.
    pub fn real_branch(&self, frame: usize, cell: usize, index: usize) -> Option<(f64, f64)> {
        let mut real: Vec<(f64, f64)> = self.eigenvalues[frame]
            .iter()
            .zip(&self.values[frame])
            .filter(|(e, _)| e[cell].im == 0.0)
            .map(|(e, v)| (e[cell].re, v[cell].re))
            .collect();
        real.sort_by(|a, b| a.0.total_cmp(&b.0));
        real.get(index).copied()
    }
}

pub fn riemann_fields(frames: &[FieldState]) -> Result<RiemannFields, SpectralError> {
    let first = frames.first().ok_or(SpectralError::NoFrames)?;
    let n = first.components.len();
    let mut out = RiemannFields {
        regimes: Vec::new(),
        eigenvalues: Vec::new(),
        values: Vec::new(),
        rho: Vec::new(),
        regions: Vec::new(),
        consistent: true,
        untracked_frames: Vec::new(),
    };
    let mut global: Option<Regime> = None;

    for (fi, frame) in frames.iter().enumerate() {
        if frame.components.len() != n {
            return Err(SpectralError::DimensionMismatch {
                expected: n,
                found: frame.components.len(),
            });
        }
        let cells = frame.cells();
        let polys: Vec<LaxPoly> = (0..cells)
            .map(|c| LaxPoly::new(frame.state_at(c)))
            .collect::<Result<_, _>>()?;
        let sets: Vec<CriticalSet> = polys
            .iter()
            .map(|p| polyfam::critical_points(p, DEFAULT_CLUSTER_TOL))
            .collect::<Result<_, _>>()?;
        let regimes: Vec<Regime> = sets
            .iter()
            .map(|cs| {
                let e = cs.expanded();
                regime_of(&e, default_gap_tol(&e)).0
            })
            .collect();

        let mut start = 0;
        for c in 1..=cells {
            if c == cells || regimes[c] != regimes[start] {
                out.regions.push(RegimeRegion {
                    frame: fi,
                    start,
                    end: c,
                    regime: regimes[start],
                });
                start = c;
            }
        }
        for &r in &regimes {
            match global {
                None => global = Some(r),
                Some(g) if g != r => out.consistent = false,
                _ => {}
            }
        }

        // Branch locations: continued along the row when the row is of one
        // regime, otherwise the per-cell (Re, Im) order.
        let row_uniform = regimes.iter().all(|r| *r == regimes[0]);
        let tracked = if row_uniform {
            polyfam::track_roots(&polys, polyfam::DEFAULT_MATCH_TOL).ok()
        } else {
            None
        };
        let branches: Vec<Vec<Complex64>> = match tracked {
            Some(t) => {
                // snap tracked raw roots onto the clustered critical points
                t.branches
                    .iter()
                    .map(|b| {
                        b.iter()
                            .enumerate()
                            .map(|(c, z)| nearest(&sets[c].expanded(), *z))
                            .collect()
                    })
                    .collect()
            }
            None => {
                if row_uniform {
                    out.untracked_frames.push(fi);
                }
                let per_cell: Vec<Vec<Complex64>> = sets.iter().map(|cs| cs.expanded()).collect();
                (0..n)
                    .map(|b| per_cell.iter().map(|e| e[b]).collect())
                    .collect()
            }
        };
        let values = branches
            .iter()
            .map(|b| {
                b.iter()
                    .enumerate()
                    .map(|(c, z)| {
                        let v = polys[c].eval(*z);
                        if z.im == 0.0 {
                            Complex64::new(v.re, 0.0)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();

        out.rho.push(sets.iter().map(|cs| cs.real_value).collect());
        out.regimes.push(regimes);
        out.eigenvalues.push(branches);
        out.values.push(values);
    }
    Ok(out)
}

fn nearest(candidates: &[Complex64], z: Complex64) -> Complex64 {
    candidates
        .iter()
        .copied()
        .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
        .unwrap_or(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matrix_examples() {
        let a = build_a(&[0.3, -0.7, 1.1]);
        let expect = [[0.0, 1.0, 0.0], [-0.6, 0.0, 1.0], [0.7, 0.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[(i, j)], expect[i][j], "({i},{j})");
            }
        }
        let a = build_a(&[2.0, 5.0]);
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.0]));
        let a = build_a(&[0.0; 4]);
        let mut shift = DMatrix::zeros(4, 4);
        for i in 0..3 {
            shift[(i, i + 1)] = 1.0;
        }
        assert_eq!(a, shift);
        assert_eq!(a.pow(4), DMatrix::zeros(4, 4));
    }

    /// Cofactor expansion of det(pI - M) on polynomial entries.
    fn cofactor_charpoly(m: &DMatrix<f64>) -> Vec<f64> {
        fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
            let mut out = vec![0.0; a.len() + b.len() - 1];
            for (i, x) in a.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            out
        }
        fn add(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
            let len = a.len().max(b.len());
            let mut out = vec![0.0; len];
            for (i, x) in a.iter().enumerate() {
                out[i] += x;
            }
            for (i, y) in b.iter().enumerate() {
                out[i] += sign * y;
            }
            out
        }
        // ascending-coefficient entries of pI - M
        fn det(e: &[Vec<Vec<f64>>]) -> Vec<f64> {
            let n = e.len();
            if n == 1 {
                return e[0][0].clone();
            }
            let mut acc = vec![0.0];
            for j in 0..n {
                let minor: Vec<Vec<Vec<f64>>> = e[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != j)
                            .map(|(_, x)| x.clone())
                            .collect()
                    })
                    .collect();
                let term = mul(&e[0][j], &det(&minor));
                acc = add(&acc, &term, if j % 2 == 0 { 1.0 } else { -1.0 });
            }
            acc
        }
        let n = m.nrows();
        let e: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            vec![-m[(i, j)], 1.0]
                        } else {
                            vec![-m[(i, j)]]
                        }
                    })
                    .collect()
            })
            .collect();
        let mut asc = det(&e);
        asc.resize(n + 1, 0.0);
        asc.reverse();
        asc
    }

    #[test]
    fn charpoly_of_witness() {
        let c = charpoly(&build_a(&[-1.5, 2.0, 0.0]));
        assert_eq!(c, vec![1.0, 0.0, -3.0, 2.0]);
        assert!(charpoly_residual(&[-1.5, 2.0, 0.0])
            .unwrap()
            .iter()
            .all(|x| *x == 0.0));
        assert_eq!(
            charpoly(&build_a(&[0.0; 5])),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn berkowitz_agrees_with_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=6 {
            for _ in 0..20 {
                let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                let a = charpoly(&m);
                let b = cofactor_charpoly(&m);
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-12, "n = {n}: {a:?} vs {b:?}");
                }
            }
        }
    }

    #[test]
    fn char_poly_identity_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=8 {
            for _ in 0..100 {
                let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let res = charpoly_residual(&u).unwrap();
                let scale = 1.0 + u.iter().fold(0.0f64, |m, x| m.max(x.abs())) * n as f64;
                assert!(res.iter().all(|x| x.abs() <= 1e-10 * scale), "{res:?}");
            }
        }
    }

    #[test]
    fn classify_examples() {
        let d = classify_state(&[1.0, 0.0, 0.0], None).unwrap();
        assert_eq!(d.regime, Regime::OneRealRegime);
        let real = d.real_eigen.unwrap();
        assert_eq!(real.value, 0.0);
        // (A - 0 I) xi = 0 for xi = (1, 0, 2 u1) / |.|
        let a = build_a(&[1.0, 0.0, 0.0]);
        let xi = DVector::from_vec(real.vector.clone());
        assert!((a * &xi).norm() < 1e-15);

        assert_eq!(
            classify_state(&[-1.5, 2.0, 0.0], None).unwrap().regime,
            Regime::DegenerateReal
        );
        assert_eq!(
            classify_state(&[0.0; 4], None).unwrap().regime,
            Regime::DegenerateReal
        );
        // p^3 - 7p + 6 = (p - 1)(p - 2)(p + 3)
        let d = classify_state(&[-3.5, 6.0, 0.0], None).unwrap();
        assert_eq!(d.regime, Regime::StrictlyHyperbolic);
        assert_eq!(d.nonlinearity.len(), 3);
        // n = 4 with roots +-i, +-2i
        let d = classify_state(&[5.0 / 3.0, 0.0, 4.0, 0.0], None).unwrap();
        assert_eq!(d.regime, Regime::MixedOther);
    }

    #[test]
    fn borderline_flag_near_regime_boundary() {
        // p^3 - 3p + 2 + eps: a near-double root splits by ~sqrt(eps/3)
        let eps = 3e-14;
        let d = classify_state(&[-1.5, 2.0 - eps, 0.0], Some(1e-7)).unwrap();
        assert!(d.borderline || d.regime != Regime::StrictlyHyperbolic);
    }

    #[test]
    fn eigenvector_recursion_solves_the_matrix() {
        let u = [-3.5, 6.0, 0.4];
        let sys = LaxSystem::new(3);
        for lambda in sys.real_eigenvalues(&u).unwrap() {
            let xi = sys.eigenvector(&u, lambda).unwrap();
            let r = build_a(&u) * &xi - &xi * lambda;
            assert!(r.norm() < 1e-12 * (1.0 + xi.norm()));
        }
    }

    #[test]
    fn normalizations_differ_by_the_eigenvector_scale() {
        let u = [-3.5, 6.0, 0.4];
        let sys = LaxSystem::new(3);
        let real = sys.real_eigenvalues(&u).unwrap();
        for i in 0..3 {
            let unit = genuine_nonlinearity(&sys, &u, i, Normalization::Unit).unwrap();
            let nat = genuine_nonlinearity(&sys, &u, i, Normalization::Natural).unwrap();
            let xi = sys.eigenvector(&u, real[i]).unwrap();
            // xi_1 = 1 > 0, so the unit vector is xi / |xi|
            assert!(
                (nat - unit * xi.norm()).abs() < 1e-7 * (1.0 + nat.abs()),
                "{nat} {unit}"
            );
        }
    }

    #[test]
    fn nonlinearity_requires_simple_real_eigenvalue() {
        let sys = LaxSystem::new(3);
        assert!(matches!(
            genuine_nonlinearity(&sys, &[-1.5, 2.0, 0.0], 1, Normalization::Unit),
            Err(SpectralError::NotSimple { .. })
        ));
        assert!(matches!(
            genuine_nonlinearity(&sys, &[1.0, 0.0, 0.0], 1, Normalization::Unit),
            Err(SpectralError::NotReal { index: 1, count: 1 })
        ));
    }

    fn frame(components: Vec<Vec<f64>>) -> FieldState {
        FieldState { components }
    }

    #[test]
    fn riemann_fields_of_constant_state() {
        let cells = 8;
        let f = frame(vec![vec![-3.5; cells], vec![6.0; cells], vec![0.25; cells]]);
        let rf = riemann_fields(&[f.clone(), f]).unwrap();
        assert!(rf.consistent);
        assert_eq!(rf.regions.len(), 2);
        for frame in &rf.values {
            for branch in frame {
                assert!(branch.iter().all(|v| *v == branch[0]));
            }
        }
        assert_eq!(rf.real_branch(0, 3, 0).unwrap().0.round(), -3.0);
    }

    #[test]
    fn riemann_fields_conjugate_branches_and_regions() {
        let cells = 16;
        let u: Vec<f64> = (0..cells)
            .map(|i| 0.1 * (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / cells as f64).cos())
            .collect();
        let u3: Vec<f64> = u.iter().map(|x| x * x).collect();
        let f = frame(vec![u.clone(), vec![0.0; cells], u3]);
        let rf = riemann_fields(&[f]).unwrap();
        assert!(!rf.consistent);
        assert!(rf.regions.len() >= 2);
        for c in 0..cells {
            let regime = rf.regimes[0][c];
            if regime == Regime::OneRealRegime {
                let e: Vec<Complex64> = rf.eigenvalues[0].iter().map(|b| b[c]).collect();
                let v: Vec<Complex64> = rf.values[0].iter().map(|b| b[c]).collect();
                let up = e.iter().position(|z| z.im > 0.0).unwrap();
                let down = e.iter().position(|z| z.im < 0.0).unwrap();
                assert_eq!(e[up], e[down].conj());
                assert_eq!(v[up], v[down].conj());
                // rho = F(0) = u^2
                assert!((rf.rho[0][c].unwrap() - u[c] * u[c]).abs() < 1e-15);
            } else {
                assert_eq!(regime, Regime::StrictlyHyperbolic);
            }
        }
    }
}
