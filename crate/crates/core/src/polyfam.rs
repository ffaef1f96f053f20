//! The normalized polynomial family
//!
//! ```text
//! F(p, U) = p^(n+1) / (n+1) + u1 p^(n-1) + ... + un
//! ```
//!
//! together with its critical points (roots of `F_p`), critical values,
//! multiplicity strata and the Jacobian of the critical values with respect to
//! the coefficients `U`.
//!
//! Critical points are found as eigenvalues of the balanced companion matrix
//! of `F_p`, polished by Newton's method and grouped into multiple points by
//! single-linkage clustering.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assign::min_cost_assignment;
use crate::roots;

/// Default clustering radius, relative to `1 + |lambda|`.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

/// Default tolerance used to decide whether two root matchings tie.
pub const DEFAULT_MATCH_TOL: f64 = 1e-9;

/// Smallest accepted `sigma_min / sigma_max` for the stratum chart.
pub const STRATUM_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PolyError {
    #[error("Lax polynomial needs n >= 2, got n = {0}")]
    DegreeTooSmall(usize),
    #[error("coefficient u{index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("cluster tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error(
        "root finder did not converge within {iterations} iterations \
         (backward residuals: {residuals:?})"
    )]
    NoConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },
    #[error("root path is empty")]
    EmptyPath,
    #[error("root path mixes degrees: sample {index} has n = {found}, expected {expected}")]
    MixedDegree {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error(
        "ambiguous root matching between samples {step} and {}: two assignments \
         differ by {gap:e}; refine the path",
        step + 1
    )]
    AmbiguousMatching { step: usize, gap: f64 },
    #[error(
        "stratum {signature:?} chart is numerically singular \
         (condition number {condition:e}); clustering does not match the roots"
    )]
    StratumDegenerate {
        signature: Vec<usize>,
        condition: f64,
    },
    #[error("expected {expected} critical value rates, got {found}")]
    RateLength { expected: usize, found: usize },
}

/// `F = p^(n+1)/(n+1) + u1 p^(n-1) + ... + un`.
///
/// Only `(u1, ..., un)` is stored: the leading coefficient is `1/(n+1)` and
/// the `p^n` coefficient is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaxPoly {
    coeffs: Vec<f64>,
}

impl LaxPoly {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, PolyError> {
        if coeffs.len() < 2 {
            return Err(PolyError::DegreeTooSmall(coeffs.len()));
        }
        if let Some((i, &value)) = coeffs.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(PolyError::NonFinite {
                index: i + 1,
                value,
            });
        }
        Ok(Self { coeffs })
    }

    pub fn zero(n: usize) -> Result<Self, PolyError> {
        Self::new(vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    /// `(u1, ..., un)`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Descending coefficients of `F`, length `n + 2`.
    pub fn full_coeffs(&self) -> Vec<f64> {
        let n = self.n();
        let mut c = Vec::with_capacity(n + 2);
        c.push(1.0 / (n + 1) as f64);
        c.push(0.0);
        c.extend_from_slice(&self.coeffs);
        c
    }

    /// Descending coefficients of the monic `F_p`, length `n + 1`.
    ///
    /// `u_n` does not appear; `u_j` enters with weight `n - j`.
    pub fn derivative_coeffs(&self) -> Vec<f64> {
        let n = self.n();
        let mut c = Vec::with_capacity(n + 1);
        c.push(1.0);
        c.push(0.0);
        for (j, &u) in self.coeffs[..n - 1].iter().enumerate() {
            c.push((n - 1 - j) as f64 * u);
        }
        c
    }

    /// Horner evaluation of `F` at a complex point.
    pub fn eval(&self, p: Complex64) -> Complex64 {
        roots::eval(&self.full_coeffs(), p)
    }

    /// Value of the `order`-th derivative `d^k F / dp^k` at `p`.
    pub fn eval_derivative(&self, order: usize, p: Complex64) -> Complex64 {
        let mut c = self.full_coeffs();
        for _ in 0..order {
            c = roots::derivative(&c);
        }
        if c.is_empty() {
            Complex64::new(0.0, 0.0)
        } else {
            roots::eval(&c, p)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Complex64,
    pub multiplicity: usize,
}

/// Distinct critical points with multiplicities, their critical values and
/// the stratum signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet {
    /// Ordered lexicographically by (Re, Im).
    pub points: Vec<CriticalPoint>,
    /// `values[i] = F(points[i])`.
    pub values: Vec<Complex64>,
    /// Set when exactly one distinct critical point is real.
    pub real_value: Option<f64>,
    /// Multiplicities sorted in non-increasing order.
    pub signature: Vec<usize>,
}

impl CriticalSet {
    pub fn is_morse(&self) -> bool {
        self.signature.iter().all(|&m| m == 1)
    }

    pub fn locations(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.location).collect()
    }

    /// Critical points repeated according to multiplicity.
    pub fn expanded(&self) -> Vec<Complex64> {
        self.points
            .iter()
            .flat_map(|p| std::iter::repeat(p.location).take(p.multiplicity))
            .collect()
    }
}

fn lexicographic(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn check_tol(tol: f64) -> Result<(), PolyError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(PolyError::BadTolerance(tol))
    }
}

/// Roots of `F_p` with multiplicity, no clustering, ordered by (Re, Im).
pub fn derivative_roots(f: &LaxPoly) -> Result<Vec<Complex64>, PolyError> {
    let mut r =
        roots::monic_roots(&f.derivative_coeffs()).map_err(|e| PolyError::NoConvergence {
            iterations: e.iterations,
            residuals: e.residuals,
        })?;
    r.sort_by(lexicographic);
    Ok(r)
}

fn radius(tol: f64, a: Complex64, b: Complex64) -> f64 {
    tol * (1.0 + a.norm().max(b.norm()))
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage groups of raw roots; returns member index lists.
fn linkage_groups(raw: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..raw.len()).collect();
    for i in 0..raw.len() {
        for j in i + 1..raw.len() {
            if (raw[i] - raw[j]).norm() <= radius(tol, raw[i], raw[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; raw.len()];
    for i in 0..raw.len() {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

fn signature_of(groups: &[Vec<usize>]) -> Vec<usize> {
    let mut s: Vec<usize> = groups.iter().map(Vec::len).collect();
    s.sort_unstable_by(|a, b| b.cmp(a));
    s
}

/// Refines the centre of an `m`-fold cluster as the simple root of
/// `F_p^(m-1)` next to the cluster mean.
fn refine_center(dcoeffs: &[f64], center: Complex64, m: usize) -> Complex64 {
    let mut c = dcoeffs.to_vec();
    for _ in 1..m {
        c = roots::derivative(&c);
    }
    let mut z = center;
    let mut val = roots::eval(&c, z);
    for _ in 0..8 {
        let (p, dp) = roots::eval_with_derivative(&c, z);
        if p.norm() == 0.0 || dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        let next_val = roots::eval(&c, next);
        if !(next_val.norm() < val.norm()) {
            break;
        }
        z = next;
        val = next_val;
    }
    z
}

fn cluster(f: &LaxPoly, raw: &[Complex64], tol: f64) -> Vec<CriticalPoint> {
    let dcoeffs = f.derivative_coeffs();
    let mut points: Vec<CriticalPoint> = linkage_groups(raw, tol)
        .into_iter()
        .map(|members| {
            let m = members.len();
            let mean = members.iter().map(|&i| raw[i]).sum::<Complex64>() / m as f64;
            let mut location = if m > 1 {
                refine_center(&dcoeffs, mean, m)
            } else {
                mean
            };
            if location.im.abs() <= tol * (1.0 + location.norm()) {
                location.im = 0.0;
            }
            CriticalPoint {
                location,
                multiplicity: m,
            }
        })
        .collect();

    // Real coefficients: make non-real points exact conjugates of each other.
    let upper: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].location.im > 0.0)
        .collect();
    let mut taken = vec![false; points.len()];
    for &i in &upper {
        let target = points[i].location.conj();
        let partner = (0..points.len())
            .filter(|&j| {
                !taken[j]
                    && points[j].location.im < 0.0
                    && points[j].multiplicity == points[i].multiplicity
            })
            .min_by(|&a, &b| {
                (points[a].location - target)
                    .norm()
                    .total_cmp(&(points[b].location - target).norm())
            });
        if let Some(j) = partner {
            taken[j] = true;
            points[j].location = target;
        }
    }
    points.sort_by(|a, b| lexicographic(&a.location, &b.location));
    points
}

/// Critical points of `F` with multiplicities, values and signature.
pub fn critical_points(f: &LaxPoly, cluster_tol: f64) -> Result<CriticalSet, PolyError> {
    check_tol(cluster_tol)?;
    let raw = derivative_roots(f)?;
    let points = cluster(f, &raw, cluster_tol);
    let mut signature: Vec<usize> = points.iter().map(|p| p.multiplicity).collect();
    signature.sort_unstable_by(|a, b| b.cmp(a));
    let mut set = CriticalSet {
        points,
        values: Vec::new(),
        real_value: None,
        signature,
    };
    set.values = critical_values(f, &set);
    set.real_value = real_critical_value(&set);
    Ok(set)
}

/// `r_i = F(lambda_i)` for every distinct critical point.
pub fn critical_values(f: &LaxPoly, cs: &CriticalSet) -> Vec<Complex64> {
    let coeffs = f.full_coeffs();
    cs.points
        .iter()
        .map(|p| {
            let v = roots::eval(&coeffs, p.location);
            if p.location.im == 0.0 {
                Complex64::new(v.re, 0.0)
            } else {
                v
            }
        })
        .collect()
}

fn real_critical_value(cs: &CriticalSet) -> Option<f64> {
    let mut real = cs
        .points
        .iter()
        .zip(&cs.values)
        .filter(|(p, _)| p.location.im == 0.0);
    match (real.next(), real.next()) {
        (Some((_, v)), None) => Some(v.re),
        _ => None,
    }
}

/// `J[i][j] = d r_i / d u_(j+1) = lambda_i^(n-j-1)`; a `k x n` matrix, square
/// Vandermonde on the Morse stratum.
pub fn critical_value_jacobian(f: &LaxPoly, cs: &CriticalSet) -> DMatrix<Complex64> {
    let n = f.n();
    DMatrix::from_fn(cs.points.len(), n, |i, j| {
        cs.points[i].location.powu((n - 1 - j) as u32)
    })
}

/// Stratum signature with a flag when the tolerance band `[tol/10, 10 tol]`
/// admits two different clusterings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumClass {
    pub signature: Vec<usize>,
    /// `(finer, coarser)` signatures when they disagree.
    pub ambiguous: Option<(Vec<usize>, Vec<usize>)>,
}

pub fn classify_stratum(f: &LaxPoly, cluster_tol: f64) -> Result<StratumClass, PolyError> {
    check_tol(cluster_tol)?;
    let raw = derivative_roots(f)?;
    let signature = signature_of(&linkage_groups(&raw, cluster_tol));
    let fine = signature_of(&linkage_groups(&raw, cluster_tol / 10.0));
    let coarse = signature_of(&linkage_groups(&raw, cluster_tol * 10.0));
    let ambiguous = (fine != coarse).then_some((fine, coarse));
    Ok(StratumClass {
        signature,
        ambiguous,
    })
}

/// Continuous root branches along a sampled path of polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootTracks {
    /// `branches[b][s]`: location of branch `b` at sample `s`.
    pub branches: Vec<Vec<Complex64>>,
    /// Continuity certificate: largest single-step displacement.
    pub max_jump: f64,
    /// For a closed path, `closing_permutation[b]` is the starting branch whose
    /// initial root branch `b` ends on.
    pub closing_permutation: Option<Vec<usize>>,
}

impl RootTracks {
    pub fn at(&self, sample: usize) -> Vec<Complex64> {
        self.branches.iter().map(|b| b[sample]).collect()
    }
}

/// Matches the roots of consecutive samples by minimal total displacement.
///
/// A step is rejected when a pairwise swap of the chosen matching costs within
/// `match_tol` of the optimum while moving two distinct roots onto two
/// distinct targets.
pub fn track_roots(path: &[LaxPoly], match_tol: f64) -> Result<RootTracks, PolyError> {
    check_tol(match_tol)?;
    let first = path.first().ok_or(PolyError::EmptyPath)?;
    let n = first.n();
    if let Some((index, p)) = path.iter().enumerate().find(|(_, p)| p.n() != n) {
        return Err(PolyError::MixedDegree {
            index,
            expected: n,
            found: p.n(),
        });
    }

    let start = derivative_roots(first)?;
    let mut branches: Vec<Vec<Complex64>> = start.iter().map(|&z| vec![z]).collect();
    let mut prev = start.clone();
    let mut max_jump: f64 = 0.0;

    for (step, sample) in path.iter().enumerate().skip(1) {
        let next = derivative_roots(sample)?;
        let cost: Vec<Vec<f64>> = prev
            .iter()
            .map(|a| next.iter().map(|b| (a - b).norm()).collect())
            .collect();
        let asg = min_cost_assignment(&cost);
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (asg[i], asg[j]);
                let base = cost[i][a] + cost[j][b];
                let gap = cost[i][b] + cost[j][a] - base;
                let scale = 1.0 + base;
                let distinct_src = (prev[i] - prev[j]).norm() > match_tol * (1.0 + prev[i].norm());
                let distinct_dst = (next[a] - next[b]).norm() > match_tol * (1.0 + next[a].norm());
                if gap <= match_tol * scale && distinct_src && distinct_dst {
                    return Err(PolyError::AmbiguousMatching {
                        step: step - 1,
                        gap,
                    });
                }
            }
        }
        for (i, branch) in branches.iter_mut().enumerate() {
            let z = next[asg[i]];
            max_jump = max_jump.max((z - prev[i]).norm());
            branch.push(z);
        }
        prev = branches.iter().map(|b| *b.last().unwrap()).collect();
    }

    let last = path.last().unwrap();
    let closed = path.len() > 1
        && first
            .coeffs()
            .iter()
            .zip(last.coeffs())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    let closing_permutation = closed.then(|| {
        prev.iter()
            .map(|z| {
                (0..n)
                    .min_by(|&a, &b| (start[a] - z).norm().total_cmp(&(start[b] - z).norm()))
                    .unwrap()
            })
            .collect()
    });

    Ok(RootTracks {
        branches,
        max_jump,
        closing_permutation,
    })
}

/// `d^k/dp^k p^e` at `z`.
fn power_derivative(e: usize, k: usize, z: Complex64) -> Complex64 {
    if k > e {
        return Complex64::new(0.0, 0.0);
    }
    let falling: f64 = (0..k).map(|i| (e - i) as f64).product();
    z.powu((e - k) as u32) * falling
}

/// The `n x n` linear system describing the stratum chart at `F`:
/// one critical-value row `dF(lambda_i)` per distinct point followed by the
/// tangency rows `dF^(j)(lambda_i)`, `1 <= j <= m_i - 1`, in the unknowns
/// `dU`.
pub fn stratum_system(f: &LaxPoly, cs: &CriticalSet) -> DMatrix<Complex64> {
    let n = f.n();
    let mut rows: Vec<Vec<Complex64>> = cs
        .points
        .iter()
        .map(|p| {
            (0..n)
                .map(|j| power_derivative(n - 1 - j, 0, p.location))
                .collect()
        })
        .collect();
    for p in &cs.points {
        for order in 1..p.multiplicity {
            rows.push(
                (0..n)
                    .map(|j| power_derivative(n - 1 - j, order, p.location))
                    .collect(),
            );
        }
    }
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Coefficient velocity `dU` along the stratum that produces the given rates
/// of change of the critical values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumVelocity {
    pub velocity: Vec<f64>,
    pub signature: Vec<usize>,
    pub sigma_min: f64,
    pub condition: f64,
}

pub fn stratum_velocity(
    f: &LaxPoly,
    cs: &CriticalSet,
    rates: &[Complex64],
) -> Result<StratumVelocity, PolyError> {
    let n = f.n();
    let k = cs.points.len();
    if rates.len() != k {
        return Err(PolyError::RateLength {
            expected: k,
            found: rates.len(),
        });
    }
    let m = stratum_system(f, cs);
    let svd = m.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let condition = sigma_max / sigma_min;
    if !(sigma_min > STRATUM_RCOND * sigma_max) {
        return Err(PolyError::StratumDegenerate {
            signature: cs.signature.clone(),
            condition,
        });
    }
    let mut rhs = DVector::<Complex64>::zeros(n);
    for (i, r) in rates.iter().enumerate() {
        rhs[i] = *r;
    }
    let du = svd
        .solve(&rhs, 0.0)
        .expect("SVD computed with both singular-vector sets");
    Ok(StratumVelocity {
        velocity: du.iter().map(|z| z.re).collect(),
        signature: cs.signature.clone(),
        sigma_min,
        condition,
    })
}

/// Velocity of a curve on the stratum of `F` along which every critical value
/// stays constant. The chart is nonsingular on every stratum, so the result
/// is the zero vector up to roundoff.
pub fn constant_value_continuation(
    f: &LaxPoly,
    cluster_tol: f64,
) -> Result<StratumVelocity, PolyError> {
    let cs = critical_points(f, cluster_tol)?;
    let zeros = vec![Complex64::new(0.0, 0.0); cs.points.len()];
    stratum_velocity(f, &cs, &zeros)
}
