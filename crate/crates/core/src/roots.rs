//! Companion-matrix root finder for real monic polynomials.
//!
//! Coefficients are stored in descending order, `coeffs[0]` being the leading
//! one. Roots come from the eigenvalues of the balanced companion matrix and
//! are then polished by a few Newton steps on the original polynomial.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

const NEWTON_STEPS: usize = 8;
/// Largest accepted backward error `|p(z)| / sum |a_k| |z|^k`.
const BACKWARD_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub(crate) struct RootFailure {
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

pub(crate) fn eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Value and first derivative by a single Horner sweep.
pub(crate) fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// `sum |a_k| |z|^k`, the natural scale of a polynomial value at `z`.
pub(crate) fn magnitude_scale(coeffs: &[f64], z: Complex64) -> f64 {
    let r = z.norm();
    coeffs.iter().fold(0.0, |acc, &c| acc * r + c.abs())
}

/// Derivative of a descending coefficient vector.
pub(crate) fn derivative(coeffs: &[f64]) -> Vec<f64> {
    let deg = coeffs.len().saturating_sub(1);
    coeffs[..deg]
        .iter()
        .enumerate()
        .map(|(i, &c)| c * (deg - i) as f64)
        .collect()
}

/// Parlett-Reinsch balancing with radix 2, applied in place.
fn balance(m: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c >= g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    m[(i, j)] *= inv;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

fn polish(coeffs: &[f64], mut z: Complex64) -> Complex64 {
    let (mut p, _) = eval_with_derivative(coeffs, z);
    for _ in 0..NEWTON_STEPS {
        if p.norm() == 0.0 {
            break;
        }
        let (_, dp) = eval_with_derivative(coeffs, z);
        if dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        let p_next = eval(coeffs, next);
        if !(p_next.norm() < p.norm()) {
            break;
        }
        z = next;
        p = p_next;
    }
    z
}

/// All roots (with multiplicity) of a monic real polynomial.
pub(crate) fn monic_roots(coeffs: &[f64]) -> Result<Vec<Complex64>, RootFailure> {
    debug_assert!(!coeffs.is_empty() && coeffs[0] == 1.0);
    let zeros = coeffs.iter().rev().take_while(|&&c| c == 0.0).count();
    let zeros = zeros.min(coeffs.len() - 1);
    let reduced = &coeffs[..coeffs.len() - zeros];
    let deg = reduced.len() - 1;

    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    match deg {
        0 => return Ok(roots),
        1 => {
            roots.push(Complex64::new(-reduced[1], 0.0));
            return Ok(roots);
        }
        _ => {}
    }

    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for j in 0..deg {
        companion[(0, j)] = -reduced[j + 1];
    }
    for i in 1..deg {
        companion[(i, i - 1)] = 1.0;
    }
    balance(&mut companion);

    let max_iter = 200 * deg;
    let schur = Schur::try_new(companion, f64::EPSILON, max_iter).ok_or(RootFailure {
        iterations: max_iter,
        residuals: Vec::new(),
    })?;
    let found: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|&z| polish(reduced, z))
        .collect();

    let residuals: Vec<f64> = found
        .iter()
        .map(|&z| eval(reduced, z).norm() / magnitude_scale(reduced, z))
        .collect();
    if residuals
        .iter()
        .any(|r| !(r.is_finite() && *r <= BACKWARD_TOL))
    {
        return Err(RootFailure {
            iterations: max_iter,
            residuals,
        });
    }
    roots.extend(found);
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<f64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re));
        v.into_iter().map(|z| z.re).collect()
    }

    #[test]
    fn cubic_with_known_roots() {
        // (p - 1)(p - 2)(p + 3) = p^3 - 7p + 6
        let r = sorted_re(monic_roots(&[1.0, 0.0, -7.0, 6.0]).unwrap());
        assert!((r[0] + 3.0).abs() < 1e-13);
        assert!((r[1] - 1.0).abs() < 1e-13);
        assert!((r[2] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn trailing_zeros_are_exact_roots() {
        let r = monic_roots(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r, vec![Complex64::new(0.0, 0.0); 3]);
        let r = monic_roots(&[1.0, -2.0, 0.0]).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.contains(&Complex64::new(0.0, 0.0)));
        assert!(r.iter().any(|z| (z - 2.0).norm() < 1e-14));
    }

    #[test]
    fn badly_scaled_polynomial() {
        // (p - 1e3)(p - 1e-3) = p^2 - 1000.001 p + 1
        let r = sorted_re(monic_roots(&[1.0, -1000.001, 1.0]).unwrap());
        assert!((r[0] - 1e-3).abs() < 1e-15);
        assert!((r[1] - 1e3).abs() < 1e-10);
    }

    #[test]
    fn derivative_of_descending_coeffs() {
        assert_eq!(derivative(&[1.0, 2.0, 3.0, 4.0]), vec![3.0, 4.0, 3.0]);
        assert!(derivative(&[5.0]).is_empty());
    }
}
