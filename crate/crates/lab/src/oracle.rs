//! Reference computations used by the checks. None of these call into the
//! algorithms they are compared against.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex64;

/// `det(pI - A)` in descending order, by the Faddeev-LeVerrier recursion.
pub fn faddeev_leverrier(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[0] = 1.0;
    let id = DMatrix::<f64>::identity(n, n);
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + &id * coeffs[k - 1];
        let am = a * &m;
        coeffs[k] = -am.trace() / k as f64;
    }
    coeffs
}

/// `F_p` for `F = p^(n+1)/(n+1) + sum u_k p^(n-k)`, differentiated term by
/// term, descending.
pub fn lax_derivative(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    // descending coefficients of F, degree n + 1
    let mut f = vec![0.0; n + 2];
    f[0] = 1.0 / (n + 1) as f64;
    f[2..].copy_from_slice(u);
    let deg = n + 1;
    (0..=n).map(|i| f[i] * (deg - i) as f64).collect()
}

/// Value of `F` at `p`.
pub fn lax_value(u: &[f64], p: Complex64) -> Complex64 {
    let n = u.len();
    let mut acc = p.powu((n + 1) as u32) / (n + 1) as f64;
    for (k, &c) in u.iter().enumerate() {
        acc += p.powu((n - 1 - k) as u32) * c;
    }
    acc
}

/// Newton iteration on `F_p` from `z0`.
pub fn newton_critical(u: &[f64], z0: Complex64) -> Complex64 {
    let fp = lax_derivative(u);
    let dfp: Vec<f64> = fp
        .iter()
        .enumerate()
        .take(fp.len() - 1)
        .map(|(i, c)| c * (fp.len() - 1 - i) as f64)
        .collect();
    let horner = |c: &[f64], z: Complex64| {
        c.iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &x| acc * z + x)
    };
    let mut z = z0;
    for _ in 0..60 {
        let step = horner(&fp, z) / horner(&dfp, z);
        if !step.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

/// Eigenvalues `(larger, smaller)` of the symmetric flux Jacobian
/// `[[v, w], [w, -3v]]` from a dense symmetric eigen-solve.
pub fn reduced_eigs(w: f64, v: f64) -> (f64, f64) {
    let m = Matrix2::new(v, w, w, -3.0 * v);
    let e = SymmetricEigen::new(m).eigenvalues;
    (e[0].max(e[1]), e[0].min(e[1]))
}

/// Directional derivative of the larger reduced eigenvalue at `(w, v)` along
/// `dir`, by a Richardson-extrapolated central difference over the dense
/// eigen-solve.
pub fn reduced_directional(w: f64, v: f64, dir: [f64; 2]) -> f64 {
    let norm = dir[0].hypot(dir[1]);
    if norm == 0.0 {
        return 0.0;
    }
    let d = [dir[0] / norm, dir[1] / norm];
    let h = 1e-3 * (1.0 + w.hypot(v));
    let central = |h: f64| {
        let up = reduced_eigs(w + h * d[0], v + h * d[1]).0;
        let down = reduced_eigs(w - h * d[0], v - h * d[1]).0;
        (up - down) / (2.0 * h)
    };
    norm * (4.0 * central(0.5 * h) - central(h)) / 3.0
}

/// `prod_(i<j) |z_i - z_j|`.
pub fn vandermonde_magnitude(z: &[Complex64]) -> f64 {
    let mut p = 1.0;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            p *= (z[i] - z[j]).norm();
        }
    }
    p
}
