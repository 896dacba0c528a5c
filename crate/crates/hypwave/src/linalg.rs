//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// Builds a matrix from row slices.
pub fn from_rows(rows: &[&[C64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMat::from_fn(n, m, |i, j| r(rows[i][j]))
}

pub fn diag(v: &[C64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(v))
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn fro(m: &CMat) -> f64 {
    m.norm()
}

/// Maximum absolute column sum.
pub fn norm1(m: &CMat) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// Eigenvalues of a square complex matrix; closed form for 2×2.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    let d = m.nrows();
    match d {
        0 => vec![],
        1 => vec![m[(0, 0)]],
        2 => {
            let (a, b, cc, dd) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let half_tr = (a + dd) * 0.5;
            let disc = ((a - dd) * 0.5).powi(2) + b * cc;
            let s = disc.sqrt();
            // larger-modulus root first, the other from the determinant when stable
            let l1 = if (half_tr + s).norm() >= (half_tr - s).norm() { half_tr + s } else { half_tr - s };
            let det = a * dd - b * cc;
            let l2 = if l1.norm() > 1e-300 && det.norm() > 1e-12 * l1.norm() * l1.norm() { det / l1 } else { half_tr * 2.0 - l1 };
            vec![l1, l2]
        }
        _ => m.clone().schur().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default(),
    }
}

/// Evaluates a polynomial with ascending coefficients and its derivative.
pub fn poly_eval(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &a in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// Roots of a polynomial with ascending coefficients (nonzero leading term), from the companion
/// matrix followed by Newton polishing. The flag reports whether every Newton iteration converged.
pub fn poly_roots(coeffs: &[C64]) -> (Vec<C64>, bool) {
    let zeros = coeffs.iter().take_while(|z| z.norm() == 0.0).count().min(coeffs.len() - 1);
    if zeros > 0 {
        let (mut rest, ok) = poly_roots(&coeffs[zeros..]);
        rest.extend(std::iter::repeat_n(C64::new(0.0, 0.0), zeros));
        return (rest, ok);
    }
    let m = coeffs.len() - 1;
    let lead = coeffs[m];
    if m == 0 {
        return (vec![], true);
    }
    let mut comp = CMat::zeros(m, m);
    for i in 1..m {
        comp[(i, i - 1)] = r(1.0);
    }
    for i in 0..m {
        comp[(i, m - 1)] = -coeffs[i] / lead;
    }
    let mut roots = if m == 1 { vec![-coeffs[0] / lead] } else { eigenvalues(&comp) };
    if m == 2 {
        // stable quadratic formula
        let (a, b, cc) = (lead, coeffs[1], coeffs[0]);
        let s = (b * b - a * cc * 4.0).sqrt();
        let q = if (b.conj() * s).re >= 0.0 { (b + s) * -0.5 } else { (b - s) * -0.5 };
        roots = if q.norm() == 0.0 { vec![C64::new(0.0, 0.0); 2] } else { vec![q / a, cc / q] };
    }
    let scale = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let mut all_ok = true;
    for z in roots.iter_mut() {
        let mut ok = false;
        for _ in 0..50 {
            let (p, dp) = poly_eval(coeffs, *z);
            if p.norm() <= 1e-15 * scale * (1.0 + z.norm()).powi(m as i32) {
                ok = true;
                break;
            }
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            let cand = *z - step;
            if poly_eval(coeffs, cand).0.norm() >= p.norm() {
                ok = step.norm() <= 1e-14 * (1.0 + z.norm());
                break;
            }
            *z = cand;
            if step.norm() <= 1e-15 * (1.0 + z.norm()) {
                ok = true;
                break;
            }
        }
        all_ok &= ok;
    }
    (roots, all_ok)
}

/// Matrix exponential.
pub fn expm(m: &CMat) -> CMat {
    m.clone().exp()
}
