//! Adaptive Gauss–Kronrod (7/15) quadrature for real, complex and vector-valued integrands.

use crate::scalar::{lit, Real};
use num_complex::Complex;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature failed to reach tolerance: estimate {estimate:e}, error {error:e} after {intervals} intervals")]
    QuadratureFailure { estimate: f64, error: f64, intervals: usize },
    #[error("non-finite integrand value at x = {x}")]
    NonFinite { x: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        Self { rel_tol: lit(1e-10), abs_tol: lit(1e-14), max_intervals: 4000 }
    }
}

impl<T: Real> QuadOptions<T> {
    pub fn with_rel_tol(rel_tol: T) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult<V, T> {
    pub value: V,
    pub error: T,
    pub intervals: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_9,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

struct Panel<T> {
    a: T,
    b: T,
    value: Vec<Complex<T>>,
    error: T,
}

fn vec_norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |m, z| m.max(z.norm()))
}

fn gk15<T, F>(f: &mut F, a: T, b: T, dim: usize) -> Result<Panel<T>, QuadError>
where
    T: Real,
    F: FnMut(T) -> Vec<Complex<T>>,
{
    let two = lit::<T>(2.0);
    let c = (a + b) / two;
    let h = (b - a) / two;
    let mut kron = vec![Complex::new(T::zero(), T::zero()); dim];
    let mut gauss = vec![Complex::new(T::zero(), T::zero()); dim];
    let mut eval = |x: T| -> Result<Vec<Complex<T>>, QuadError> {
        let v = f(x);
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QuadError::NonFinite { x: x.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(v)
    };
    let fc = eval(c)?;
    for k in 0..dim {
        kron[k] = fc[k] * lit::<T>(WGK[7]);
        gauss[k] = fc[k] * lit::<T>(WG[3]);
    }
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = h * lit::<T>(x);
        let f1 = eval(c - dx)?;
        let f2 = eval(c + dx)?;
        for k in 0..dim {
            let s = f1[k] + f2[k];
            kron[k] = kron[k] + s * lit::<T>(WGK[j]);
            if j % 2 == 1 {
                gauss[k] = gauss[k] + s * lit::<T>(WG[j / 2]);
            }
        }
    }
    let mut err = T::zero();
    for k in 0..dim {
        kron[k] = kron[k] * h;
        gauss[k] = gauss[k] * h;
        err = err.max((kron[k] - gauss[k]).norm());
    }
    Ok(Panel { a, b, value: kron, error: err })
}

/// Integrates a vector-valued complex function over `[a, b]`.
///
/// Works for `b < a` (sign flips as usual). Tolerance is measured in the max-norm.
pub fn integrate_vec<T, F>(
    mut f: F,
    a: T,
    b: T,
    dim: usize,
    opts: &QuadOptions<T>,
) -> Result<QuadResult<Vec<Complex<T>>, T>, QuadError>
where
    T: Real,
    F: FnMut(T) -> Vec<Complex<T>>,
{
    if a == b {
        return Ok(QuadResult { value: vec![Complex::new(T::zero(), T::zero()); dim], error: T::zero(), intervals: 0 });
    }
    let mut panels = vec![gk15(&mut f, a, b, dim)?];
    loop {
        let mut total = vec![Complex::new(T::zero(), T::zero()); dim];
        let mut err = T::zero();
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            for k in 0..dim {
                total[k] = total[k] + p.value[k];
            }
            err = err + p.error;
            if p.error > panels[worst].error {
                worst = i;
            }
        }
        let tol = opts.abs_tol.max(opts.rel_tol * vec_norm(&total));
        if err <= tol {
            return Ok(QuadResult { value: total, error: err, intervals: panels.len() });
        }
        let width = (panels[worst].b - panels[worst].a).abs();
        let span = (b - a).abs();
        if panels.len() >= opts.max_intervals || width < span * T::epsilon() * lit(64.0) {
            return Err(QuadError::QuadratureFailure {
                estimate: vec_norm(&total).to_f64().unwrap_or(f64::NAN),
                error: err.to_f64().unwrap_or(f64::NAN),
                intervals: panels.len(),
            });
        }
        let p = panels.swap_remove(worst);
        let mid = (p.a + p.b) / lit(2.0);
        panels.push(gk15(&mut f, p.a, mid, dim)?);
        panels.push(gk15(&mut f, mid, p.b, dim)?);
    }
}

/// Integrates a complex-valued function over `[a, b]`.
pub fn integrate_complex<T, F>(mut f: F, a: T, b: T, opts: &QuadOptions<T>) -> Result<QuadResult<Complex<T>, T>, QuadError>
where
    T: Real,
    F: FnMut(T) -> Complex<T>,
{
    let r = integrate_vec(|x| vec![f(x)], a, b, 1, opts)?;
    Ok(QuadResult { value: r.value[0], error: r.error, intervals: r.intervals })
}

/// Integrates a real-valued function over `[a, b]`.
pub fn integrate<T, F>(mut f: F, a: T, b: T, opts: &QuadOptions<T>) -> Result<QuadResult<T, T>, QuadError>
where
    T: Real,
    F: FnMut(T) -> T,
{
    let r = integrate_vec(|x| vec![Complex::new(f(x), T::zero())], a, b, 1, opts)?;
    Ok(QuadResult { value: r.value[0].re, error: r.error, intervals: r.intervals })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on the three-term recurrence).
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = lit(-z);
        x[n - 1 - i] = lit(z);
        w[i] = lit(wi);
        w[n - 1 - i] = lit(wi);
    }
    if n == 1 {
        x[0] = T::zero();
        w[0] = lit(2.0);
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x: f64| x.powi(5) - 3.0 * x * x, -1.0, 2.0, &QuadOptions::default()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let o = QuadOptions::default();
        let a = integrate(|x: f64| x.exp(), 0.0, 1.0, &o).unwrap().value;
        let b = integrate(|x: f64| x.exp(), 1.0, 0.0, &o).unwrap().value;
        assert!((a + b).abs() < 1e-14);
        assert!((a - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_complex() {
        let r = integrate_complex(|x: f64| Complex::new(0.0, 40.0 * x).exp(), 0.0, 3.0, &QuadOptions::default()).unwrap();
        let exact = (Complex::new(0.0, 120.0).exp() - 1.0) / Complex::new(0.0, 40.0);
        assert!((r.value - exact).norm() < 1e-11);
    }

    #[test]
    fn endpoint_singularity_integrable() {
        let r = integrate(|x: f64| x.ln(), 0.0, 1.0, &QuadOptions::with_rel_tol(1e-10)).unwrap();
        assert!((r.value + 1.0).abs() < 1e-9);
    }

    #[test]
    fn f32_instantiation() {
        let r = integrate(|x: f32| x * x, 0.0f32, 1.0, &QuadOptions::with_rel_tol(1e-5)).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn gauss_legendre_integrates_degree_2n_minus_1() {
        let (x, w) = gauss_legendre::<f64>(12);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((s - 2.0 / 23.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }
}
