//! Zones of the extended phase space and empirical symbol-class fits.
//!
//! A class fit is a certificate over the sampled box only.

use crate::linalg::{norm2, CMat};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseSpaceError {
    #[error("invalid zone configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid sample box: {0}")]
    InvalidSample(String),
    #[error("evaluator returned a non-finite value at t={t}, |xi|={xi}")]
    NonFinite { t: f64, xi: f64 },
}

pub type Result<T> = std::result::Result<T, PhaseSpaceError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneConfig {
    pub c: f64,
    pub ell_cutoff: f64,
}

impl ZoneConfig {
    pub fn new(c: f64, ell_cutoff: f64) -> Result<Self> {
        let z = ZoneConfig { c, ell_cutoff };
        z.validate()?;
        Ok(z)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(PhaseSpaceError::InvalidConfig(format!("c must be positive, got {}", self.c)));
        }
        if !(self.ell_cutoff > 0.0) {
            return Err(PhaseSpaceError::InvalidConfig(format!("ell_cutoff must be positive, got {}", self.ell_cutoff)));
        }
        Ok(())
    }
}

impl Default for ZoneConfig {
    fn default() -> Self {
        ZoneConfig { c: 1.0, ell_cutoff: 1.0 }
    }
}

/// Zone membership. `hyp` and `pd` are complementary; `ell` is an additional flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZoneLabel {
    pub hyp: bool,
    pub ell: bool,
}

impl ZoneLabel {
    pub fn pd(&self) -> bool {
        !self.hyp
    }
}

/// Boundary time between the pseudo-differential and hyperbolic zones.
pub fn t_xi(xi: f64, cfg: &ZoneConfig) -> f64 {
    (cfg.c / xi - 1.0).max(0.0)
}

pub fn classify(t: f64, xi: f64, cfg: &ZoneConfig) -> ZoneLabel {
    ZoneLabel { hyp: (1.0 + t) * xi >= cfg.c, ell: xi <= cfg.ell_cutoff && t >= 1.0 / cfg.ell_cutoff }
}

fn bump_tail(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Smooth step: 0 for s ≤ 0, 1 for s ≥ 1.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let a = bump_tail(s);
        a / (a + bump_tail(1.0 - s))
    }
}

/// Excision function: 0 for (1+t)|ξ| ≤ c, 1 for (1+t)|ξ| ≥ 2c.
pub fn chi_hyp(t: f64, xi: f64, cfg: &ZoneConfig) -> f64 {
    smooth_step(((1.0 + t) * xi - cfg.c) / cfg.c)
}

/// Central difference stencil (offsets, weights) for derivative order ≤ 3.
fn stencil(order: usize) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        _ => panic!("derivative order above 3"),
    }
}

/// Mixed partial derivative of `f` at `x` with orders `ord` and steps `h`, tensor-product central
/// differences with one Richardson level.
pub fn mixed_derivative(f: &mut dyn FnMut(&[f64]) -> CMat, x: &[f64], ord: &[usize], h: &[f64]) -> CMat {
    let mut raw = |scale: f64| -> CMat {
        let dims = x.len();
        let mut idx = vec![0usize; dims];
        let mut acc: Option<CMat> = None;
        let mut pt = x.to_vec();
        loop {
            let mut w = 1.0;
            for d in 0..dims {
                let (off, wd) = stencil(ord[d])[idx[d]];
                w *= wd / (h[d] * scale).powi(ord[d] as i32);
                pt[d] = x[d] + off as f64 * h[d] * scale;
            }
            let v = f(&pt) * crate::linalg::r(w);
            acc = Some(match acc {
                Some(a) => a + v,
                None => v,
            });
            let mut d = 0;
            loop {
                if d == dims {
                    return acc.unwrap();
                }
                idx[d] += 1;
                if idx[d] < stencil(ord[d]).len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    };
    let coarse = raw(1.0);
    let fine = raw(0.5);
    (fine * crate::linalg::r(4.0) - coarse) * crate::linalg::r(1.0 / 3.0)
}

/// Relative step for a combined derivative order, balancing truncation and roundoff.
pub fn fd_rel_step(total_order: usize) -> f64 {
    f64::EPSILON.powf(1.0 / (total_order as f64 + 3.0)).max(1e-4)
}

/// A sampled matrix symbol a(t, ξ) with ξ ∈ ℝⁿ.
pub struct SymbolSample<'a> {
    pub evaluator: Box<dyn Fn(f64, &[f64]) -> CMat + 'a>,
    pub dim: usize,
    pub t_range: (f64, f64),
    pub xi_range: (f64, f64),
    pub n_t: usize,
    pub n_xi: usize,
    pub n_dir: usize,
    /// Zone constant; only samples with (1+t)|ξ| ≥ c are used.
    pub zone_c: f64,
}

impl<'a> SymbolSample<'a> {
    pub fn new(evaluator: impl Fn(f64, &[f64]) -> CMat + 'a, dim: usize, t_range: (f64, f64), xi_range: (f64, f64)) -> Self {
        SymbolSample { evaluator: Box::new(evaluator), dim, t_range, xi_range, n_t: 24, n_xi: 24, n_dir: 3, zone_c: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        let (t0, t1) = self.t_range;
        let (x0, x1) = self.xi_range;
        if !(t0 >= 0.0 && t1 >= t0 && x0 > 0.0 && x1 >= x0) || self.dim == 0 || self.dim > 3 || self.n_t == 0 || self.n_xi == 0 {
            return Err(PhaseSpaceError::InvalidSample(format!("t {:?}, xi {:?}, dim {}", self.t_range, self.xi_range, self.dim)));
        }
        Ok(())
    }

    fn directions(&self) -> Vec<Vec<f64>> {
        match self.dim {
            1 => vec![vec![1.0]],
            2 => (0..self.n_dir.max(1))
                .map(|k| {
                    let a = 0.3 + std::f64::consts::PI * k as f64 / self.n_dir.max(1) as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect(),
            _ => (0..self.n_dir.max(1))
                .map(|k| {
                    let a = 0.3 + 2.0 * k as f64;
                    let b = 0.7 + 1.3 * k as f64;
                    vec![b.sin() * a.cos(), b.sin() * a.sin(), b.cos()]
                })
                .collect(),
        }
    }
}

fn geom_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || hi == lo {
        return vec![lo];
    }
    let (a, b) = ((1.0 + lo).ln(), (1.0 + hi).ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp() - 1.0).collect()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || hi == lo {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassFitEntry {
    pub k: usize,
    pub alpha: usize,
    pub constant: f64,
    pub argmax_t: f64,
    pub argmax_xi: f64,
    /// Ratio exceeded 1e6 with its maximum on the edge of the sample box.
    pub unbounded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassFitReport {
    pub m1: f64,
    pub m2: f64,
    pub entries: Vec<ClassFitEntry>,
}

impl ClassFitReport {
    pub fn constant(&self, k: usize, alpha: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.k == k && e.alpha == alpha).map(|e| e.constant)
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.constant.is_finite() && !e.unbounded)
    }
}

fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    if dim == 1 {
        return vec![vec![order]];
    }
    let mut out = Vec::new();
    for first in 0..=order {
        for mut rest in multi_indices(dim - 1, order - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Smallest constants C_{k,α} with |D_t^k D_ξ^α a| ≤ C (max{|ξ|, 1/(1+t)})^{m1−|α|} (1+t)^{−m2−k}
/// on the sampled hyperbolic zone, where D_t = −i∂_t. Orders are capped at 3.
pub fn symbol_class_fit(s: &SymbolSample, m1: f64, m2: f64, max_k: usize, max_alpha: usize) -> Result<ClassFitReport> {
    s.validate()?;
    let max_k = max_k.min(3);
    let max_alpha = max_alpha.min(3);
    let ts = geom_grid(s.t_range.0, s.t_range.1, s.n_t);
    let xs = log_grid(s.xi_range.0, s.xi_range.1, s.n_xi);
    let dirs = s.directions();
    let mut entries = Vec::new();
    for k in 0..=max_k {
        for alpha in 0..=max_alpha {
            let indices: Vec<Vec<usize>> = multi_indices(s.dim, alpha).into_iter().filter(|a| a.iter().all(|&o| o <= 3)).collect();
            let step = fd_rel_step(k + alpha);
            let mut best = (0.0f64, f64::NAN, f64::NAN, 0usize, 0usize);
            for (it, &t) in ts.iter().enumerate() {
                for (ix, &xm) in xs.iter().enumerate() {
                    if (1.0 + t) * xm < s.zone_c {
                        continue;
                    }
                    let weight = xm.max(1.0 / (1.0 + t)).powf(m1 - alpha as f64) * (1.0 + t).powf(-m2 - k as f64);
                    for w in &dirs {
                        let mut x = vec![t];
                        x.extend(w.iter().map(|c| c * xm));
                        let mut h = vec![step * (1.0 + t)];
                        h.extend(std::iter::repeat_n(step * xm, s.dim));
                        let mut f = |p: &[f64]| (s.evaluator)(p[0], &p[1..]);
                        for a in &indices {
                            let mut ord = vec![k];
                            ord.extend(a);
                            let d = if k + alpha == 0 { f(&x) } else { mixed_derivative(&mut f, &x, &ord, &h) };
                            let v = norm2(&d);
                            if !v.is_finite() {
                                return Err(PhaseSpaceError::NonFinite { t, xi: xm });
                            }
                            let ratio = v / weight;
                            if ratio > best.0 || best.1.is_nan() {
                                best = (ratio, t, xm, it, ix);
                            }
                        }
                    }
                }
            }
            let on_edge = best.3 == 0 || best.3 + 1 == ts.len() || best.4 == 0 || best.4 + 1 == xs.len();
            entries.push(ClassFitEntry { k, alpha, constant: best.0, argmax_t: best.1, argmax_xi: best.2, unbounded: best.0 > 1e6 && on_edge });
        }
    }
    Ok(ClassFitReport { m1, m2, entries })
}

/// Constants C_k with |D_t^k f(t)| ≤ C_k (1+t)^{−ℓ−k} on a geometric t-grid (class T{ℓ}).
pub fn t_class_fit(f: impl Fn(f64) -> CMat, ell: f64, t_range: (f64, f64), n_t: usize, max_k: usize) -> Result<Vec<ClassFitEntry>> {
    if !(t_range.0 >= 0.0 && t_range.1 >= t_range.0) || n_t == 0 {
        return Err(PhaseSpaceError::InvalidSample(format!("t {:?}", t_range)));
    }
    let ts = geom_grid(t_range.0, t_range.1, n_t);
    let mut out = Vec::new();
    for k in 0..=max_k.min(3) {
        let step = fd_rel_step(k);
        let mut best = (0.0f64, f64::NAN, 0usize);
        for (it, &t) in ts.iter().enumerate() {
            let mut g = |p: &[f64]| f(p[0]);
            let d = if k == 0 { g(&[t]) } else { mixed_derivative(&mut g, &[t], &[k], &[step * (1.0 + t)]) };
            let v = norm2(&d);
            if !v.is_finite() {
                return Err(PhaseSpaceError::NonFinite { t, xi: 0.0 });
            }
            let ratio = v * (1.0 + t).powf(ell + k as f64);
            if ratio > best.0 || best.1.is_nan() {
                best = (ratio, t, it);
            }
        }
        let on_edge = best.2 == 0 || best.2 + 1 == ts.len();
        out.push(ClassFitEntry { k, alpha: 0, constant: best.0, argmax_t: best.1, argmax_xi: 0.0, unbounded: best.0 > 1e6 && on_edge });
    }
    Ok(out)
}

/// Fits a polynomial symbol Σ p_α(t)ξ^α against P{m}: each coefficient p_α against T{m−|α|}.
/// `coeffs` pairs the multi-index order |α| with the coefficient evaluator.
pub fn p_class_fit(coeffs: &[(usize, &dyn Fn(f64) -> CMat)], m: f64, t_range: (f64, f64), n_t: usize, max_k: usize) -> Result<Vec<Vec<ClassFitEntry>>> {
    coeffs.iter().map(|(order, f)| t_class_fit(|t| f(t), m - *order as f64, t_range, n_t, max_k)).collect()
}
