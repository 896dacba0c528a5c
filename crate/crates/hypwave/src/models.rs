//! Canonical Cauchy problems with exact Fourier multipliers.
//!
//! A multiplier maps `(û(t₀), û_t(t₀))` to `(û(t), û_t(t))` for one frequency magnitude, where
//! `t₀` is the model's initial time (1 for the scale-invariant models, 0 otherwise).

use crate::linalg::{c, inverse, r, CMat, C64, I};
use crate::ode::{solve, OdeError, OdeOptions};
use crate::specfun::{bessel_j, bessel_y, hankel, tricomi_psi_c, BesselOrder, HankelKind, SpecFunAccuracy, SpecFunError};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("fundamental system degenerate at the initial time (|W| = {0:e})")]
    SingularMatching(f64),
    #[error("data has frequencies below the support bound {0}")]
    SupportError(f64),
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// A named real function of time.
#[derive(Clone)]
pub struct TimeFn {
    pub name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl TimeFn {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn constant(v: f64) -> Self {
        Self::new(format!("{v}"), move |_| v)
    }
}

impl fmt::Debug for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimeFn({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum ModelKind {
    FreeWave,
    /// `u_tt − Δu + u_t = 0`.
    DampedWave,
    /// `u_tt − Δu + u = 0`.
    KleinGordon,
    /// `v_t = Δv` with datum `v₀ = u₀ + u₁`.
    Heat,
    /// `u_tt − Δu + (2μ/t) u_t = 0`, `t ≥ 1`.
    ScaleInvariantDissipation { mu: f64 },
    /// `u_tt − Δu + κ²/(4t²) u = 0`, `t ≥ 1`.
    ScaleInvariantMass { kappa: f64 },
    /// `u_tt − a(t)² Δu = 0`.
    VariableSpeed(TimeFn),
    /// `u_tt − Δu + 2b(t) u_t = 0`.
    WeakDissipation(TimeFn),
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub dim: usize,
    pub initial_time: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, dim: usize) -> Result<Self> {
        let initial_time = match kind {
            ModelKind::ScaleInvariantDissipation { .. } | ModelKind::ScaleInvariantMass { .. } => 1.0,
            _ => 0.0,
        };
        let spec = Self { kind, dim, initial_time };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(ModelError::Invalid("dimension must be positive".into()));
        }
        match &self.kind {
            ModelKind::ScaleInvariantDissipation { mu } if !(*mu >= 0.0) => Err(ModelError::Invalid("μ must be nonnegative".into())),
            ModelKind::ScaleInvariantMass { kappa } if !(*kappa >= 0.0) => Err(ModelError::Invalid("κ must be nonnegative".into())),
            ModelKind::VariableSpeed(a) => {
                if (0..64).map(|i| a.eval(i as f64 * 0.5)).all(|v| v > 0.0) {
                    Ok(())
                } else {
                    Err(ModelError::Invalid("a(t) must be positive".into()))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn has_exact_multiplier(&self) -> bool {
        !matches!(self.kind, ModelKind::VariableSpeed(_) | ModelKind::WeakDissipation(_))
    }
}

fn mat2(a: C64, b: C64, cc: C64, d: C64) -> CMat {
    CMat::from_row_slice(2, 2, &[a, b, cc, d])
}

fn free_wave(t: f64, xi: f64) -> CMat {
    if xi == 0.0 {
        return mat2(r(1.0), r(t), r(0.0), r(1.0));
    }
    let (s, co) = (t * xi).sin_cos();
    mat2(r(co), r(s / xi), r(-xi * s), r(co))
}

fn klein_gordon(t: f64, xi: f64) -> CMat {
    let w = (xi * xi + 1.0).sqrt();
    let (s, co) = (t * w).sin_cos();
    mat2(r(co), r(s / w), r(-w * s), r(co))
}

/// `e^{−t/2}` times `cos(λt)` and `sin(λt)/λ` with `λ = sqrt(r² − ¼)`, overflow-free.
fn damped_parts(t: f64, xi: f64) -> (f64, f64, f64) {
    let l2 = xi * xi - 0.25;
    let e = (-t / 2.0).exp();
    if l2 >= 0.0 {
        let l = l2.sqrt();
        let s = if l * t < 1e-8 { t } else { (l * t).sin() / l };
        (e, e * (l * t).cos(), e * s)
    } else {
        let nu = (-l2).sqrt();
        if nu * t < 1.0 {
            let s = if nu * t < 1e-8 { t } else { (nu * t).sinh() / nu };
            (e, e * (nu * t).cosh(), e * s)
        } else {
            let a = ((nu - 0.5) * t).exp();
            let b = (-(nu + 0.5) * t).exp();
            (e, 0.5 * (a + b), 0.5 * (a - b) / nu)
        }
    }
}

fn damped_wave(t: f64, xi: f64) -> CMat {
    let (_, ec, es) = damped_parts(t, xi);
    mat2(r(ec + es / 2.0), r(es), r(-xi * xi * es), r(ec - es / 2.0))
}

fn heat(t: f64, xi: f64) -> CMat {
    let e = (-t * xi * xi).exp();
    mat2(r(e), r(e), r(-xi * xi * e), r(-xi * xi * e))
}

/// Fundamental system row `(y, y')` at time `t` for two solutions.
type Basis = ([C64; 2], [C64; 2]);

/// Scale-invariant dissipation with `ρ = ½ − μ`: `θ^ρ J_{−ρ}(θ)`, `θ^ρ J_ρ(θ)` (non-integer ρ) or
/// `θ^ρ J_ρ(θ)`, `θ^ρ Y_ρ(θ)` (integer ρ), `θ = t|ξ|`.
fn sid_basis(mu: f64, t: f64, xi: f64, acc: &SpecFunAccuracy<f64>) -> Result<Basis> {
    let rho = 0.5 - mu;
    if xi == 0.0 {
        let p = 1.0 - 2.0 * mu;
        if p.abs() < 1e-12 {
            return Ok(([r(1.0), r(t.ln())], [r(0.0), r(1.0 / t)]));
        }
        return Ok(([r(1.0), r(t.powf(p))], [r(0.0), r(p * t.powf(p - 1.0))]));
    }
    let th = t * xi;
    let w = th.powf(rho);
    let ord = BesselOrder::new(rho);
    let sh = |d: f64| BesselOrder::new(rho + d);
    if ord.is_integer {
        let j = bessel_j(ord, th, acc)?;
        let y = bessel_y(ord, th, acc)?;
        let jm = bessel_j(sh(-1.0), th, acc)?;
        let ym = bessel_y(sh(-1.0), th, acc)?;
        Ok(([r(w * j), r(w * y)], [r(xi * w * jm), r(xi * w * ym)]))
    } else {
        let jn = bessel_j(BesselOrder::new(-rho), th, acc)?;
        let jp = bessel_j(ord, th, acc)?;
        let jn1 = bessel_j(BesselOrder::new(1.0 - rho), th, acc)?;
        let jp1 = bessel_j(sh(-1.0), th, acc)?;
        Ok(([r(w * jn), r(w * jp)], [r(-xi * w * jn1), r(xi * w * jp1)]))
    }
}

fn mass_rho(kappa: f64) -> C64 {
    (r(1.0) + r(1.0 - kappa * kappa).sqrt()) * 0.5
}

/// Scale-invariant mass: `w_± = e^{∓iθ} θ^ρ Ψ(ρ, 2ρ; ±2iθ)`, `ρ = (1 + sqrt(1−κ²))/2`.
fn sim_basis(kappa: f64, t: f64, xi: f64, acc: &SpecFunAccuracy<f64>) -> Result<Basis> {
    let rho = mass_rho(kappa);
    if xi == 0.0 {
        if (kappa - 1.0).abs() < 1e-12 {
            let s = t.sqrt();
            return Ok(([r(s), r(s * t.ln())], [r(0.5 / s), r((0.5 * t.ln() + 1.0) / s)]));
        }
        let a = r(t).powc(rho);
        let b = r(t).powc(r(1.0) - rho);
        return Ok(([a, b], [rho * a / t, (r(1.0) - rho) * b / t]));
    }
    let th = t * xi;
    let mut y = [r(0.0); 2];
    let mut dy = [r(0.0); 2];
    for (k, sgn) in [1.0, -1.0].into_iter().enumerate() {
        let z = c(0.0, 2.0 * sgn * th);
        let u = tricomi_psi_c(rho, rho * 2.0, z, acc)?;
        let u1 = tricomi_psi_c(rho + 1.0, rho * 2.0 + 1.0, z, acc)?;
        let e = c(0.0, -sgn * th).exp();
        let p = r(th).powc(rho);
        // d/dθ: e p [−i·sgn U + (ρ/θ) U + (2i·sgn)(−ρ) U(ρ+1, 2ρ+1)]
        let d = e * p * (c(0.0, -sgn) * u + rho / th * u - c(0.0, 2.0 * sgn) * rho * u1);
        y[k] = e * p * u;
        dy[k] = d * xi;
    }
    Ok((y, dy))
}

fn from_basis(at_t: Basis, at_t0: Basis) -> Result<CMat> {
    let phi = |b: Basis| mat2(b.0[0], b.0[1], b.1[0], b.1[1]);
    let p0 = phi(at_t0);
    let det = (p0[(0, 0)] * p0[(1, 1)] - p0[(0, 1)] * p0[(1, 0)]).norm();
    if det < 1e-12 {
        return Err(ModelError::SingularMatching(det));
    }
    let inv = inverse(&p0).ok_or(ModelError::SingularMatching(det))?;
    Ok(phi(at_t) * inv)
}

/// Exact propagator matrix of the model at frequency magnitude `xi`.
pub fn exact_multiplier(model: &ModelSpec, t: f64, xi: f64, acc: &SpecFunAccuracy<f64>) -> Result<CMat> {
    if !(xi >= 0.0) || !t.is_finite() {
        return Err(ModelError::Invalid("need finite t and ξ ≥ 0".into()));
    }
    if t < model.initial_time {
        return Err(ModelError::Invalid(format!("t = {t} precedes the initial time {}", model.initial_time)));
    }
    match &model.kind {
        ModelKind::FreeWave => Ok(free_wave(t, xi)),
        ModelKind::KleinGordon => Ok(klein_gordon(t, xi)),
        ModelKind::DampedWave => Ok(damped_wave(t, xi)),
        ModelKind::Heat => Ok(heat(t, xi)),
        ModelKind::ScaleInvariantDissipation { mu } => from_basis(sid_basis(*mu, t, xi, acc)?, sid_basis(*mu, 1.0, xi, acc)?),
        ModelKind::ScaleInvariantMass { kappa } => from_basis(sim_basis(*kappa, t, xi, acc)?, sim_basis(*kappa, 1.0, xi, acc)?),
        ModelKind::VariableSpeed(_) | ModelKind::WeakDissipation(_) => ode_multiplier(model, model.initial_time, t, xi, 1e-11),
    }
}

/// Propagator from `s` to `t` by direct integration of the second-order equation.
pub fn ode_multiplier(model: &ModelSpec, s: f64, t: f64, xi: f64, tol: f64) -> Result<CMat> {
    if matches!(model.kind, ModelKind::Heat) {
        return Ok(heat(t - s, xi));
    }
    let kind = model.kind.clone();
    let x2 = xi * xi;
    let rhs = move |tt: f64, y: &[C64], dy: &mut [C64]| {
        dy[0] = y[1];
        dy[1] = match &kind {
            ModelKind::FreeWave => -y[0] * x2,
            ModelKind::DampedWave => -y[0] * x2 - y[1],
            ModelKind::KleinGordon => -y[0] * (x2 + 1.0),
            ModelKind::Heat => C64::new(0.0, 0.0),
            ModelKind::ScaleInvariantDissipation { mu } => -y[0] * x2 - y[1] * (2.0 * mu / tt),
            ModelKind::ScaleInvariantMass { kappa } => -y[0] * (x2 + kappa * kappa / (4.0 * tt * tt)),
            ModelKind::VariableSpeed(a) => -y[0] * (a.eval(tt).powi(2) * x2),
            ModelKind::WeakDissipation(b) => -y[0] * x2 - y[1] * (2.0 * b.eval(tt)),
        };
    };
    let opts = OdeOptions::with_tol(tol);
    let (c0, _) = solve(rhs.clone(), s, &[r(1.0), r(0.0)], t, &opts)?;
    let (c1, _) = solve(rhs, s, &[r(0.0), r(1.0)], t, &opts)?;
    Ok(mat2(c0[0], c1[0], c0[1], c1[1]))
}

/// Radially sampled Fourier data.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierState {
    pub grid: Vec<f64>,
    pub u_hat: Vec<C64>,
    pub ut_hat: Vec<C64>,
    pub time: f64,
}

/// Radial data profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `e^{−|ξ|²/(2w²)}`.
    Gaussian { width: f64 },
    /// Smooth bump supported in `lo < |ξ| < hi`.
    Annulus { lo: f64, hi: f64 },
    Zero,
}

impl Profile {
    pub fn eval(&self, xi: f64) -> f64 {
        match *self {
            Profile::Gaussian { width } => (-xi * xi / (2.0 * width * width)).exp(),
            Profile::Annulus { lo, hi } => {
                if xi <= lo || xi >= hi {
                    0.0
                } else {
                    let s = 2.0 * (xi - lo) / (hi - lo) - 1.0;
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
            Profile::Zero => 0.0,
        }
    }
}

/// Log-spaced radial grid.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1).max(1) as f64)).collect()
}

/// Uniform grid.
pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64).collect()
}

impl FourierState {
    pub fn from_profiles(grid: Vec<f64>, u0: Profile, u1: Profile, time: f64) -> Result<Self> {
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ModelError::Invalid("grid must be strictly increasing".into()));
        }
        let u_hat = grid.iter().map(|&x| r(u0.eval(x))).collect();
        let ut_hat = grid.iter().map(|&x| r(u1.eval(x))).collect();
        Ok(Self { grid, u_hat, ut_hat, time })
    }
}

/// Area of the unit sphere `S^{n−1}`.
pub fn sphere_area(n: usize) -> f64 {
    let nf = n as f64;
    2.0 * PI.powf(nf / 2.0) / crate::specfun::gamma(nf / 2.0)
}

/// Trapezoid weights for `∫_{ℝⁿ} f(|ξ|) dξ` on a radial grid.
pub fn radial_weights(grid: &[f64], n: usize) -> Vec<f64> {
    let m = grid.len();
    let area = sphere_area(n);
    let mut w = vec![0.0; m];
    for i in 0..m.saturating_sub(1) {
        let h = grid[i + 1] - grid[i];
        w[i] += h / 2.0;
        w[i + 1] += h / 2.0;
    }
    w.iter().zip(grid).map(|(wi, x)| wi * area * x.powi(n as i32 - 1)).collect()
}

/// `‖f‖_{L²}` via Plancherel with the `(2π)^{−n}` normalisation omitted.
pub fn l2_norm(grid: &[f64], vals: &[C64], n: usize) -> f64 {
    radial_weights(grid, n).iter().zip(vals).map(|(w, v)| w * v.norm_sqr()).sum::<f64>().sqrt()
}

/// Applies the model's propagator pointwise.
pub fn evolve(model: &ModelSpec, state: &FourierState, t_target: f64, acc: &SpecFunAccuracy<f64>) -> Result<FourierState> {
    let mut u = Vec::with_capacity(state.grid.len());
    let mut ut = Vec::with_capacity(state.grid.len());
    for (i, &xi) in state.grid.iter().enumerate() {
        let m = if state.time == model.initial_time && model.has_exact_multiplier() {
            exact_multiplier(model, t_target, xi, acc)?
        } else if model.has_exact_multiplier() && t_target >= model.initial_time && state.time >= model.initial_time {
            let a = exact_multiplier(model, t_target, xi, acc)?;
            let b = exact_multiplier(model, state.time, xi, acc)?;
            match inverse(&b) {
                Some(bi) => a * bi,
                None => ode_multiplier(model, state.time, t_target, xi, 1e-11)?,
            }
        } else {
            ode_multiplier(model, state.time, t_target, xi, 1e-11)?
        };
        u.push(m[(0, 0)] * state.u_hat[i] + m[(0, 1)] * state.ut_hat[i]);
        ut.push(m[(1, 0)] * state.u_hat[i] + m[(1, 1)] * state.ut_hat[i]);
    }
    Ok(FourierState { grid: state.grid.clone(), u_hat: u, ut_hat: ut, time: t_target })
}

/// `½ ∫ (|ξ|²|û|² + |û_t|²)`, plus `½∫|û|²` for Klein–Gordon.
pub fn energy(model: &ModelSpec, state: &FourierState) -> f64 {
    let w = radial_weights(&state.grid, model.dim);
    let mass = matches!(model.kind, ModelKind::KleinGordon);
    let mut e = 0.0;
    for i in 0..state.grid.len() {
        let x2 = state.grid[i] * state.grid[i];
        let mut d = x2 * state.u_hat[i].norm_sqr() + state.ut_hat[i].norm_sqr();
        if mass {
            d += state.u_hat[i].norm_sqr();
        }
        e += w[i] * d;
    }
    0.5 * e
}

/// Free-wave data `(ŵ₀, ŵ₁)` at `t = 1` whose evolution `w` satisfies `‖t^μ u(t) − w(t)‖ → 0`
/// for the scale-invariant dissipation model.
pub fn hf_scattering_profile(mu: f64, data: &FourierState, xi_min: f64, acc: &SpecFunAccuracy<f64>) -> Result<(Vec<C64>, Vec<C64>)> {
    let mut w0 = Vec::with_capacity(data.grid.len());
    let mut w1 = Vec::with_capacity(data.grid.len());
    let rho = 0.5 - mu;
    let ord = BesselOrder::new(rho);
    let ordm = BesselOrder::new(rho - 1.0);
    for (i, &xi) in data.grid.iter().enumerate() {
        let (a, b) = (data.u_hat[i], data.ut_hat[i]);
        if a.norm() == 0.0 && b.norm() == 0.0 {
            w0.push(r(0.0));
            w1.push(r(0.0));
            continue;
        }
        if xi < xi_min {
            return Err(ModelError::SupportError(xi_min));
        }
        // u = C₊ θ^ρ H⁺_ρ(θ) + C₋ θ^ρ H⁻_ρ(θ), θ = t|ξ|; matched at t = 1
        let w = xi.powf(rho);
        let hp = hankel(ord, xi, HankelKind::Plus, acc)? * w;
        let hm = hankel(ord, xi, HankelKind::Minus, acc)? * w;
        let dhp = hankel(ordm, xi, HankelKind::Plus, acc)? * (w * xi);
        let dhm = hankel(ordm, xi, HankelKind::Minus, acc)? * (w * xi);
        let det = hp * dhm - hm * dhp;
        let cp = (a * dhm - hm * b) / det;
        let cm = (hp * b - dhp * a) / det;
        // t^μ u(t) ~ sqrt(2/π) ξ^{−μ} (C₊ e^{i(tξ−φ)} + C₋ e^{−i(tξ−φ)}), φ = ρπ/2 + π/4
        let phase = rho * PI / 2.0 + PI / 4.0;
        let k = (2.0 / PI).sqrt() * xi.powf(-mu);
        let p = cp * k * c(0.0, -phase).exp();
        let q = cm * k * c(0.0, phase).exp();
        let (eip, eim) = (c(0.0, xi).exp(), c(0.0, -xi).exp());
        w0.push(eip * p + eim * q);
        w1.push((eim * q - eip * p) * xi / I);
    }
    Ok((w0, w1))
}
