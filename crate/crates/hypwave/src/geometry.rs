//! Level surfaces of homogeneous phases, contact indices and dispersive decay of oscillatory
//! integrals `I(t,x) = ∫ e^{i(x·ξ + tϑ(t,ξ))} a(ξ) dξ`.

use crate::fit::linear_fit;
use crate::linalg::{c, C64};
use crate::quad::gauss_legendre;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

/// Highest derivative order examined by the contact machinery.
pub const ORDER_CAP: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("point is not on the surface (residual {residual:e})")]
    NotOnSurface { residual: f64 },
    #[error("Newton iteration for the local graph failed at y = {y:?}")]
    NewtonFailure { y: Vec<f64> },
    #[error("surface folds over the tangent plane near y = {y:?}")]
    FoldDetected { y: Vec<f64> },
    #[error("all radial derivatives up to order {ORDER_CAP} vanish at p = {p:?}")]
    OrderCapExceeded { p: Vec<f64> },
    #[error("no contact index up to order {ORDER_CAP} satisfies the uniformity condition")]
    NoFiniteIndex,
    #[error("oscillatory quadrature failed at t = {t}; last reliable t = {last_reliable:?}")]
    QuadratureFailure { t: f64, last_reliable: Option<f64> },
    #[error("decay fit needs at least 8 samples spanning a decade")]
    InsufficientRange,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

pub type Phase = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_λ(τ) = {ξ : τ(ξ) = λ}` for a positively homogeneous phase `τ` of degree one.
#[derive(Clone)]
pub struct LevelSurface {
    pub name: String,
    pub phase: Phase,
    pub level: f64,
    pub n: usize,
}

impl std::fmt::Debug for LevelSurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LevelSurface({}, λ = {}, n = {})", self.name, self.level, self.n)
    }
}

impl LevelSurface {
    pub fn new(name: impl Into<String>, phase: Phase, level: f64, n: usize) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(GeometryError::InvalidSurface("dimension must be 2 or 3".into()));
        }
        if !(level > 0.0) {
            return Err(GeometryError::InvalidSurface("level must be positive".into()));
        }
        let s = Self { name: name.into(), phase, level, n };
        s.validate()?;
        Ok(s)
    }

    /// Sphere of radius `r`.
    pub fn sphere(n: usize, r: f64) -> Result<Self> {
        Self::new(format!("sphere(r={r})"), Arc::new(move |x: &[f64]| norm(x) / r), 1.0, n)
    }

    /// `τ = √(ξ_1² + a ξ_2²)` in two dimensions.
    pub fn ellipse(a: f64) -> Result<Self> {
        Self::new(format!("ellipse(a={a})"), Arc::new(move |x: &[f64]| (x[0] * x[0] + a * x[1] * x[1]).sqrt()), 1.0, 2)
    }

    /// `τ = (Σ ξ_i⁴)^{1/4}`.
    pub fn quartic(n: usize) -> Result<Self> {
        Self::new("quartic", Arc::new(|x: &[f64]| x.iter().map(|v| v.powi(4)).sum::<f64>().powf(0.25)), 1.0, n)
    }

    /// `(1 − w)|ξ| + w (Σ ξ_i⁴)^{1/4}`.
    pub fn blend(n: usize, w: f64) -> Result<Self> {
        Self::new(
            format!("blend(w={w})"),
            Arc::new(move |x: &[f64]| (1.0 - w) * norm(x) + w * x.iter().map(|v| v.powi(4)).sum::<f64>().powf(0.25)),
            1.0,
            n,
        )
    }

    /// `τ = |ξ|(1 + ε cos kφ)` in two dimensions; non-convex for large `ε`.
    pub fn lobed(eps: f64, k: u32) -> Result<Self> {
        if !(eps.abs() < 1.0) {
            return Err(GeometryError::InvalidSurface("need |ε| < 1".into()));
        }
        Self::new(
            format!("lobed(ε={eps},k={k})"),
            Arc::new(move |x: &[f64]| {
                let r = norm(x);
                r * (1.0 + eps * (k as f64 * x[1].atan2(x[0])).cos())
            }),
            1.0,
            2,
        )
    }

    pub fn tau(&self, xi: &[f64]) -> f64 {
        (self.phase)(xi)
    }

    /// Homogeneity at `ρ = 2` and the bounds `c ≤ τ(ω) ≤ C` on the unit sphere.
    pub fn validate(&self) -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for w in direction_grid(self.n, 64) {
            let v = self.tau(&w);
            let v2 = self.tau(&w.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
            if !v.is_finite() || (v2 - 2.0 * v).abs() > 1e-8 * (2.0 * v.abs()).max(1e-300) {
                return Err(GeometryError::InvalidSurface(format!("phase not homogeneous of degree one at {w:?}")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(lo > 0.0) {
            return Err(GeometryError::InvalidSurface("phase must be positive away from the origin".into()));
        }
        Ok((lo, hi))
    }

    /// Central-difference gradient with one Richardson level.
    pub fn gradient(&self, xi: &[f64]) -> Vec<f64> {
        let h = 1e-4 * norm(xi).max(1e-300);
        (0..self.n)
            .map(|k| {
                let d = |s: f64| {
                    let mut a = xi.to_vec();
                    let mut b = xi.to_vec();
                    a[k] += s;
                    b[k] -= s;
                    (self.tau(&a) - self.tau(&b)) / (2.0 * s)
                };
                (4.0 * d(h) - d(2.0 * h)) / 3.0
            })
            .collect()
    }

    /// The point of `Σ` on the ray through `ω`.
    pub fn point_in_direction(&self, omega: &[f64]) -> Vec<f64> {
        let s = self.level / self.tau(omega);
        omega.iter().map(|x| x * s).collect()
    }
}

/// Unit directions: equally spaced angles for `n = 2`, a Fibonacci lattice plus the coordinate
/// axes for `n = 3`.
pub fn direction_grid(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        2 => (0..count).map(|i| {
            let a = 2.0 * PI * i as f64 / count as f64;
            vec![a.cos(), a.sin()]
        }).collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .chain((0..6).map(|k| {
                    let mut e = vec![0.0; 3];
                    e[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                    e
                }))
                .collect()
        }
    }
}

/// Graph `(y, h(y))` of `Σ` over its tangent plane at `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGraph {
    pub p: Vec<f64>,
    pub normal: Vec<f64>,
    /// Orthonormal tangent basis.
    pub tangent: Vec<Vec<f64>>,
    pub radius: f64,
    pub samples: Vec<(Vec<f64>, f64)>,
    /// Taylor coefficients `(β, c_β)` for `2 ≤ |β| ≤ 6`, `h(y) ≈ Σ c_β y^β`.
    pub coeffs: Vec<(Vec<usize>, f64)>,
}

fn factorial(j: usize) -> f64 {
    (1..=j).map(|k| k as f64).product()
}

impl LocalGraph {
    /// `∂_ρ^j h(ρω)` at `ρ = 0`.
    pub fn radial_derivative(&self, j: usize, omega: &[f64]) -> f64 {
        factorial(j)
            * self
                .coeffs
                .iter()
                .filter(|(b, _)| b.iter().sum::<usize>() == j)
                .map(|(b, cb)| cb * b.iter().zip(omega).map(|(&e, &w)| w.powi(e as i32)).product::<f64>())
                .sum::<f64>()
    }

    /// Hessian of `h` at `0`.
    pub fn hessian(&self) -> DMatrix<f64> {
        let m = self.tangent.len();
        let mut hm = DMatrix::zeros(m, m);
        for (b, cb) in &self.coeffs {
            if b.iter().sum::<usize>() != 2 {
                continue;
            }
            let idx: Vec<usize> = b.iter().enumerate().flat_map(|(k, &e)| std::iter::repeat(k).take(e)).collect();
            if idx[0] == idx[1] {
                hm[(idx[0], idx[0])] += 2.0 * cb;
            } else {
                hm[(idx[0], idx[1])] += cb;
                hm[(idx[1], idx[0])] += cb;
            }
        }
        hm
    }

    /// Whether the order-`j` part is significant against `tol·|p|` over the sample disc.
    pub fn significant(&self, j: usize, omega: &[f64], tol: f64) -> bool {
        (self.radial_derivative(j, omega) / factorial(j)).abs() * self.radius.powi(j as i32) > tol * norm(&self.p)
    }
}

fn multi_indices(m: usize, deg: usize) -> Vec<Vec<usize>> {
    if m == 1 {
        return vec![vec![deg]];
    }
    (0..=deg).rev().flat_map(|a| multi_indices(m - 1, deg - a).into_iter().map(move |mut rest| {
        rest.insert(0, a);
        rest
    })).collect()
}

fn tangent_basis(nu: &[f64]) -> Vec<Vec<f64>> {
    if nu.len() == 2 {
        return vec![vec![-nu[1], nu[0]]];
    }
    let seed = if nu[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = dot(&seed, nu);
    let mut e1: Vec<f64> = seed.iter().zip(nu).map(|(s, v)| s - d * v).collect();
    let l = norm(&e1);
    e1.iter_mut().for_each(|x| *x /= l);
    let e2 = vec![nu[1] * e1[2] - nu[2] * e1[1], nu[2] * e1[0] - nu[0] * e1[2], nu[0] * e1[1] - nu[1] * e1[0]];
    vec![e1, e2]
}

/// Rotates the outward normal at `p` to the last axis and fits the graph `h` by Newton solves on
/// a sample disc of radius `radius_rel·|p|` followed by least squares on degrees 2..6.
pub fn local_graph(surface: &LevelSurface, p: &[f64], radius_rel: f64) -> Result<LocalGraph> {
    if p.len() != surface.n || !(radius_rel > 0.0) {
        return Err(GeometryError::Invalid("point dimension or radius".into()));
    }
    let scale = norm(p);
    let residual = surface.tau(p) - surface.level;
    if residual.abs() > 1e-10 * surface.level.max(1.0) {
        return Err(GeometryError::NotOnSurface { residual });
    }
    let g = surface.gradient(p);
    let gn = norm(&g);
    if !(gn > 0.0) {
        return Err(GeometryError::InvalidSurface("vanishing gradient".into()));
    }
    let nu: Vec<f64> = g.iter().map(|x| x / gn).collect();
    let tangent = tangent_basis(&nu);
    let m = tangent.len();
    let radius = radius_rel * scale;
    let lift = |y: &[f64], h: f64| -> Vec<f64> {
        (0..surface.n).map(|k| p[k] + h * nu[k] + y.iter().zip(&tangent).map(|(yi, e)| yi * e[k]).sum::<f64>()).collect()
    };
    let resid = |y: &[f64], h: f64| surface.tau(&lift(y, h)) - surface.level;

    let mut ys: Vec<Vec<f64>> = Vec::new();
    if m == 1 {
        let k = 24;
        ys.push(vec![0.0]);
        for i in 0..k {
            ys.push(vec![radius * (PI * (i as f64 + 0.5) / k as f64).cos()]);
        }
    } else {
        ys.push(vec![0.0, 0.0]);
        for ring in 1..=6 {
            let rr = radius * ring as f64 / 6.0;
            let na = 8 + 4 * ring;
            for a in 0..na {
                let ang = 2.0 * PI * a as f64 / na as f64 + 0.3 * ring as f64;
                ys.push(vec![rr * ang.cos(), rr * ang.sin()]);
            }
        }
    }
    let dh = 1e-6 * scale;
    let mut samples = Vec::with_capacity(ys.len());
    for y in ys {
        let mut h = 0.0;
        let mut ok = false;
        for _ in 0..60 {
            let f = resid(&y, h);
            let fp = (resid(&y, h + dh) - resid(&y, h - dh)) / (2.0 * dh);
            if !(fp.abs() > 0.0) || !f.is_finite() {
                break;
            }
            let step = f / fp;
            h -= step;
            if step.abs() <= 1e-12 * scale {
                ok = true;
                break;
            }
        }
        if !ok || h.abs() > 2.0 * radius {
            return Err(GeometryError::NewtonFailure { y });
        }
        if norm(&y) >= 0.99 * radius {
            let k = 16;
            let mut changes = 0;
            let mut prev = resid(&y, -2.0 * radius);
            for i in 1..=k {
                let cur = resid(&y, -2.0 * radius + 4.0 * radius * i as f64 / k as f64);
                if (cur > 0.0) != (prev > 0.0) {
                    changes += 1;
                }
                prev = cur;
            }
            if changes > 1 {
                return Err(GeometryError::FoldDetected { y });
            }
        }
        samples.push((y, h));
    }

    let basis: Vec<Vec<usize>> = (2..=ORDER_CAP).flat_map(|d| multi_indices(m, d)).collect();
    let a = DMatrix::from_fn(samples.len(), basis.len(), |i, j| {
        basis[j].iter().zip(&samples[i].0).map(|(&e, &y)| (y / radius).powi(e as i32)).product::<f64>()
    });
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let sol = a.svd(true, true).solve(&b, 1e-14).map_err(|e| GeometryError::Invalid(e.to_string()))?;
    let coeffs = basis
        .into_iter()
        .zip(sol.iter())
        .map(|(bidx, &v)| {
            let d = bidx.iter().sum::<usize>() as i32;
            (bidx, v / radius.powi(d))
        })
        .collect();
    Ok(LocalGraph { p: p.to_vec(), normal: nu, tangent, radius, samples, coeffs })
}

/// Contact data at one point of the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct PointContact {
    pub p: Vec<f64>,
    /// Smallest and largest contact order over the tangent directions.
    pub min_order: usize,
    pub max_order: usize,
    /// `κ(Σ,γ;p)` for `γ = 2..=6`.
    pub kappa: Vec<f64>,
    /// `κ_0(Σ,γ;p)` (supremum over directions) for `γ = 2..=6`.
    pub kappa0: Vec<f64>,
    pub hessian_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactIndexReport {
    pub gamma: usize,
    pub gamma0: usize,
    /// `(γ, min_p κ(Σ,γ;p))` for `γ = 2..=6`.
    pub kappa_values: Vec<(usize, f64)>,
    /// `(γ, min_p κ_0(Σ,γ;p))`.
    pub kappa0_values: Vec<(usize, f64)>,
    /// Minimiser of `κ(Σ,γ;·)` at `γ = gamma`.
    pub argmin_p: Vec<f64>,
    pub convex: bool,
    pub points: Vec<PointContact>,
    /// Points where the contact order `gamma` is attained.
    pub extremal_points: Vec<Vec<f64>>,
}

impl ContactIndexReport {
    pub fn kappa(&self, gamma: usize) -> Option<f64> {
        self.kappa_values.iter().find(|(g, _)| *g == gamma).map(|v| v.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactOptions {
    /// Points on `Σ` (per great circle for `n = 2`, total for `n = 3`).
    pub n_points: usize,
    /// Tangent directions for `n = 3`.
    pub n_directions: usize,
    pub radius_rel: f64,
    pub tol: f64,
}

impl Default for ContactOptions {
    fn default() -> Self {
        Self { n_points: 64, n_directions: 64, radius_rel: 0.05, tol: 1e-9 }
    }
}

fn tangent_directions(m: usize, count: usize) -> Vec<Vec<f64>> {
    if m == 1 {
        return vec![vec![1.0]];
    }
    (0..count).map(|i| {
        let a = PI * i as f64 / count as f64;
        vec![a.cos(), a.sin()]
    }).collect()
}

pub fn point_contact(surface: &LevelSurface, p: &[f64], opts: &ContactOptions) -> Result<PointContact> {
    let g = local_graph(surface, p, opts.radius_rel)?;
    let dirs = tangent_directions(g.tangent.len(), opts.n_directions);
    let (mut min_order, mut max_order) = (usize::MAX, 0);
    let mut kappa = vec![f64::INFINITY; ORDER_CAP - 1];
    let mut kappa0 = vec![0.0f64; ORDER_CAP - 1];
    for w in &dirs {
        let order = (2..=ORDER_CAP).find(|&j| g.significant(j, w, opts.tol)).ok_or_else(|| GeometryError::OrderCapExceeded { p: p.to_vec() })?;
        min_order = min_order.min(order);
        max_order = max_order.max(order);
        let mut acc = 0.0;
        for j in 2..=ORDER_CAP {
            acc += g.radial_derivative(j, w).abs();
            kappa[j - 2] = kappa[j - 2].min(acc);
            kappa0[j - 2] = kappa0[j - 2].max(acc);
        }
    }
    let hm = g.hessian();
    let hessian_max = hm.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PointContact { p: p.to_vec(), min_order, max_order, kappa, kappa0, hessian_max })
}

/// `γ = max_p max_ω`, `γ_0 = max_p min_ω` of the contact orders and the `κ` tables.
pub fn contact_indices(surface: &LevelSurface, opts: &ContactOptions) -> Result<ContactIndexReport> {
    let min_points = if surface.n == 2 { 64 } else { 1300 };
    if opts.n_points < min_points || (surface.n == 3 && opts.n_directions < 16) {
        return Err(GeometryError::Invalid(format!("need ≥ {min_points} surface points (64 per great circle)")));
    }
    let mut dirs = direction_grid(surface.n, opts.n_points);
    if surface.n == 2 {
        dirs.extend(inflection_directions(surface, opts.n_points, opts.radius_rel)?);
    }
    let points = dirs
        .iter()
        .map(|w| point_contact(surface, &surface.point_in_direction(w), opts))
        .collect::<Result<Vec<_>>>()?;
    let gamma = points.iter().map(|p| p.max_order).max().unwrap_or(2);
    let gamma0 = points.iter().map(|p| p.min_order).max().unwrap_or(2);
    let kappa_values: Vec<(usize, f64)> = (2..=ORDER_CAP).map(|g| (g, points.iter().map(|p| p.kappa[g - 2]).fold(f64::INFINITY, f64::min))).collect();
    let kappa0_values = (2..=ORDER_CAP).map(|g| (g, points.iter().map(|p| p.kappa0[g - 2]).fold(f64::INFINITY, f64::min))).collect();
    let argmin_p = points
        .iter()
        .min_by(|a, b| a.kappa[gamma - 2].total_cmp(&b.kappa[gamma - 2]))
        .map(|p| p.p.clone())
        .unwrap_or_default();
    let convex = points.iter().all(|p| {
        let rho = opts.radius_rel * norm(&p.p);
        p.hessian_max * rho * rho / 2.0 <= opts.tol * norm(&p.p)
    });
    let extremal_points = points.iter().filter(|p| p.max_order == gamma).map(|p| p.p.clone()).collect();
    Ok(ContactIndexReport { gamma, gamma0, kappa_values, kappa0_values, argmin_p, convex, points, extremal_points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyMode {
    /// `inf` over all members.
    Uniform,
    /// `liminf` proxy: minimum over the members in the upper half of the `t`-grid.
    Asymptotic,
}

#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub t: f64,
    /// Spatial parameter for `x`-dependent families; empty otherwise.
    pub x: Vec<f64>,
    pub surface: LevelSurface,
}

/// Smallest `γ ≤ 6` whose `κ(Σ,γ)` stays above `kappa_tol` over the family.
pub fn family_index(members: &[FamilyMember], mode: FamilyMode, x_uniform: bool, kappa_tol: f64, opts: &ContactOptions) -> Result<usize> {
    if members.is_empty() {
        return Err(GeometryError::Invalid("empty family".into()));
    }
    if !x_uniform && members.iter().any(|m| m.x != members[0].x) {
        return Err(GeometryError::Invalid("several x values need x_uniform".into()));
    }
    let (tmin, tmax) = members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), m| (a.min(m.t), b.max(m.t)));
    let mid = 0.5 * (tmin + tmax);
    let used: Vec<&FamilyMember> = match mode {
        FamilyMode::Uniform => members.iter().collect(),
        FamilyMode::Asymptotic => members.iter().filter(|m| m.t >= mid).collect(),
    };
    let mut mins = vec![f64::INFINITY; ORDER_CAP - 1];
    for m in used {
        let mut o = *opts;
        o.n_points = o.n_points.max(if m.surface.n == 2 { 64 } else { 1300 });
        let pts = direction_grid(m.surface.n, o.n_points);
        for w in pts {
            let pc = point_contact(&m.surface, &m.surface.point_in_direction(&w), &o).or_else(|e| match e {
                GeometryError::OrderCapExceeded { .. } => Ok(PointContact { p: vec![], min_order: 0, max_order: 0, kappa: vec![0.0; ORDER_CAP - 1], kappa0: vec![0.0; ORDER_CAP - 1], hessian_max: 0.0 }),
                e => Err(e),
            })?;
            for g in 0..ORDER_CAP - 1 {
                mins[g] = mins[g].min(pc.kappa[g]);
            }
        }
    }
    (2..=ORDER_CAP).find(|&g| mins[g - 2] > kappa_tol).ok_or(GeometryError::NoFiniteIndex)
}

pub type TimePhase = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Amplitude supported in `ρ_lo ≤ |ξ| ≤ ρ_hi`.
#[derive(Clone)]
pub struct OscAmplitude {
    pub f: Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>,
    pub rho_lo: f64,
    pub rho_hi: f64,
    /// The amplitude vanishes to infinite order at both radial edges.
    pub smooth_edges: bool,
}

/// Smooth bump on `(lo, hi)`.
pub fn bump(s: f64, lo: f64, hi: f64) -> f64 {
    if s <= lo || s >= hi {
        return 0.0;
    }
    let u = 2.0 * (s - lo) / (hi - lo) - 1.0;
    (1.0 - 1.0 / (1.0 - u * u)).exp()
}

impl OscAmplitude {
    /// Radial bump on `lo < |ξ| < hi`.
    pub fn radial_bump(lo: f64, hi: f64) -> Self {
        Self { f: Arc::new(move |x: &[f64]| c(bump(norm(x), lo, hi), 0.0)), rho_lo: lo, rho_hi: hi, smooth_edges: true }
    }

    /// `e^{−|ξ|²/2}`, truncated at `|ξ| = 9`.
    pub fn gaussian() -> Self {
        Self { f: Arc::new(|x: &[f64]| c((-0.5 * dot(x, x)).exp(), 0.0)), rho_lo: 0.0, rho_hi: 9.0, smooth_edges: false }
    }
}

/// Littlewood–Paley profile supported in `(1/2, 2)`.
pub fn lp_cutoff(s: f64) -> f64 {
    bump(s, 0.5, 2.0)
}

#[allow(clippy::too_many_arguments)]
fn osc_sum(phase: &TimePhase, amp: &OscAmplitude, t: f64, x: &[f64], level: Option<i32>, n_rho: usize, n_phi: usize, rho: (f64, f64), oscillate: bool) -> C64 {
    let (lo, hi) = rho;
    let (nodes, weights): (Vec<f64>, Vec<f64>) = if amp.smooth_edges {
        let h = (hi - lo) / n_rho as f64;
        ((1..n_rho).map(|i| lo + h * i as f64).collect(), vec![h; n_rho - 1])
    } else {
        let (gx, gw) = gauss_legendre::<f64>(16);
        let panels = n_rho.div_ceil(16).max(1);
        let hp = (hi - lo) / panels as f64;
        let mut xs = Vec::with_capacity(panels * 16);
        let mut ws = Vec::with_capacity(panels * 16);
        for p in 0..panels {
            for (a, w) in gx.iter().zip(&gw) {
                xs.push(lo + hp * (p as f64 + 0.5 * (a + 1.0)));
                ws.push(0.5 * hp * w);
            }
        }
        (xs, ws)
    };
    let mut total = c(0.0, 0.0);
    let dphi = 2.0 * PI / n_phi as f64;
    for k in 0..n_phi {
        let phi = dphi * k as f64;
        let w = [phi.cos(), phi.sin()];
        let th = phase(t, &w);
        let s = if oscillate { dot(x, &w) + t * th } else { 0.0 };
        let mut inner = c(0.0, 0.0);
        for (&r, &wt) in nodes.iter().zip(&weights) {
            let xi = [r * w[0], r * w[1]];
            let mut a = (amp.f)(&xi);
            if let Some(j) = level {
                a *= lp_cutoff(2f64.powi(-j) * r * th);
            }
            inner += a * c(0.0, r * s).exp() * (r * wt);
        }
        total += inner * dphi;
    }
    total
}

/// `I(t,x)` in two dimensions: trapezoid in angle, trapezoid (smooth edges) or composite
/// Gauss–Legendre in the radius, with node counts scaled to the phase variation and refined until
/// two resolutions agree to `rel_tol·∫|a|`.
pub fn oscillatory_integral(phase: &TimePhase, amp: &OscAmplitude, t: f64, x: &[f64], level: Option<i32>, rel_tol: f64) -> Result<C64> {
    if x.len() != 2 {
        return Err(GeometryError::Invalid("full oscillatory integrals are implemented for n = 2".into()));
    }
    let mut rho = (amp.rho_lo, amp.rho_hi);
    let mut smooth = amp.smooth_edges;
    let grid = direction_grid(2, 256);
    let ths: Vec<f64> = grid.iter().map(|w| phase(t, w)).collect();
    if let Some(j) = level {
        let (tmin, tmax) = ths.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        rho = (rho.0.max(0.5 * 2f64.powi(j) / tmax), rho.1.min(2.0 * 2f64.powi(j) / tmin));
        smooth = true;
        if rho.1 <= rho.0 {
            return Ok(c(0.0, 0.0));
        }
    }
    let dth = ths.iter().enumerate().map(|(i, v)| (ths[(i + 1) % ths.len()] - v).abs() / (2.0 * PI / 256.0)).fold(0.0, f64::max);
    let th_max = ths.iter().copied().fold(0.0, f64::max);
    let xn = norm(x);
    let s_max = xn + t * th_max;
    let span = rho.1 - rho.0;
    let mut n_rho = ((s_max * span) / PI + 128.0).ceil() as usize;
    let mut n_phi = ((1.3 * rho.1 * (xn + t * (th_max + dth))) + 96.0).ceil() as usize;
    let a2 = OscAmplitude { smooth_edges: smooth, ..amp.clone() };
    let scale = {
        let abs_amp = OscAmplitude { f: Arc::new({ let f = amp.f.clone(); move |xi: &[f64]| c(f(xi).norm(), 0.0) }), ..a2.clone() };
        let s = osc_sum(phase, &abs_amp, t, x, level, 64, 64, rho, false);
        s.norm().max(1e-300)
    };
    let mut prev = osc_sum(phase, &a2, t, x, level, n_rho, n_phi, rho, true);
    for _ in 0..4 {
        n_rho = n_rho * 3 / 2;
        n_phi = n_phi * 3 / 2;
        let cur = osc_sum(phase, &a2, t, x, level, n_rho, n_phi, rho, true);
        if (cur - prev).norm() <= rel_tol * scale {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(GeometryError::QuadratureFailure { t, last_reliable: None })
}

/// `4π ∫ A(ρ) ρ² e^{itρ} sin(ρr)/(ρr) dρ`: the free-wave kernel in three dimensions for a radial
/// amplitude supported in `(lo, hi)`, evaluated at `|x| = r`.
pub fn free_wave_kernel_3d(a: &dyn Fn(f64) -> f64, lo: f64, hi: f64, t: f64, r: f64) -> C64 {
    let n = (((t + r) * (hi - lo)) / PI + 256.0).ceil() as usize;
    let h = (hi - lo) / n as f64;
    let mut s = c(0.0, 0.0);
    for i in 1..n {
        let rho = lo + h * i as f64;
        let sinc = if rho * r == 0.0 { 1.0 } else { (rho * r).sin() / (rho * r) };
        s += c(0.0, t * rho).exp() * (a(rho) * rho * rho * sinc * h);
    }
    s * (4.0 * PI)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFitResult {
    pub exponent: f64,
    /// 2.5% and 97.5% bootstrap quantiles.
    pub band: (f64, f64),
    pub n_used: usize,
}

/// Log-log least squares over the upper half (in `log t`) of the samples, with a 200-fold
/// pairs bootstrap.
pub fn decay_fit(samples: &[(f64, f64)], seed: u64) -> Result<DecayFitResult> {
    let good: Vec<(f64, f64)> = samples.iter().copied().filter(|(t, v)| *t > 0.0 && *v > 0.0 && v.is_finite()).collect();
    let (tmin, tmax) = good.iter().fold((f64::INFINITY, 0.0f64), |(a, b), (t, _)| (a.min(*t), b.max(*t)));
    if good.len() < 8 || tmax < 10.0 * tmin {
        return Err(GeometryError::InsufficientRange);
    }
    let mid = 0.5 * (tmin.ln() + tmax.ln());
    let used: Vec<(f64, f64)> = good.iter().filter(|(t, _)| t.ln() >= mid - 1e-12).map(|(t, v)| (t.ln(), v.ln())).collect();
    let fit = |pts: &[(f64, f64)]| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        linear_fit(&xs, &ys).slope
    };
    let exponent = fit(&used);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes = Vec::with_capacity(200);
    while slopes.len() < 200 {
        let pick: Vec<(f64, f64)> = (0..used.len()).map(|_| used[rng.random_range(0..used.len())]).collect();
        let s = fit(&pick);
        if s.is_finite() {
            slopes.push(s);
        }
    }
    slopes.sort_by(f64::total_cmp);
    Ok(DecayFitResult { exponent, band: (slopes[4], slopes[194]), n_used: used.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersiveRow {
    pub t: f64,
    /// `max |I(t,x)|` over the stationary rays `x = −t∇ϑ(ξ*)`.
    pub sup_ray: f64,
    pub argmax_ray: usize,
    /// `max |I(t,x)|` over random non-stationary points.
    pub off_ray: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersiveConfig {
    pub times: Vec<f64>,
    /// Directions `ξ*` defining the stationary rays.
    pub rays: Vec<Vec<f64>>,
    pub off_ray_points: usize,
    pub seed: u64,
    pub rel_tol: f64,
}

/// Sup of `|I(t,·)|` along stationary rays for each `t`, with the decay fit.
pub fn dispersive_sup(phase: &TimePhase, amp: &OscAmplitude, cfg: &DispersiveConfig) -> Result<(Vec<DispersiveRow>, DecayFitResult)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.times.len());
    let mut last = None;
    for &t in &cfg.times {
        let wrap = |e: GeometryError| match e {
            GeometryError::QuadratureFailure { t, .. } => GeometryError::QuadratureFailure { t, last_reliable: last },
            e => e,
        };
        let grad = |w: &[f64]| -> Vec<f64> {
            let h = 1e-5;
            (0..2).map(|k| {
                let mut a = w.to_vec();
                let mut b = w.to_vec();
                a[k] += h;
                b[k] -= h;
                (phase(t, &a) - phase(t, &b)) / (2.0 * h)
            }).collect()
        };
        let (mut best, mut arg) = (0.0f64, 0);
        for (i, w) in cfg.rays.iter().enumerate() {
            let g = grad(w);
            let x = [-t * g[0], -t * g[1]];
            let v = oscillatory_integral(phase, amp, t, &x, None, cfg.rel_tol).map_err(wrap)?.norm();
            if v > best {
                best = v;
                arg = i;
            }
        }
        let gmin = direction_grid(2, 256).iter().map(|w| norm(&grad(w))).fold(f64::INFINITY, f64::min);
        let mut off = 0.0f64;
        for _ in 0..cfg.off_ray_points {
            let a = rng.random_range(0.0..2.0 * PI);
            let rr = rng.random_range(0.0..0.5) * t * gmin;
            let x = [rr * a.cos(), rr * a.sin()];
            off = off.max(oscillatory_integral(phase, amp, t, &x, None, cfg.rel_tol).map_err(wrap)?.norm());
        }
        rows.push(DispersiveRow { t, sup_ray: best, argmax_ray: arg, off_ray: off });
        last = Some(t);
    }
    let fit = decay_fit(&rows.iter().map(|r| (r.t, r.sup_ray)).collect::<Vec<_>>(), cfg.seed)?;
    Ok((rows, fit))
}

/// Phase `ϑ(t,ξ) = τ(ξ)` of a fixed level surface.
pub fn static_phase(surface: &LevelSurface) -> TimePhase {
    let p = surface.phase.clone();
    Arc::new(move |_t, xi: &[f64]| p(xi))
}

/// Zeros of the curvature along the `n = 2` point grid, refined by bisection in the angle.
pub fn inflection_directions(surface: &LevelSurface, n_points: usize, radius_rel: f64) -> Result<Vec<Vec<f64>>> {
    if surface.n != 2 {
        return Err(GeometryError::Invalid("inflection search is planar".into()));
    }
    let curv = |a: f64| -> Result<f64> {
        let w = [a.cos(), a.sin()];
        let g = local_graph(surface, &surface.point_in_direction(&w), radius_rel)?;
        Ok(g.hessian()[(0, 0)])
    };
    let mut out = Vec::new();
    let step = 2.0 * PI / n_points as f64;
    let mut prev = curv(0.0)?;
    for i in 1..=n_points {
        let a1 = step * i as f64;
        let cur = curv(a1)?;
        if (cur > 0.0) != (prev > 0.0) {
            let (mut lo, mut hi, mut flo) = (a1 - step, a1, prev);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                let fm = curv(mid)?;
                if (fm > 0.0) == (flo > 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let a = 0.5 * (lo + hi);
            out.push(vec![a.cos(), a.sin()]);
        }
        prev = cur;
    }
    Ok(out)
}
