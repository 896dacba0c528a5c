//! Hill's equation û_tt + |ξ|²a(t)²û = 0: monodromy, Floquet exponents, instability scans and
//! resonant coefficients built from rescaled periodic bumps.
//!
//! States are V = (|ξ|û, D_tû) with D_tV = [[0,|ξ|],[a²|ξ|,0]]V; the pointwise energy is
//! |V_2|² + a²|V_1|².

use crate::linalg::{eigenvalues, r, CMat, C64, I};
use crate::ode::{solve, solve_at, OdeError, OdeOptions};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FloquetError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("sequence error: {0}")]
    SequenceError(String),
    #[error("no instability interval found in the scanned range")]
    NoInstability,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, FloquetError>;

/// φ(s) = ε·exp(1 − 1/(1 − (2s−1)²)) on (0,1), zero elsewhere; max φ = ε at s = ½.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub eps: f64,
}

impl Bump {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps.abs() < 1.0) {
            return Err(FloquetError::Invalid(format!("bump amplitude must satisfy |eps| < 1, got {eps}")));
        }
        Ok(Bump { eps })
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 || s >= 1.0 {
            return 0.0;
        }
        let x = 2.0 * s - 1.0;
        let q = 1.0 - x * x;
        self.eps * (1.0 - 1.0 / q).exp()
    }

    pub fn deriv(&self, s: f64) -> f64 {
        if s <= 0.0 || s >= 1.0 {
            return 0.0;
        }
        let x = 2.0 * s - 1.0;
        let q = 1.0 - x * x;
        // d/ds of −1/q = −(2x·2)/q²
        self.eval(s) * (-4.0 * x / (q * q))
    }

    /// Periodisation b(s) = φ(s − ⌊s⌋).
    pub fn periodic(&self, s: f64) -> f64 {
        self.eval(s - s.floor())
    }

    pub fn periodic_deriv(&self, s: f64) -> f64 {
        self.deriv(s - s.floor())
    }

    /// sup |φ′|/(1+φ) on a grid of spacing 1e-4: the Gronwall constant sup |a′|/a for a = 1 + φ.
    pub fn gronwall_constant(&self) -> f64 {
        (1..10_000).map(|i| i as f64 * 1e-4).map(|s| self.deriv(s).abs() / (1.0 + self.eval(s))).fold(0.0, f64::max)
    }

    /// sup |φ′|/max(φ, 1e-12) on a grid of spacing 1e-3, the literal quotient with a floored bump.
    pub fn floored_quotient(&self) -> f64 {
        (1..1000).map(|i| i as f64 * 1e-3).map(|s| self.deriv(s).abs() / self.eval(s).abs().max(1e-12)).fold(0.0, f64::max)
    }
}

/// a(t) = 1 + φ(frac(n·t)), 1/n-periodic (and 1-periodic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicCoefficient {
    pub bump: Bump,
    pub compression: u32,
}

impl PeriodicCoefficient {
    pub fn new(bump: Bump) -> Self {
        PeriodicCoefficient { bump, compression: 1 }
    }

    pub fn compressed(bump: Bump, n: u32) -> Self {
        PeriodicCoefficient { bump, compression: n.max(1) }
    }

    pub fn eval(&self, t: f64) -> f64 {
        1.0 + self.bump.periodic(self.compression as f64 * t)
    }
}

fn hill_rhs<'a>(a: &'a dyn Fn(f64) -> f64, xi: f64) -> impl FnMut(f64, &[C64], &mut [C64]) + 'a {
    move |t: f64, y: &[C64], dy: &mut [C64]| {
        let a2 = a(t).powi(2);
        // ∂_tV = i·[[0,ξ],[a²ξ,0]]V
        dy[0] = I * y[1] * xi;
        dy[1] = I * y[0] * (a2 * xi);
    }
}

fn opts(tol: f64) -> OdeOptions<f64> {
    let mut o = OdeOptions::with_tol(tol);
    o.atol = tol * 1e-3;
    o.max_steps = 5_000_000;
    o
}

/// E(t,s,ξ) for a general speed a(t).
pub fn hill_propagator(a: &dyn Fn(f64) -> f64, xi: f64, t: f64, s: f64, tol: f64) -> Result<CMat> {
    let (c0, _) = solve(hill_rhs(a, xi), s, &[r(1.0), r(0.0)], t, &opts(tol))?;
    let (c1, _) = solve(hill_rhs(a, xi), s, &[r(0.0), r(1.0)], t, &opts(tol))?;
    Ok(CMat::from_row_slice(2, 2, &[c0[0], c1[0], c0[1], c1[1]]))
}

pub fn energy(v: &[C64], a: f64) -> f64 {
    v[1].norm_sqr() + a * a * v[0].norm_sqr()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyResult {
    pub m: CMat,
    pub eigenvalues: [C64; 2],
    /// Floquet exponent, acosh(|tr M|/2) when |tr M| > 2, else 0.
    pub kappa: f64,
    pub stable: bool,
    /// |tr M| within 1e-8 of 2; κ is then not resolved.
    pub jordan: bool,
}

/// Monodromy E(1,0,ξ) of a 1-periodic speed.
pub fn monodromy_of(a: &dyn Fn(f64) -> f64, xi: f64, tol: f64) -> Result<MonodromyResult> {
    if !(xi > 0.0) {
        return Err(FloquetError::Invalid(format!("|xi| must be positive, got {xi}")));
    }
    let m = hill_propagator(a, xi, 1.0, 0.0, tol)?;
    let ev = eigenvalues(&m);
    let half_tr = (m[(0, 0)] + m[(1, 1)]).re.abs() / 2.0;
    let jordan = (half_tr - 1.0).abs() <= 1e-8;
    let kappa = if half_tr > 1.0 { half_tr.acosh() } else { 0.0 };
    Ok(MonodromyResult { m, eigenvalues: [ev[0], ev[1]], kappa, stable: half_tr < 1.0 - 1e-8, jordan })
}

pub fn monodromy(a: &PeriodicCoefficient, xi: f64, tol: f64) -> Result<MonodromyResult> {
    monodromy_of(&|t| a.eval(t), xi, tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityInterval {
    pub lo: f64,
    pub hi: f64,
    pub max_kappa: f64,
    pub argmax: f64,
}

impl InstabilityInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// κ(ξ) on a uniform grid with `resolution` points per unit.
pub fn kappa_scan(a: &PeriodicCoefficient, xi_range: (f64, f64), resolution: usize, tol: f64) -> Result<Vec<(f64, f64)>> {
    if resolution < 16 || !(xi_range.0 > 0.0 && xi_range.1 > xi_range.0) {
        return Err(FloquetError::Invalid(format!("resolution {resolution} < 16 or bad range {xi_range:?}")));
    }
    let n = ((xi_range.1 - xi_range.0) * resolution as f64).ceil() as usize + 1;
    (0..n)
        .map(|i| {
            let xi = xi_range.0 + (xi_range.1 - xi_range.0) * i as f64 / (n - 1) as f64;
            Ok((xi, monodromy(a, xi, tol)?.kappa))
        })
        .collect()
}

/// Maximal sampled intervals with κ > 1e-6.
pub fn instability_scan(a: &PeriodicCoefficient, xi_range: (f64, f64), resolution: usize) -> Result<Vec<InstabilityInterval>> {
    Ok(intervals_from_scan(&kappa_scan(a, xi_range, resolution, 1e-11)?, 1e-6))
}

pub fn intervals_from_scan(scan: &[(f64, f64)], threshold: f64) -> Vec<InstabilityInterval> {
    let mut out: Vec<InstabilityInterval> = Vec::new();
    let mut cur: Option<InstabilityInterval> = None;
    for &(xi, k) in scan {
        if k > threshold {
            let c = cur.get_or_insert(InstabilityInterval { lo: xi, hi: xi, max_kappa: k, argmax: xi });
            c.hi = xi;
            if k > c.max_kappa {
                c.max_kappa = k;
                c.argmax = xi;
            }
        } else if let Some(c) = cur.take() {
            out.push(c);
        }
    }
    out.extend(cur);
    out
}

/// a(t) = 1 + η_k b((n_k/δ_k)(t − τ_k)) on I_k = [τ_k, τ_k+δ_k], 1 elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonantCoefficient {
    pub tau: Vec<f64>,
    pub delta: Vec<f64>,
    pub eta: Vec<f64>,
    pub n: Vec<u32>,
    pub bump: Bump,
}

pub fn build_coefficient(tau: Vec<f64>, delta: Vec<f64>, eta: Vec<f64>, n: Vec<u32>, bump: Bump) -> Result<ResonantCoefficient> {
    let k = tau.len();
    if delta.len() != k || eta.len() != k || n.len() != k || k == 0 {
        return Err(FloquetError::SequenceError("sequences must be nonempty and of equal length".into()));
    }
    for i in 0..k {
        if !(delta[i] > 0.0) || !(eta[i] <= 1.0 && eta[i] >= 0.0) || n[i] == 0 || !(tau[i] >= 0.0) {
            return Err(FloquetError::SequenceError(format!("invalid entry {i}: tau {}, delta {}, eta {}, n {}", tau[i], delta[i], eta[i], n[i])));
        }
        if i + 1 < k && tau[i + 1] <= tau[i] + delta[i] {
            return Err(FloquetError::SequenceError(format!("interval {i} overlaps the next: tau {} <= {} + {}", tau[i + 1], tau[i], delta[i])));
        }
    }
    Ok(ResonantCoefficient { tau, delta, eta, n, bump })
}

impl ResonantCoefficient {
    /// τ_k = σ^k, δ_k = σ^{k−1}, n_k = ⌈σ^{qk}⌉, η_k = 1 for k = 1..=K.
    pub fn geometric(sigma: f64, q: f64, k_max: usize, bump: Bump) -> Result<Self> {
        let ks = 1..=k_max;
        build_coefficient(
            ks.clone().map(|k| sigma.powi(k as i32)).collect(),
            ks.clone().map(|k| sigma.powi(k as i32 - 1)).collect(),
            vec![1.0; k_max],
            ks.map(|k| sigma.powf(q * k as f64).ceil() as u32).collect(),
            bump,
        )
    }

    pub fn interval_of(&self, t: f64) -> Option<usize> {
        (0..self.tau.len()).find(|&k| t >= self.tau[k] && t <= self.tau[k] + self.delta[k])
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.interval_of(t) {
            Some(k) => 1.0 + self.eta[k] * self.bump.periodic(self.n[k] as f64 / self.delta[k] * (t - self.tau[k])),
            None => 1.0,
        }
    }

    /// Per interval and ℓ ∈ 1..=3: sup |∂_t^ℓ a| / (η_k (n_k/δ_k)^ℓ), i.e. sup |b^{(ℓ)}| over the
    /// cells of the interval, by central differences.
    pub fn derivative_report(&self, samples_per_cell: usize) -> Vec<[f64; 3]> {
        (0..self.tau.len())
            .map(|k| {
                let cells = self.n[k] as usize;
                let mut out = [0.0f64; 3];
                let h = 2e-3;
                for i in 1..samples_per_cell * cells {
                    let s = i as f64 / samples_per_cell as f64;
                    let f = |x: f64| self.bump.periodic(x);
                    let d1 = (f(s + h) - f(s - h)) / (2.0 * h);
                    let d2 = (f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h);
                    let d3 = (f(s + 2.0 * h) - 2.0 * f(s + h) + 2.0 * f(s - h) - f(s - 2.0 * h)) / (2.0 * h * h * h);
                    for (o, d) in out.iter_mut().zip([d1, d2, d3]) {
                        *o = o.max(d.abs());
                    }
                }
                out
            })
            .collect()
    }

    /// sup over t ∈ I_k of |∂_t^ℓ a(t)| for ℓ = 1..=3.
    pub fn derivative_sup(&self, k: usize) -> [f64; 3] {
        let rate = self.n[k] as f64 / self.delta[k];
        let norm = self.derivative_report(400)[k];
        [self.eta[k] * rate * norm[0], self.eta[k] * rate.powi(2) * norm[1], self.eta[k] * rate.powi(3) * norm[2]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRow {
    pub k: usize,
    pub xi: f64,
    /// log 𝔼(u_k, τ_k + δ_k) with 𝔼(u_k, 0) = 1.
    pub log_energy: f64,
    /// log 𝔼(u_k, τ_k+δ_k) − log 𝔼(u_k, τ_k).
    pub interval_gain: f64,
    /// 2κn_k − 2cΣ_{ℓ<k} n_ℓ.
    pub lower_bound: f64,
    /// Largest relative energy change over gaps between intervals.
    pub gap_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub kappa: f64,
    pub xi_star: f64,
    /// Gronwall constant sup|φ′|/(1+φ).
    pub c: f64,
    /// sup|φ′|/max(φ,1e-12), the literal quotient.
    pub c_floored: f64,
    pub rows: Vec<GrowthRow>,
}

/// Unstable monodromy eigenvector, normalised to unit energy at a = 1.
fn unstable_eigenvector(m: &CMat) -> (C64, [C64; 2]) {
    let ev = eigenvalues(m);
    let lam = if ev[0].norm() >= ev[1].norm() { ev[0] } else { ev[1] };
    let (a, b, c, d) = (m[(0, 0)] - lam, m[(0, 1)], m[(1, 0)], m[(1, 1)] - lam);
    let v = if b.norm() + a.norm() >= c.norm() + d.norm() { [b, -a] } else { [-d, c] };
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    (lam, [v[0] / n, v[1] / n])
}

/// For each k ≤ K: data whose restriction to I_k is the rescaled unstable Floquet solution at the
/// instability argmax ξ*, normalised to unit energy at t = 0.
pub fn energy_growth_experiment(coef: &ResonantCoefficient, k_max: usize, xi_range: (f64, f64), resolution: usize) -> Result<GrowthReport> {
    let unit = PeriodicCoefficient::new(coef.bump);
    let intervals = instability_scan(&unit, xi_range, resolution)?;
    let best = intervals.iter().max_by(|a, b| a.max_kappa.partial_cmp(&b.max_kappa).unwrap()).ok_or(FloquetError::NoInstability)?;
    let xi_star = best.argmax;
    let mono = monodromy(&unit, xi_star, 1e-12)?;
    let kappa = mono.kappa;
    let (_, v) = unstable_eigenvector(&mono.m);
    let c = coef.bump.gronwall_constant();
    let c_floored = coef.bump.floored_quotient();
    let a = |t: f64| coef.eval(t);
    let mut rows = Vec::new();
    for k in 0..k_max.min(coef.tau.len()) {
        let xi = coef.n[k] as f64 / coef.delta[k] * xi_star;
        let (tk, ek) = (coef.tau[k], coef.tau[k] + coef.delta[k]);
        let (back, _) = solve(hill_rhs(&a, xi), tk, &v, 0.0, &opts(1e-12))?;
        let e0 = energy(&back, 1.0);
        let mut checkpoints: Vec<f64> = Vec::new();
        for l in 0..k {
            checkpoints.push(coef.tau[l]);
            checkpoints.push(coef.tau[l] + coef.delta[l]);
        }
        checkpoints.push(tk);
        checkpoints.push(ek);
        let states = solve_at(hill_rhs(&a, xi), 0.0, &back, &checkpoints, &opts(1e-12))?;
        let energies: Vec<f64> = states.iter().map(|s| energy(s, 1.0) / e0).collect();
        let mut gap_drift = 0.0f64;
        let mut prev_end = 1.0;
        for l in 0..=k {
            gap_drift = gap_drift.max((energies[2 * l] / prev_end - 1.0).abs());
            prev_end = energies[2 * l + 1];
        }
        let n_prev: f64 = coef.n[..k].iter().map(|&n| n as f64).sum();
        rows.push(GrowthRow {
            k: k + 1,
            xi,
            log_energy: energies[2 * k + 1].ln(),
            interval_gain: (energies[2 * k + 1] / energies[2 * k]).ln(),
            lower_bound: 2.0 * kappa * coef.n[k] as f64 - 2.0 * c * n_prev,
            gap_drift,
        });
    }
    Ok(GrowthReport { kappa, xi_star, c, c_floored, rows })
}
