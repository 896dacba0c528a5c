//! Partially dissipative hyperbolic systems `D_tU = Σ A_k(t) D_{x_k} U + i B(t) U` and the
//! diffusion phenomenon for `u_tt − Δu + u_t = 0`.
//!
//! In Fourier space the systems read `∂_t Û = (i A(t,ξ) − B(t)) Û` with `A(t,ξ) = Σ A_k(t) ξ_k`.
//! Small frequencies are treated by diagonalising `B(t)` and running the hierarchy in the
//! polynomial classes `P{m}`; the upper-left entry of `F_2` yields the parabolic reference
//! problem.

use crate::fit::{linear_fit, loglog_slope};
use crate::linalg::{c, eye, inverse, norm2, r, CMat, CVec, C64};
use crate::models::{sphere_area, Profile};
use crate::ode::{solve_at, OdeError, OdeOptions};
use crate::phasespace::smooth_step;
use crate::quad::{gauss_legendre, integrate_vec, QuadError, QuadOptions};
use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

const I: C64 = C64::new(0.0, 1.0);
const FD_REL: f64 = 4e-3;
const XI_STEP: f64 = 5e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DissipativeError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("assumption (B1) fails at t = {t}: {what}")]
    NotDissipative { t: f64, what: String },
    #[error("eigenvalue gap {gap:e} of B below {required:e} at t = {t}")]
    GapViolation { gap: f64, required: f64, t: f64 },
    #[error("no ε-vector on the search grid gives the ¼/4 Lyapunov equivalence")]
    EquivalenceFailure,
    #[error("N_k not invertible at t = {t}, |ξ| = {xi}")]
    NotInvertible { t: f64, xi: f64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, DissipativeError>;

pub type TimeMat = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// Coefficients `A_1..A_n` and `B` of a partially dissipative system.
#[derive(Clone)]
pub struct PartiallyDissipativeSystem {
    pub a: Vec<TimeMat>,
    pub b: TimeMat,
    pub d: usize,
    /// Required lower bound on consecutive eigenvalue gaps of `B(t)`.
    pub gap_floor: f64,
}

fn rot_b(theta: f64) -> CMat {
    let (s, co) = theta.sin_cos();
    CMat::from_row_slice(2, 2, &[r(s * s), r(-s * co), r(-s * co), r(co * co)])
}

impl PartiallyDissipativeSystem {
    pub fn new(a: Vec<TimeMat>, b: TimeMat, d: usize, gap_floor: f64) -> Result<Self> {
        if a.is_empty() || d == 0 {
            return Err(DissipativeError::InvalidSystem("need n ≥ 1 and d ≥ 1".into()));
        }
        if !(gap_floor > 0.0) {
            return Err(DissipativeError::InvalidSystem("gap floor must be positive".into()));
        }
        let probe = |m: CMat| m.nrows() == d && m.ncols() == d;
        if !a.iter().all(|ak| probe(ak(1.0))) || !probe(b(1.0)) {
            return Err(DissipativeError::InvalidSystem(format!("coefficients must be {d}×{d}")));
        }
        Ok(Self { a, b, d, gap_floor })
    }

    /// `A = [[0,1],[1,0]]`, `B = diag(0,1)`: first component solves `u_tt − u_xx + u_t = 0`.
    pub fn classical() -> Self {
        let a = CMat::from_row_slice(2, 2, &[r(0.0), r(1.0), r(1.0), r(0.0)]);
        Self { a: vec![Arc::new(move |_| a.clone())], b: Arc::new(|_| rot_b(0.0)), d: 2, gap_floor: 0.5 }
    }

    /// As [`classical`](Self::classical) with `B(t) = Q(θ) diag(0,1) Q(θ)ᵀ`, `θ = θ₀/(1+t)`.
    pub fn rotating(theta0: f64) -> Self {
        let mut s = Self::classical();
        s.b = Arc::new(move |t| rot_b(theta0 / (1.0 + t)));
        s
    }

    /// Undamped variant `B = 0`.
    pub fn undamped() -> Self {
        let mut s = Self::classical();
        s.b = Arc::new(|_| CMat::zeros(2, 2));
        s
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// `A(t,ξ) = Σ A_k(t) ξ_k`.
    pub fn symbol(&self, t: f64, xi: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.d, self.d);
        for (ak, &x) in self.a.iter().zip(xi) {
            if x != 0.0 {
                m += ak(t) * r(x);
            }
        }
        m
    }

    /// Generator `iA(t,ξ) − B(t)` of `∂_t Û`.
    pub fn generator(&self, t: f64, xi: &[f64]) -> CMat {
        self.symbol(t, xi) * I - (self.b)(t)
    }

    /// Ascending eigenvalues of `B(t)` and a unitary diagonaliser with fixed gauge.
    pub fn b_spectrum(&self, t: f64) -> (Vec<f64>, CMat) {
        hermitian_eigen(&(self.b)(t))
    }

    /// Checks (B1) and (B2) at the sample times.
    pub fn validate_on(&self, times: &[f64]) -> Result<()> {
        for &t in times {
            for (k, ak) in self.a.iter().enumerate() {
                let m = ak(t);
                if (&m - m.adjoint()).camax() > 1e-10 * (1.0 + m.camax()) {
                    return Err(DissipativeError::NotDissipative { t, what: format!("A_{} not self-adjoint", k + 1) });
                }
            }
            let b = (self.b)(t);
            if (&b - b.adjoint()).camax() > 1e-10 * (1.0 + b.camax()) {
                return Err(DissipativeError::NotDissipative { t, what: "B not self-adjoint".into() });
            }
            let (delta, _) = hermitian_eigen(&b);
            if delta[0] < -1e-10 {
                return Err(DissipativeError::NotDissipative { t, what: format!("B has eigenvalue {:e}", delta[0]) });
            }
            if delta[0].abs() > 1e-8 {
                return Err(DissipativeError::InvalidSystem(format!("B(t) has no kernel at t = {t}")));
            }
            let gap = min_gap(&delta);
            if gap < self.gap_floor {
                return Err(DissipativeError::GapViolation { gap, required: self.gap_floor, t });
            }
        }
        Ok(())
    }

    /// `Û(τ)` for `τ ∈ ts`, starting from `y0` at `s`.
    pub fn propagate_state(&self, xi: &[f64], s: f64, y0: &CVec, ts: &[f64], tol: f64) -> Result<Vec<CVec>> {
        let opts = OdeOptions { rtol: tol, atol: tol * 1e-6, ..OdeOptions::default() };
        let ys = solve_at(
            |tau: f64, y: &[C64], dy: &mut [C64]| {
                let g = self.generator(tau, xi);
                let v = g * CVec::from_column_slice(y);
                dy.copy_from_slice(v.as_slice());
            },
            s,
            y0.as_slice(),
            ts,
            &opts,
        )?;
        Ok(ys.into_iter().map(|y| CVec::from_vec(y)).collect())
    }

    /// Fundamental matrix `E(τ,s,ξ)` for `τ ∈ ts`.
    pub fn propagator(&self, xi: &[f64], s: f64, ts: &[f64], tol: f64) -> Result<Vec<CMat>> {
        let d = self.d;
        let opts = OdeOptions { rtol: tol, atol: tol * 1e-6, ..OdeOptions::default() };
        let y0: Vec<C64> = eye(d).iter().copied().collect();
        let ys = solve_at(
            |tau: f64, y: &[C64], dy: &mut [C64]| {
                let g = self.generator(tau, xi);
                let e = CMat::from_column_slice(d, d, y);
                dy.copy_from_slice((g * e).as_slice());
            },
            s,
            &y0,
            ts,
            &opts,
        )?;
        Ok(ys.into_iter().map(|y| CMat::from_column_slice(d, d, &y)).collect())
    }
}

fn min_gap(delta: &[f64]) -> f64 {
    delta.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let d = m.nrows();
    let h = (m + m.adjoint()) * r(0.5);
    let e = SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let mut v = CMat::zeros(d, d);
    for (j, &i) in idx.iter().enumerate() {
        let mut col = e.eigenvectors.column(i).into_owned();
        let mx = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some(p) = col.iter().find(|z| z.norm() >= 0.5 * mx).copied() {
            col *= p.conj() / p.norm();
        }
        v.set_column(j, &col);
    }
    (vals, v)
}

/// `D_t = −i∂_t` by central differences with one Richardson level.
fn dt_fd(f: &mut dyn FnMut(f64) -> Result<CMat>, t: f64) -> Result<CMat> {
    let h = FD_REL * (1.0 + t.abs());
    let d1 = (f(t + h)? - f(t - h)?) / r(2.0 * h);
    let d2 = (f(t + 2.0 * h)? - f(t - 2.0 * h)?) / r(4.0 * h);
    Ok((d1 * r(4.0) - d2) * c(0.0, -1.0 / 3.0))
}

/// Rank report of the Kalman block `(B | AB | … | A^{d−1}B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanReport {
    pub rank: usize,
    pub min_singular_value: f64,
}

pub fn kalman_rank(sys: &PartiallyDissipativeSystem, t: f64, direction: &[f64]) -> Result<KalmanReport> {
    let nrm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (nrm - 1.0).abs() > 1e-10 || direction.len() != sys.n() {
        return Err(DissipativeError::Invalid("direction must be a unit vector in ℝⁿ".into()));
    }
    let d = sys.d;
    let a = sys.symbol(t, direction);
    let b = (sys.b)(t);
    let mut k = CMat::zeros(d, d * d);
    let mut blk = b.clone();
    for j in 0..d {
        k.view_mut((0, j * d), (d, d)).copy_from(&blk);
        blk = &a * blk;
    }
    let mut sv: Vec<f64> = k.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let tol = 1e-10 * sv[0].max(1.0);
    Ok(KalmanReport { rank: sv.iter().filter(|&&s| s > tol).count(), min_singular_value: sv[d - 1] })
}

/// Uniform (B3) bounds of `Σ_{j<d} ε_j ‖B A(t,ω)^j v‖²` over sampled times and directions.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanCertificate {
    pub lower: f64,
    pub upper: f64,
    /// `max(1/lower, upper)`.
    pub constant: f64,
}

pub fn kalman_certificate(sys: &PartiallyDissipativeSystem, eps: &[f64], times: &[f64], directions: &[Vec<f64>]) -> Result<KalmanCertificate> {
    if eps.len() != sys.d || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(DissipativeError::Invalid(format!("need {} positive weights", sys.d)));
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &t in times {
        let b = (sys.b)(t);
        for w in directions {
            let a = sys.symbol(t, w);
            let mut q = CMat::zeros(sys.d, sys.d);
            let mut p = b.clone();
            for &e in eps {
                q += p.adjoint() * &p * r(e);
                p = &p * &a;
            }
            let (ev, _) = hermitian_eigen(&q);
            lo = lo.min(ev[0]);
            hi = hi.max(ev[sys.d - 1]);
        }
    }
    Ok(KalmanCertificate { lower: lo, upper: hi, constant: (1.0 / lo).max(hi) })
}

/// Hermitian matrix `H` with `𝕃_ε[Û;t,ξ] = Û* H Û`; the inner product is antilinear in its first slot.
pub fn lyapunov_matrix(sys: &PartiallyDissipativeSystem, eps: &[f64], t: f64, xi: &[f64]) -> CMat {
    let d = sys.d;
    let mut h = eye(d);
    let nx = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nx == 0.0 {
        return h;
    }
    let w: Vec<f64> = xi.iter().map(|x| x / nx).collect();
    let aw = sys.symbol(t, &w);
    let m = nx.min(1.0 / nx);
    let mut p = (sys.b)(t);
    for &e in eps.iter().take(d - 1) {
        let q = &p * &aw;
        let g = p.adjoint() * &q;
        h += (&g - g.adjoint()) * c(0.0, -0.5 * m * e);
        p = q;
    }
    h
}

fn bracket_sq(xi: &[f64]) -> f64 {
    let s: f64 = xi.iter().map(|x| x * x).sum();
    s / (1.0 + s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovGrid {
    /// Sample times for the equivalence and differential checks.
    pub times: Vec<f64>,
    pub xis: Vec<Vec<f64>>,
    /// Initial time of the propagated decay fit.
    pub t0: f64,
    /// The fit covers `(t − t0)[ξ]² ∈ [0, horizon]`.
    pub horizon: f64,
    pub n_fit: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSample {
    pub t: f64,
    pub xi_abs: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Largest `γ` with `∂_t𝕃 + γ[ξ]²𝕃 ≤ 0` at this point.
    pub gamma_local: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub xi_abs: f64,
    pub gamma: f64,
    /// Sampled `(t, ‖E(t,t0,ξ)‖²)`.
    pub curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    pub eps: Vec<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub samples: Vec<LyapunovSample>,
    /// Samples with `gamma_local ≤ 0`.
    pub violations: usize,
    pub fits: Vec<DecayFit>,
    pub gamma: f64,
    /// Smallest `C` with `‖E‖² ≤ C e^{−γ(t−t0)[ξ]²}` on all fitted samples.
    pub envelope_c: f64,
}

fn sandwich_ok(sys: &PartiallyDissipativeSystem, eps: &[f64], grid: &LyapunovGrid) -> (bool, f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &t in &grid.times {
        for xi in &grid.xis {
            let (ev, _) = hermitian_eigen(&lyapunov_matrix(sys, eps, t, xi));
            lo = lo.min(ev[0]);
            hi = hi.max(ev[sys.d - 1]);
        }
    }
    (lo >= 0.25 && hi <= 4.0, lo, hi)
}

/// Searches `ε` for the ¼/4 equivalence, checks the differential inequality at the samples and
/// fits the pointwise decay rate from propagated fundamental matrices.
pub fn lyapunov_decay_verify(sys: &PartiallyDissipativeSystem, eps: &[f64], grid: &LyapunovGrid) -> Result<LyapunovReport> {
    let d = sys.d;
    if eps.len() + 1 != d.max(1) || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(DissipativeError::Invalid(format!("need {} positive weights", d - 1)));
    }
    if grid.n_fit < 4 || !(grid.horizon > 0.0) {
        return Err(DissipativeError::Invalid("decay fit needs n_fit ≥ 4 and a positive horizon".into()));
    }
    let mut chosen = None;
    let (ok, lo, hi) = sandwich_ok(sys, eps, grid);
    if ok {
        chosen = Some((eps.to_vec(), lo, hi));
    } else {
        let levels: Vec<f64> = (0..7).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect();
        let mut cands: Vec<Vec<f64>> = vec![vec![]];
        for _ in 0..d - 1 {
            cands = cands.into_iter().flat_map(|v| levels.iter().map(move |&l| [v.clone(), vec![l]].concat())).collect();
        }
        cands.sort_by(|a, b| a.iter().sum::<f64>().total_cmp(&b.iter().sum::<f64>()));
        for cand in cands {
            let (ok, lo, hi) = sandwich_ok(sys, &cand, grid);
            if ok {
                chosen = Some((cand, lo, hi));
                break;
            }
        }
    }
    let (eps, h_min, h_max) = chosen.ok_or(DissipativeError::EquivalenceFailure)?;

    let mut samples = Vec::new();
    for &t in &grid.times {
        for xi in &grid.xis {
            let h = lyapunov_matrix(sys, &eps, t, xi);
            let dh = dt_fd(&mut |tau| Ok(lyapunov_matrix(sys, &eps, tau, xi)), t)? * I;
            let g = sys.generator(t, xi);
            let s = g.adjoint() * &h + &h * &g + dh;
            let (hv, hu) = hermitian_eigen(&h);
            let hm = CMat::from_diagonal(&CVec::from_iterator(d, hv.iter().map(|v| r(1.0 / v.sqrt()))));
            let root = &hu * hm * hu.adjoint();
            let (sv, _) = hermitian_eigen(&(&root * s * &root));
            let xi_abs = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            samples.push(LyapunovSample { t, xi_abs, h_min: hv[0], h_max: hv[d - 1], gamma_local: -sv[d - 1] / bracket_sq(xi) });
        }
    }
    let violations = samples.iter().filter(|s| !(s.gamma_local > 0.0)).count();

    let mut fits = Vec::new();
    for xi in &grid.xis {
        let b2 = bracket_sq(xi);
        let xs: Vec<f64> = (0..=grid.n_fit).map(|j| grid.horizon * j as f64 / grid.n_fit as f64).collect();
        let ts: Vec<f64> = xs.iter().map(|x| grid.t0 + x / b2).collect();
        let es = sys.propagator(xi, grid.t0, &ts, grid.tol)?;
        let vals: Vec<f64> = es.iter().map(|e| norm2(e).powi(2)).collect();
        let half = grid.n_fit / 2;
        let ly: Vec<f64> = vals[half..].iter().map(|v| v.ln()).collect();
        let gamma = -linear_fit(&xs[half..], &ly).slope;
        fits.push(DecayFit { xi_abs: xi.iter().map(|x| x * x).sum::<f64>().sqrt(), gamma, curve: ts.into_iter().zip(vals).collect() });
    }
    let gamma = fits.iter().map(|f| f.gamma).fold(f64::INFINITY, f64::min);
    let mut envelope_c = 0.0f64;
    for (f, xi) in fits.iter().zip(&grid.xis) {
        let b2 = bracket_sq(xi);
        for &(t, v) in &f.curve {
            envelope_c = envelope_c.max(v * (gamma * (t - grid.t0) * b2).exp());
        }
    }
    Ok(LyapunovReport { eps, h_min, h_max, samples, violations, fits, gamma, envelope_c })
}

/// Smallest sample time where the gaps of `B(t)` exceed twice the floor.
pub fn choose_t0(sys: &PartiallyDissipativeSystem, samples: &[f64]) -> Result<f64> {
    for &t in samples {
        let (delta, _) = sys.b_spectrum(t);
        if min_gap(&delta) >= 2.0 * sys.gap_floor {
            return Ok(t);
        }
    }
    Err(DissipativeError::GapViolation {
        gap: samples.last().map(|&t| min_gap(&sys.b_spectrum(t).0)).unwrap_or(f64::NAN),
        required: 2.0 * sys.gap_floor,
        t: samples.last().copied().unwrap_or(f64::NAN),
    })
}

/// One level of the small-frequency hierarchy at `(t, ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallFreqLevel {
    pub k: usize,
    pub t: f64,
    pub xi: Vec<f64>,
    /// Eigenvalues `δ_j(t)` of `B(t)`.
    pub delta: Vec<f64>,
    pub m: CMat,
    pub m_inv: CMat,
    /// `R_1 = M⁻¹A(t,ξ)M + (D_tM⁻¹)M`.
    pub r1: CMat,
    /// `N^(1), …, N^(k)`.
    pub n_terms: Vec<CMat>,
    /// `F^(1), …, F^(k)`.
    pub f_terms: Vec<CMat>,
    /// `B_k`; absent when the top level was built without its remainder.
    pub b: Option<CMat>,
}

impl SmallFreqLevel {
    /// `𝒟 = i diag δ`.
    pub fn big_d(&self) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(self.delta.len(), self.delta.iter().map(|&x| c(0.0, x))))
    }

    pub fn n_k(&self) -> CMat {
        self.n_terms.iter().fold(eye(self.delta.len()), |acc, n| acc + n)
    }

    pub fn f_k(&self) -> CMat {
        let d = self.delta.len();
        self.f_terms.iter().fold(CMat::zeros(d, d), |acc, f| acc + f)
    }

    /// `R_{k+1} = −N_k⁻¹ B_k`.
    pub fn r_next(&self) -> Option<CMat> {
        let b = self.b.as_ref()?;
        inverse(&self.n_k()).map(|ni| -(ni * b))
    }
}

/// Coefficients of `f_1(t,ξ) = iξᵀαξ + βᵀξ + γ` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicSample {
    pub alpha: CMat,
    pub beta: CVec,
    pub gamma: C64,
}

impl ParabolicSample {
    /// `−ξᵀαξ + iβ·ξ + iγ`, the exponent rate of `Ξ_2`.
    pub fn exponent(&self, xi: &[f64]) -> C64 {
        let x = CVec::from_iterator(xi.len(), xi.iter().map(|&v| r(v)));
        -(x.transpose() * &self.alpha * &x)[(0, 0)] + I * (self.beta.transpose() * &x)[(0, 0)] + I * self.gamma
    }

    /// Smallest eigenvalue of `Re α = (α + α*)/2`.
    pub fn re_alpha_min(&self) -> f64 {
        hermitian_eigen(&self.alpha).0[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallFreqDiag {
    pub level: SmallFreqLevel,
    pub parabolic: ParabolicSample,
}

fn frame_of(sys: &PartiallyDissipativeSystem, t: f64) -> Result<(Vec<f64>, CMat)> {
    let (delta, m) = sys.b_spectrum(t);
    let gap = min_gap(&delta);
    if gap < sys.gap_floor {
        return Err(DissipativeError::GapViolation { gap, required: sys.gap_floor, t });
    }
    Ok((delta, m))
}

fn next_terms(delta: &[f64], b: &CMat) -> (CMat, CMat) {
    let d = delta.len();
    let mut n = CMat::zeros(d, d);
    let mut f = CMat::zeros(d, d);
    for i in 0..d {
        f[(i, i)] = -b[(i, i)];
        for j in 0..d {
            if i != j {
                n[(i, j)] = c(0.0, -1.0) * b[(i, j)] / (delta[i] - delta[j]);
            }
        }
    }
    (n, f)
}

fn build(sys: &PartiallyDissipativeSystem, t: f64, xi: &[f64], k: usize, want_b: bool) -> Result<SmallFreqLevel> {
    if k == 0 {
        let (delta, m) = frame_of(sys, t)?;
        let m_inv = m.adjoint();
        let dminv = dt_fd(&mut |tau| Ok(frame_of(sys, tau)?.1.adjoint()), t)?;
        let r1 = &m_inv * sys.symbol(t, xi) * &m + dminv * &m;
        let b = Some(-&r1);
        return Ok(SmallFreqLevel { k, t, xi: xi.to_vec(), delta, m, m_inv, r1, n_terms: vec![], f_terms: vec![], b });
    }
    let mut lvl = build(sys, t, xi, k - 1, true)?;
    let (nk, fk) = next_terms(&lvl.delta, lvl.b.as_ref().expect("lower level carries B"));
    lvl.k = k;
    lvl.n_terms.push(nk);
    lvl.f_terms.push(fk);
    lvl.b = None;
    if want_b {
        let dtn = dt_fd(
            &mut |tau| {
                let l = build(sys, tau, xi, k - 1, true)?;
                let (nk, _) = next_terms(&l.delta, l.b.as_ref().expect("lower level carries B"));
                Ok(l.n_k() + nk)
            },
            t,
        )?;
        let n = lvl.n_k();
        let dd = lvl.big_d();
        let b = dtn - &dd * &n + &n * &dd - &lvl.r1 * &n + &n * lvl.f_k();
        lvl.b = Some(b);
    }
    Ok(lvl)
}

/// Hierarchy level `k` (with `B_k`) at `(t, ξ)`.
pub fn small_freq_level(sys: &PartiallyDissipativeSystem, t: f64, xi: &[f64], k: usize) -> Result<SmallFreqLevel> {
    if k > 2 {
        return Err(DissipativeError::Invalid("small-frequency depth is at most 2".into()));
    }
    if xi.len() != sys.n() {
        return Err(DissipativeError::Invalid("ξ has the wrong dimension".into()));
    }
    build(sys, t, xi, k, true)
}

/// Parabolic coefficients from the upper-left entry of `F_2(t,·)` by central differences in `ξ`.
pub fn parabolic_sample(sys: &PartiallyDissipativeSystem, t: f64) -> Result<ParabolicSample> {
    let n = sys.n();
    let f = |xi: &[f64]| -> Result<C64> { Ok(build(sys, t, xi, 2, false)?.f_k()[(0, 0)]) };
    let at = |pairs: &[(usize, f64)]| -> Result<C64> {
        let mut x = vec![0.0; n];
        for &(k, v) in pairs {
            x[k] += v;
        }
        f(&x)
    };
    let f0 = f(&vec![0.0; n])?;
    let mut alpha = CMat::zeros(n, n);
    let mut beta = CVec::zeros(n);
    let rich = |g: &dyn Fn(f64) -> Result<C64>| -> Result<C64> { Ok((g(XI_STEP)? * 4.0 - g(2.0 * XI_STEP)?) / 3.0) };
    for k in 0..n {
        beta[k] = rich(&|h| Ok((at(&[(k, h)])? - at(&[(k, -h)])?) / (2.0 * h)))?;
        alpha[(k, k)] = rich(&|h| Ok((at(&[(k, h)])? + at(&[(k, -h)])? - f0 * 2.0) / (h * h)))? / c(0.0, 2.0);
        for l in 0..k {
            let v = rich(&|h| {
                Ok((at(&[(k, h), (l, h)])? - at(&[(k, h), (l, -h)])? - at(&[(k, -h), (l, h)])? + at(&[(k, -h), (l, -h)])?) / (4.0 * h * h))
            })? / c(0.0, 2.0);
            alpha[(k, l)] = v;
            alpha[(l, k)] = v;
        }
    }
    Ok(ParabolicSample { alpha, beta, gamma: f0 })
}

/// Elliptic-zone diagonalisation at depth `k ≤ 2` with the parabolic coefficients at `t`.
pub fn small_freq_diag(sys: &PartiallyDissipativeSystem, t: f64, xi: &[f64], k: usize) -> Result<SmallFreqDiag> {
    Ok(SmallFreqDiag { level: small_freq_level(sys, t, xi, k)?, parabolic: parabolic_sample(sys, t)? })
}

/// Time-dependent coefficients `α(t), β(t), γ(t)` of the parabolic reference problem.
#[derive(Clone)]
pub struct ParabolicCoefficients {
    pub n: usize,
    pub t0: f64,
    pub eval: Arc<dyn Fn(f64) -> Result<ParabolicSample> + Send + Sync>,
}

impl ParabolicCoefficients {
    pub fn constant(sample: ParabolicSample, t0: f64) -> Self {
        Self { n: sample.beta.len(), t0, eval: Arc::new(move |_| Ok(sample.clone())) }
    }

    pub fn from_system(sys: &PartiallyDissipativeSystem, t0: f64) -> Self {
        let s = sys.clone();
        Self { n: sys.n(), t0, eval: Arc::new(move |t| parabolic_sample(&s, t)) }
    }

    /// `∫_{t0}^t` of `(α, β, γ)` entrywise.
    pub fn integrated(&self, t: f64) -> Result<ParabolicSample> {
        self.integrated_between(self.t0, t)
    }

    pub fn integrated_between(&self, a: f64, b: f64) -> Result<ParabolicSample> {
        let n = self.n;
        let dim = n * n + n + 1;
        let err = std::cell::RefCell::new(None);
        let opts = QuadOptions { rel_tol: 1e-11, abs_tol: 1e-14, max_intervals: 4000 };
        let res = integrate_vec(
            |tau: f64| match (self.eval)(tau) {
                Ok(s) => s.alpha.iter().chain(s.beta.iter()).copied().chain(std::iter::once(s.gamma)).collect(),
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    vec![r(0.0); dim]
                }
            },
            a,
            b,
            dim,
            &opts,
        );
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        let v = res?.value;
        Ok(ParabolicSample {
            alpha: CMat::from_column_slice(n, n, &v[..n * n]),
            beta: CVec::from_column_slice(&v[n * n..n * n + n]),
            gamma: v[dim - 1],
        })
    }

    /// Minimum of `min eig Re α(t)` over the samples.
    pub fn positivity(&self, times: &[f64]) -> Result<f64> {
        let mut m = f64::INFINITY;
        for &t in times {
            m = m.min((self.eval)(t)?.re_alpha_min());
        }
        Ok(m)
    }
}

/// `ŵ(t,ξ) = exp(∫_{t0}^t (−ξᵀαξ + iβ·ξ + iγ)) ŵ_0`.
pub fn parabolic_reference_solve(pc: &ParabolicCoefficients, w0: C64, t: f64, xi: &[f64]) -> Result<C64> {
    if !(t >= pc.t0) || xi.len() != pc.n {
        return Err(DissipativeError::Invalid("need t ≥ t0 and ξ ∈ ℝⁿ".into()));
    }
    let probe = [pc.t0, 0.5 * (pc.t0 + t), t];
    if pc.positivity(&probe)? <= 0.0 {
        return Err(DissipativeError::Invalid("Re α is not positive definite".into()));
    }
    Ok(pc.integrated(t)?.exponent(xi).exp() * w0)
}

/// Smooth cutoff: 1 on `|ξ| ≤ c/2`, 0 on `|ξ| ≥ c`.
pub fn cutoff(xi_abs: f64, c: f64) -> f64 {
    1.0 - smooth_step((xi_abs - 0.5 * c) / (0.5 * c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCompareConfig {
    pub t0: f64,
    /// Comparison times, increasing and `> t0`.
    pub times: Vec<f64>,
    /// Time at which `W_2` is read off.
    pub w_limit_time: f64,
    /// Cutoff radius `c_2` of `χ`.
    pub cutoff: f64,
    pub n_xi: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub t: f64,
    pub difference: f64,
    pub solution: f64,
    /// `difference · (1+t)^{1/2} / log(e+t)`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCompareReport {
    pub w2: CVec,
    /// `‖W_2(T) − W_2(T/2)‖`.
    pub w2_cauchy: f64,
    /// `‖Û(t0) − K(t0,·)ŵ_0‖`.
    pub t0_defect: f64,
    pub rows: Vec<ProfileRow>,
}

fn w2_at(sys: &PartiallyDissipativeSystem, t0: f64, t: f64, tol: f64) -> Result<CVec> {
    let zero = vec![0.0; sys.n()];
    let e = sys.propagator(&zero, t0, &[t], tol)?.remove(0);
    let lt = build(sys, t, &zero, 2, false)?;
    let l0 = build(sys, t0, &zero, 2, false)?;
    let ni = inverse(&lt.n_k()).ok_or(DissipativeError::NotInvertible { t, xi: 0.0 })?;
    let ek = ni * &lt.m_inv * e * &l0.m * l0.n_k();
    Ok(ek.row(0).transpose())
}

/// Compares `Û(t)` with `K(t,ξ)ŵ(t,ξ)` for one-dimensional systems, `K = M N_2 e_1`.
pub fn diffusion_profile_compare(sys: &PartiallyDissipativeSystem, u0: &(dyn Fn(f64) -> CVec + Sync), cfg: &ProfileCompareConfig) -> Result<ProfileCompareReport> {
    if sys.n() != 1 {
        return Err(DissipativeError::Invalid("profile comparison is implemented for n = 1".into()));
    }
    if cfg.times.is_empty() || cfg.times[0] <= cfg.t0 || cfg.times.windows(2).any(|w| w[1] <= w[0]) || cfg.n_xi < 3 || !(cfg.cutoff > 0.0) {
        return Err(DissipativeError::Invalid("times must increase past t0; need n_xi ≥ 3 and a positive cutoff".into()));
    }
    let mut checks = vec![cfg.t0];
    checks.extend(&cfg.times);
    sys.validate_on(&checks)?;
    let w2 = w2_at(sys, cfg.t0, cfg.w_limit_time, cfg.tol)?;
    let w2_cauchy = (&w2 - w2_at(sys, cfg.t0, 0.5 * cfg.w_limit_time, cfg.tol)?).norm();

    let pc = ParabolicCoefficients::from_system(sys, cfg.t0);
    let mut integrals = Vec::with_capacity(cfg.times.len());
    let mut prev = cfg.t0;
    let mut acc: Option<ParabolicSample> = None;
    for &t in &cfg.times {
        let step = pc.integrated_between(prev, t)?;
        acc = Some(match acc {
            None => step,
            Some(a) => ParabolicSample { alpha: a.alpha + step.alpha, beta: a.beta + step.beta, gamma: a.gamma + step.gamma },
        });
        integrals.push(acc.clone().expect("set above"));
        prev = t;
    }

    let h = 2.0 * cfg.cutoff / (cfg.n_xi - 1) as f64;
    let xs: Vec<f64> = (0..cfg.n_xi).map(|i| -cfg.cutoff + h * i as f64).collect();
    let nt = cfg.times.len();
    let per_xi: Vec<Result<(f64, Vec<f64>, Vec<f64>)>> = xs
        .par_iter()
        .map(|&x| {
            let chi = cutoff(x.abs(), cfg.cutoff);
            if chi == 0.0 {
                return Ok((0.0, vec![0.0; nt], vec![0.0; nt]));
            }
            let y0 = u0(x) * r(chi);
            let mut ts = vec![cfg.t0];
            ts.extend(&cfg.times);
            let us = sys.propagate_state(&[x], 0.0, &y0, &ts, cfg.tol)?;
            let k_at = |t: f64| -> Result<(CVec, CMat)> {
                let l = build(sys, t, &[x], 2, false)?;
                let n = l.n_k();
                let ni = inverse(&n).ok_or(DissipativeError::NotInvertible { t, xi: x.abs() })?;
                Ok(((&l.m * n).column(0).into_owned(), ni * &l.m_inv))
            };
            let (k0, proj) = k_at(cfg.t0)?;
            let w0 = (w2.transpose() * proj * &us[0])[(0, 0)];
            let defect = (&us[0] - &k0 * w0).norm_squared();
            let mut diff = Vec::with_capacity(nt);
            let mut sol = Vec::with_capacity(nt);
            for (j, &t) in cfg.times.iter().enumerate() {
                let (kt, _) = k_at(t)?;
                let w = integrals[j].exponent(&[x]).exp() * w0;
                diff.push((&us[j + 1] - kt * w).norm_squared());
                sol.push(us[j + 1].norm_squared());
            }
            Ok((defect, diff, sol))
        })
        .collect();
    let mut defect = 0.0;
    let mut diff = vec![0.0; nt];
    let mut sol = vec![0.0; nt];
    for (i, res) in per_xi.into_iter().enumerate() {
        let (d0, dv, sv) = res?;
        let w = if i == 0 || i + 1 == cfg.n_xi { 0.5 * h } else { h };
        defect += w * d0;
        for j in 0..nt {
            diff[j] += w * dv[j];
            sol[j] += w * sv[j];
        }
    }
    let rows = cfg
        .times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let dn = diff[j].sqrt();
            ProfileRow { t, difference: dn, solution: sol[j].sqrt(), normalized: dn * (1.0 + t).sqrt() / (std::f64::consts::E + t).ln() }
        })
        .collect();
    Ok(ProfileCompareReport { w2, w2_cauchy, t0_defect: defect.sqrt(), rows })
}

/// Propagator of `u_tt − Δu + u_t = 0` in Fourier space: rows `(û, ∂_tû)` in terms of `(û_0, û_1)`.
pub fn damped_wave_multiplier(t: f64, xi: f64) -> CMat {
    let rr = r(0.25 - xi * xi).sqrt();
    let ep = (-(xi * xi) / (rr + 0.5) * t).exp();
    let em = (-(rr + 0.5) * t).exp();
    let ch = (ep + em) * 0.5;
    let tr = rr * t;
    let s = if tr.norm() < 1e-4 { (-0.5 * t).exp() * t * (tr * tr / 6.0 + 1.0) } else { (ep - em) / (rr * 2.0) };
    CMat::from_row_slice(2, 2, &[ch + s * 0.5, s, s * (-(xi * xi)), ch - s * 0.5])
}

/// Data and derivative orders for the damped-wave/heat comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionSetup {
    pub u0: Profile,
    pub u1: Profile,
    pub dim: usize,
    /// Number of time derivatives `k`.
    pub k: usize,
    /// Order `|α|` of the spatial derivative.
    pub alpha: usize,
    pub xi_max: f64,
    /// Gauss–Legendre panels per quadrature segment.
    pub panels: usize,
}

impl DiffusionSetup {
    pub fn gaussian(dim: usize) -> Self {
        Self { u0: Profile::Gaussian { width: 1.0 }, u1: Profile::Zero, dim, k: 0, alpha: 0, xi_max: 12.0, panels: 24 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionRow {
    pub t: f64,
    /// `‖D_t^k D_x^α (u − v)(t)‖_{L²}`.
    pub difference: f64,
    pub ref_u0: f64,
    pub ref_u1: f64,
    /// `difference / (ref_u0 + ref_u1)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionComparison {
    pub rows: Vec<DiffusionRow>,
    pub exponent: f64,
}

/// Radial quadrature nodes and weights for `∫_{ℝⁿ} f(|ξ|) dξ`, refined near `|ξ| ≲ t^{−1/2}`.
fn radial_rule(t: f64, xi_max: f64, panels: usize, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut brk = vec![0.0];
    for b in [8.0 / t.max(1e-12).sqrt(), 1.0] {
        if b < xi_max && b > *brk.last().expect("nonempty") {
            brk.push(b);
        }
    }
    brk.push(xi_max);
    let (gx, gw) = gauss_legendre::<f64>(16);
    let area = sphere_area(dim);
    let (mut xs, mut ws) = (Vec::new(), Vec::new());
    for seg in brk.windows(2) {
        let hp = (seg[1] - seg[0]) / panels as f64;
        for p in 0..panels {
            let a = seg[0] + hp * p as f64;
            for (x, w) in gx.iter().zip(&gw) {
                let xi = a + 0.5 * hp * (x + 1.0);
                xs.push(xi);
                ws.push(0.5 * hp * w * area * xi.powi(dim as i32 - 1));
            }
        }
    }
    (xs, ws)
}

/// One row of the damped-wave/heat comparison at time `t`.
pub fn diffusion_difference(setup: &DiffusionSetup, t: f64) -> Result<DiffusionRow> {
    if setup.dim == 0 || !(setup.xi_max > 0.0) || setup.panels == 0 || !(t >= 0.0) {
        return Err(DissipativeError::Invalid("need dim ≥ 1, xi_max > 0, panels ≥ 1, t ≥ 0".into()));
    }
    let (xs, ws) = radial_rule(t, setup.xi_max, setup.panels, setup.dim);
    let (mut d2, mut r0, mut r1) = (0.0, 0.0, 0.0);
    for (&x, &w) in xs.iter().zip(&ws) {
        let a0 = setup.u0.eval(x);
        let a1 = setup.u1.eval(x);
        let m = damped_wave_multiplier(t, x);
        let (mut u, mut ut) = (m[(0, 0)] * a0 + m[(0, 1)] * a1, m[(1, 0)] * a0 + m[(1, 1)] * a1);
        for _ in 0..setup.k {
            let utt = -(u * x * x) - ut;
            u = ut;
            ut = utt;
        }
        let v = (-x * x * t).exp() * (a0 + a1) * (-x * x).powi(setup.k as i32);
        let diff = (u - v) * x.powi(setup.alpha as i32);
        d2 += w * diff.norm_sqr();
        let h = (-x * x * t / 2.0).exp();
        r0 += w * (h * a0).powi(2);
        r1 += w * (h * a1).powi(2);
    }
    let (difference, ref_u0, ref_u1) = (d2.sqrt(), r0.sqrt(), r1.sqrt());
    Ok(DiffusionRow { t, difference, ref_u0, ref_u1, ratio: difference / (ref_u0 + ref_u1) })
}

/// Rows at `times` and the fitted log-log exponent of the ratio column.
pub fn diffusion_comparison(setup: &DiffusionSetup, times: &[f64]) -> Result<DiffusionComparison> {
    let rows = times.iter().map(|&t| diffusion_difference(setup, t)).collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(DiffusionComparison { exponent: loglog_slope(times, &ratios), rows })
}

/// `(t, ‖û(t)‖_{L¹})` for the damped wave and the fitted exponent; `‖u(t)‖_{L^∞} ≤ (2π)^{−n}‖û(t)‖_{L¹}`.
pub fn linf_decay(setup: &DiffusionSetup, times: &[f64]) -> Result<(Vec<(f64, f64)>, f64)> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let (xs, ws) = radial_rule(t, setup.xi_max, setup.panels, setup.dim);
        let mut s = 0.0;
        for (&x, &w) in xs.iter().zip(&ws) {
            let m = damped_wave_multiplier(t, x);
            s += w * (m[(0, 0)] * setup.u0.eval(x) + m[(0, 1)] * setup.u1.eval(x)).norm();
        }
        out.push((t, s));
    }
    let ys: Vec<f64> = out.iter().map(|p| p.1).collect();
    Ok((out.clone(), loglog_slope(times, &ys)))
}

/// Sup of the proof-level multipliers over `t ∈ [1, T]`, `|ξ| ≤ xi_max`, for each horizon `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierCheck {
    /// Fourth-order coefficient of `1/2 − |ξ|² − √(1/4 − |ξ|²)`, measured.
    pub b2: f64,
    /// `(T, [sup m_1, sup m_{2,0}, sup m_{2,1}])`.
    pub sups: Vec<(f64, [f64; 3])>,
}

pub fn multiplier_check(horizons: &[f64], xi_max: f64, n_t: usize, n_xi: usize) -> MultiplierCheck {
    let tail = |x: f64| 0.5 - x * x - (0.25 - x * x).sqrt();
    let b = |x: f64| tail(x) / x.powi(4);
    let b2 = (4.0 * b(0.01) - b(0.02)) / 3.0;
    let xis: Vec<f64> = (0..n_xi).map(|i| 1e-4 * (xi_max / 1e-4).powf(i as f64 / (n_xi - 1) as f64)).collect();
    let sups = horizons
        .iter()
        .map(|&big_t| {
            let mut s = [0.0f64; 3];
            for i in 0..n_t {
                let t = big_t.powf(i as f64 / (n_t - 1).max(1) as f64);
                for &x in &xis {
                    let rr = (0.25 - x * x).sqrt();
                    let extra = -t * x.powi(4) / (rr + 0.5).powi(2);
                    let base = t * (-t * x * x / 2.0).exp();
                    let c0 = x * x / (rr * (1.0 + 2.0 * rr));
                    s[0] = s[0].max((base * extra.exp_m1()).abs());
                    s[1] = s[1].max(base * extra.exp() * c0);
                    s[2] = s[2].max(base * extra.exp() * 2.0 * c0);
                }
            }
            (big_t, s)
        })
        .collect();
    MultiplierCheck { b2, sups }
}
