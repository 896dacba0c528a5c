//! Fundamental matrices of D_tV = C(t,ξ)V: direct integration, diagonal exponentials, the
//! Peano–Baker series and large-time amplitude extraction.

use crate::diag::{DiagError, HierarchyLevel};
use crate::linalg::{eye, inverse, norm2, r, CMat, C64, I};
use crate::ode::{solve, solve_at, OdeError, OdeOptions};
use crate::quad::{integrate, integrate_complex, QuadError, QuadOptions};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagateError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Diag(#[from] DiagError),
    #[error("Peano–Baker tail bound {bound:e} exceeds tolerance {tol:e}")]
    TailTooLarge { bound: f64, tol: f64 },
    #[error("time {t} lies outside the hyperbolic zone (t_xi = {t_xi})")]
    ZoneViolation { t: f64, t_xi: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, PropagateError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    AdaptiveOde,
    DiagExp,
    PeanoBaker(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    pub value: CMat,
    pub t: f64,
    pub s: f64,
    pub xi: f64,
    pub method: Method,
    pub est_error: f64,
}

fn to_mat(y: &[C64], d: usize) -> CMat {
    CMat::from_column_slice(d, d, &y[..d * d])
}

fn ode_opts(tol: f64, span: f64) -> OdeOptions<f64> {
    let mut o = OdeOptions::with_tol(tol);
    o.atol = tol * 1e-2;
    o.max_steps = 2_000_000;
    o.h_max = Some(span.abs().max(1e-300));
    o
}

/// E(t,s,ξ) from D_tE = C(t,ξ)E, E(s,s) = I, forward or backward in time.
pub fn integrate_fundamental(c: &dyn Fn(f64, f64) -> CMat, t: f64, s: f64, xi: f64, tol: f64) -> Result<FundamentalMatrix> {
    let d = c(s, xi).nrows();
    let y0: Vec<C64> = eye(d).iter().copied().collect();
    let (y, _) = solve(
        |tau: f64, y: &[C64], dy: &mut [C64]| {
            let cm = c(tau, xi) * I;
            let e = to_mat(y, d);
            dy.copy_from_slice((cm * e).as_slice());
        },
        s,
        &y0,
        t,
        &ode_opts(tol, t - s),
    )?;
    let value = to_mat(&y, d);
    let est_error = tol * (1.0 + norm2(&value));
    Ok(FundamentalMatrix { value, t, s, xi, method: Method::AdaptiveOde, est_error })
}

/// E(t_i,s,ξ) at increasing or decreasing times `ts`.
pub fn integrate_fundamental_at(c: &dyn Fn(f64, f64) -> CMat, ts: &[f64], s: f64, xi: f64, tol: f64) -> Result<Vec<CMat>> {
    let d = c(s, xi).nrows();
    let y0: Vec<C64> = eye(d).iter().copied().collect();
    let span = ts.iter().map(|t| (t - s).abs()).fold(0.0, f64::max);
    let ys = solve_at(
        |tau: f64, y: &[C64], dy: &mut [C64]| {
            let cm = c(tau, xi) * I;
            dy.copy_from_slice((cm * to_mat(y, d)).as_slice());
        },
        s,
        &y0,
        ts,
        &ode_opts(tol, span),
    )?;
    Ok(ys.iter().map(|y| to_mat(y, d)).collect())
}

/// ∫_s^t of the diagonal entries of `f`.
pub fn diag_integral(f: &dyn Fn(f64, f64) -> CMat, t: f64, s: f64, xi: f64) -> Result<Vec<C64>> {
    let d = f(s, xi).nrows();
    let opts = QuadOptions { rel_tol: 1e-10, abs_tol: 1e-13, max_intervals: 4000 };
    (0..d).map(|j| Ok(integrate_complex(|tau: f64| f(tau, xi)[(j, j)], s, t, &opts)?.value)).collect()
}

/// exp(i∫_s^t f dτ) for a diagonal evaluator.
pub fn diag_exponential(f: &dyn Fn(f64, f64) -> CMat, t: f64, s: f64, xi: f64) -> Result<FundamentalMatrix> {
    let ints = diag_integral(f, t, s, xi)?;
    let value = crate::linalg::diag(&ints.iter().map(|z| (I * z).exp()).collect::<Vec<_>>());
    let est_error = 1e-10 * ints.iter().map(|z| z.norm()).fold(0.0, f64::max) * (1.0 + norm2(&value));
    Ok(FundamentalMatrix { value, t, s, xi, method: Method::DiagExp, est_error })
}

/// Peano–Baker series result.
#[derive(Debug, Clone, PartialEq)]
pub struct PeanoBakerResult {
    pub q: FundamentalMatrix,
    /// Partial sums Q^{(≤ℓ)} for ℓ = 0..=L.
    pub partial_sums: Vec<CMat>,
    /// ∫_s^t ‖𝓡_k‖dτ.
    pub r_integral: f64,
    /// E_k(t,s,ξ).
    pub e_k: CMat,
}

fn exp_tail(x: f64, l: usize) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..=l {
        term *= x / j as f64;
        sum += term;
    }
    // direct summation of the remaining terms avoids cancellation for small x
    let mut tail = 0.0;
    let mut j = l + 1;
    loop {
        term *= x / j as f64;
        tail += term;
        if term <= 1e-17 * (tail + sum) || j > l + 400 {
            break;
        }
        j += 1;
    }
    tail
}

/// Q_k(t,s,ξ) = Σ_{ℓ≤L} i^ℓ ∫…∫ 𝓡_k(t_1)…𝓡_k(t_ℓ), 𝓡_k(τ) = E_k(s,τ)R_k(τ)E_k(τ,s), computed level by
/// level as an augmented ODE together with the phases of E_k and ∫‖𝓡_k‖.
pub fn peano_baker(
    r_k: &dyn Fn(f64, f64) -> CMat,
    diag_gen: &dyn Fn(f64, f64) -> CMat,
    t: f64,
    s: f64,
    xi: f64,
    levels: usize,
    tol: f64,
) -> Result<PeanoBakerResult> {
    let d = diag_gen(s, xi).nrows();
    let dd = d * d;
    let dim = d + levels * dd + 1;
    let mut y0 = vec![C64::new(0.0, 0.0); dim];
    let sign = if t >= s { 1.0 } else { -1.0 };
    let rhs = |tau: f64, y: &[C64], dy: &mut [C64]| {
        let g = diag_gen(tau, xi);
        for j in 0..d {
            dy[j] = g[(j, j)];
        }
        let rk = r_k(tau, xi);
        let ph: Vec<C64> = (0..d).map(|j| (I * y[j]).exp()).collect();
        let rr = CMat::from_fn(d, d, |i, j| rk[(i, j)] * ph[j] / ph[i]);
        let mut prev = eye(d);
        for l in 0..levels {
            let cur = CMat::from_column_slice(d, d, &y[d + l * dd..d + (l + 1) * dd]);
            let der = &rr * &prev * I;
            dy[d + l * dd..d + (l + 1) * dd].copy_from_slice(der.as_slice());
            prev = cur;
        }
        dy[dim - 1] = r(sign * norm2(&rr));
    };
    y0[dim - 1] = r(0.0);
    let (y, _) = solve(rhs, s, &y0, t, &ode_opts((tol * 1e-2).clamp(1e-13, 1e-9), t - s))?;
    let e_k = crate::linalg::diag(&(0..d).map(|j| (I * y[j]).exp()).collect::<Vec<_>>());
    let mut partial_sums = vec![eye(d)];
    for l in 0..levels {
        let ql = CMat::from_column_slice(d, d, &y[d + l * dd..d + (l + 1) * dd]);
        let next = partial_sums.last().unwrap() + ql;
        partial_sums.push(next);
    }
    let r_integral = y[dim - 1].re;
    let bound = exp_tail(r_integral, levels);
    if bound > tol {
        return Err(PropagateError::TailTooLarge { bound, tol });
    }
    let value = partial_sums.last().unwrap().clone();
    Ok(PeanoBakerResult { q: FundamentalMatrix { value, t, s, xi, method: Method::PeanoBaker(levels), est_error: bound + tol }, partial_sums, r_integral, e_k })
}

fn nan_matrix(d: usize) -> CMat {
    CMat::from_element(d, d, C64::new(f64::NAN, f64::NAN))
}

/// Diagonalised generator 𝒟 + F_{k−1} and remainder R_k of a hierarchy level, as evaluators.
/// Evaluation failures yield NaN entries, which integrators report as non-finite states.
pub fn diagonalised(level: &HierarchyLevel) -> (impl Fn(f64, f64) -> CMat + '_, impl Fn(f64, f64) -> CMat + '_) {
    let d = level.hierarchy.sys.d;
    let gen = move |t: f64, xi: f64| level.at(t, xi).map(|lv| lv.big_d() + lv.f_total()).unwrap_or_else(|_| nan_matrix(d));
    let rem = move |t: f64, xi: f64| level.at(t, xi).and_then(|lv| lv.r_k()).unwrap_or_else(|_| nan_matrix(d));
    (gen, rem)
}

/// D_tV_k = (𝒟 + F_{k−1} + R_k)V_k, the fully transformed system.
pub fn transformed_generator(level: &HierarchyLevel) -> impl Fn(f64, f64) -> CMat + '_ {
    let d = level.hierarchy.sys.d;
    move |t: f64, xi: f64| {
        level
            .at(t, xi)
            .and_then(|lv| Ok(lv.big_d() + lv.f_total() + lv.r_k()?))
            .unwrap_or_else(|_| nan_matrix(d))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeReport {
    pub xi: f64,
    pub t_xi: f64,
    pub times: Vec<f64>,
    /// ϑ_j(t,ξ) with tϑ_j = ∫_{t_init}^t λ_j dτ, per time.
    pub phases: Vec<Vec<f64>>,
    /// B_j(t,ξ) per time, with E(t,t_init) = Σ_j e^{itϑ_j}B_j.
    pub b: Vec<Vec<CMat>>,
    /// B_j at the largest time.
    pub profile_limit: Vec<CMat>,
    /// ‖B_j(t) − α_j‖ per time.
    pub residual: Vec<Vec<f64>>,
    /// ‖B_j(T) − B_j(T')‖ for the two largest grid times.
    pub cauchy: f64,
    /// det Q_k(t,t_ξ) per time.
    pub q_det: Vec<C64>,
    /// ∫_{t_ξ}^t ‖R_k‖ per time.
    pub r_integral: Vec<f64>,
}

/// Amplitudes of the representation E(t,t_init) = M N_k E_k Q_k N_k^{−1}(t_ξ) M^{−1}(t_ξ) E(t_ξ,t_init)
/// regrouped per phase; Q_k is obtained by conjugating the directly integrated propagator.
pub fn extract_amplitudes(level: &HierarchyLevel, t_grid: &[f64], xi: f64, t_init: f64, tol: f64) -> Result<AmplitudeReport> {
    if xi <= 0.0 || t_grid.is_empty() {
        return Err(PropagateError::Invalid("need xi > 0 and a nonempty grid".into()));
    }
    let t_xi = (level.zone_c / xi - 1.0).max(t_init);
    if let Some(&bad) = t_grid.iter().find(|&&t| t < t_xi) {
        return Err(PropagateError::ZoneViolation { t: bad, t_xi });
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PropagateError::Invalid("time grid must increase".into()));
    }
    let sys = &level.hierarchy.sys;
    let full = |t: f64, x: f64| (sys.full)(t, x);
    let e_pd = if t_xi > t_init { integrate_fundamental(&full, t_xi, t_init, xi, tol)?.value } else { eye(sys.d) };
    let e_hyp = integrate_fundamental_at(&full, t_grid, t_xi, xi, tol)?;
    let lv0 = level.at(t_xi, xi)?;
    let m0 = lv0.frame.m.clone();
    let right = inverse(&(&m0 * lv0.n_k())).ok_or(DiagError::NotInvertible { t: t_xi, xi })?;
    let d = sys.d;
    let (gen, rem) = diagonalised(level);
    let opts = QuadOptions { rel_tol: 1e-9, abs_tol: 1e-13, max_intervals: 4000 };
    let lam = |tau: f64, j: usize| crate::diag::eigen_frame(sys, tau, xi).map(|f| f.lambdas[j]).unwrap_or(f64::NAN);
    let mut phases = Vec::new();
    let mut bs = Vec::new();
    let mut q_det = Vec::new();
    let mut r_int = Vec::new();
    let (mut prev_t, mut lam_acc, mut r_acc) = (t_xi, vec![0.0; d], 0.0);
    let mut gen_acc = vec![C64::new(0.0, 0.0); d];
    for j in 0..d {
        if t_xi > t_init {
            lam_acc[j] = integrate(|tau: f64| lam(tau, j), t_init, t_xi, &opts)?.value;
        }
    }
    for (idx, &t) in t_grid.iter().enumerate() {
        if t > prev_t {
            for j in 0..d {
                lam_acc[j] += integrate(|tau: f64| lam(tau, j), prev_t, t, &opts)?.value;
                gen_acc[j] += integrate_complex(|tau: f64| gen(tau, xi)[(j, j)], prev_t, t, &opts)?.value;
            }
            r_acc += integrate(|tau: f64| norm2(&rem(tau, xi)), prev_t, t, &opts)?.value;
            prev_t = t;
        }
        let lv = level.at(t, xi)?;
        // B_j is invariant under diagonal rescaling of the frame, so the raw gauge is used
        let left = &lv.frame.m * lv.n_k();
        let left_inv = inverse(&left).ok_or(DiagError::NotInvertible { t, xi })?;
        let ek = crate::linalg::diag(&gen_acc.iter().map(|z| (I * z).exp()).collect::<Vec<_>>());
        let ek_inv = crate::linalg::diag(&gen_acc.iter().map(|z| (-I * z).exp()).collect::<Vec<_>>());
        let conj = &left_inv * &e_hyp[idx] * &m0 * lv0.n_k();
        let q = &ek_inv * &conj;
        q_det.push(q.determinant());
        r_int.push(r_acc);
        let mut row = Vec::with_capacity(d);
        let mut ph_row = Vec::with_capacity(d);
        for j in 0..d {
            let mut ej = CMat::zeros(d, d);
            ej[(j, j)] = ek[(j, j)] * (-I * lam_acc[j]).exp();
            row.push(&left * ej * &q * &right * &e_pd);
            ph_row.push(if t > 0.0 { lam_acc[j] / t } else { 0.0 });
        }
        bs.push(row);
        phases.push(ph_row);
    }
    let profile_limit = bs.last().unwrap().clone();
    let residual: Vec<Vec<f64>> = bs.iter().map(|row| row.iter().zip(&profile_limit).map(|(b, a)| norm2(&(b - a))).collect()).collect();
    let cauchy = if bs.len() >= 2 {
        let n = bs.len();
        bs[n - 1].iter().zip(&bs[n - 2]).map(|(a, b)| norm2(&(a - b))).fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    Ok(AmplitudeReport { xi, t_xi, times: t_grid.to_vec(), phases, b: bs, profile_limit, residual, cauchy, q_det, r_integral: r_int })
}
