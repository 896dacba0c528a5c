//! Diagonalisation of first-order systems D_tV = A(t,ξ)V in the hyperbolic zone.
//!
//! Conventions: D_t = −i∂_t, frequencies enter through |ξ| only, eigenvalues of the principal
//! part are sorted ascending. The hierarchy is
//!
//! ```text
//! B_0 = −R_0,  N^(k+1)_ij = (B_k)_ij/(λ_i−λ_j),  F^(k) = −diag B_k,
//! B_{k+1} = D_tN^(k+1) − R_0N^(k+1) + N^(k+1)F_k + (N_k − I)F^(k),
//! ```
//!
//! so that `B_k = D_tN_k − (𝒟+R_0)N_k + N_k(𝒟+F_{k−1})` and `R_k = −N_k^{−1}B_k`.

use std::sync::Arc;

use crate::linalg::{eigenvalues, eye, inverse, norm2, r, CMat, C64, I};
use crate::quad::{integrate, QuadError, QuadOptions};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagError {
    #[error("eigenvalue gap {gap:e} below required {required:e} at t={t}, |xi|={xi}")]
    GapViolation { gap: f64, required: f64, t: f64, xi: f64 },
    #[error("eigenvector frame jumps by {jump} at t={t}")]
    FrameDiscontinuity { jump: f64, t: f64 },
    #[error("principal eigenvalue {0} is not real")]
    NonRealEigenvalue(C64),
    #[error("frequency must be nonzero")]
    ZeroFrequency,
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("N_k is not invertible at t={t}, |xi|={xi}")]
    NotInvertible { t: f64, xi: f64 },
    #[error("zone constant escalation failed up to c={0}")]
    ZoneEscalation(f64),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

pub type Result<T> = std::result::Result<T, DiagError>;

pub type MatFn = Arc<dyn Fn(f64, f64) -> CMat + Send + Sync>;

/// Matrix symbol A(t,|ξ|) with its homogeneous principal part A_1.
#[derive(Clone)]
pub struct SystemSymbol {
    pub full: MatFn,
    pub principal: MatFn,
    pub d: usize,
    pub hyperbolicity_gap: f64,
}

impl std::fmt::Debug for SystemSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemSymbol").field("d", &self.d).field("hyperbolicity_gap", &self.hyperbolicity_gap).finish()
    }
}

fn m2(a: C64, b: C64, c: C64, d: C64) -> CMat {
    CMat::from_row_slice(2, 2, &[a, b, c, d])
}

impl SystemSymbol {
    pub fn new(
        full: impl Fn(f64, f64) -> CMat + Send + Sync + 'static,
        principal: impl Fn(f64, f64) -> CMat + Send + Sync + 'static,
        d: usize,
        hyperbolicity_gap: f64,
    ) -> Self {
        SystemSymbol { full: Arc::new(full), principal: Arc::new(principal), d, hyperbolicity_gap }
    }

    /// u_tt − Δu + 2b(t)u_t = 0 for V = (|ξ|û, D_tû).
    pub fn damped_wave(b: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(
            move |t, xi| m2(r(0.0), r(xi), r(xi), I * (2.0 * b(t))),
            |_, xi| m2(r(0.0), r(xi), r(xi), r(0.0)),
            2,
            2.0,
        )
    }

    /// u_tt − a(t)²Δu = 0 for V = (a|ξ|û, D_tû); `da` is ∂_t a.
    pub fn variable_speed(a: impl Fn(f64) -> f64 + Send + Sync + 'static, da: impl Fn(f64) -> f64 + Send + Sync + 'static, a_min: f64) -> Self {
        let a = Arc::new(a);
        let a2 = a.clone();
        Self::new(
            move |t, xi| {
                let at = a(t);
                m2(-I * (da(t) / at), r(at * xi), r(at * xi), r(0.0))
            },
            move |t, xi| {
                let at = a2(t);
                m2(r(0.0), r(at * xi), r(at * xi), r(0.0))
            },
            2,
            2.0 * a_min,
        )
    }

    /// Constant symmetric principal part plus constant lower-order term.
    pub fn constant(principal: CMat, lower: CMat, gap: f64) -> Self {
        let d = principal.nrows();
        let p2 = principal.clone();
        Self::new(move |_, xi| &principal * r(xi) + &lower, move |_, xi| &p2 * r(xi), d, gap)
    }

    /// Checks homogeneity of the principal part, real spectrum and gaps at the given samples.
    pub fn validate_on(&self, samples: &[(f64, f64)]) -> Result<()> {
        if self.d == 0 || !(self.hyperbolicity_gap > 0.0) {
            return Err(DiagError::InvalidSystem(format!("d={}, gap={}", self.d, self.hyperbolicity_gap)));
        }
        for &(t, xi) in samples {
            let a1 = (self.principal)(t, xi);
            if a1.nrows() != self.d || a1.ncols() != self.d || (self.full)(t, xi).nrows() != self.d {
                return Err(DiagError::InvalidSystem("dimension mismatch".into()));
            }
            for rho in [2.0, 10.0] {
                let dev = norm2(&((self.principal)(t, rho * xi) - &a1 * r(rho)));
                if dev > 1e-8 * (1.0 + rho * norm2(&a1)) {
                    return Err(DiagError::InvalidSystem(format!("principal part not homogeneous (deviation {dev:e})")));
                }
            }
            let lam = sorted_real_eigs(&a1)?;
            check_gaps(&lam, self.hyperbolicity_gap * xi, t, xi)?;
        }
        Ok(())
    }
}

fn sorted_real_eigs(a: &CMat) -> Result<Vec<f64>> {
    let scale = norm2(a).max(1e-300);
    let mut out = Vec::with_capacity(a.nrows());
    for z in eigenvalues(a) {
        if z.im.abs() > 1e-8 * scale {
            return Err(DiagError::NonRealEigenvalue(z));
        }
        out.push(z.re);
    }
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(out)
}

fn check_gaps(lam: &[f64], required: f64, t: f64, xi: f64) -> Result<()> {
    let gap = lam.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if gap < required {
        return Err(DiagError::GapViolation { gap, required, t, xi });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EigenFrame {
    pub lambdas: Vec<f64>,
    pub m: CMat,
    pub m_inv: CMat,
    pub projections: Vec<CMat>,
    pub h: CMat,
}

/// Unit null vector of `a − λ` with the gauge: the first component whose modulus is at least half
/// the maximal one is positive real.
fn null_vector(a: &CMat, lam: f64) -> CMat {
    let d = a.nrows();
    let shifted = a - eye(d) * r(lam);
    let mut v = if d == 2 {
        let (p, q) = (CMat::from_column_slice(2, 1, &[shifted[(0, 1)], -shifted[(0, 0)]]), CMat::from_column_slice(2, 1, &[-shifted[(1, 1)], shifted[(1, 0)]]));
        let (pn, qn) = (p.norm(), q.norm());
        if pn.max(qn) == 0.0 {
            CMat::from_column_slice(2, 1, &[r(1.0), r(0.0)])
        } else if pn >= qn {
            p / r(pn)
        } else {
            q / r(qn)
        }
    } else {
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.unwrap();
        let (imin, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        CMat::from_fn(d, 1, |i, _| v_t[(imin, i)].conj())
    };
    let mx = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let k = v.iter().position(|z| z.norm() >= 0.5 * mx).unwrap_or(0);
    let ph = v[(k, 0)] / v[(k, 0)].norm();
    v /= ph;
    v
}

fn frame_from(a1: &CMat, lambdas: Vec<f64>, reference: Option<&CMat>) -> Result<EigenFrame> {
    let d = a1.nrows();
    let mut m = CMat::zeros(d, d);
    for (j, &l) in lambdas.iter().enumerate() {
        let mut v = null_vector(a1, l);
        if let Some(rf) = reference {
            let ov: C64 = (0..d).map(|i| rf[(i, j)].conj() * v[(i, 0)]).sum();
            if ov.norm() > 0.0 {
                v *= ov.conj() / ov.norm();
            }
        }
        m.set_column(j, &v.column(0));
    }
    if let Some(rf) = reference {
        let jump = norm2(&(&m - rf));
        if jump > 0.5 {
            return Err(DiagError::FrameDiscontinuity { jump, t: f64::NAN });
        }
    }
    let m_inv = inverse(&m).ok_or(DiagError::InvalidSystem("singular eigenvector matrix".into()))?;
    let projections: Vec<CMat> = (0..d).map(|j| m.column(j) * m_inv.row(j)).collect();
    let h = projections.iter().fold(CMat::zeros(d, d), |acc, p| acc + p.adjoint() * p);
    Ok(EigenFrame { lambdas, m, m_inv, projections, h })
}

/// Eigenstructure of the principal part at (t, |ξ|).
pub fn eigen_frame(sys: &SystemSymbol, t: f64, xi: f64) -> Result<EigenFrame> {
    eigen_frame_aligned(sys, t, xi, None)
}

/// Eigenframe whose columns are phase-aligned with `reference` (continuation along t).
pub fn eigen_frame_aligned(sys: &SystemSymbol, t: f64, xi: f64, reference: Option<&CMat>) -> Result<EigenFrame> {
    if xi == 0.0 {
        return Err(DiagError::ZeroFrequency);
    }
    let a1 = (sys.principal)(t, xi);
    let lambdas = sorted_real_eigs(&a1)?;
    check_gaps(&lambdas, 0.5 * sys.hyperbolicity_gap * xi, t, xi)?;
    frame_from(&a1, lambdas, reference).map_err(|e| match e {
        DiagError::FrameDiscontinuity { jump, .. } => DiagError::FrameDiscontinuity { jump, t },
        e => e,
    })
}

/// Richardson-extrapolated central difference of D_t = −i∂_t.
fn dt_fd(f: &mut dyn FnMut(f64) -> Result<CMat>, t: f64, h: f64) -> Result<CMat> {
    let d1 = (f(t + h)? - f(t - h)?) / r(2.0 * h);
    let d2 = (f(t + h / 2.0)? - f(t - h / 2.0)?) / r(h);
    Ok((d2 * r(4.0) - d1) * (-I / 3.0))
}

/// Data of the hierarchy at one point.
#[derive(Debug, Clone)]
pub struct LevelData {
    pub k: usize,
    pub frame: EigenFrame,
    pub r0: CMat,
    /// N^(1..k).
    pub n_terms: Vec<CMat>,
    /// F^(0..k−1).
    pub f_terms: Vec<CMat>,
    /// B_k from the recursion.
    pub b: CMat,
}

impl LevelData {
    pub fn n_k(&self) -> CMat {
        self.n_terms.iter().fold(eye(self.frame.m.nrows()), |a, n| a + n)
    }

    /// F_{k−1} = Σ_{j<k} F^(j).
    pub fn f_total(&self) -> CMat {
        self.f_terms.iter().fold(CMat::zeros(self.frame.m.nrows(), self.frame.m.nrows()), |a, f| a + f)
    }

    pub fn big_d(&self) -> CMat {
        crate::linalg::diag(&self.frame.lambdas.iter().map(|&l| r(l)).collect::<Vec<_>>())
    }

    /// R_k = −N_k^{−1}B_k.
    pub fn r_k(&self) -> Result<CMat> {
        let inv = inverse(&self.n_k()).ok_or(DiagError::NotInvertible { t: f64::NAN, xi: f64::NAN })?;
        Ok(-(inv * &self.b))
    }
}

/// Hierarchy builder for a system symbol, depth ≤ 4.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub sys: SystemSymbol,
    /// Relative finite-difference step; the absolute step is `fd_step·(1+t)`.
    pub fd_step: f64,
}

pub const MAX_DEPTH: usize = 4;

impl Hierarchy {
    pub fn new(sys: SystemSymbol) -> Self {
        Hierarchy { sys, fd_step: 4e-3 }
    }

    fn h(&self, t: f64) -> f64 {
        self.fd_step * (1.0 + t)
    }

    /// R_0 = M^{−1}(A − A_1)M + (D_tM^{−1})M with frame continuation along t.
    pub fn step0(&self, t: f64, xi: f64, reference: Option<&CMat>) -> Result<(EigenFrame, CMat)> {
        let frame = eigen_frame_aligned(&self.sys, t, xi, reference)?;
        let mref = frame.m.clone();
        let mut minv = |s: f64| eigen_frame_aligned(&self.sys, s, xi, Some(&mref)).map(|f| f.m_inv);
        let dminv = dt_fd(&mut minv, t, self.h(t))?;
        let lower = (self.sys.full)(t, xi) - (self.sys.principal)(t, xi);
        let r0 = &frame.m_inv * lower * &frame.m + dminv * &frame.m;
        Ok((frame, r0))
    }

    /// Hierarchy data up to level `k` at (t, |ξ|).
    pub fn level(&self, t: f64, xi: f64, k: usize) -> Result<LevelData> {
        if k > MAX_DEPTH {
            return Err(DiagError::InvalidSystem(format!("hierarchy depth {k} above {MAX_DEPTH}")));
        }
        self.level_ref(t, xi, k, None)
    }

    fn level_ref(&self, t: f64, xi: f64, k: usize, reference: Option<&CMat>) -> Result<LevelData> {
        if k == 0 {
            let (frame, r0) = self.step0(t, xi, reference)?;
            let b = -r0.clone();
            return Ok(LevelData { k: 0, frame, r0, n_terms: vec![], f_terms: vec![], b });
        }
        let prev = self.level_ref(t, xi, k - 1, reference)?;
        let mref = prev.frame.m.clone();
        let lam = prev.frame.lambdas.clone();
        let n_new = offdiag_quotient(&prev.b, &lam);
        let f_new = diag_part(&prev.b) * r(-1.0);
        let mut nfun = |s: f64| -> Result<CMat> {
            let p = self.level_ref(s, xi, k - 1, Some(&mref))?;
            Ok(offdiag_quotient(&p.b, &p.frame.lambdas))
        };
        let dn = dt_fd(&mut nfun, t, self.h(t))?;
        let d = lam.len();
        let mut f_terms = prev.f_terms.clone();
        f_terms.push(f_new.clone());
        let f_k = f_terms.iter().fold(CMat::zeros(d, d), |a, f| a + f);
        let nk_prev = prev.n_k();
        let b = dn - &prev.r0 * &n_new + &n_new * f_k + (nk_prev - eye(d)) * f_new;
        let mut n_terms = prev.n_terms.clone();
        n_terms.push(n_new);
        Ok(LevelData { k, frame: prev.frame, r0: prev.r0, n_terms, f_terms, b })
    }

    /// ‖D_tN_k − (𝒟+R_0)N_k + N_k(𝒟+F_{k−1}) + N_kR_k‖ with D_tN_k by finite differences of the
    /// assembled N_k; the recursion is independent of this direct form.
    pub fn conjugation_residual(&self, t: f64, xi: f64, k: usize) -> Result<f64> {
        let lv = self.level(t, xi, k)?;
        let mref = lv.frame.m.clone();
        let mut nk = |s: f64| self.level_ref(s, xi, k, Some(&mref)).map(|l| l.n_k());
        let dnk = dt_fd(&mut nk, t, self.h(t))?;
        let n = lv.n_k();
        let dd = lv.big_d();
        let direct = dnk - (&dd + &lv.r0) * &n + &n * (&dd + lv.f_total());
        let rk = lv.r_k()?;
        Ok(norm2(&(direct + &n * rk)))
    }

    /// Smallest c = c0·2^j for which ‖N_k − I‖ ≤ ½ and the gap certificate hold on the samples of
    /// Z_hyp(c); samples are (t, s) with |ξ| = s·c/(1+t), s ≥ 1.
    pub fn certify_zone(&self, k: usize, c0: f64, t_samples: &[f64], s_samples: &[f64]) -> Result<f64> {
        let mut c = c0;
        for _ in 0..30 {
            let mut ok = true;
            'outer: for &t in t_samples {
                for &s in s_samples {
                    let xi = s * c / (1.0 + t);
                    match self.level(t, xi, k) {
                        Ok(lv) => {
                            if norm2(&(lv.n_k() - eye(self.sys.d))) > 0.5 {
                                ok = false;
                                break 'outer;
                            }
                        }
                        Err(DiagError::GapViolation { .. }) | Err(DiagError::NotInvertible { .. }) => {
                            ok = false;
                            break 'outer;
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            if ok {
                return Ok(c);
            }
            c *= 2.0;
        }
        Err(DiagError::ZoneEscalation(c))
    }
}

fn offdiag_quotient(b: &CMat, lam: &[f64]) -> CMat {
    let d = lam.len();
    CMat::from_fn(d, d, |i, j| if i == j { r(0.0) } else { b[(i, j)] / (lam[i] - lam[j]) })
}

fn diag_part(b: &CMat) -> CMat {
    let d = b.nrows();
    CMat::from_fn(d, d, |i, j| if i == j { b[(i, j)] } else { r(0.0) })
}

/// A hierarchy level bundled with its certified zone constant.
#[derive(Clone, Debug)]
pub struct HierarchyLevel {
    pub k: usize,
    pub zone_c: f64,
    pub hierarchy: Hierarchy,
}

impl HierarchyLevel {
    pub fn at(&self, t: f64, xi: f64) -> Result<LevelData> {
        self.hierarchy.level(t, xi, self.k)
    }
}

/// Next hierarchy level at (t, |ξ|).
pub fn hierarchy_step(level: &HierarchyLevel, t: f64, xi: f64) -> Result<LevelData> {
    if level.k + 1 > MAX_DEPTH {
        return Err(DiagError::InvalidSystem(format!("hierarchy depth above {MAX_DEPTH}")));
    }
    level.hierarchy.level(t, xi, level.k + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GecReport {
    pub sup_value: f64,
    /// (T, running sup over s,t ≤ T).
    pub growth_curve: Vec<(f64, f64)>,
}

/// sup over sampled t_ξ ≤ s ≤ t ≤ T_max and |ξ| of ‖∫_s^t Im F^(0)(τ,ξ)dτ‖ for diagonal F^(0).
/// `t_grid` holds the increasing cut points where the running sup is recorded.
pub fn gec_test(f0: &dyn Fn(f64, f64) -> CMat, zone_c: f64, t_grid: &[f64], xis: &[f64]) -> Result<GecReport> {
    let opts = QuadOptions::with_rel_tol(1e-8);
    let mut curve: Vec<(f64, f64)> = t_grid.iter().map(|&t| (t, 0.0)).collect();
    for &xi in xis {
        let t0 = (zone_c / xi - 1.0).max(0.0);
        let d = f0(t0.max(t_grid[0]), xi).nrows();
        for j in 0..d {
            let mut g = 0.0f64;
            let (mut gmax, mut gmin) = (0.0f64, 0.0f64);
            let mut prev = t0;
            for (idx, &t) in t_grid.iter().enumerate() {
                if t > prev {
                    let seg = integrate(|s: f64| f0(s, xi)[(j, j)].im, prev, t, &QuadOptions { abs_tol: 1e-14, ..opts })?;
                    g += seg.value;
                    prev = t;
                    gmax = gmax.max(g);
                    gmin = gmin.min(g);
                }
                curve[idx].1 = curve[idx].1.max(gmax - gmin);
            }
        }
    }
    let mut run = 0.0f64;
    for p in curve.iter_mut() {
        run = run.max(p.1);
        p.1 = run;
    }
    Ok(GecReport { sup_value: run, growth_curve: curve })
}
