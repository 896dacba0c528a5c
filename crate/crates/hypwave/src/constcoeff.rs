//! Constant-coefficient hyperbolic operators: characteristic roots, root bounds, solution
//! amplitudes, discriminants and the tabulated decay rates.
//!
//! The operator `D_t^m u + Σ_j P_j(D_x) D_t^{m−j} u + Σ c_{α,r} D_x^α D_t^r u` has the symbol
//! `L(τ,ξ) = τ^m + Σ_j P_j(ξ) τ^{m−j} + Σ c_{α,r} ξ^α τ^r`, so that `û(t,ξ) = Σ_k e^{iτ_k t} (…)`.

use crate::linalg::{poly_eval, poly_roots, C64, I};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstCoeffError {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("multiple root: minimal root distance {distance:e} below {threshold:e}")]
    MultipleRoot { distance: f64, threshold: f64 },
    #[error("invalid decay class: {0}")]
    InvalidClass(String),
}

pub type Result<T> = std::result::Result<T, ConstCoeffError>;

/// A monomial `coeff · ξ^exponents`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

impl Monomial {
    pub fn new(exponents: Vec<u32>, coeff: f64) -> Self {
        Self { exponents, coeff }
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    fn eval(&self, xi: &[f64]) -> f64 {
        self.exponents.iter().zip(xi).fold(self.coeff, |acc, (&e, &x)| acc * x.powi(e as i32))
    }
}

/// A lower-order term `c_{α,r} D_x^α D_t^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTerm {
    pub alpha: Vec<u32>,
    pub r: u32,
    pub coeff: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicOperatorSpec {
    pub order: usize,
    pub dim: usize,
    /// `principal[j-1]` holds the monomials of `P_j`.
    pub principal: Vec<Vec<Monomial>>,
    pub lower: Vec<LowerTerm>,
}

fn sq_norm_poly(dim: usize, scale: f64) -> Vec<Monomial> {
    (0..dim)
        .map(|i| {
            let mut e = vec![0; dim];
            e[i] = 2;
            Monomial::new(e, scale)
        })
        .collect()
}

impl HyperbolicOperatorSpec {
    pub fn new(order: usize, dim: usize, principal: Vec<Vec<Monomial>>, lower: Vec<LowerTerm>) -> Result<Self> {
        let op = Self { order, dim, principal, lower };
        op.validate()?;
        Ok(op)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(ConstCoeffError::InvalidOperator(s));
        if self.order == 0 || self.dim == 0 {
            return bad("order and dimension must be positive".into());
        }
        if self.principal.len() != self.order {
            return bad(format!("expected {} principal coefficients, got {}", self.order, self.principal.len()));
        }
        for (j, p) in self.principal.iter().enumerate() {
            for mono in p {
                if mono.exponents.len() != self.dim {
                    return bad(format!("P_{} monomial has {} exponents, expected {}", j + 1, mono.exponents.len(), self.dim));
                }
                if mono.degree() as usize != j + 1 {
                    return bad(format!("P_{} monomial of degree {} is not homogeneous", j + 1, mono.degree()));
                }
            }
        }
        for t in &self.lower {
            if t.alpha.len() != self.dim {
                return bad("lower term multi-index has wrong length".into());
            }
            if t.alpha.iter().sum::<u32>() as usize + t.r as usize >= self.order {
                return bad(format!("lower term |α|+r = {} exceeds m−1", t.alpha.iter().sum::<u32>() + t.r));
            }
        }
        Ok(())
    }

    /// `D_t² − |ξ|²`.
    pub fn wave(dim: usize) -> Self {
        Self { order: 2, dim, principal: vec![vec![], sq_norm_poly(dim, -1.0)], lower: vec![] }
    }

    /// `u_tt − Δu + u_t`, i.e. `D_t² − |ξ|² − iD_t`.
    pub fn damped_wave(dim: usize) -> Self {
        let mut op = Self::wave(dim);
        op.lower.push(LowerTerm { alpha: vec![0; dim], r: 1, coeff: -I });
        op
    }

    /// `(∂_t² − Δ)(∂_t² − 2Δ)`: symbol `(τ² − |ξ|²)(τ² − 2|ξ|²) = τ⁴ − 3|ξ|²τ² + 2|ξ|⁴`.
    pub fn wave_product(dim: usize) -> Self {
        let mut p4 = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                let mut e = vec![0; dim];
                e[i] += 2;
                e[j] += 2;
                p4.push(Monomial::new(e, 2.0));
            }
        }
        Self { order: 4, dim, principal: vec![vec![], sq_norm_poly(dim, -3.0), vec![], p4], lower: vec![] }
    }

    /// One-dimensional operator `Π_k (τ − s_k ξ)` plus lower-order terms.
    pub fn from_speeds_1d(speeds: &[f64], lower: Vec<LowerTerm>) -> Result<Self> {
        let m = speeds.len();
        // elementary symmetric polynomials of the speeds
        let mut e = vec![0.0; m + 1];
        e[0] = 1.0;
        for &s in speeds {
            for k in (1..=m).rev() {
                e[k] += e[k - 1] * s;
            }
        }
        let principal = (1..=m)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                vec![Monomial::new(vec![j as u32], sign * e[j])]
            })
            .collect();
        Self::new(m, 1, principal, lower)
    }

    fn check_xi(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.dim || xi.iter().any(|x| !x.is_finite()) {
            return Err(ConstCoeffError::InvalidOperator(format!("ξ must be a finite vector of length {}", self.dim)));
        }
        Ok(())
    }

    /// Ascending τ-coefficients of the principal part `L_m(·,ξ)`.
    pub fn principal_poly(&self, xi: &[f64]) -> Vec<C64> {
        let m = self.order;
        let mut c = vec![C64::new(0.0, 0.0); m + 1];
        c[m] = C64::new(1.0, 0.0);
        for (j, p) in self.principal.iter().enumerate() {
            let v: f64 = p.iter().map(|mono| mono.eval(xi)).sum();
            c[m - (j + 1)] += v;
        }
        c
    }

    /// Ascending τ-coefficients of the full symbol `L(·,ξ)`.
    pub fn full_poly(&self, xi: &[f64]) -> Vec<C64> {
        let mut c = self.principal_poly(xi);
        for t in &self.lower {
            let v = t.alpha.iter().zip(xi).fold(t.coeff, |acc, (&e, &x)| acc * x.powi(e as i32));
            c[t.r as usize] += v;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    /// Full characteristic roots, ordered to match `principal_roots`.
    pub roots: Vec<C64>,
    /// Principal roots, real and ascending.
    pub principal_roots: Vec<f64>,
    pub at_xi: Vec<f64>,
    /// Near-multiple roots or unconverged polishing.
    pub ill_conditioned: bool,
}

/// Greedy nearest-distance matching of `full` onto `targets`.
fn greedy_match(full: &[C64], targets: &[f64]) -> Vec<C64> {
    let m = full.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(m * m);
    for (i, z) in full.iter().enumerate() {
        for (k, &p) in targets.iter().enumerate() {
            pairs.push(((z - p).norm(), i, k));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
    let mut used_i = vec![false; m];
    let mut out: Vec<Option<C64>> = vec![None; m];
    for (_, i, k) in pairs {
        if !used_i[i] && out[k].is_none() {
            used_i[i] = true;
            out[k] = Some(full[i]);
        }
    }
    out.into_iter().map(|z| z.expect("complete matching")).collect()
}

/// Characteristic roots of `L(·,ξ)` and of its principal part.
pub fn char_roots(op: &HyperbolicOperatorSpec, xi: &[f64]) -> Result<RootSet> {
    op.check_xi(xi)?;
    let (full, ok_full) = poly_roots(&op.full_poly(xi));
    let (principal, _) = poly_roots(&op.principal_poly(xi));
    let mut principal_roots: Vec<f64> = principal.iter().map(|z| z.re).collect();
    principal_roots.sort_by(f64::total_cmp);
    let roots = greedy_match(&full, &principal_roots);
    let m = op.order;
    let xn = norm(xi);
    let disc = discriminant_of_roots(&roots, C64::new(1.0, 0.0));
    let ill = !ok_full || disc.norm() <= 1e-8 * (1.0 + xn).powi((m * (m - 1)) as i32);
    Ok(RootSet { roots, principal_roots, at_xi: xi.to_vec(), ill_conditioned: ill })
}

fn norm(xi: &[f64]) -> f64 {
    xi.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `2 max_j |c_j|^{1/j}` for `z^m + c_1 z^{m−1} + … + c_m`.
pub fn root_bound(coeffs: &[C64]) -> f64 {
    2.0 * coeffs.iter().enumerate().map(|(j, c)| c.norm().powf(1.0 / (j + 1) as f64)).fold(0.0, f64::max)
}

/// Convention for the Cauchy data the amplitudes act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataConvention {
    /// `∂_t^j u(0) = f_j`.
    #[default]
    TimeDerivative,
    /// `D_t^j u(0) = f_j` with `D_t = −i∂_t`.
    Dt,
}

/// Amplitudes `A_j^k`, `k = 1..m`, with `Σ_k e^{iτ_k t} A_j^k` the multiplier for datum `f_j`.
pub fn amplitudes(roots: &RootSet, j: usize, conv: DataConvention) -> Result<Vec<C64>> {
    let tau = &roots.roots;
    let m = tau.len();
    if j >= m {
        return Err(ConstCoeffError::InvalidOperator(format!("data index {j} must be below m = {m}")));
    }
    let threshold = 1e-8 * (1.0 + norm(&roots.at_xi));
    let mut dmin = f64::INFINITY;
    for a in 0..m {
        for b in a + 1..m {
            dmin = dmin.min((tau[a] - tau[b]).norm());
        }
    }
    if dmin < threshold {
        return Err(ConstCoeffError::MultipleRoot { distance: dmin, threshold });
    }
    let factor = match conv {
        DataConvention::Dt => C64::new(1.0, 0.0),
        DataConvention::TimeDerivative => I.powi(-(j as i32)),
    };
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    Ok((0..m)
        .map(|k| {
            let others: Vec<C64> = (0..m).filter(|&l| l != k).map(|l| tau[l]).collect();
            let num = elementary_symmetric(&others, m - j - 1);
            let den = others.iter().fold(C64::new(1.0, 0.0), |acc, &t| acc * (t - tau[k]));
            num / den * sign * factor
        })
        .collect())
}

fn elementary_symmetric(v: &[C64], k: usize) -> C64 {
    let mut e = vec![C64::new(0.0, 0.0); v.len() + 1];
    e[0] = C64::new(1.0, 0.0);
    for &x in v {
        for i in (1..=v.len()).rev() {
            e[i] = e[i] + e[i - 1] * x;
        }
    }
    e[k]
}

/// Evaluates `Σ_j Σ_k e^{iτ_k t} A_j^k f_j`.
pub fn reconstruct(roots: &RootSet, data: &[C64], t: f64, conv: DataConvention) -> Result<C64> {
    let mut u = C64::new(0.0, 0.0);
    for (j, &f) in data.iter().enumerate() {
        let a = amplitudes(roots, j, conv)?;
        for (k, ak) in a.iter().enumerate() {
            u += (I * roots.roots[k] * t).exp() * ak * f;
        }
    }
    Ok(u)
}

/// `(−1)^{m(m−1)/2} p_m^{2m−2} Π_{i<j}(x_i − x_j)²`.
pub fn discriminant_of_roots(roots: &[C64], lead: C64) -> C64 {
    let m = roots.len();
    let mut prod = C64::new(1.0, 0.0);
    for a in 0..m {
        for b in a + 1..m {
            prod *= (roots[a] - roots[b]).powi(2);
        }
    }
    let sign = if (m * (m.saturating_sub(1)) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    prod * lead.powi(2 * m as i32 - 2) * sign
}

/// Discriminant of `p_0 + p_1 x + … + p_m x^m`.
pub fn discriminant_coeffs(p: &[C64]) -> C64 {
    let m = p.len() - 1;
    if m == 0 {
        return C64::new(1.0, 0.0);
    }
    let (roots, _) = poly_roots(p);
    discriminant_of_roots(&roots, p[m])
}

/// Discriminant of `L(·,ξ)`.
pub fn discriminant(op: &HyperbolicOperatorSpec, xi: &[f64]) -> Result<C64> {
    op.check_xi(xi)?;
    Ok(discriminant_coeffs(&op.full_poly(xi)))
}

/// Residual `|L(τ,ξ)|`.
pub fn symbol_residual(op: &HyperbolicOperatorSpec, xi: &[f64], tau: C64) -> f64 {
    poly_eval(&op.full_poly(xi), tau).0.norm()
}

/// Rate regimes of the decay tables. Part I covers large frequencies, Part II bounded ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayRegime {
    /// `e^{−δt}`.
    AwayFromAxis { delta: f64 },
    /// `t^{−(n/2)(1/p−1/q)}`.
    OnAxisNondegHessian { n: u32 },
    /// `t^{−((n−1)/2)(1/p−1/q)}`.
    OnAxisRankNMinus1 { n: u32 },
    /// `t^{−((n−1)/γ)(1/p−1/q)}`.
    OnAxisConvex { n: u32, gamma: f64 },
    /// Part I: `t^{−1/γ0}`.
    OnAxisNonconvexLarge { gamma0: f64 },
    /// Part II: `t^{−(1/γ0)(1/p−1/q)}`.
    OnAxisNonconvexBounded { gamma0: f64 },
    /// `t^L e^{−δt}`.
    MultipleAway { l: u32, delta: f64 },
    /// `t^{L−1−ℓ}`.
    MultipleOnAxis { l: u32, ell: f64 },
    /// `t^{L−1−(ℓ/s)(1/p−1/q)}`.
    MeetingAxis { l: u32, ell: f64, s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayClass {
    pub regime: DecayRegime,
    pub p: f64,
}

impl DecayClass {
    pub fn new(regime: DecayRegime, p: f64) -> Result<Self> {
        let c = Self { regime, p };
        c.validate()?;
        Ok(c)
    }

    /// `1/p − 1/q = 2/p − 1`.
    pub fn lp_gap(&self) -> f64 {
        2.0 / self.p - 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(ConstCoeffError::InvalidClass(s.into()));
        if !(1.0..=2.0).contains(&self.p) {
            return bad("p must lie in [1, 2]");
        }
        match self.regime {
            DecayRegime::AwayFromAxis { delta } | DecayRegime::MultipleAway { delta, .. } if !(delta > 0.0) => bad("δ must be positive"),
            DecayRegime::OnAxisNondegHessian { n } | DecayRegime::OnAxisRankNMinus1 { n } if n == 0 => bad("n must be positive"),
            DecayRegime::OnAxisConvex { n, gamma } if n == 0 || !(gamma >= 2.0) => bad("convex regime needs n ≥ 1 and γ ≥ 2"),
            DecayRegime::OnAxisNonconvexLarge { gamma0 } | DecayRegime::OnAxisNonconvexBounded { gamma0 } if !(gamma0 >= 2.0) => {
                bad("γ0 must be at least 2")
            }
            DecayRegime::MultipleAway { l, .. } if l == 0 => bad("L must be at least 1"),
            DecayRegime::MultipleOnAxis { l, ell } if l == 0 || !(ell >= 0.0) => bad("needs L ≥ 1 and ℓ ≥ 0"),
            DecayRegime::MeetingAxis { l, ell, s } if l == 0 || !(ell >= 0.0) || !(s >= 1.0) => bad("needs L ≥ 1, ℓ ≥ 0 and s ≥ 1"),
            _ => Ok(()),
        }
    }
}

/// Tabulated rate `K(t)` for one regime.
pub fn decay_classifier(class: &DecayClass, t: f64) -> Result<f64> {
    class.validate()?;
    if !(t > 0.0) {
        return Err(ConstCoeffError::InvalidClass("t must be positive".into()));
    }
    let g = class.lp_gap();
    Ok(match class.regime {
        DecayRegime::AwayFromAxis { delta } => (-delta * t).exp(),
        DecayRegime::OnAxisNondegHessian { n } => t.powf(-(n as f64) / 2.0 * g),
        DecayRegime::OnAxisRankNMinus1 { n } => t.powf(-(n as f64 - 1.0) / 2.0 * g),
        DecayRegime::OnAxisConvex { n, gamma } => t.powf(-(n as f64 - 1.0) / gamma * g),
        DecayRegime::OnAxisNonconvexLarge { gamma0 } => t.powf(-1.0 / gamma0),
        DecayRegime::OnAxisNonconvexBounded { gamma0 } => t.powf(-g / gamma0),
        DecayRegime::MultipleAway { l, delta } => t.powi(l as i32) * (-delta * t).exp(),
        DecayRegime::MultipleOnAxis { l, ell } => t.powf(l as f64 - 1.0 - ell),
        DecayRegime::MeetingAxis { l, ell, s } => t.powf(l as f64 - 1.0 - ell / s * g),
    })
}

/// Combined rate: the slowest-decaying of the per-root rates.
pub fn combined_rate(classes: &[DecayClass], t: f64) -> Result<f64> {
    classes.iter().try_fold(0.0f64, |acc, c| Ok(acc.max(decay_classifier(c, t)?)))
}
