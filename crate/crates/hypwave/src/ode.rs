//! Adaptive Dormand–Prince 8(5,3) integrator for complex first-order systems `y' = f(t, y)`.
//!
//! Forward and backward integration are both supported; the state is a flat slice of complex
//! numbers so matrix ODEs are integrated column-major.

use crate::scalar::{lit, Real};
use num_complex::Complex;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("maximum number of steps ({max_steps}) exceeded at t = {t}")]
    MaxSteps { t: f64, max_steps: usize },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
    /// Upper bound on |h|; `None` means unbounded.
    pub h_max: Option<T>,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self { rtol: lit(1e-10), atol: lit(1e-12), max_steps: 2_000_000, h_max: None }
    }
}

impl<T: Real> OdeOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { rtol: tol, atol: tol * lit(1e-2), ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub evals: usize,
}

const C: [f64; 12] = [
    0.0,
    0.526001519587677318785587544488E-01,
    0.789002279381515978178381316732E-01,
    0.118350341907227396726757197510E+00,
    0.281649658092772603273242802490E+00,
    0.333333333333333333333333333333E+00,
    0.25E+00,
    0.307692307692307692307692307692E+00,
    0.651282051282051282051282051282E+00,
    0.6E+00,
    0.857142857142857142857142857142E+00,
    1.0,
];

// Nonzero lower-triangular entries of the Butcher matrix, row by row (row i uses stages j < i).
const A: [&[(usize, f64)]; 12] = [
    &[],
    &[(0, 5.26001519587677318785587544488E-2)],
    &[(0, 1.97250569845378994544595329183E-2), (1, 5.91751709536136983633785987549E-2)],
    &[(0, 2.95875854768068491816892993775E-2), (2, 8.87627564304205475450678981324E-2)],
    &[
        (0, 2.41365134159266685502369798665E-1),
        (2, -8.84549479328286085344864962717E-1),
        (3, 9.24834003261792003115737966543E-1),
    ],
    &[
        (0, 3.7037037037037037037037037037E-2),
        (3, 1.70828608729473871279604482173E-1),
        (4, 1.25467687566822425016691814123E-1),
    ],
    &[
        (0, 3.7109375E-2),
        (3, 1.70252211019544039314978060272E-1),
        (4, 6.02165389804559606850219397283E-2),
        (5, -1.7578125E-2),
    ],
    &[
        (0, 3.70920001185047927108779319836E-2),
        (3, 1.70383925712239993810214054705E-1),
        (4, 1.07262030446373284651809199168E-1),
        (5, -1.53194377486244017527936158236E-2),
        (6, 8.27378916381402288758473766002E-3),
    ],
    &[
        (0, 6.24110958716075717114429577812E-1),
        (3, -3.36089262944694129406857109825E0),
        (4, -8.68219346841726006818189891453E-1),
        (5, 2.75920996994467083049415600797E1),
        (6, 2.01540675504778934086186788979E1),
        (7, -4.34898841810699588477366255144E1),
    ],
    &[
        (0, 4.77662536438264365890433908527E-1),
        (3, -2.48811461997166764192642586468E0),
        (4, -5.90290826836842996371446475743E-1),
        (5, 2.12300514481811942347288949897E1),
        (6, 1.52792336328824235832596922938E1),
        (7, -3.32882109689848629194453265587E1),
        (8, -2.03312017085086261358222928593E-2),
    ],
    &[
        (0, -9.3714243008598732571704021658E-1),
        (3, 5.18637242884406370830023853209E0),
        (4, 1.09143734899672957818500254654E0),
        (5, -8.14978701074692612513997267357E0),
        (6, -1.85200656599969598641566180701E1),
        (7, 2.27394870993505042818970056734E1),
        (8, 2.49360555267965238987089396762E0),
        (9, -3.0467644718982195003823669022E0),
    ],
    &[
        (0, 2.27331014751653820792359768449E0),
        (3, -1.05344954667372501984066689879E1),
        (4, -2.00087205822486249909675718444E0),
        (5, -1.79589318631187989172765950534E1),
        (6, 2.79488845294199600508499808837E1),
        (7, -2.85899827713502369474065508674E0),
        (8, -8.87285693353062954433549289258E0),
        (9, 1.23605671757943030647266201528E1),
        (10, 6.43392746015763530355970484046E-1),
    ],
];

const B: [(usize, f64); 8] = [
    (0, 5.42937341165687622380535766363E-2),
    (5, 4.45031289275240888144113950566E0),
    (6, 1.89151789931450038304281599044E0),
    (7, -5.8012039600105847814672114227E0),
    (8, 3.1116436695781989440891606237E-1),
    (9, -1.52160949662516078556178806805E-1),
    (10, 2.01365400804030348374776537501E-1),
    (11, 4.47106157277725905176885569043E-2),
];

const BHH: [(usize, f64); 3] = [
    (0, 0.244094488188976377952755905512E+00),
    (8, 0.733846688281611857341361741547E+00),
    (11, 0.220588235294117647058823529412E-01),
];

const ER: [(usize, f64); 8] = [
    (0, 0.1312004499419488073250102996E-01),
    (5, -0.1225156446376204440720569753E+01),
    (6, -0.4957589496572501915214079952E+00),
    (7, 0.1664377182454986536961530415E+01),
    (8, -0.3503288487499736816886487290E+00),
    (9, 0.3341791187130174790297318841E+00),
    (10, 0.8192320648511571246570742613E-01),
    (11, -0.2235530786388629525884427845E-01),
];

/// Integrator state that can be advanced through a sequence of output times.
pub struct Dop853<T: Real> {
    opts: OdeOptions<T>,
    k: Vec<Vec<Complex<T>>>,
    ytmp: Vec<Complex<T>>,
    h: Option<T>,
    fsal_valid: bool,
    facold: T,
    pub stats: OdeStats,
}

impl<T: Real> Dop853<T> {
    pub fn new(dim: usize, opts: OdeOptions<T>) -> Self {
        Self {
            opts,
            k: vec![vec![Complex::new(T::zero(), T::zero()); dim]; 12],
            ytmp: vec![Complex::new(T::zero(), T::zero()); dim],
            h: None,
            fsal_valid: false,
            facold: lit(1e-4),
            stats: OdeStats::default(),
        }
    }

    fn norm_scaled(&self, v: &[Complex<T>], y: &[Complex<T>]) -> T {
        let n = lit::<T>(2.0 * v.len().max(1) as f64);
        let mut s = T::zero();
        for (vi, yi) in v.iter().zip(y) {
            let sk = self.opts.atol + self.opts.rtol * yi.norm();
            s = s + (vi.re / sk).powi(2) + (vi.im / sk).powi(2);
        }
        (s / n).sqrt()
    }

    fn initial_step<F>(&mut self, f: &mut F, t: T, y: &[Complex<T>], dir: T, span: T) -> T
    where
        F: FnMut(T, &[Complex<T>], &mut [Complex<T>]),
    {
        let dim = y.len();
        let mut f0 = vec![Complex::new(T::zero(), T::zero()); dim];
        f(t, y, &mut f0);
        self.stats.evals += 1;
        let d0 = self.norm_scaled(y, y);
        let d1 = self.norm_scaled(&f0, y);
        let mut h0 = if d0 < lit(1e-10) || d1 < lit(1e-10) { lit(1e-6) } else { lit::<T>(0.01) * d0 / d1 };
        h0 = h0.min(span);
        if let Some(hm) = self.opts.h_max {
            h0 = h0.min(hm);
        }
        let y1: Vec<Complex<T>> = y.iter().zip(&f0).map(|(yi, fi)| *yi + *fi * (h0 * dir)).collect();
        let mut f1 = vec![Complex::new(T::zero(), T::zero()); dim];
        f(t + h0 * dir, &y1, &mut f1);
        self.stats.evals += 1;
        let diff: Vec<Complex<T>> = f1.iter().zip(&f0).map(|(a, b)| *a - *b).collect();
        let d2 = self.norm_scaled(&diff, y) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= lit(1e-15) {
            (h0 * lit(1e-3)).max(lit(1e-6))
        } else {
            (lit::<T>(0.01) / dm).powf(lit(1.0 / 8.0))
        };
        let mut h = (h0 * lit(100.0)).min(h1).min(span);
        if let Some(hm) = self.opts.h_max {
            h = h.min(hm);
        }
        h
    }

    /// Advances `y` from `t0` to `t1` (either direction).
    pub fn advance<F>(&mut self, f: &mut F, t0: T, y: &mut [Complex<T>], t1: T) -> Result<(), OdeError>
    where
        F: FnMut(T, &[Complex<T>], &mut [Complex<T>]),
    {
        if t1 == t0 {
            return Ok(());
        }
        let dim = y.len();
        let span = (t1 - t0).abs();
        let dir = if t1 > t0 { T::one() } else { -T::one() };
        let mut t = t0;
        let mut habs = match self.h {
            Some(h) => h.min(span),
            None => self.initial_step(f, t0, y, dir, span),
        };
        self.fsal_valid = false;
        let safe = lit::<T>(0.9);
        let facc1 = lit::<T>(1.0 / 0.333);
        let facc2 = lit::<T>(1.0 / 6.0);
        let mut last_rejected = false;
        let hmin = span * lit(1e-12);
        loop {
            if self.stats.steps >= self.opts.max_steps {
                return Err(OdeError::MaxSteps { t: t.to_f64().unwrap_or(f64::NAN), max_steps: self.opts.max_steps });
            }
            let remaining = (t1 - t).abs();
            let mut final_step = false;
            if habs >= remaining {
                habs = remaining;
                final_step = true;
            }
            if let Some(hm) = self.opts.h_max {
                if habs > hm {
                    habs = hm;
                    final_step = false;
                }
            }
            if habs < hmin && !final_step {
                return Err(OdeError::StepUnderflow { t: t.to_f64().unwrap_or(f64::NAN) });
            }
            let h = habs * dir;
            if !self.fsal_valid {
                let (k0, _) = self.k.split_at_mut(1);
                f(t, y, &mut k0[0]);
                self.stats.evals += 1;
            }
            for s in 1..12 {
                for i in 0..dim {
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for &(j, a) in A[s] {
                        acc = acc + self.k[j][i] * lit::<T>(a);
                    }
                    self.ytmp[i] = y[i] + acc * h;
                }
                let (head, tail) = self.k.split_at_mut(s);
                let _ = head;
                f(t + h * lit(C[s]), &self.ytmp, &mut tail[0]);
                self.stats.evals += 1;
            }
            let mut ynew = vec![Complex::new(T::zero(), T::zero()); dim];
            let mut e5 = vec![Complex::new(T::zero(), T::zero()); dim];
            let mut e3 = vec![Complex::new(T::zero(), T::zero()); dim];
            for i in 0..dim {
                let mut bk = Complex::new(T::zero(), T::zero());
                for &(j, b) in &B {
                    bk = bk + self.k[j][i] * lit::<T>(b);
                }
                ynew[i] = y[i] + bk * h;
                let mut err5 = Complex::new(T::zero(), T::zero());
                for &(j, e) in &ER {
                    err5 = err5 + self.k[j][i] * lit::<T>(e);
                }
                let mut err3 = bk;
                for &(j, b) in &BHH {
                    err3 = err3 - self.k[j][i] * lit::<T>(b);
                }
                e5[i] = err5;
                e3[i] = err3;
            }
            if ynew.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(OdeError::NonFinite { t: t.to_f64().unwrap_or(f64::NAN) });
            }
            let mut s5 = T::zero();
            let mut s3 = T::zero();
            for i in 0..dim {
                let sk = self.opts.atol + self.opts.rtol * y[i].norm().max(ynew[i].norm());
                s5 = s5 + (e5[i].re / sk).powi(2) + (e5[i].im / sk).powi(2);
                s3 = s3 + (e3[i].re / sk).powi(2) + (e3[i].im / sk).powi(2);
            }
            let mut deno = s5 + lit::<T>(0.01) * s3;
            if deno <= T::zero() {
                deno = T::one();
            }
            let err = habs * s5 * (T::one() / (deno * lit::<T>(2.0 * dim as f64))).sqrt();
            let fac11 = err.powf(lit(1.0 / 8.0));
            let fac = facc2.max(facc1.min(fac11 / safe));
            if err <= T::one() {
                self.facold = err.max(lit(1e-4));
                self.stats.steps += 1;
                t = if final_step { t1 } else { t + h };
                y.copy_from_slice(&ynew);
                f(t, y, &mut self.k[0]);
                self.stats.evals += 1;
                self.fsal_valid = true;
                let mut hnew = habs / fac;
                if last_rejected {
                    hnew = hnew.min(habs);
                }
                last_rejected = false;
                if final_step {
                    // keep the step proposal that the controller would have used
                    self.h = Some(hnew.max(habs));
                    return Ok(());
                }
                habs = hnew;
            } else {
                self.stats.rejected += 1;
                habs = habs / facc1.min(fac11 / safe);
                last_rejected = true;
            }
        }
    }
}

/// Integrates from `t0` to `t1`, returning the final state.
pub fn solve<T, F>(mut f: F, t0: T, y0: &[Complex<T>], t1: T, opts: &OdeOptions<T>) -> Result<(Vec<Complex<T>>, OdeStats), OdeError>
where
    T: Real,
    F: FnMut(T, &[Complex<T>], &mut [Complex<T>]),
{
    let mut y = y0.to_vec();
    let mut solver = Dop853::new(y.len(), *opts);
    solver.advance(&mut f, t0, &mut y, t1)?;
    Ok((y, solver.stats))
}

/// Integrates from `t0` through each time in `times` (monotone in one direction), returning the
/// state at every output time.
pub fn solve_at<T, F>(mut f: F, t0: T, y0: &[Complex<T>], times: &[T], opts: &OdeOptions<T>) -> Result<Vec<Vec<Complex<T>>>, OdeError>
where
    T: Real,
    F: FnMut(T, &[Complex<T>], &mut [Complex<T>]),
{
    let mut y = y0.to_vec();
    let mut solver = Dop853::new(y.len(), *opts);
    let mut t = t0;
    let mut out = Vec::with_capacity(times.len());
    for &tt in times {
        solver.advance(&mut f, t, &mut y, tt)?;
        t = tt;
        out.push(y.clone());
    }
    Ok(out)
}
