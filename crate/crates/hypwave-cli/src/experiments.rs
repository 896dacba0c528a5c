use crate::catalog::Entry;
use crate::config::{invalid, CliError, Params, Result};
use crate::output::{Cell, Row, Sink};
use crate::row;
use hypwave::constcoeff::{amplitudes, char_roots, reconstruct, DataConvention, HyperbolicOperatorSpec, LowerTerm};
use hypwave::diag::{gec_test, Hierarchy, SystemSymbol};
use hypwave::dissipative::{
    diffusion_comparison, diffusion_profile_compare, kalman_rank, lyapunov_decay_verify, DiffusionSetup, LyapunovGrid, PartiallyDissipativeSystem,
    ProfileCompareConfig,
};
use hypwave::fit::{linear_fit, loglog_slope};
use hypwave::floquet::{energy_growth_experiment, intervals_from_scan, kappa_scan, Bump, PeriodicCoefficient, ResonantCoefficient};
use hypwave::geometry::{contact_indices, dispersive_sup, static_phase, ContactOptions, DispersiveConfig, LevelSurface, OscAmplitude};
use hypwave::linalg::{c, r, CMat, CVec, C64, I};
use hypwave::models::{
    energy, evolve, exact_multiplier, hf_scattering_profile, l2_norm, lin_grid, log_grid, FourierState, ModelKind, ModelSpec, Profile, TimeFn,
};
use hypwave::specfun::SpecFunAccuracy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

pub fn run(entry: &'static Entry, p: &Params, seed: u64, sink: &mut Sink) -> Result<()> {
    match entry.name {
        "models-decay" => models_decay(p, sink),
        "scattering" => scattering(p, sink),
        "gec" => gec(p, sink),
        "hierarchy" => hierarchy(p, seed, sink),
        "floquet-scan" => floquet_scan(p, sink),
        "resonance-growth" => resonance_growth(p, sink),
        "diffusion" => diffusion(p, sink),
        "kalman-lyapunov" => kalman_lyapunov(p, sink),
        "profile-compare" => profile_compare(p, sink),
        "contact-index" => contact_index(p, sink),
        "dispersive-fit" => dispersive_fit(p, seed, sink),
        "constcoeff-amplitudes" => constcoeff_amplitudes(p, sink),
        other => Err(invalid(format!("experiment `{other}` has no runner"))),
    }
}

fn acc() -> SpecFunAccuracy<f64> {
    SpecFunAccuracy::default()
}

fn models_decay(p: &Params, sink: &mut Sink) -> Result<()> {
    let kind = match p.str("model")? {
        "free-wave" => ModelKind::FreeWave,
        "damped-wave" => ModelKind::DampedWave,
        "klein-gordon" => ModelKind::KleinGordon,
        "heat" => ModelKind::Heat,
        "scale-invariant-dissipation" => ModelKind::ScaleInvariantDissipation { mu: p.f64("mu")? },
        "scale-invariant-mass" => ModelKind::ScaleInvariantMass { kappa: p.f64("kappa")? },
        "weak-dissipation" => {
            let mu = p.f64("mu")?;
            ModelKind::WeakDissipation(TimeFn::new(format!("{mu}/(1+t)"), move |t| mu / (1.0 + t)))
        }
        "variable-speed" => {
            let amp = p.f64("amplitude")?;
            if !(0.0..1.0).contains(&amp) {
                return Err(invalid("`amplitude` must lie in [0, 1)"));
            }
            ModelKind::VariableSpeed(TimeFn::new(format!("1+{amp}sin(t)"), move |t| 1.0 + amp * t.sin()))
        }
        other => return Err(invalid(format!("unknown model `{other}`"))),
    };
    let model = ModelSpec::new(kind, p.usize("dim")?)?;
    let (xi_min, xi_max, n_xi) = (p.positive_or("xi_min", 1e-4)?, p.positive_or("xi_max", 30.0)?, p.usize_or("n_xi", 800)?);
    if xi_max <= xi_min || n_xi < 2 {
        return Err(invalid("need xi_min < xi_max and n_xi ≥ 2"));
    }
    let t0 = model.initial_time;
    let (t_max, n_times) = (p.f64_or("t_max", 100.0)?, p.usize_or("n_times", 12)?);
    if t_max <= t0 + 0.1 || n_times < 2 {
        return Err(invalid(format!("need t_max > {} and n_times ≥ 2", t0 + 0.1)));
    }
    let u0 = p.profile_or("u0", Profile::Gaussian { width: 1.0 })?;
    let u1 = p.profile_or("u1", Profile::Zero)?;
    let data = FourierState::from_profiles(log_grid(xi_min, xi_max, n_xi), u0, u1, t0)?;
    let mut times = vec![t0];
    times.extend(log_grid(t0 + 0.1, t_max, n_times - 1));
    let rows = times
        .par_iter()
        .map(|&t| -> Result<Row> {
            let s = evolve(&model, &data, t, &acc())?;
            Ok(row![t, energy(&model, &s), l2_norm(&s.grid, &s.u_hat, model.dim)])
        })
        .collect::<Result<Vec<_>>>()?;
    sink.table("energy", &rows)
}

fn scattering(p: &Params, sink: &mut Sink) -> Result<()> {
    let mu = p.f64("mu")?;
    let model = ModelSpec::new(ModelKind::ScaleInvariantDissipation { mu }, 1)?;
    let free = ModelSpec::new(ModelKind::FreeWave, 1)?;
    let (lo, hi, n) = (p.positive_or("xi_lo", 1.0)?, p.positive_or("xi_hi", 4.0)?, p.usize_or("n_xi", 301)?);
    if hi <= lo || n < 2 {
        return Err(invalid("need xi_lo < xi_hi and n_xi ≥ 2"));
    }
    let times = p.times_or("times", vec![10.0, 20.0, 40.0, 80.0, 160.0])?;
    if times[0] <= 1.0 || times.len() < 2 {
        return Err(invalid("scattering times must exceed 1 and contain at least two entries"));
    }
    let grid = lin_grid(lo, hi, n);
    let data = FourierState::from_profiles(grid.clone(), Profile::Annulus { lo, hi }, Profile::Zero, 1.0)?;
    let (w0, w1) = hf_scattering_profile(mu, &data, p.positive_or("xi_min", 0.5)?, &acc())?;
    let defects = times
        .par_iter()
        .map(|&t| -> Result<f64> {
            let u = evolve(&model, &data, t, &acc())?;
            let diff = (0..grid.len())
                .map(|i| {
                    let m = exact_multiplier(&free, t - 1.0, grid[i], &acc())?;
                    Ok(u.u_hat[i] * t.powf(mu) - (m[(0, 0)] * w0[i] + m[(0, 1)] * w1[i]))
                })
                .collect::<Result<Vec<C64>>>()?;
            Ok(l2_norm(&grid, &diff, 1))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Row> = times.iter().zip(&defects).map(|(&t, &d)| row![t, d]).collect();
    sink.table("defect", &rows)?;
    sink.table("summary", &[row![mu, loglog_slope(&times, &defects)]])
}

fn gec(p: &Params, sink: &mut Sink) -> Result<()> {
    let mu = p.f64("mu")?;
    let b: Box<dyn Fn(f64) -> f64 + Sync> = match p.str("kind")? {
        "l1" => Box::new(move |t| mu * (1.0 + t).powi(-2)),
        "scale-invariant" => Box::new(move |t| mu / (1.0 + t)),
        other => return Err(invalid(format!("unknown gec kind `{other}` (l1 or scale-invariant)"))),
    };
    let (t_max, n_t) = (p.f64_or("t_max", 1e3)?, p.usize_or("n_t", 31)?);
    if t_max <= 1.0 || n_t < 4 {
        return Err(invalid("need t_max > 1 and n_t ≥ 4"));
    }
    let xis = p.f64_list_or("xis", vec![0.05, 1.0, 10.0])?;
    let ts = log_grid(1.0, t_max, n_t);
    let rep = gec_test(&|t, _| CMat::from_diagonal_element(2, 2, I * b(t)), p.positive_or("zone_c", 1.0)?, &ts, &xis)?;
    let rows: Vec<Row> = rep.growth_curve.iter().map(|&(t, s)| row![t, s]).collect();
    let tail = &rep.growth_curve[rep.growth_curve.len() / 2..];
    let (lx, y): (Vec<f64>, Vec<f64>) = tail.iter().map(|&(t, s)| (t.ln(), s)).unzip();
    sink.table("growth", &rows)?;
    sink.table("summary", &[row![rep.sup_value, linear_fit(&lx, &y).slope]])
}

fn hierarchy(p: &Params, seed: u64, sink: &mut Sink) -> Result<()> {
    let sys = match p.str("system")? {
        "damped-wave" => {
            let bm = p.f64_or("b_mu", 0.4)?;
            SystemSymbol::damped_wave(move |t| bm / (1.0 + t))
        }
        "variable-speed" => SystemSymbol::variable_speed(|t| 2.0 + 0.5 * (1.0 + t).ln().sin(), |t| 0.5 * (1.0 + t).ln().cos() / (1.0 + t), 1.5),
        other => return Err(invalid(format!("unknown system `{other}` (damped-wave or variable-speed)"))),
    };
    let k = p.usize("k")?;
    if k > 4 {
        return Err(invalid("`k` must be at most 4"));
    }
    let (samples, t_max) = (p.usize_or("samples", 200)?, p.positive_or("t_max", 1e3)?);
    let h = Hierarchy::new(sys);
    let zone = h.certify_zone(k, p.positive_or("c0", 1.0)?, &[0.0, 1.0, 10.0, 100.0], &[1.0, 2.0, 10.0])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|_| {
            let t = (1.0 + t_max).powf(rng.random::<f64>()) - 1.0;
            let s = 10f64.powf(2.0 * rng.random::<f64>());
            (t, s * zone / (1.0 + t))
        })
        .collect();
    let res = pts.par_iter().map(|&(t, xi)| Ok(h.conjugation_residual(t, xi, k)? / (1.0 + xi))).collect::<Result<Vec<f64>>>()?;
    let rows: Vec<Row> = pts.iter().zip(&res).map(|(&(t, xi), &v)| row![t, xi, v]).collect();
    let worst = res.iter().copied().fold(0.0, f64::max);
    sink.table("residuals", &rows)?;
    sink.table("summary", &[row![zone, worst]])
}

fn xi_range(p: &Params, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let range = (p.positive_or("xi_lo", lo)?, p.positive_or("xi_hi", hi)?);
    if range.1 <= range.0 {
        return Err(invalid("need xi_lo < xi_hi"));
    }
    Ok(range)
}

fn floquet_scan(p: &Params, sink: &mut Sink) -> Result<()> {
    let a = PeriodicCoefficient::new(Bump::new(p.f64("eps")?)?);
    let scan = kappa_scan(&a, xi_range(p, 2.5, 3.7)?, p.usize_or("resolution", 400)?, p.positive_or("tol", 1e-11)?)?;
    let intervals = intervals_from_scan(&scan, p.positive_or("threshold", 1e-6)?);
    sink.table("scan", &scan.iter().map(|&(x, k)| row![x, k]).collect::<Vec<_>>())?;
    sink.table("intervals", &intervals.iter().map(|i| row![i.lo, i.hi, i.max_kappa, i.argmax]).collect::<Vec<_>>())
}

fn resonance_growth(p: &Params, sink: &mut Sink) -> Result<()> {
    let k_max = p.usize("k_max")?;
    let coef = ResonantCoefficient::geometric(p.f64("sigma")?, p.f64("q")?, k_max, Bump::new(p.f64_or("eps", 0.3)?)?)?;
    let rep = energy_growth_experiment(&coef, k_max, xi_range(p, 2.5, 3.7)?, p.usize_or("resolution", 200)?)?;
    let rows: Vec<Row> = rep.rows.iter().map(|g| row![g.k, g.xi, g.log_energy, g.interval_gain, g.lower_bound, g.gap_drift]).collect();
    sink.table("growth", &rows)?;
    sink.table("summary", &[row![rep.kappa, rep.xi_star, rep.c, rep.c_floored]])
}

fn diffusion(p: &Params, sink: &mut Sink) -> Result<()> {
    let base = DiffusionSetup::gaussian(p.usize_or("dim", 1)?);
    let setup = DiffusionSetup {
        k: p.usize("k")?,
        alpha: p.usize("alpha")?,
        u0: p.profile_or("u0", base.u0)?,
        u1: p.profile_or("u1", base.u1)?,
        xi_max: p.positive_or("xi_max", base.xi_max)?,
        panels: p.usize_or("panels", base.panels)?,
        ..base
    };
    let times = p.times_or("times", log_grid(10.0, 1e3, 7))?;
    let cmp = diffusion_comparison(&setup, &times)?;
    let rows: Vec<Row> = cmp.rows.iter().map(|d| row![d.t, d.difference, d.ref_u0, d.ref_u1, d.ratio]).collect();
    sink.table("rows", &rows)?;
    sink.table("summary", &[row![cmp.exponent]])
}

fn dissipative_system(p: &Params) -> Result<PartiallyDissipativeSystem> {
    match p.str("system")? {
        "classical" => Ok(PartiallyDissipativeSystem::classical()),
        "rotating" => Ok(PartiallyDissipativeSystem::rotating(p.f64_or("theta0", 0.5)?)),
        other => Err(invalid(format!("unknown system `{other}` (classical or rotating)"))),
    }
}

fn kalman_lyapunov(p: &Params, sink: &mut Sink) -> Result<()> {
    let sys = dissipative_system(p)?;
    let grid = LyapunovGrid {
        times: p.times_or("times", vec![1.0, 10.0, 100.0])?,
        xis: p.f64_list_or("xis", vec![0.05, 0.2, 1.0, 5.0])?.into_iter().map(|x| vec![x]).collect(),
        t0: p.positive_or("t0", 1.0)?,
        horizon: p.positive_or("horizon", 8.0)?,
        n_fit: p.usize_or("n_fit", 16)?,
        tol: p.positive_or("tol", 1e-10)?,
    };
    let kalman = grid
        .times
        .iter()
        .map(|&t| {
            let k = kalman_rank(&sys, t, &[1.0])?;
            Ok(row![t, k.rank, k.min_singular_value])
        })
        .collect::<Result<Vec<Row>>>()?;
    sink.table("kalman", &kalman)?;
    let rep = lyapunov_decay_verify(&sys, &p.f64_list_or("eps", vec![0.5])?, &grid)?;
    let samples: Vec<Row> = rep.samples.iter().map(|s| row![s.t, s.xi_abs, s.h_min, s.h_max, s.gamma_local]).collect();
    sink.table("samples", &samples)?;
    sink.table("fits", &rep.fits.iter().map(|f| row![f.xi_abs, f.gamma]).collect::<Vec<_>>())?;
    sink.table("summary", &[row![rep.h_min, rep.h_max, rep.gamma, rep.envelope_c, rep.violations]])
}

fn profile_compare(p: &Params, sink: &mut Sink) -> Result<()> {
    let sys = dissipative_system(p)?;
    let cfg = ProfileCompareConfig {
        t0: p.positive_or("t0", 10.0)?,
        times: p.times_or("times", log_grid(100.0, 1e4, 5))?,
        w_limit_time: p.positive_or("w_limit_time", 1e3)?,
        cutoff: p.positive_or("cutoff", 0.25)?,
        n_xi: p.usize_or("n_xi", 401)?,
        tol: p.positive_or("tol", 1e-10)?,
    };
    let u0 = |x: f64| CVec::from_vec(vec![r((-x * x).exp()), r(0.3 * x)]);
    let rep = diffusion_profile_compare(&sys, &u0, &cfg)?;
    let rows: Vec<Row> = rep.rows.iter().map(|q| row![q.t, q.difference, q.solution, q.normalized]).collect();
    sink.table("profile", &rows)?;
    sink.table("summary", &[row![rep.w2_cauchy, rep.t0_defect]])
}

fn surface(p: &Params) -> Result<LevelSurface> {
    const KEYS: [&str; 7] = ["name", "dim", "radius", "a", "w", "eps", "lobes"];
    let bad = || invalid("`surface` must be a surface name or an object with `name`");
    let v = p.raw("surface").ok_or_else(bad)?;
    let (name, obj) = match v {
        Value::String(s) => (s.as_str(), None),
        Value::Object(m) => {
            if let Some(k) = m.keys().find(|k| !KEYS.contains(&k.as_str())) {
                return Err(invalid(format!("unknown surface key `{k}`")));
            }
            (m.get("name").and_then(Value::as_str).ok_or_else(bad)?, Some(m))
        }
        _ => return Err(bad()),
    };
    let num = |k: &str, d: f64| -> Result<f64> {
        match obj.and_then(|m| m.get(k)) {
            None => Ok(d),
            Some(x) => x.as_f64().filter(|v| v.is_finite()).ok_or_else(|| invalid(format!("surface `{k}` must be a number"))),
        }
    };
    let dim = num("dim", 2.0)?;
    if dim != 2.0 && dim != 3.0 {
        return Err(invalid("surface `dim` must be 2 or 3"));
    }
    let n = dim as usize;
    let planar = |s: &str| if n == 2 { Ok(()) } else { Err(invalid(format!("surface `{s}` is planar (dim 2)"))) };
    Ok(match name {
        "sphere" => LevelSurface::sphere(n, num("radius", 1.0)?)?,
        "ellipse" => {
            planar(name)?;
            LevelSurface::ellipse(num("a", 2.0)?)?
        }
        "quartic" => LevelSurface::quartic(n)?,
        "blend" => LevelSurface::blend(n, num("w", 0.5)?)?,
        "lobed" => {
            planar(name)?;
            let lobes = num("lobes", 3.0)?;
            if lobes < 1.0 || lobes.fract() != 0.0 {
                return Err(invalid("surface `lobes` must be a positive integer"));
            }
            LevelSurface::lobed(num("eps", 0.2)?, lobes as u32)?
        }
        other => return Err(invalid(format!("unknown surface `{other}`"))),
    })
}

fn contact_options(p: &Params, n: usize) -> Result<ContactOptions> {
    let d = ContactOptions::default();
    Ok(ContactOptions {
        n_points: p.usize_or("n_points", if n == 3 { 1300 } else { d.n_points })?,
        n_directions: p.usize_or("n_directions", d.n_directions)?,
        radius_rel: p.positive_or("radius_rel", d.radius_rel)?,
        tol: p.positive_or("tol", d.tol)?,
    })
}

fn contact_index(p: &Params, sink: &mut Sink) -> Result<()> {
    let s = surface(p)?;
    let rep = contact_indices(&s, &contact_options(p, s.n)?)?;
    let rows: Vec<Row> = rep
        .points
        .iter()
        .map(|q| {
            let mut row = row![q.p[0], q.p[1], q.p.get(2).copied().unwrap_or(0.0), q.min_order, q.max_order];
            row.extend(q.kappa.iter().map(|&k| Cell::F(k)));
            row.push(Cell::F(q.hessian_max));
            row
        })
        .collect();
    let k0 = rep.kappa0_values.iter().find(|(g, _)| *g == rep.gamma0).map_or(f64::NAN, |v| v.1);
    sink.table("points", &rows)?;
    sink.table("summary", &[row![rep.gamma, rep.gamma0, rep.convex, rep.kappa(rep.gamma).unwrap_or(f64::NAN), k0]])
}

fn dispersive_fit(p: &Params, seed: u64, sink: &mut Sink) -> Result<()> {
    let s = surface(p)?;
    if s.n != 2 {
        return Err(invalid("dispersive-fit supports planar curves only (dim 2)"));
    }
    let (lo, hi) = (p.positive_or("amp_lo", 1.0)?, p.positive_or("amp_hi", 2.0)?);
    if hi <= lo {
        return Err(invalid("need amp_lo < amp_hi"));
    }
    let times = p.times_or("times", log_grid(20.0, 500.0, 10))?;
    let rep = contact_indices(&s, &ContactOptions::default())?;
    let predicted = -1.0 / if rep.convex { rep.gamma } else { rep.gamma0 } as f64;
    sink.table("contact", &[row![rep.gamma, rep.gamma0, rep.convex, predicted]])?;
    let n_rays = p.usize_or("n_rays", 2)?.max(1);
    let rays = rep.extremal_points.iter().take(n_rays).cloned().collect();
    let cfg = DispersiveConfig { times, rays, off_ray_points: p.usize_or("off_ray_points", 3)?, seed, rel_tol: p.positive_or("rel_tol", 1e-7)? };
    let (rows, fit) = dispersive_sup(&static_phase(&s), &OscAmplitude::radial_bump(lo, hi), &cfg)?;
    sink.table("rows", &rows.iter().map(|d| row![d.t, d.sup_ray, d.argmax_ray, d.off_ray]).collect::<Vec<_>>())?;
    sink.table("fit", &[row![fit.exponent, fit.band.0, fit.band.1, fit.n_used]])
}

fn constcoeff_amplitudes(p: &Params, sink: &mut Sink) -> Result<()> {
    let speeds = p.f64_list("speeds")?;
    let xi = p.f64("xi")?;
    let m = speeds.len();
    let lower = match p.raw("lower") {
        None => Vec::new(),
        Some(v) => {
            let bad = || invalid("`lower` must be a list of {\"r\", \"re\", \"im\"} objects");
            v.as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|t| {
                    let f = |k: &str| t.get(k).and_then(Value::as_f64).ok_or_else(bad);
                    let order = t.get("r").and_then(Value::as_u64).ok_or_else(bad)?;
                    Ok(LowerTerm { alpha: vec![0], r: order as u32, coeff: c(f("re")?, f("im").or(Ok::<f64, CliError>(0.0))?) })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut unit = vec![0.0; m];
    if m > 0 {
        unit[0] = 1.0;
    }
    let data: Vec<C64> = p.f64_list_or("data", unit)?.into_iter().map(r).collect();
    if data.len() != m {
        return Err(invalid(format!("`data` needs {m} entries, one per time derivative")));
    }
    let times = p.f64_list_or("times", (0..=10).map(f64::from).collect())?;
    let op = HyperbolicOperatorSpec::from_speeds_1d(&speeds, lower)?;
    let rs = char_roots(&op, &[xi])?;
    if rs.ill_conditioned {
        return Err(CliError::Numerical(format!("characteristic roots at xi = {xi} are ill-conditioned")));
    }
    sink.table("roots", &rs.roots.iter().enumerate().map(|(i, z)| row![i, z.re, z.im]).collect::<Vec<_>>())?;
    let mut amp_rows = Vec::new();
    for j in 0..m {
        for (k, a) in amplitudes(&rs, j, DataConvention::TimeDerivative)?.iter().enumerate() {
            amp_rows.push(row![j, k, a.re, a.im]);
        }
    }
    sink.table("amplitudes", &amp_rows)?;
    let sol = times
        .iter()
        .map(|&t| {
            let u = reconstruct(&rs, &data, t, DataConvention::TimeDerivative)?;
            Ok(row![t, u.re, u.im])
        })
        .collect::<Result<Vec<Row>>>()?;
    sink.table("solution", &sol)
}
