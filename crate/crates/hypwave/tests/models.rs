use hypwave::linalg::{r, CMat, C64};
use hypwave::models::*;
use hypwave::specfun::SpecFunAccuracy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn acc() -> SpecFunAccuracy<f64> {
    SpecFunAccuracy::default()
}

/// Independent RK4 oracle with a fixed fine step for `u'' = f(t, u, u')`.
fn rk4(f: impl Fn(f64, C64, C64) -> C64, t0: f64, t1: f64, y0: (C64, C64), steps: usize) -> (C64, C64) {
    let h = (t1 - t0) / steps as f64;
    let (mut u, mut v) = y0;
    let mut t = t0;
    for _ in 0..steps {
        let (k1u, k1v) = (v, f(t, u, v));
        let (k2u, k2v) = (v + k1v * (h / 2.0), f(t + h / 2.0, u + k1u * (h / 2.0), v + k1v * (h / 2.0)));
        let (k3u, k3v) = (v + k2v * (h / 2.0), f(t + h / 2.0, u + k2u * (h / 2.0), v + k2v * (h / 2.0)));
        let (k4u, k4v) = (v + k3v * h, f(t + h, u + k3u * h, v + k3v * h));
        u += (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        t += h;
    }
    (u, v)
}

fn oracle_matrix(f: impl Fn(f64, C64, C64) -> C64 + Copy, t0: f64, t1: f64, steps: usize) -> CMat {
    let a = rk4(f, t0, t1, (r(1.0), r(0.0)), steps);
    let b = rk4(f, t0, t1, (r(0.0), r(1.0)), steps);
    CMat::from_row_slice(2, 2, &[a.0, b.0, a.1, b.1])
}

fn maxdiff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn free_wave_identity_and_limits() {
    let m = ModelSpec::new(ModelKind::FreeWave, 1).unwrap();
    assert!(maxdiff(&exact_multiplier(&m, 0.0, 2.0, &acc()).unwrap(), &CMat::identity(2, 2)) == 0.0);
    let z = exact_multiplier(&m, 3.0, 0.0, &acc()).unwrap();
    assert_eq!(z[(0, 1)], r(3.0));
}

#[test]
fn damped_wave_closed_form() {
    let m = ModelSpec::new(ModelKind::DampedWave, 1).unwrap();
    let e = exact_multiplier(&m, 2.0, 1.0, &acc()).unwrap();
    let l = 3f64.sqrt() / 2.0;
    let ex = (-1.0f64).exp();
    let (co, s) = ((2.0 * l).cos(), (2.0 * l).sin() / l);
    assert!((e[(0, 0)] - r(ex * (co + s / 2.0))).norm() < 1e-14);
    assert!((e[(0, 1)] - r(ex * s)).norm() < 1e-14);
    assert!((e[(1, 0)] - r(-ex * s)).norm() < 1e-14);
    assert!((e[(1, 1)] - r(ex * (co - s / 2.0))).norm() < 1e-14);
    // uniform stability and agreement with the ODE oracle across regimes
    for &xi in &[0.0, 0.1, 0.49, 0.5, 0.51, 3.0] {
        for &t in &[0.5, 5.0, 40.0] {
            let ex = exact_multiplier(&m, t, xi, &acc()).unwrap();
            let or = oracle_matrix(|_, u, v| -u * (xi * xi) - v, 0.0, t, 20_000);
            assert!(maxdiff(&ex, &or) < 1e-9, "xi={xi} t={t}");
            assert!(ex.iter().all(|z| z.norm() < 3.0));
        }
    }
    let far = exact_multiplier(&m, 1e5, 1e-3, &acc()).unwrap();
    assert!(far.iter().all(|z| z.is_finite()));
}

#[test]
fn sid_mu_zero_is_free_wave() {
    let sid = ModelSpec::new(ModelKind::ScaleInvariantDissipation { mu: 0.0 }, 1).unwrap();
    for &t in &[1.5, 3.0] {
        for &xi in &[0.5, 2.0] {
            let a = exact_multiplier(&sid, t, xi, &acc()).unwrap();
            let (s, co) = ((t - 1.0) * xi).sin_cos();
            let b = CMat::from_row_slice(2, 2, &[r(co), r(s / xi), r(-xi * s), r(co)]);
            assert!(maxdiff(&a, &b) < 1e-9);
        }
    }
}

#[test]
fn sid_matches_ode_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &mu in &[0.0, 0.3, 0.5, 1.0, 1.5] {
        let m = ModelSpec::new(ModelKind::ScaleInvariantDissipation { mu }, 1).unwrap();
        for _ in 0..12 {
            let t = 1.0 + 19.0 * rng.random::<f64>();
            let xi = 0.1 + 9.9 * rng.random::<f64>();
            let a = exact_multiplier(&m, t, xi, &acc()).unwrap();
            let steps = (400.0 * (t - 1.0) * (1.0 + xi)) as usize + 200;
            let b = oracle_matrix(move |tt, u, v| -u * (xi * xi) - v * (2.0 * mu / tt), 1.0, t, steps);
            let scale = b.iter().map(|z| z.norm()).fold(1.0, f64::max);
            assert!(maxdiff(&a, &b) < 1e-7 * scale, "mu={mu} t={t} xi={xi}: {}", maxdiff(&a, &b));
        }
        let z = exact_multiplier(&m, 4.0, 0.0, &acc()).unwrap();
        let b = oracle_matrix(move |tt, _, v| -v * (2.0 * mu / tt), 1.0, 4.0, 4000);
        assert!(maxdiff(&z, &b) < 1e-9);
    }
}

#[test]
fn mass_model_matches_ode_oracle() {
    for &kappa in &[0.0, 0.5, 1.0, 2.0] {
        let m = ModelSpec::new(ModelKind::ScaleInvariantMass { kappa }, 1).unwrap();
        for &(t, xi) in &[(2.0, 0.3), (5.0, 1.0), (12.0, 4.0), (3.0, 0.0)] {
            let a = exact_multiplier(&m, t, xi, &acc()).unwrap();
            let steps = (400.0 * (t - 1.0) * (1.0 + xi)) as usize + 400;
            let b = oracle_matrix(move |tt, u, _| -u * (xi * xi + kappa * kappa / (4.0 * tt * tt)), 1.0, t, steps);
            let scale = b.iter().map(|z| z.norm()).fold(1.0, f64::max);
            assert!(maxdiff(&a, &b) < 1e-7 * scale, "kappa={kappa} t={t} xi={xi}: {}", maxdiff(&a, &b));
        }
    }
}

#[test]
fn mass_model_oscillates_boundedly_for_large_kappa() {
    let m = ModelSpec::new(ModelKind::ScaleInvariantMass { kappa: 2.0 }, 1).unwrap();
    let mx = (0..60)
        .map(|i| exact_multiplier(&m, 1.0 + 1.2f64.powi(i), 0.0, &acc()).unwrap()[(0, 0)].norm() / (1.0 + 1.2f64.powi(i)).sqrt())
        .fold(0.0, f64::max);
    assert!(mx < 3.0);
}

fn gaussian_state(n: usize) -> FourierState {
    FourierState::from_profiles(log_grid(1e-3, 20.0, 600), Profile::Gaussian { width: 1.0 }, Profile::Gaussian { width: 0.5 }, 0.0).unwrap()
}

#[test]
fn energy_conservation_and_dissipation() {
    for kind in [ModelKind::FreeWave, ModelKind::KleinGordon] {
        let m = ModelSpec::new(kind, 2).unwrap();
        let s0 = gaussian_state(2);
        let e0 = energy(&m, &s0);
        for &t in &[1.0, 7.5, 50.0] {
            let s = evolve(&m, &s0, t, &acc()).unwrap();
            assert!((energy(&m, &s) - e0).abs() <= 1e-10 * e0);
            // a priori bound ‖û(t)‖ ≤ ‖û₀‖ + t‖û₁‖ pointwise
            if matches!(m.kind, ModelKind::FreeWave) {
                for i in 0..s.grid.len() {
                    assert!(s.u_hat[i].norm() <= s0.u_hat[i].norm() + t * s0.ut_hat[i].norm() + 1e-14);
                }
            }
        }
    }
    let m = ModelSpec::new(ModelKind::DampedWave, 1).unwrap();
    let s0 = gaussian_state(1);
    let mut prev = energy(&m, &s0);
    for i in 1..40 {
        let e = energy(&m, &evolve(&m, &s0, 0.25 * i as f64, &acc()).unwrap());
        assert!(e <= prev * (1.0 + 1e-12));
        prev = e;
    }
    assert_eq!(energy(&m, &FourierState::from_profiles(log_grid(0.1, 1.0, 8), Profile::Zero, Profile::Zero, 0.0).unwrap()), 0.0);
}

#[test]
fn round_trip_and_heat() {
    let m = ModelSpec::new(ModelKind::FreeWave, 1).unwrap();
    let s0 = gaussian_state(1);
    let s1 = evolve(&m, &s0, 3.7, &acc()).unwrap();
    let back = evolve(&m, &s1, 0.0, &acc()).unwrap();
    for i in 0..s0.grid.len() {
        assert!((back.u_hat[i] - s0.u_hat[i]).norm() < 1e-10);
    }
    let h = ModelSpec::new(ModelKind::Heat, 1).unwrap();
    let s = evolve(&h, &s0, 2.0, &acc()).unwrap();
    for i in 0..s0.grid.len() {
        let x = s0.grid[i];
        assert!((s.u_hat[i] - (s0.u_hat[i] + s0.ut_hat[i]) * (-2.0 * x * x).exp()).norm() < 1e-15);
    }
}

#[test]
fn variable_speed_uses_ode() {
    let a = TimeFn::new("2+sin", |t: f64| 2.0 + t.sin() * 0.5);
    let m = ModelSpec::new(ModelKind::VariableSpeed(a), 1).unwrap();
    let e = exact_multiplier(&m, 4.0, 1.3, &acc()).unwrap();
    let b = oracle_matrix(|t, u, _| -u * ((2.0 + 0.5 * t.sin()).powi(2) * 1.69), 0.0, 4.0, 20_000);
    assert!(maxdiff(&e, &b) < 1e-8);
    assert!(ModelSpec::new(ModelKind::VariableSpeed(TimeFn::constant(-1.0)), 1).is_err());
    assert!(ModelSpec::new(ModelKind::ScaleInvariantDissipation { mu: -0.1 }, 1).is_err());
}

fn fit_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn scattering_profile() {
    let grid = lin_grid(1.0, 4.0, 301);
    let data = FourierState::from_profiles(grid.clone(), Profile::Annulus { lo: 1.0, hi: 4.0 }, Profile::Zero, 1.0).unwrap();
    // μ = 0: w = u
    let (w0, w1) = hf_scattering_profile(0.0, &data, 0.5, &acc()).unwrap();
    for i in 0..grid.len() {
        assert!((w0[i] - data.u_hat[i]).norm() < 1e-10 && (w1[i] - data.ut_hat[i]).norm() < 1e-10);
    }
    // linearity
    let mut d2 = data.clone();
    d2.u_hat.iter_mut().for_each(|z| *z *= 2.5);
    let (v0, _) = hf_scattering_profile(0.3, &d2, 0.5, &acc()).unwrap();
    let (u0, _) = hf_scattering_profile(0.3, &data, 0.5, &acc()).unwrap();
    for i in 0..grid.len() {
        assert!((v0[i] - u0[i] * 2.5).norm() < 1e-12 * (1.0 + v0[i].norm()));
    }
    // defect ‖t^μ u − w‖ decays like 1/t
    let mu = 0.3;
    let sid = ModelSpec::new(ModelKind::ScaleInvariantDissipation { mu }, 1).unwrap();
    let fw = ModelSpec::new(ModelKind::FreeWave, 1).unwrap();
    let (w0, w1) = hf_scattering_profile(mu, &data, 0.5, &acc()).unwrap();
    let ts = [10.0, 20.0, 40.0, 80.0];
    let defects: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let u = evolve(&sid, &data, t, &acc()).unwrap();
            let diff: Vec<C64> = (0..grid.len())
                .map(|i| {
                    let fm = exact_multiplier(&fw, t - 1.0, grid[i], &acc()).unwrap();
                    let w = fm[(0, 0)] * w0[i] + fm[(0, 1)] * w1[i];
                    u.u_hat[i] * t.powf(mu) - w
                })
                .collect();
            l2_norm(&grid, &diff, 1)
        })
        .collect();
    let slope = fit_slope(&ts, &defects);
    assert!((slope + 1.0).abs() <= 0.15, "slope {slope}");
    let bad = FourierState::from_profiles(lin_grid(0.1, 4.0, 50), Profile::Gaussian { width: 1.0 }, Profile::Zero, 1.0).unwrap();
    assert!(matches!(hf_scattering_profile(0.3, &bad, 0.5, &acc()), Err(ModelError::SupportError(_))));
}

#[test]
fn sid_high_frequency_energy_rate() {
    for &mu in &[0.3, 0.7] {
        let sid = ModelSpec::new(ModelKind::ScaleInvariantDissipation { mu }, 1).unwrap();
        let data = FourierState::from_profiles(lin_grid(1.0, 4.0, 201), Profile::Annulus { lo: 1.0, hi: 4.0 }, Profile::Zero, 1.0).unwrap();
        let ts: Vec<f64> = (0..9).map(|i| 10.0 * 10f64.powf(i as f64 / 4.0)).collect();
        let es: Vec<f64> = ts.iter().map(|&t| energy(&sid, &evolve(&sid, &data, t, &acc()).unwrap())).collect();
        let slope = fit_slope(&ts, &es);
        assert!((slope + 2.0 * mu).abs() < 0.1, "mu={mu} slope {slope}");
    }
}

#[test]
fn matsumura_rate() {
    let m = ModelSpec::new(ModelKind::DampedWave, 1).unwrap();
    let data = FourierState::from_profiles(log_grid(1e-5, 30.0, 1500), Profile::Gaussian { width: 1.0 }, Profile::Gaussian { width: 1.0 }, 0.0).unwrap();
    let ts: Vec<f64> = (0..9).map(|i| 10.0 * 10f64.powf(i as f64 / 4.0)).collect();
    let es: Vec<f64> = ts.iter().map(|&t| energy(&m, &evolve(&m, &data, t, &acc()).unwrap())).collect();
    let tp: Vec<f64> = ts.iter().map(|t| 1.0 + t).collect();
    let slope = fit_slope(&tp, &es);
    assert!((slope + 1.5).abs() < 0.15, "slope {slope}");
}
