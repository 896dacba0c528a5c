use hypwave::diag::{Hierarchy, HierarchyLevel, SystemSymbol};
use hypwave::linalg::{c, eye, from_real_rows, norm2, r, CMat, C64, I};
use hypwave::models::{exact_multiplier, hf_scattering_profile, FourierState, ModelKind, ModelSpec};
use hypwave::propagate::*;
use hypwave::quad::{integrate_complex, QuadOptions};
use hypwave::specfun::SpecFunAccuracy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn speed(t: f64) -> f64 {
    2.0 + 0.5 * (1.0 + t).ln().sin()
}
fn dspeed(t: f64) -> f64 {
    0.5 * (1.0 + t).ln().cos() / (1.0 + t)
}

fn full(sys: &SystemSymbol) -> impl Fn(f64, f64) -> CMat + '_ {
    move |t, xi| (sys.full)(t, xi)
}

#[test]
fn constant_diagonal_generator() {
    let g = |_t: f64, _xi: f64| hypwave::linalg::diag(&[r(1.5), r(-0.7)]);
    let e = integrate_fundamental(&g, 3.0, 0.5, 1.0, 1e-12).unwrap();
    assert!((e.value[(0, 0)] - (I * 1.5 * 2.5).exp()).norm() < 1e-10);
    assert!((e.value[(1, 1)] - (I * -0.7 * 2.5).exp()).norm() < 1e-10);
    let d = diag_exponential(&g, 3.0, 0.5, 1.0).unwrap();
    assert!(norm2(&(d.value - e.value)) < 1e-10);
}

#[test]
fn sid_hill_system_matches_bessel() {
    let mu = 1.0;
    let sys = SystemSymbol::damped_wave(move |t| mu / t);
    let xi = 2.0;
    let e = integrate_fundamental(&full(&sys), 5.0, 1.0, xi, 1e-12).unwrap().value;
    let m = ModelSpec::new(ModelKind::ScaleInvariantDissipation { mu }, 1).unwrap();
    let mult = exact_multiplier(&m, 5.0, xi, &SpecFunAccuracy::default()).unwrap();
    let tr = hypwave::linalg::diag(&[r(xi), -I]);
    let tinv = hypwave::linalg::diag(&[r(1.0 / xi), I]);
    assert!(norm2(&(tr * mult * tinv - e)) < 1e-7);
}

#[test]
fn liouville_and_cocycle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let wave = SystemSymbol::damped_wave(|_| 0.0);
    let e = integrate_fundamental(&full(&wave), 17.0, 0.0, 3.0, 1e-12).unwrap();
    assert!((e.value.determinant() - r(1.0)).norm() <= 1e-8);
    for sys in [SystemSymbol::damped_wave(|t| 0.3 / (1.0 + t)), SystemSymbol::variable_speed(speed, dspeed, 1.5)] {
        for _ in 0..8 {
            let mut ts: Vec<f64> = (0..3).map(|_| 20.0 * rng.random::<f64>()).collect();
            let xi = 0.2 + 3.0 * rng.random::<f64>();
            let (s, rr, t) = (ts[0], ts[1], ts[2]);
            let f = full(&sys);
            let ets = integrate_fundamental(&f, t, s, xi, 1e-12).unwrap().value;
            let etr = integrate_fundamental(&f, t, rr, xi, 1e-12).unwrap().value;
            let ers = integrate_fundamental(&f, rr, s, xi, 1e-12).unwrap().value;
            assert!(norm2(&(&etr * &ers - &ets)) <= 1e-7 * (1.0 + norm2(&ets)));
            let tr = integrate_complex(|tau: f64| f(tau, xi).trace(), s, t, &QuadOptions::with_rel_tol(1e-12)).unwrap().value;
            let det = ets.determinant();
            assert!((det - (I * tr).exp()).norm() <= 1e-8 * det.norm());
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
    }
}

#[test]
fn diag_exponential_examples() {
    let free = |_t: f64, xi: f64| hypwave::linalg::diag(&[r(-xi), r(xi)]);
    let e = diag_exponential(&free, 9.0, 2.0, 1.3).unwrap();
    assert!(norm2(&(e.value.adjoint() * &e.value - eye(2))) < 1e-12);
    let h = Hierarchy::new(SystemSymbol::variable_speed(speed, dspeed, 1.5));
    let lvl = HierarchyLevel { k: 1, zone_c: 1.0, hierarchy: h };
    let (gen, _) = diagonalised(&lvl);
    let e = diag_exponential(&gen, 12.0, 1.0, 2.0).unwrap();
    for j in 0..2 {
        assert!((e.value[(j, j)].norm() - (speed(12.0) / speed(1.0)).sqrt()).abs() < 1e-8);
    }
    let b = |t: f64| 0.5 / (1.0 + t);
    let lvl = HierarchyLevel { k: 1, zone_c: 1.0, hierarchy: Hierarchy::new(SystemSymbol::damped_wave(b)) };
    let (gen, _) = diagonalised(&lvl);
    let e = diag_exponential(&gen, 12.0, 1.0, 2.0).unwrap();
    let expect = (-0.5 * (13.0f64 / 2.0).ln()).exp();
    for j in 0..2 {
        assert!((e.value[(j, j)].norm() - expect).abs() < 1e-8);
    }
}

#[test]
fn peano_baker_trivial_and_tail() {
    let zero = |_t: f64, _xi: f64| CMat::zeros(2, 2);
    let gen = |_t: f64, xi: f64| hypwave::linalg::diag(&[r(-xi), r(xi)]);
    let q = peano_baker(&zero, &gen, 5.0, 1.0, 1.0, 3, 1e-9).unwrap();
    assert!(norm2(&(q.q.value - eye(2))) == 0.0);
    let rk = |t: f64, _xi: f64| from_real_rows(&[&[0.0, 1.0], &[0.5, 0.0]]) * r(0.3 / (1.0 + t).powi(2)) + CMat::from_diagonal_element(2, 2, c(0.0, 0.1 / (1.0 + t).powi(2)));
    let q1 = peano_baker(&rk, &gen, 6.0, 1.0, 1.0, 1, 1.0).unwrap();
    let q2 = peano_baker(&rk, &gen, 6.0, 1.0, 1.0, 2, 1.0).unwrap();
    let big_r = q2.r_integral;
    assert!(norm2(&(&q2.q.value - &q1.q.value)) <= big_r * big_r / 2.0);
    assert!(norm2(&q2.q.value) <= big_r.exp());
    // literal nested quadrature for levels 1 and 2
    let phase = |tau: f64, j: usize| (I * gen(tau, 1.0)[(j, j)] * (tau - 1.0)).exp();
    let calr = |tau: f64| CMat::from_fn(2, 2, |i, j| rk(tau, 1.0)[(i, j)] * phase(tau, j) / phase(tau, i));
    let opts = QuadOptions::with_rel_tol(1e-11);
    for i in 0..2 {
        for j in 0..2 {
            let l1 = integrate_complex(|tau: f64| I * calr(tau)[(i, j)], 1.0, 6.0, &opts).unwrap().value;
            let inner = |t1: f64| {
                let v: C64 = (0..2).map(|m| calr(t1)[(i, m)] * integrate_complex(|t2: f64| calr(t2)[(m, j)], 1.0, t1, &opts).unwrap().value).sum();
                -v
            };
            let l2 = integrate_complex(inner, 1.0, 6.0, &QuadOptions::with_rel_tol(1e-9)).unwrap().value;
            assert!((q2.partial_sums[1][(i, j)] - eye(2)[(i, j)] - l1).norm() < 1e-8);
            assert!((q2.partial_sums[2][(i, j)] - q2.partial_sums[1][(i, j)] - l2).norm() < 1e-8);
        }
    }
    assert!(matches!(peano_baker(&rk, &gen, 6.0, 1.0, 1.0, 1, 1e-12), Err(PropagateError::TailTooLarge { .. })));
}

#[test]
fn peano_baker_matches_transformed_system() {
    let h = Hierarchy::new(SystemSymbol::damped_wave(|t| 0.5 / (1.0 + t)));
    let c2 = h.certify_zone(2, 1.0, &[0.0, 2.0, 20.0], &[1.0, 3.0]).unwrap();
    let lvl = HierarchyLevel { k: 2, zone_c: c2, hierarchy: h };
    let (gen, rem) = diagonalised(&lvl);
    let pb = peano_baker(&rem, &gen, 20.0, 2.0, 1.0, 8, 1e-8).unwrap();
    let direct = integrate_fundamental(&transformed_generator(&lvl), 20.0, 2.0, 1.0, 1e-11).unwrap();
    let diff = norm2(&(&pb.e_k * &pb.q.value - direct.value));
    assert!(diff <= 1e-6, "{diff:e}");
    let qd = pb.q.value.determinant();
    assert!(qd.norm() >= (-2.0 * pb.r_integral).exp());
}

#[test]
fn amplitudes_constant_system() {
    let p = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let lvl = HierarchyLevel { k: 1, zone_c: 1.0, hierarchy: Hierarchy::new(SystemSymbol::constant(p, CMat::zeros(2, 2), 1.0)) };
    let rep = extract_amplitudes(&lvl, &[1.0, 5.0, 50.0], 2.0, 0.0, 1e-11).unwrap();
    for row in &rep.b {
        for (b, a) in row.iter().zip(&rep.profile_limit) {
            assert!(norm2(&(b - a)) < 1e-8);
        }
    }
    let proj = rep.profile_limit[0].clone();
    assert!(norm2(&(&proj * &proj - &proj)) < 1e-8);
    let rep2 = extract_amplitudes(&lvl, &[1.0, 5.0, 50.0], 6.0, 0.0, 1e-11).unwrap();
    for (a, b) in rep.phases.iter().zip(&rep2.phases) {
        for j in 0..2 {
            assert!((b[j] - 3.0 * a[j]).abs() <= 1e-8 * (1.0 + b[j].abs()));
        }
    }
    assert!(matches!(extract_amplitudes(&lvl, &[0.0], 0.1, 0.0, 1e-9), Err(PropagateError::ZoneViolation { .. })));
}

#[test]
fn amplitudes_recover_scattering_profile() {
    let mu = 0.3;
    let xi = 3.0;
    let lvl = HierarchyLevel { k: 1, zone_c: 2.0, hierarchy: Hierarchy::new(SystemSymbol::damped_wave(move |t| mu / t)) };
    let ts = [10.0, 100.0, 1000.0];
    let rep = extract_amplitudes(&lvl, &ts, xi, 1.0, 1e-11).unwrap();
    let data = FourierState { grid: vec![xi], u_hat: vec![r(1.0)], ut_hat: vec![r(0.4)], time: 1.0 };
    let (w0, w1) = hf_scattering_profile(mu, &data, 0.5, &SpecFunAccuracy::default()).unwrap();
    let v0 = CMat::from_column_slice(2, 1, &[r(xi), -I * 0.4]);
    let expect = [(w0[0] - w1[0] / (I * xi)) * 0.5, (w0[0] + w1[0] / (I * xi)) * 0.5];
    let last = rep.b.len() - 1;
    for j in 0..2 {
        let got = (&rep.b[last][j] * &v0)[(0, 0)] * 1000f64.powf(mu) / xi;
        assert!((got - expect[j]).norm() < 1e-3, "j={j}: {got} vs {}", expect[j]);
    }
    for (qd, ri) in rep.q_det.iter().zip(&rep.r_integral) {
        assert!(qd.norm() >= (-2.0 * ri).exp());
    }
}

#[test]
fn low_regularity_profile_converges() {
    let a = |t: f64| 2.0 + (1.0 + t).powi(-2) * t.sin();
    let da = |t: f64| t.cos() / (1.0 + t).powi(2) - 2.0 * t.sin() / (1.0 + t).powi(3);
    let lvl = HierarchyLevel { k: 0, zone_c: 1.0, hierarchy: Hierarchy::new(SystemSymbol::variable_speed(a, da, 1.5)) };
    let ts: Vec<f64> = (0..=8).map(|i| 5.0 * 2f64.powi(i)).collect();
    let rep = extract_amplitudes(&lvl, &ts, 1.5, 0.0, 1e-11).unwrap();
    let cauchy: Vec<f64> = rep.b.windows(2).map(|w| norm2(&(&w[1][0] - &w[0][0]))).collect();
    for k in 0..cauchy.len() - 2 {
        assert!(cauchy[k + 2] < cauchy[k], "{cauchy:?}");
    }
}
