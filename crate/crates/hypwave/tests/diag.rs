use hypwave::diag::*;
use hypwave::linalg::{c, eye, from_real_rows, norm2, r, CMat, I};
use hypwave::phasespace::{symbol_class_fit, SymbolSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn b_l1(t: f64) -> f64 {
    0.5 * (1.0 + t).powi(-2)
}

fn speed(t: f64) -> f64 {
    2.0 + 0.5 * (1.0 + t).ln().sin()
}

fn dspeed(t: f64) -> f64 {
    0.5 * (1.0 + t).ln().cos() / (1.0 + t)
}

#[test]
fn wave_frame() {
    let sys = SystemSymbol::damped_wave(|_| 0.0);
    let f = eigen_frame(&sys, 1.0, 3.0).unwrap();
    assert!((f.lambdas[0] + 3.0).abs() < 1e-12 && (f.lambdas[1] - 3.0).abs() < 1e-12);
    let s = 1.0 / 2f64.sqrt();
    let expect = from_real_rows(&[&[s, s], &[-s, s]]);
    assert!(norm2(&(&f.m - expect)) < 1e-12);
    let sum = f.projections.iter().fold(CMat::zeros(2, 2), |a, p| a + p);
    assert!(norm2(&(sum - eye(2))) < 1e-9);
    for p in &f.projections {
        assert!(norm2(&(p * p - p)) < 1e-9);
    }
    assert!(matches!(eigen_frame(&sys, 1.0, 0.0), Err(DiagError::ZeroFrequency)));
}

#[test]
fn diagonal_input_identity_frame() {
    let p = from_real_rows(&[&[-1.0, 0.0, 0.0], &[0.0, 0.5, 0.0], &[0.0, 0.0, 2.0]]);
    let sys = SystemSymbol::constant(p, CMat::zeros(3, 3), 1.0);
    let f = eigen_frame(&sys, 0.0, 2.0).unwrap();
    assert!(norm2(&(&f.m - eye(3))) < 1e-12);
}

#[test]
fn random_hermitian_projections() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let g = CMat::from_fn(3, 3, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let h = (&g + g.adjoint()) * r(0.5) + hypwave::linalg::diag(&[r(-2.0), r(0.0), r(2.0)]);
        let sys = SystemSymbol::constant(h.clone(), CMat::zeros(3, 3), 0.05);
        let Ok(f) = eigen_frame(&sys, 0.0, 1.0) else { continue };
        let residual = norm2(&(&h * &f.m - &f.m * hypwave::linalg::diag(&f.lambdas.iter().map(|&l| r(l)).collect::<Vec<_>>())));
        assert!(residual <= 1e-9 * norm2(&h));
        for j in 0..3 {
            let mut prod = eye(3);
            for i in 0..3 {
                if i != j {
                    prod = prod * (&h - eye(3) * r(f.lambdas[i])) / r(f.lambdas[j] - f.lambdas[i]);
                }
            }
            assert!(norm2(&(prod - &f.projections[j])) < 1e-9);
            let v = f.m.column(j);
            assert!(norm2(&(v * v.adjoint() - &f.projections[j])) < 1e-9);
        }
        assert!(norm2(&(f.h.clone() - f.h.adjoint())) < 1e-12);
    }
}

#[test]
fn step0_examples() {
    let h = Hierarchy::new(SystemSymbol::damped_wave(b_l1));
    for &(t, xi) in &[(0.5, 2.0), (10.0, 0.3)] {
        let (_, r0) = h.step0(t, xi, None).unwrap();
        for j in 0..2 {
            assert!((r0[(j, j)] - I * b_l1(t)).norm() < 1e-12);
        }
    }
    let h = Hierarchy::new(SystemSymbol::variable_speed(speed, dspeed, 1.5));
    for &t in &[0.0, 1.3, 7.0] {
        let lv = h.level(t, 2.0, 1).unwrap();
        let expect = -I * dspeed(t) / (2.0 * speed(t));
        for j in 0..2 {
            assert!((lv.f_terms[0][(j, j)] - expect).norm() < 1e-12);
        }
    }
    let sym = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let h = Hierarchy::new(SystemSymbol::constant(sym, CMat::zeros(2, 2), 1.0));
    let lv = h.level(2.0, 1.5, 3).unwrap();
    for n in &lv.n_terms {
        assert!(norm2(n) < 1e-12);
    }
    for f in &lv.f_terms {
        assert!(norm2(f) < 1e-12);
    }
}

#[test]
fn diagonal_r0_gives_zero_n1() {
    let p = from_real_rows(&[&[-1.0, 0.0], &[0.0, 1.0]]);
    let lower = hypwave::linalg::diag(&[c(0.0, 0.3), r(0.2)]);
    let h = Hierarchy::new(SystemSymbol::constant(p, lower, 1.0));
    let lv = h.level(1.0, 2.0, 1).unwrap();
    assert!(norm2(&lv.n_terms[0]) < 1e-14);
}

#[test]
fn conjugation_identity_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for sys in [SystemSymbol::damped_wave(b_l1), SystemSymbol::damped_wave(|t| 0.4 / (1.0 + t)), SystemSymbol::variable_speed(speed, dspeed, 1.5)] {
        let h = Hierarchy::new(sys);
        let c2 = h.certify_zone(2, 1.0, &[0.0, 1.0, 10.0, 100.0], &[1.0, 2.0, 10.0]).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..60 {
            let t = 10f64.powf(3.0 * rng.random::<f64>()) - 1.0;
            let s = 10f64.powf(2.0 * rng.random::<f64>());
            let xi = s * c2 / (1.0 + t);
            let res = h.conjugation_residual(t, xi, 2).unwrap();
            worst = worst.max(res / (1.0 + xi));
            let lv = h.level(t, xi, 2).unwrap();
            assert!(norm2(&(lv.n_k() - eye(2))) <= 0.5, "c2={c2} t={t} xi={xi} {}", norm2(&(lv.n_k() - eye(2))));
        }
        assert!(worst <= 1e-6, "worst {worst:e}");
    }
}

#[test]
fn n1_symbol_class() {
    let h = Hierarchy::new(SystemSymbol::variable_speed(speed, dspeed, 1.5));
    let ev = move |t: f64, x: &[f64]| {
        let lv = h.level(t, x[0].abs(), 1).unwrap();
        lv.n_terms[0].clone()
    };
    let mut s = SymbolSample::new(ev, 1, (0.0, 200.0), (0.02, 20.0));
    s.n_t = 12;
    s.n_xi = 12;
    s.zone_c = 2.0;
    let rep = symbol_class_fit(&s, -1.0, 1.0, 1, 1).unwrap();
    assert!(rep.all_finite() && rep.entries.iter().all(|e| e.constant < 10.0), "{:?}", rep.entries);
}

#[test]
fn gec_dichotomy() {
    let ts: Vec<f64> = (0..=30).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
    let xis = [0.05, 1.0, 10.0];
    let l1 = |t: f64, _xi: f64| CMat::from_diagonal_element(2, 2, I * b_l1(t));
    let rep = gec_test(&l1, 1.0, &ts, &xis).unwrap();
    assert!(rep.sup_value <= 0.5 + 1e-9 && rep.sup_value > 0.3);
    let mu = 0.4;
    let sid = move |t: f64, _xi: f64| CMat::from_diagonal_element(2, 2, I * (mu / (1.0 + t)));
    let rep = gec_test(&sid, 1.0, &ts, &xis).unwrap();
    let tail = &rep.growth_curve[10..];
    let slope = (tail.last().unwrap().1 - tail[0].1) / (tail.last().unwrap().0.ln() - tail[0].0.ln());
    assert!((slope - mu).abs() <= 0.1 * mu, "slope {slope}");
    let real = |_t: f64, _xi: f64| CMat::from_diagonal_element(2, 2, r(3.0));
    assert_eq!(gec_test(&real, 1.0, &ts, &xis).unwrap().sup_value, 0.0);
}

#[test]
fn gap_violation() {
    let sys = SystemSymbol::constant(from_real_rows(&[&[0.0, 0.0], &[0.0, 0.1]]), CMat::zeros(2, 2), 1.0);
    assert!(matches!(eigen_frame(&sys, 0.0, 1.0), Err(DiagError::GapViolation { .. })));
    assert!(SystemSymbol::damped_wave(b_l1).validate_on(&[(0.0, 1.0), (5.0, 0.2)]).is_ok());
}
