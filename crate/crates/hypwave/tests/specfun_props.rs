use hypwave::specfun::*;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use std::f64::consts::PI;

fn acc() -> SpecFunAccuracy<f64> {
    SpecFunAccuracy::default()
}

fn o(v: f64) -> BesselOrder<f64> {
    BesselOrder::new(v)
}

fn wronskian(nu: f64, tau: f64) -> f64 {
    let a = acc();
    bessel_j(o(nu), tau, &a).unwrap() * bessel_y_prime(o(nu), tau, &a).unwrap()
        - bessel_j_prime(o(nu), tau, &a).unwrap() * bessel_y(o(nu), tau, &a).unwrap()
}

/// Brute-force power series evaluated with 200 terms.
fn j_series_oracle(nu: f64, x: f64) -> f64 {
    let mut term = (x / 2.0).powf(nu) / gamma(nu + 1.0);
    let mut s = term;
    for k in 0..200 {
        let k = k as f64;
        term *= -(x * x / 4.0) / ((k + 1.0) * (nu + k + 1.0));
        s += term;
    }
    s
}

#[test]
fn wronskian_grid() {
    for &nu in &[0.0, 0.25, 0.5, 1.0] {
        for i in 0..200 {
            let tau = 0.1 * (500.0f64).powf(i as f64 / 199.0);
            let w = wronskian(nu, tau);
            let exact = 2.0 / (PI * tau);
            assert!((w - exact).abs() <= 1e-9 * exact, "nu={nu} tau={tau}: {w} vs {exact}");
        }
    }
}

#[test]
fn trivial_values() {
    let a = acc();
    assert_eq!(bessel_j(o(0.0), 0.0, &a).unwrap(), 1.0);
    for &x in &[0.5, 1.0, 5.0] {
        let exact = (2.0 / (PI * x)).sqrt() * x.sin();
        assert!((bessel_j(o(0.5), x, &a).unwrap() - exact).abs() < 1e-10);
    }
    let v = bessel_j(o(1.0 / 3.0), 10.0, &a).unwrap();
    assert!((v - j_series_oracle(1.0 / 3.0, 10.0)).abs() < 1e-10);
    let h = hankel(o(0.25), 4.0, HankelKind::Plus, &a).unwrap() + hankel(o(0.25), 4.0, HankelKind::Minus, &a).unwrap();
    assert!((h - C::new(2.0 * bessel_j(o(0.25), 4.0, &a).unwrap(), 0.0)).norm() < 1e-10);
    let h0 = hankel(o(0.0), 100.0, HankelKind::Plus, &a).unwrap();
    assert!((h0.norm() * 10.0 - (2.0 / PI).sqrt()).abs() < 1e-3);
    // H^+_{1/2}(x) = -i sqrt(2/(πx)) e^{ix}
    let h = hankel(o(0.5), 2.0, HankelKind::Plus, &a).unwrap();
    let exact = C::new(0.0, -1.0) * C::new(0.0, 2.0).exp() * (2.0 / (2.0 * PI)).sqrt();
    assert!((h - exact).norm() < 1e-10);
    let z = C::new(1.0, 1.0);
    assert!((kummer_phi(0.7, 0.7, z, &a).unwrap() - z.exp()).norm() < 1e-10);
    assert_eq!(kummer_phi(0.3, 1.2, C::new(0.0, 0.0), &a).unwrap(), C::new(1.0, 0.0));
    let p = tricomi_psi(0.6, 1.3, C::new(50.0, 0.0), &a).unwrap() * 50f64.powf(0.6);
    assert!((p - C::new(1.0, 0.0)).norm() < 1e-2);
}

#[test]
fn y0_log_part_bounded() {
    let a = acc();
    for &t in &[1e-2, 1e-4, 1e-6, 1e-8] {
        let y = bessel_y(o(0.0), t, &a).unwrap();
        assert!((y - 2.0 / PI * t.ln()).abs() < 1.0);
        assert!(bessel_y_regular_part(o(0.0), t, &a).unwrap().abs() < 1.0);
    }
}

#[test]
fn hankel_envelope_trend() {
    let a = acc();
    let dev = |t: f64| (t.sqrt() * hankel(o(0.3), t, HankelKind::Plus, &a).unwrap().norm() - (2.0 / PI).sqrt()).abs();
    let d: Vec<f64> = [30.0, 60.0, 120.0, 240.0, 480.0].iter().map(|&t| dev(t)).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

fn kummer_residual(f: impl Fn(C) -> C, a: f64, b: f64, z: C) -> f64 {
    let h = 1e-3 * (1.0 + z.norm());
    let hz = C::new(h, 0.0) * z / z.norm();
    let (fm, f0, fp) = (f(z - hz), f(z), f(z + hz));
    let (fm2, fp2) = (f(z - hz * 2.0), f(z + hz * 2.0));
    let d1 = (fm2 - fp2 + (fp - fm) * 8.0) / (hz * 12.0);
    let d2 = (-fm2 - fp2 + (fp + fm) * 16.0 - f0 * 30.0) / (hz * hz * 12.0);
    (z * d2 + (b - z) * d1 - f0 * a).norm() / f0.norm().max(d1.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wronskian_random(nu in prop::sample::select(vec![0.0, 0.25, 0.5, 1.0, 0.3, 2.0]), tau in 0.1f64..50.0) {
        let w = wronskian(nu, tau);
        let exact = 2.0 / (PI * tau);
        prop_assert!((w - exact).abs() <= 1e-9 * exact);
    }

    #[test]
    fn half_integer_closed_form(x in 0.05f64..60.0) {
        let a = acc();
        let c = (2.0 / (PI * x)).sqrt();
        prop_assert!((bessel_j(o(0.5), x, &a).unwrap() - c * x.sin()).abs() <= 1e-10 * c.max(1.0));
        prop_assert!((bessel_j(o(-0.5), x, &a).unwrap() - c * x.cos()).abs() <= 1e-10 * c.max(1.0));
        prop_assert!((bessel_y(o(0.5), x, &a).unwrap() + c * x.cos()).abs() <= 1e-10 * c.max(1.0));
        let j32 = c * (x.sin() / x - x.cos());
        prop_assert!((bessel_j(o(1.5), x, &a).unwrap() - j32).abs() <= 1e-10 * c.max(1.0));
    }

    #[test]
    fn kummer_phi_ode(a in -1.5f64..2.0, b in 0.2f64..3.0, y in 0.5f64..40.0, x in -0.0f64..1.0) {
        let acc = acc();
        let z = C::new(x, y);
        let r = kummer_residual(|z| kummer_phi(a, b, z, &acc).unwrap(), a, b, z);
        prop_assert!(r <= 1e-5, "residual {r}");
    }

    #[test]
    fn tricomi_psi_ode(a in 0.1f64..2.0, b in 0.2f64..3.0, y in 0.5f64..40.0, x in 0.0f64..1.0) {
        let acc = acc();
        let z = C::new(x, y);
        let r = kummer_residual(|z| tricomi_psi(a, b, z, &acc).unwrap(), a, b, z);
        prop_assert!(r <= 1e-5, "residual {r}");
    }

    #[test]
    fn y_reflection_negative_integer(n in 1i32..4, tau in 0.2f64..30.0) {
        let a = acc();
        let s = if n % 2 == 0 { 1.0 } else { -1.0 };
        let yp = bessel_y(o(n as f64), tau, &a).unwrap();
        let ym = bessel_y(o(-(n as f64)), tau, &a).unwrap();
        prop_assert!((ym - s * yp).abs() <= 1e-14 * yp.abs().max(1.0));
    }
}

#[test]
fn single_precision_sanity() {
    let a = SpecFunAccuracy::<f32>::default();
    let v = bessel_j(BesselOrder::new(0.5f32), 2.0, &a).unwrap();
    let exact = (2.0f32 / (std::f32::consts::PI * 2.0)).sqrt() * 2.0f32.sin();
    assert!((v - exact).abs() < 1e-5);
    let y = bessel_y(BesselOrder::new(1.0f32), 3.0, &a).unwrap();
    assert!((y - 0.324_674_42).abs() < 1e-5);
}
