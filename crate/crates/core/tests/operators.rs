use fraclyap::operators::{
    caputo_deriv, cf_deriv, cf_integral, derivative, integral, rl_integral, Family, FractionalOrder, KernelConfig,
    OperatorError,
};
use fraclyap::special::gamma;
use fraclyap::trajectory::SampledTrajectory;
use proptest::prelude::*;

fn sampled(t_end: f64, intervals: usize, f: impl Fn(f64) -> f64) -> SampledTrajectory {
    SampledTrajectory::from_fn(0.0, t_end / intervals as f64, intervals, f).unwrap()
}

fn derivative_families() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Caputo), Just(Family::CaputoFabrizio), Just(Family::Abc)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn derivatives_are_linear(
        family in derivative_families(),
        alpha in 0.05f64..0.99,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        u in prop::collection::vec(-5.0f64..5.0, 4..40),
        v_seed in prop::collection::vec(-5.0f64..5.0, 40),
    ) {
        let cfg = KernelConfig::default();
        let order = FractionalOrder::new(alpha, family).unwrap();
        let v = &v_seed[..u.len()];
        let uu = SampledTrajectory::new(0.0, 0.1, u.clone()).unwrap();
        let vv = SampledTrajectory::new(0.0, 0.1, v.to_vec()).unwrap();
        let mix = SampledTrajectory::new(0.0, 0.1, u.iter().zip(v).map(|(x, y)| a * x + b * y).collect()).unwrap();
        let du = derivative(&uu, order, &cfg).unwrap();
        let dv = derivative(&vv, order, &cfg).unwrap();
        let dm = derivative(&mix, order, &cfg).unwrap();
        let scale = du.values().iter().chain(dv.values()).fold(1.0f64, |m, x| m.max(x.abs()));
        for k in 0..u.len() {
            let want = a * du.values()[k] + b * dv.values()[k];
            prop_assert!((dm.values()[k] - want).abs() <= 1e-12 * scale * (1.0 + a.abs() + b.abs()));
        }
    }

    #[test]
    fn constants_are_annihilated(
        family in derivative_families(),
        alpha in 0.05f64..1.0,
        c in -100.0f64..100.0,
        n in 3usize..60,
    ) {
        let u = SampledTrajectory::new(0.0, 0.05, vec![c; n]).unwrap();
        let d = derivative(&u, FractionalOrder::new(alpha, family).unwrap(), &KernelConfig::default()).unwrap();
        prop_assert!(d.values().iter().all(|x| *x == 0.0));
    }
}

#[test]
fn caputo_of_power_converges_at_expected_rate() {
    // D^α t^2 = 2 t^(2−α) / Γ(3−α)
    let alpha = 0.6;
    let exact = 2.0 * 1.0f64.powf(2.0 - alpha) / gamma(3.0 - alpha);
    let errors: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| {
            let d = caputo_deriv(&sampled(1.0, n, |t| t * t), alpha).unwrap();
            (d.values()[n] - exact).abs()
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 2f64.powf(2.0 - alpha)).abs() < 0.15, "ratio {ratio}");
    }
    assert!(errors[2] < 1e-3);
}

#[test]
fn rl_integral_of_linear_function() {
    // I^α t = t^(1+α) / Γ(2+α)
    let alpha = 0.35;
    let n = 400;
    let i = rl_integral(&sampled(2.0, n, |t| t), alpha).unwrap();
    let want = 2f64.powf(1.0 + alpha) / gamma(2.0 + alpha);
    assert!((i.values()[n] - want).abs() < 1e-4 * want);
}

#[test]
fn cf_integral_inverts_cf_derivative() {
    let cfg = KernelConfig::default();
    let alpha = 0.7;
    let errors: Vec<f64> = [200, 400, 800]
        .iter()
        .map(|&n| {
            let u = sampled(3.0, n, |t| 1.0 + (2.0 * t).sin() + 0.3 * t);
            let back = cf_integral(&cf_deriv(&u, alpha, &cfg).unwrap(), alpha, &cfg).unwrap();
            let u0 = u.values()[0];
            u.values().iter().zip(back.values()).map(|(x, y)| (x - u0 - y).abs()).fold(0.0, f64::max)
        })
        .collect();
    assert!(errors[2] < 1e-4, "{errors:?}");
    for w in errors.windows(2) {
        assert!(w[0] / w[1] > 3.5, "{errors:?}");
    }
}

#[test]
fn unit_order_reduces_to_classical_calculus() {
    let cfg = KernelConfig::default();
    let n = 1000;
    let u = sampled(2.0, n, f64::sin);
    let dt = 2.0 / n as f64;
    for family in [Family::Caputo, Family::CaputoFabrizio, Family::Abc] {
        let d = derivative(&u, FractionalOrder::new(1.0, family).unwrap(), &cfg).unwrap();
        for k in 1..=n {
            assert!((d.values()[k] - (k as f64 * dt).cos()).abs() < 1e-5, "{family} at {k}");
        }
    }
    let cos = sampled(2.0, n, f64::cos);
    for family in [Family::RlIntegral, Family::CaputoFabrizio, Family::Abc] {
        let i = integral(&cos, FractionalOrder::new(1.0, family).unwrap(), &cfg).unwrap();
        assert!((i.values()[n] - 2f64.sin()).abs() < 1e-6, "{family}");
    }
}

#[test]
fn short_and_mismatched_inputs_are_rejected() {
    let cfg = KernelConfig::default();
    let two = SampledTrajectory::new(0.0, 0.1, vec![1.0, 2.0]).unwrap();
    assert!(matches!(caputo_deriv(&two, 0.5), Err(OperatorError::TooShort { .. })));
    assert!(cf_deriv(&two, 1.5, &cfg).is_err());
    let rl = FractionalOrder::new(0.5, Family::RlIntegral).unwrap();
    let u = sampled(1.0, 10, |t| t);
    assert!(matches!(derivative(&u, rl, &cfg), Err(OperatorError::NotADerivative(_))));
    let bad = KernelConfig { normalization_b: 0.0, ..KernelConfig::default() };
    assert!(cf_deriv(&u, 0.5, &bad).is_err());
}
