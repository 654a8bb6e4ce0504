use approx::assert_relative_eq;
use proptest::prelude::*;
use pullback_core::constants::{
    c_alpha, check_dissipativity_gap, h2_young_constant, noise_threshold, noise_threshold_example,
    poincare_lambda, unit_ball_volume, ExampleModel, StructuralConstants, TripleKind, TripleTag,
};
use pullback_core::forcing::{
    absorbing_radius, tempered_integral, ForcingProfile, GForcing, SpatialShape, TimeFn,
};
use pullback_core::rng::{stream, Purpose};
use pullback_core::Error;
use rand::Rng;

fn consts(lambda: f64, g2: f64, g4: f64, g5: f64, g6: f64, alpha: f64) -> StructuralConstants {
    StructuralConstants {
        gamma1: 0.0,
        gamma2: g2,
        gamma3: 0.0,
        gamma4: g4,
        gamma5: g5,
        gamma6: g6,
        alpha,
        lambda,
        epsilon: 1.0,
    }
}

#[test]
fn threshold_oracles() {
    let c = consts(10.0, 1.0, 1.0, 1.0, 1.0, 2.0);
    assert_relative_eq!(noise_threshold(&c).unwrap(), (8.0f64 / 41.0).sqrt(), max_relative = 1e-12);
    let c = consts(10.0, 9.99, 0.0, 1.0, 1.0, 2.0);
    assert_relative_eq!(noise_threshold(&c).unwrap(), (0.01f64 / 40.0).sqrt(), max_relative = 1e-9);
    let c = consts(3.0, 1e-300, 0.0, 4.0, 1.0, 2.0);
    assert_relative_eq!(noise_threshold(&c).unwrap(), 1.0, max_relative = 1e-12);

    let rd = ExampleModel::ReactionDiffusion {
        lambda: 2.0,
        gamma2: 1.0,
    };
    assert_relative_eq!(noise_threshold_example(&rd).unwrap(), (1.0f64 / 30.0).sqrt(), max_relative = 1e-12);
    let pl = ExampleModel::PLaplace {
        lambda_tilde: 1.0,
        gamma2: 0.0,
    };
    assert_relative_eq!(noise_threshold_example(&pl).unwrap(), (1.0f64 / 24.0).sqrt(), max_relative = 1e-12);
    let pm = ExampleModel::PorousMedium {
        beta1: 1.0,
        lambda_hat: 3.0,
        gamma2: 1.0,
    };
    assert_relative_eq!(noise_threshold_example(&pm).unwrap(), (1.0f64 / 12.0).sqrt(), max_relative = 1e-12);
}

#[test]
fn closed_gap_names_h5() {
    let c = consts(2.0, 1.0, 2.0, 2.0 / 3.0, 1.0, 2.0);
    let gap = check_dissipativity_gap(&c);
    assert!(!gap.holds);
    assert_relative_eq!(gap.gap, -2.5, max_relative = 1e-12);
    match noise_threshold(&c) {
        Err(Error::Precondition(msg)) => assert!(msg.contains("(H5)")),
        other => panic!("{other:?}"),
    }
    let too_big = ExampleModel::ReactionDiffusion {
        lambda: 2.0,
        gamma2: 2.0,
    };
    assert!(matches!(noise_threshold_example(&too_big), Err(Error::Precondition(_))));
}

#[test]
fn unit_ball_volume_matches_monte_carlo() {
    let mut rng = stream(17, 0, Purpose::Sampling);
    let samples = 400_000;
    for n in 1..=3u32 {
        let inside = (0..samples)
            .filter(|_| {
                (0..n)
                    .map(|_| rng.random_range(-1.0f64..1.0).powi(2))
                    .sum::<f64>()
                    <= 1.0
            })
            .count();
        let estimate = 2f64.powi(n as i32) * inside as f64 / samples as f64;
        let exact = unit_ball_volume(n).unwrap();
        assert!((estimate - exact).abs() / exact < 1e-2, "n={n}: {estimate} vs {exact}");
    }
}

#[test]
fn poincare_oracles() {
    let t = |tag, p, len, dim| TripleKind::new(tag, p, len, dim).unwrap();
    assert_relative_eq!(poincare_lambda(&t(TripleTag::H01L2, 2.0, 1.0, 1)).unwrap(), 2.0, max_relative = 1e-12);
    assert_relative_eq!(poincare_lambda(&t(TripleTag::W1pL2, 3.0, 2.0, 1)).unwrap(), 1.0, max_relative = 1e-12);
    assert_relative_eq!(
        poincare_lambda(&t(TripleTag::H01L2, 2.0, std::f64::consts::PI, 2)).unwrap(),
        1.0,
        max_relative = 1e-12
    );
}

#[test]
fn holder_embedding_holds_on_samples() {
    // |v|_{L2}^2 <= |O|^{(p-2)/p} |v|_{Lp}^2, i.e. lambda0 = |O|^{-(p-2)/p}
    let mut rng = stream(3, 0, Purpose::Sampling);
    for &(p, len) in &[(3.0, 0.5), (4.0, 2.0), (6.0, 7.0)] {
        let lambda0 = poincare_lambda(&TripleKind::new(TripleTag::LpL2, p, len, 1).unwrap()).unwrap();
        for _ in 0..1000 {
            let n = 50;
            let h = len / n as f64;
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let l2 = h * v.iter().map(|x| x * x).sum::<f64>();
            let lp = (h * v.iter().map(|x: &f64| x.abs().powf(p)).sum::<f64>()).powf(2.0 / p);
            assert!(lambda0 * l2 <= lp * (1.0 + 1e-12));
        }
    }
}

#[test]
fn forcing_oracles() {
    let z = tempered_integral(&ForcingProfile::zero(), 0.0, 1.0, 2.0, 1.0, 1e-9).unwrap();
    assert_eq!(z, 0.0);
    let c = ForcingProfile::constant_norm_sq(2.5);
    let v = tempered_integral(&c, 0.7, 3.0, 2.0, 1.0, 1e-10).unwrap();
    assert_relative_eq!(v, 2.5 * (3.0f64 * 0.7).exp() / 3.0, max_relative = 1e-9);
    let e = ForcingProfile::with_g_norm_sq(TimeFn::Exponential { coef: 1.0, rate: 1.0 });
    let v = tempered_integral(&e, 0.0, 1.0, 2.0, 1.0, 1e-9).unwrap();
    assert!((v - 0.5).abs() < 1e-6);
    assert!((absorbing_radius(0.0, 1.0, &e, 1.0, 2.0, 1.0, 1e-9).unwrap() - 1.5).abs() < 1e-6);
    assert_eq!(absorbing_radius(-4.0, 2.0, &ForcingProfile::zero(), 1.0, 2.0, 1.0, 1e-9).unwrap(), 2.0);
    let r0 = absorbing_radius(0.0, 2.0, &c, 0.5, 2.0, 1.0, 1e-12).unwrap();
    for &tau in &[-50.0, -3.0, 0.0, 1.5, 20.0] {
        let r = absorbing_radius(tau, 2.0, &c, 0.5, 2.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(r, 2.0 + 2.0 * 2.5 / 0.5, max_relative = 1e-10);
        assert_relative_eq!(r, r0, max_relative = 1e-10);
    }
}

#[test]
fn divergent_forcing_is_reported() {
    let e = ForcingProfile::with_g_norm_sq(TimeFn::Exponential { coef: 1.0, rate: -2.0 });
    assert!(matches!(tempered_integral(&e, 0.0, 1.0, 2.0, 1.0, 1e-9), Err(Error::Divergence(_))));
}

#[test]
fn field_forcing_uses_shape_norm() {
    let p = ForcingProfile {
        g: GForcing::Field {
            amplitude: TimeFn::Constant { value: 2.0 },
            shape: SpatialShape::Sine { mode: 1 },
        },
        h1: TimeFn::Constant { value: 1.0 },
        h2: TimeFn::Zero,
        shape_norm_sq: None,
    };
    let v = tempered_integral(&p, 0.0, 2.0, 2.0, 1.0, 1e-10).unwrap();
    assert_relative_eq!(v, (4.0 + 1.0) / 2.0, max_relative = 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn threshold_in_unit_interval(lambda in 0.1f64..20.0, g2 in 0.0f64..1.0, g4 in -2.0f64..2.0,
                                  g5 in 0.1f64..3.0, g6 in 0.1f64..3.0) {
        let c = consts(lambda, g2.max(1e-6), g4, g5, g6, 2.0);
        if check_dissipativity_gap(&c).holds {
            let e = noise_threshold(&c).unwrap();
            prop_assert!(e > 0.0 && e <= 1.0);
        } else {
            prop_assert!(noise_threshold(&c).is_err());
        }
    }

    #[test]
    fn threshold_monotone(lambda in 1.0f64..20.0, g5 in 0.5f64..3.0, g6 in 0.1f64..3.0,
                          a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let gap_max = lambda * g5;
        let (lo, hi) = (a.min(b), a.max(b));
        // decreasing in gamma2
        let c1 = consts(lambda, 1e-6 + lo * 0.4 * gap_max, 0.1, g5, g6, 2.0);
        let c2 = consts(lambda, 1e-6 + hi * 0.4 * gap_max, 0.1, g5, g6, 2.0);
        prop_assert!(noise_threshold(&c2).unwrap() <= noise_threshold(&c1).unwrap() + 1e-15);
        // decreasing in |gamma4|
        let c3 = consts(lambda, 0.1, -lo * 0.4 * gap_max, g5, g6, 2.0);
        let c4 = consts(lambda, 0.1, hi * 0.4 * gap_max, g5, g6, 2.0);
        if check_dissipativity_gap(&c4).holds {
            prop_assert!(noise_threshold(&c4).unwrap() <= noise_threshold(&c3).unwrap() + 1e-15);
        }
        // increasing in the gap through gamma5
        let c5 = consts(lambda, 0.1, 0.1, g5, g6, 2.0);
        let c6 = consts(lambda, 0.1, 0.1, g5 * (1.0 + hi), g6, 2.0);
        prop_assert!(noise_threshold(&c6).unwrap() + 1e-15 >= noise_threshold(&c5).unwrap());
    }

    #[test]
    fn gap_is_scale_consistent(lambda in 0.1f64..20.0, g2 in 0.001f64..5.0, g4 in -5.0f64..5.0,
                               g5 in 0.01f64..5.0, s in 0.01f64..100.0) {
        let c = consts(lambda, g2, g4, g5, 1.0, 2.0);
        let d = consts(lambda, g2 * s, g4 * s, g5 * s, 1.0, 2.0);
        let (a, b) = (check_dissipativity_gap(&c), check_dissipativity_gap(&d));
        if a.gap.abs() > 1e-9 * lambda {
            prop_assert_eq!(a.holds, b.holds);
        }
    }

    #[test]
    fn c_alpha_bounds_on_grid(alpha in 2.0f64..8.0) {
        let c = c_alpha(&consts(1.0, 1.0, 0.0, 1.0, 1.0, alpha)).unwrap();
        for i in 0..10_000 {
            let r = 100.0 * i as f64 / 9_999.0;
            prop_assert!(c + r.powf(alpha) >= r * r - 1e-12 * (1.0 + r * r));
        }
    }

    #[test]
    fn young_h2_bounds(alpha in 2.0f64..6.0, g5 in 0.05f64..5.0, b in 0.0f64..50.0, r in 0.0f64..50.0) {
        let c = h2_young_constant(g5, alpha).unwrap();
        let lhs = 2.0 * b * r;
        let rhs = g5 * r.powf(alpha) + c * b.powf(alpha / (alpha - 1.0));
        prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn integral_is_monotone_in_forcing(c in 0.0f64..5.0, extra in 0.0f64..5.0, h1 in 0.0f64..3.0,
                                       tau in -5.0f64..5.0) {
        let mut small = ForcingProfile::constant_norm_sq(c);
        small.h1 = TimeFn::Constant { value: h1 };
        let mut big = ForcingProfile::constant_norm_sq(c + extra);
        big.h1 = TimeFn::Constant { value: h1 + extra };
        let a = tempered_integral(&small, tau, 1.5, 3.0, 1.0, 1e-9).unwrap();
        let b = tempered_integral(&big, tau, 1.5, 3.0, 1.0, 1e-9).unwrap();
        prop_assert!(b + 1e-8 >= a);
    }
}
