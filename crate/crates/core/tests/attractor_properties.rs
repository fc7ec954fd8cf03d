mod common;

use proptest::prelude::*;
use seasonal_sir::attractor::{
    classify_attractor, largest_lyapunov, largest_lyapunov_extended, locate_limit_cycle,
    lyapunov_with_samples, AttractorKind, ClassifyOptions, LinearField, LyapunovOptions,
    ShootingOptions,
};
use seasonal_sir::equilibria::endemic_e3;
use seasonal_sir::model::{presets, ModelParams, State2};

fn lyap_opts(interval: f64, n: usize, transient: usize) -> LyapunovOptions {
    LyapunovOptions {
        renorm_interval: interval,
        n_renorm: n,
        transient,
        ..Default::default()
    }
}

#[test]
fn linear_field_calibration() {
    let f = LinearField {
        matrix: [[-1.0, 0.0], [0.0, -2.0]],
    };
    let (est, _) = lyapunov_with_samples(f, [0.3, -0.7], &lyap_opts(0.5, 400, 20)).unwrap();
    assert!((est.lambda_max + 1.0).abs() < 1e-3, "{}", est.lambda_max);
    assert!(est.history.iter().all(|l| l.is_finite()));
    assert_eq!(est.converged, est.window_spread < 5e-4);
}

#[test]
fn phase_direction_is_excluded() {
    // chaotic orbits amplify the round-off difference between the two
    // integrations, so that case runs on a horizon shorter than the
    // divergence time
    for (gamma, omega, n) in [(0.1, 2.0, 400), (0.1, 0.5, 400), (0.5, 0.7, 80)] {
        let p = presets::near_hopf().with_forcing(gamma, omega);
        let x0 = State2::new(0.41, 0.28);
        let opts = lyap_opts(p.forcing_period(), n, 10);
        let planar = largest_lyapunov(&p, x0, &opts).unwrap();
        let extended = largest_lyapunov_extended(&p, x0, [1.0, 0.0, 0.0], &opts).unwrap();
        assert!(
            (planar.lambda_max - extended.lambda_max).abs() < 1e-6,
            "gamma {gamma}: {} vs {}",
            planar.lambda_max,
            extended.lambda_max
        );
    }
}

#[test]
fn pure_phase_perturbation_has_zero_exponent() {
    // on a locked orbit the planar exponents are negative, so a tangent
    // vector along θ reveals the trivial zero exponent
    let p = presets::near_hopf().with_forcing(0.1, 0.5);
    let opts = lyap_opts(p.forcing_period(), 300, 100);
    let planar = largest_lyapunov(&p, State2::new(0.41, 0.28), &opts).unwrap();
    assert!(planar.lambda_max < -1e-2);
    let phase =
        largest_lyapunov_extended(&p, State2::new(0.41, 0.28), [0.0, 0.0, 1.0], &opts).unwrap();
    assert!(phase.lambda_max.abs() < 1e-3, "{}", phase.lambda_max);
}

#[test]
fn doubling_renorm_interval_keeps_exponent() {
    for (gamma, omega) in [(0.5, 0.7), (0.1, 8.0), (0.1, 0.5)] {
        let p = presets::near_hopf().with_forcing(gamma, omega);
        let x0 = State2::new(0.41, 0.28);
        let t = p.forcing_period();
        let horizon = 20_000.0;
        let n = (horizon / t) as usize;
        let single = largest_lyapunov(&p, x0, &lyap_opts(t, n, n / 10)).unwrap();
        let double = largest_lyapunov(&p, x0, &lyap_opts(2.0 * t, n / 2, n / 20)).unwrap();
        assert!(
            (single.lambda_max - double.lambda_max).abs() < 2e-3,
            "gamma {gamma}, omega {omega}: {} vs {}",
            single.lambda_max,
            double.lambda_max
        );
    }
}

#[test]
fn return_map_derivative_matches_liouville() {
    for mu in [0.18, 0.185, 0.19, 0.195] {
        let p = ModelParams {
            mu,
            ..presets::post_hopf()
        };
        let e3 = endemic_e3(&p).unwrap().unwrap();
        let c = locate_limit_cycle(
            &p,
            State2::new(e3.s + 0.01, e3.i),
            &ShootingOptions::default(),
        )
        .unwrap();
        let rel = (c.floquet_multiplier - c.liouville_multiplier).abs() / c.liouville_multiplier;
        assert!(
            rel < 1e-4,
            "mu {mu}: {} vs {}",
            c.floquet_multiplier,
            c.liouville_multiplier
        );
        assert!(c.floquet_multiplier > 0.0 && c.floquet_multiplier < 1.0);
        let first = c.points[0];
        let last = *c.points.last().unwrap();
        assert!((first.s - last.s).abs() < 1e-6 && (first.i - last.i).abs() < 1e-6);
    }
}

#[test]
fn autonomous_cycle_has_nonpositive_exponent() {
    // flow direction gives zero; the stroboscopic tangent flow sees the
    // contracting Floquet direction
    let p = presets::post_hopf();
    let e3 = endemic_e3(&p).unwrap().unwrap();
    let c = locate_limit_cycle(
        &p,
        State2::new(e3.s + 0.01, e3.i),
        &ShootingOptions::default(),
    )
    .unwrap();
    let est = largest_lyapunov(
        &p,
        c.section_point,
        &lyap_opts(std::f64::consts::TAU, 1000, 100),
    )
    .unwrap();
    assert!(est.lambda_max <= 1e-3, "{}", est.lambda_max);
    let v = classify_attractor(&p, c.section_point, &ClassifyOptions::default()).unwrap();
    assert_eq!(v.kind, AttractorKind::InvariantCurve);
}

#[test]
fn slow_focus_is_not_mistaken_for_locking() {
    let p = presets::near_hopf();
    let v = classify_attractor(
        &p,
        State2::new(0.4063, 0.2818),
        &ClassifyOptions {
            min_kept_time: 40_000.0,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(
        !matches!(
            v.kind,
            AttractorKind::PeriodicOrbit { .. } | AttractorKind::Chaotic
        ),
        "{:?}",
        v.kind
    );
}

#[test]
fn strong_slow_forcing_is_chaotic() {
    let p = presets::near_hopf().with_forcing(0.5, 0.7);
    let v = classify_attractor(
        &p,
        State2::new(0.4063, 0.2818),
        &ClassifyOptions {
            min_kept_time: 40_000.0,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(v.kind, AttractorKind::Chaotic);
    assert!(v.lambda_max > 1e-2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn planar_flow_is_never_chaotic(
        cap in 0.5..1.5f64, a in 0.05..0.5f64, r in 0.05..0.5f64,
        beta0 in 0.5..3.0f64, mu in 0.05..0.4f64,
        s in 0.05..1.0f64, i in 0.01..1.0f64,
    ) {
        let p = ModelParams::new(cap, a, r, beta0, mu);
        let v = classify_attractor(&p, State2::new(s.min(cap), i), &ClassifyOptions::default()).unwrap();
        prop_assert_ne!(v.kind, AttractorKind::Chaotic);
        prop_assert!(v.lambda_max <= 1e-3);
    }
}
