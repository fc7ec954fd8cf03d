mod common;

use proptest::prelude::*;
use seasonal_sir::linalg::norm_inf;
use seasonal_sir::model::{
    beta_gamma, field_extended, field_full, field_reduced, jacobian_reduced, Forcing, ModelParams,
    State2, State3, StateExt,
};
use std::f64::consts::TAU;

fn params() -> impl Strategy<Value = ModelParams> {
    (
        0.2..2.0f64,
        0.01..1.0f64,
        0.01..1.0f64,
        0.1..4.0f64,
        0.01..0.5f64,
        0.0..0.95f64,
        0.05..40.0f64,
    )
        .prop_map(|(cap, a, r, b, mu, g, w)| ModelParams::new(cap, a, r, b, mu).with_forcing(g, w))
}

fn state(p: &ModelParams) -> impl Strategy<Value = State2> {
    (0.0..=p.capacity, 0.0..=p.capacity).prop_map(|(s, i)| State2::new(s, i))
}

proptest! {
    #[test]
    fn field_is_periodic_in_time((p, x) in params().prop_flat_map(|p| (Just(p.clone()), state(&p))),
                                 t in 0.0..100.0f64, k in -50i32..50) {
        let shifted = t + TAU * k as f64 / p.omega;
        let a = field_reduced(x, t, &p);
        let b = field_reduced(x, shifted, &p);
        // the shift itself is rounded, so allow for the phase error it causes
        let tol = 1e-12 * (1.0 + shifted.abs() * p.omega) * (1.0 + a.norm_inf());
        prop_assert!((a.s - b.s).abs() <= tol && (a.i - b.i).abs() <= tol);
    }

    #[test]
    fn autonomous_field_ignores_time((p, x) in params().prop_flat_map(|p| (Just(p.clone()), state(&p))),
                                     t in 0.0..1e4f64) {
        let p = p.with_forcing(0.0, 1.0);
        prop_assert_eq!(field_reduced(x, t, &p), field_reduced(x, 0.0, &p));
    }

    #[test]
    fn extended_matches_reduced_at_phase((p, x) in params().prop_flat_map(|p| (Just(p.clone()), state(&p))),
                                         t in 0.0..50.0f64) {
        let red = field_reduced(x, t, &p);
        let theta = (p.omega * t).rem_euclid(TAU);
        let ext = field_extended(StateExt::new(x.s, x.i, theta), &p);
        let tol = 1e-12 * (1.0 + red.norm_inf());
        prop_assert!((ext.s - red.s).abs() <= tol && (ext.i - red.i).abs() <= tol);
        prop_assert_eq!(ext.theta, p.omega);
    }

    #[test]
    fn reduced_is_full_projection((p, x) in params().prop_flat_map(|p| (Just(p.clone()), state(&p))),
                                  r in 0.0..2.0f64, t in 0.0..50.0f64) {
        let full = field_full(State3::new(x.s, x.i, r), t, &p);
        let red = field_reduced(x, t, &p);
        prop_assert_eq!((full.s, full.i), (red.s, red.i));
    }

    #[test]
    fn axes_are_invariant(p in params(), s in 0.0..2.0f64, i in 0.0..2.0f64, t in 0.0..50.0f64) {
        prop_assert_eq!(field_reduced(State2::new(s, 0.0), t, &p).i, 0.0);
        prop_assert_eq!(field_reduced(State2::new(0.0, i), t, &p).s, 0.0);
    }

    #[test]
    fn transmission_stays_positive(p in params(), t in 0.0..100.0f64) {
        prop_assert!(beta_gamma(&p, t) > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn jacobian_matches_central_differences(
        (p, x) in params().prop_flat_map(|p| (Just(p.clone()), state(&p))),
        t in 0.0..50.0f64,
    ) {
        let j = jacobian_reduced(x, t, &p);
        let h = 1e-6;
        let mut fd = [[0.0; 2]; 2];
        for col in 0..2 {
            let mut xp = x.to_array();
            let mut xm = x.to_array();
            xp[col] += h;
            xm[col] -= h;
            let fp = field_reduced(State2::from(xp), t, &p).to_array();
            let fm = field_reduced(State2::from(xm), t, &p).to_array();
            for row in 0..2 {
                fd[row][col] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        let diff = [
            [j[0][0] - fd[0][0], j[0][1] - fd[0][1]],
            [j[1][0] - fd[1][0], j[1][1] - fd[1][1]],
        ];
        prop_assert!(norm_inf(&diff) <= 1e-5 * norm_inf(&j).max(1e-8),
            "J = {:?}, fd = {:?}", j, fd);
    }
}

#[test]
fn parameters_roundtrip_through_toml_and_json() {
    let mut p = ModelParams::new(0.96, 0.14, 0.25, 2.0, 0.2).with_forcing(0.1, 8.0);
    p.forcing = Forcing::table(1.0, vec![1.0, 1.4, 1.1, 0.7]).unwrap();
    let toml = toml::to_string(&p).unwrap();
    assert_eq!(ModelParams::from_toml_str(&toml).unwrap(), p);
    let json = serde_json::to_string(&p).unwrap();
    assert_eq!(ModelParams::from_json_str(&json).unwrap(), p);
}

#[test]
fn documented_keys_parse() {
    let p = ModelParams::from_toml_str(
        r#"
        A = 0.96
        r = 0.25
        beta0 = 2.0
        a = 0.14
        mu = 0.2
        d = 0.0
        gamma = 0.05
        omega = 8.0
        forcing = { type = "cosine", offset = 1.0, amplitude = 0.5 }
        "#,
    )
    .unwrap();
    assert_eq!(p.capacity, 0.96);
    assert_eq!(p.forcing, Forcing::default());
}

#[test]
fn invalid_parameters_are_rejected() {
    let base = ModelParams::new(0.96, 0.14, 0.25, 2.0, 0.2);
    for bad in [
        ModelParams {
            saturation: 0.0,
            ..base.clone()
        },
        ModelParams {
            beta0: -1.0,
            ..base.clone()
        },
        base.clone().with_forcing(1.0, 1.0),
        base.clone().with_forcing(0.1, 0.0),
        ModelParams {
            capacity: f64::NAN,
            ..base.clone()
        },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
    assert!(Forcing::cosine(0.2, 0.5).is_err());
    assert!(Forcing::table(1.0, vec![1.0, 1.0, 1.0]).is_err());
}
