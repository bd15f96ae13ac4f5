mod common;

use std::f64::consts::{E, PI};

use nalgebra::Matrix4;
use proptest::prelude::*;

use common::*;
use pg3::flows::{
    classify_generator, compactness_status, fixed_lines, rational_reconstruction, Compactness, FlowParams, FlowSpec,
    JordanCase, OneParamFlow, DEFAULT_CLASSIFY_TOL,
};
use pg3::projective::grassmann_distance;
use pg3::Error;

fn half_steps(lo: i32, hi: i32) -> impl Strategy<Value = f64> {
    (lo..=hi).prop_map(|k| k as f64 / 2.0)
}

fn nonzero_half_steps() -> impl Strategy<Value = f64> {
    half_steps(-4, 4).prop_filter("nonzero", |x| *x != 0.0)
}

/// Valid flows with parameters on a half-integer grid in [-2, 2].
fn flow() -> impl Strategy<Value = OneParamFlow> {
    (0usize..9, nonzero_half_steps(), half_steps(-4, 4), half_steps(-4, 4), half_steps(-4, 4)).prop_filter_map(
        "valid parameters",
        |(k, a, b, c, d)| {
            let case = JordanCase::ALL[k];
            let used = case.used_params();
            let pick = |i: usize, x: f64| if used[i] { x } else { 0.0 };
            let p = FlowParams::new(pick(0, a), pick(1, b), pick(2, c), pick(3, d));
            OneParamFlow::new(case, p).ok()
        },
    )
}

fn ambiguous_distance(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    (a - b).norm().min((a + b).norm())
}

#[test]
fn worked_examples() {
    let c1 = OneParamFlow::canonical(JordanCase::C1).gamma_matrix(1.0);
    assert_eq!([c1[(0, 0)], c1[(0, 1)], c1[(0, 2)]], [1.0, 1.0, 0.5]);
    assert!((c1[(0, 3)] - 1.0 / 6.0).abs() < 1e-15);

    let c5 = OneParamFlow::new(JordanCase::C5, FlowParams::new(0.0, 1.0, 2.0, 3.0)).unwrap();
    let g = c5.gamma(2f64.ln());
    let expected = projective_normal(&Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 2.0, 4.0, 8.0)));
    assert!(ambiguous_distance(g.matrix(), &expected) < 1e-14);

    let diag = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.0, 1.0, 2.0, 3.0));
    let r = classify_generator(&diag, DEFAULT_CLASSIFY_TOL).unwrap();
    assert_eq!(r.case, JordanCase::C5);
    assert_eq!((r.params.b, r.params.c, r.params.d), (1.0, 2.0, 3.0));

    let mut nil = Matrix4::zeros();
    for i in 0..3 {
        nil[(i, i + 1)] = 1.0;
    }
    assert_eq!(classify_generator(&nil, DEFAULT_CLASSIFY_TOL).unwrap().case, JordanCase::C1);
}

#[test]
fn scalar_generators_are_rejected() {
    let a = Matrix4::identity() * 2.5;
    assert!(matches!(classify_generator(&a, DEFAULT_CLASSIFY_TOL), Err(Error::NotClassifiable)));
    assert!(matches!(
        OneParamFlow::new(JordanCase::C5, FlowParams::default()),
        Err(Error::NotClassifiable)
    ));
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(OneParamFlow::new(JordanCase::A1, FlowParams::new(0.0, 1.0, 1.0, 0.0)).is_err());
    assert!(OneParamFlow::new(JordanCase::A2, FlowParams::new(1.0, 1.0, 0.0, 0.0)).is_err());
    assert!(FlowParams::parse_list("a=1,z=2").is_err());
    assert!(FlowParams::parse_list("a=x").is_err());
    assert_eq!(FlowParams::parse_list("a=1, c=2").unwrap(), FlowParams::new(1.0, 0.0, 2.0, 0.0));
}

#[test]
fn flow_specs_parse_both_forms() {
    let s: FlowSpec = serde_json::from_str(r#"{"case":"a1","params":{"a":1,"b":1,"c":2}}"#).unwrap();
    let (flow, classified) = s.resolve(DEFAULT_CLASSIFY_TOL).unwrap();
    assert_eq!(flow.case(), JordanCase::A1);
    assert!(classified.is_none());
    let m: FlowSpec = serde_json::from_str(r#"{"matrix":[[0,0,0,0],[0,1,0,0],[0,0,2,0],[0,0,0,3]]}"#).unwrap();
    let (flow, classified) = m.resolve(DEFAULT_CLASSIFY_TOL).unwrap();
    assert_eq!(flow.case(), JordanCase::C5);
    assert!(classified.unwrap().residual <= 1e-12);
}

#[test]
fn compactness_table() {
    let a1 = |a: f64, b: f64, c: f64| OneParamFlow::new(JordanCase::A1, FlowParams::new(a, b, c, 0.0)).unwrap();
    assert!(matches!(compactness_status(&a1(1.0, 0.0, 2.0)), Compactness::CompactClosure { .. }));
    assert!(matches!(compactness_status(&a1(1.0, 0.0, 2f64.sqrt())), Compactness::NonClosed { .. }));
    assert!(matches!(compactness_status(&a1(3.0, 0.0, 2.0)), Compactness::CompactClosure { .. }));
    assert_eq!(compactness_status(&a1(1.0, 0.5, 2.0)), Compactness::ClosedNonCompact);
    let b1 = OneParamFlow::new(JordanCase::B1, FlowParams::new(1.0, 0.0, 0.0, 0.0)).unwrap();
    assert!(matches!(compactness_status(&b1), Compactness::CompactClosure { .. }));
    for case in [JordanCase::A2, JordanCase::B2, JordanCase::C1, JordanCase::C2, JordanCase::C3, JordanCase::C4] {
        assert_eq!(compactness_status(&OneParamFlow::canonical(case)), Compactness::ClosedNonCompact, "{case}");
    }
}

#[test]
fn rational_reconstruction_examples() {
    let r = rational_reconstruction(0.75, 1_000_000);
    assert!(r.rational && r.numerator == 3 && r.denominator == 4);
    let r = rational_reconstruction(PI, 1_000_000);
    assert!(!r.rational && r.denominator <= 1_000_000);
    let r = rational_reconstruction(-7.0 / 3.0, 1_000_000);
    assert!(r.rational && r.numerator == -7 && r.denominator == 3);
}

#[test]
fn canonical_flows_classify_to_themselves() {
    for case in JordanCase::ALL {
        let flow = OneParamFlow::canonical(case);
        let r = classify_generator(flow.generator(), DEFAULT_CLASSIFY_TOL).unwrap();
        assert_eq!(r.case, case);
        assert!(r.residual <= 1e-9, "{case}: {}", r.residual);
    }
}

#[test]
fn fixed_lines_are_fixed() {
    for case in JordanCase::ALL {
        let flow = OneParamFlow::canonical(case);
        let set = fixed_lines(&flow, 1e-9);
        for l in &set.lines {
            for t in [1.0, E, PI] {
                let image = flow.gamma(t).apply_line(l).unwrap();
                assert!(grassmann_distance(&image, l) <= 1e-8, "{case} t={t}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn homomorphism(f in flow(), s in -5.0f64..5.0, t in -5.0f64..5.0) {
        let lhs = f.gamma(s).then(&f.gamma(t)).unwrap();
        prop_assert!(lhs.distance(&f.gamma(s + t)) <= 1e-9);
    }

    #[test]
    fn closed_form_matches_series(f in flow(), t in -5.0f64..5.0) {
        let series = projective_normal(&series_exp(&(f.generator() * t)));
        let closed = projective_normal(&f.gamma_matrix(t));
        prop_assert!(ambiguous_distance(&series, &closed) <= 1e-9);
        prop_assert!(ambiguous_distance(&closed, f.gamma(t).matrix()) <= 1e-12);
    }

    #[test]
    fn classification_round_trip(f in flow(), seed in any::<u64>(), shift in -2.0f64..2.0) {
        let mut rng = rng(seed);
        let g = well_conditioned(&mut rng, 10.0);
        let a = g * (f.generator() + Matrix4::identity() * shift) * g.try_inverse().unwrap();
        let r = classify_generator(&a, DEFAULT_CLASSIFY_TOL).unwrap();
        prop_assert_eq!(r.case, f.case());
        prop_assert!(r.residual <= 1e-6);
        let target = OneParamFlow::new(r.case, r.params).unwrap();
        let s = r.conjugator;
        let recomputed = (s.try_inverse().unwrap() * a * s - (target.generator() + Matrix4::identity() * r.shift)).norm();
        prop_assert!(recomputed <= r.residual + 1e-9);
    }

    #[test]
    fn fixed_lines_survive_random_flows(f in flow()) {
        let set = fixed_lines(&f, 1e-9);
        for l in &set.lines {
            for t in [1.0, E, PI] {
                let image = f.gamma(t).apply_line(l).unwrap();
                prop_assert!(grassmann_distance(&image, l) <= 1e-8);
            }
        }
    }

    #[test]
    fn identity_at_zero(f in flow()) {
        prop_assert!(ambiguous_distance(f.gamma(0.0).matrix(), &projective_normal(&Matrix4::identity())) <= 1e-15);
    }
}
