mod common;

use nalgebra::{Vector4, Vector6};
use proptest::prelude::*;

use common::*;
use pg3::dynamics::{
    accumulation_lines, extrapolated_line, extrapolated_point, line_orbit_limit, orbit, point_orbit_limit,
    replay_a1, replay_c1, replay_c3, replay_c4, replay_c5, replay_discrete, replay_lemma_c1, stepped_line_orbit,
    vandermonde_rank_check, CaseReplayReport, LimitObject, Schedule,
};
use pg3::flows::{fixed_lines, FlowParams, JordanCase, OneParamFlow};
use pg3::projective::{grassmann_distance, lines_meet, sample_line, Intersection, Line, ProjPoint, Tolerances};
use pg3::Error;

fn a1() -> OneParamFlow {
    OneParamFlow::new(JordanCase::A1, FlowParams::new(1.0, 1.0, 2.0, 0.0)).unwrap()
}

fn c5_123() -> OneParamFlow {
    OneParamFlow::new(JordanCase::C5, FlowParams::new(0.0, 1.0, 2.0, 3.0)).unwrap()
}

fn line(u: [f64; 4], v: [f64; 4]) -> Line {
    Line::span(&Vector4::from(u), &Vector4::from(v)).unwrap()
}

/// Limit of a line under a diagonal flow: keep the Plücker coordinates of largest weight.
fn diagonal_limit_oracle(l: &Line, exponents: [f64; 4]) -> Line {
    let [u, v] = l.frame();
    let p = minors(u, v);
    let pairs = [(0, 1), (0, 2), (0, 3), (2, 3), (3, 1), (1, 2)];
    let weight = |k: usize| exponents[pairs[k].0] + exponents[pairs[k].1];
    let top = (0..6).filter(|&k| p[k].abs() > 1e-12).map(weight).fold(f64::NEG_INFINITY, f64::max);
    let kept = Vector6::from_fn(|k, _| if weight(k) == top { p[k] } else { 0.0 });
    Line::plucker_lift(&kept).unwrap()
}

fn certificate_lines(r: &CaseReplayReport) -> (Line, Line) {
    let cert = r.certificate.as_ref().expect("certificate");
    match (&cert.limit_a, &cert.limit_b) {
        (LimitObject::Line { line: a }, LimitObject::Line { line: b }) => (*a, *b),
        _ => panic!("line certificate expected"),
    }
}

#[test]
fn a1_disjoint_line_converges_to_the_repelled_plane() {
    let flow = a1();
    let k = Line::coordinate(0, 1);
    let tol = Tolerances::default();
    let mut tried = 0;
    for seed in 0..20 {
        let h = sample_line(seed);
        if lines_meet(&h, &k, &tol) != Intersection::Disjoint {
            continue;
        }
        tried += 1;
        let r = line_orbit_limit(&flow, &h, &Schedule::geometric(0.5, 1.3, 40), 1e-8).unwrap();
        assert!(r.converged);
        assert!(line_distance(&r.limit.unwrap(), &Line::coordinate(2, 3)) <= 1e-6);
    }
    assert!(tried > 10);
}

#[test]
fn fixed_lines_are_their_own_limits() {
    for case in JordanCase::ALL {
        let flow = OneParamFlow::canonical(case);
        for l in fixed_lines(&flow, 1e-9).lines {
            let r = line_orbit_limit(&flow, &l, &Schedule::default(), 1e-8).unwrap();
            assert!(r.converged, "{case} {:?} {:?}", l, r.final_residuals);
            assert!(grassmann_distance(&r.limit.unwrap(), &l) <= 1e-8, "{case} {:?}", l.plucker());
        }
    }
}

#[test]
fn c5_example_follows_the_dominant_weight() {
    let l = line([1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]);
    let oracle = diagonal_limit_oracle(&l, [0.0, 1.0, 2.0, 3.0]);
    // weights of the nonzero coordinates p02, p03, p31, p12 are 2, 3, 4, 3: e2∧e4 wins
    assert!(line_distance(&oracle, &Line::coordinate(1, 3)) < 1e-15);
    let r = line_orbit_limit(&c5_123(), &l, &Schedule::default(), 1e-8).unwrap();
    assert!(r.converged);
    assert!(line_distance(&r.limit.unwrap(), &oracle) <= 1e-6);
}

#[test]
fn c5_random_lines_match_the_oracle() {
    let flow = c5_123();
    for seed in 0..50 {
        let l = sample_line(seed);
        let r = line_orbit_limit(&flow, &l, &Schedule::default(), 1e-8).unwrap();
        let oracle = diagonal_limit_oracle(&l, [0.0, 1.0, 2.0, 3.0]);
        assert!(line_distance(&r.limit.unwrap(), &oracle) <= 1e-6);
    }
}

#[test]
fn c1_backward_limit_is_the_same_point() {
    let flow = OneParamFlow::canonical(JordanCase::C1);
    let e1 = ProjPoint::basis(0);
    let schedule = Schedule::geometric(1.0, 1.5, 60);
    for seed in 0..20 {
        let x = sample_line(seed).point_at(0.7);
        prop_assume_generic(&x);
        for s in [schedule, schedule.backward()] {
            let r = point_orbit_limit(&flow, &x, &s, 1e-8).unwrap();
            assert!(r.converged);
            assert!(r.limit.unwrap().chordal_distance(&e1) <= 1e-6);
        }
    }
}

fn prop_assume_generic(x: &ProjPoint) {
    assert!(x.coords()[3].abs() > 1e-6, "sample lies on the invariant plane");
}

#[test]
fn lemma_examples() {
    let flow = OneParamFlow::canonical(JordanCase::C1);
    let e1 = ProjPoint::basis(0);
    let image = |n: usize| ProjPoint::new(flow.image_direction(&e(3), n as f64)).unwrap();
    assert!(image(1000).chordal_distance(&e1) < image(100).chordal_distance(&e1));
    let (lim, _) = extrapolated_point(image, 1000).unwrap();
    assert!(lim.chordal_distance(&e1) <= 1e-6);

    let x = Line::coordinate(0, 3);
    let (lim, _) = extrapolated_line(|n| flow.gamma(n as f64).apply_line(&x), 1000).unwrap();
    assert!(line_distance(&lim, &Line::coordinate(0, 1)) <= 1e-6);
}

#[test]
fn accumulation_of_a_meeting_line() {
    let flow = a1();
    let (k, l) = (Line::coordinate(0, 1), Line::coordinate(2, 3));
    // meeting is asserted at the replay's limit tolerance
    let tol = Tolerances { decision: 1e-6, ..Tolerances::default() };
    for seed in 0..10 {
        let other = sample_line(seed).frame()[0];
        let m = Line::span(&e(0), &other).unwrap();
        let clusters = accumulation_lines(&flow, &m, &Schedule::geometric(1.0, 1.1, 60), 1e-3).unwrap();
        assert!(!clusters.is_empty());
        for c in &clusters {
            assert!(matches!(lines_meet(&c.line, &k, &tol), Intersection::Meet(_)));
            assert!(matches!(lines_meet(&c.line, &l, &tol), Intersection::Meet(_)));
            assert!(line_distance(&c.line, &l) >= 0.05);
        }
        let total: f64 = clusters.iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn accumulation_needs_fifty_steps() {
    let err = accumulation_lines(&a1(), &sample_line(1), &Schedule::geometric(1.0, 1.1, 49), 1e-3);
    assert!(matches!(err, Err(Error::Precondition(_))));
}

#[test]
fn clusters_are_stable_under_doubling() {
    let flow = a1();
    let h = sample_line(4);
    let m = Line::span(&e(0), &sample_line(5).frame()[0]).unwrap();
    let t0 = FlowParams::new(1.0, 1.0, 2.0, 0.0).t0().unwrap();
    let cases = [
        (h, Schedule::geometric(0.5, 1.3, 60), Schedule::geometric(0.5, 1.3, 120)),
        (h, Schedule::discrete(t0, 100), Schedule::discrete(t0, 200)),
        (m, Schedule::discrete(t0, 100), Schedule::discrete(t0, 200)),
    ];
    for (start, short, long) in cases {
        let a = accumulation_lines(&flow, &start, &short, 1e-6).unwrap();
        let b = accumulation_lines(&flow, &start, &long, 1e-6).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(b.len(), 1);
        assert!(grassmann_distance(&a[0].line, &b[0].line) <= 1e-6);
    }
}

#[test]
fn schedules_validate_and_round_trip() {
    assert!(Schedule::geometric(0.0, 1.3, 10).validate().is_err());
    assert!(Schedule::geometric(0.5, 1.0, 10).validate().is_err());
    assert!(Schedule::geometric(0.5, 1.3, 1).validate().is_err());
    assert!(Schedule::discrete(1.0, 1).validate().is_err());
    let times = Schedule::discrete(0.5, 4).times();
    assert_eq!(times, vec![0.5, 1.0, 1.5, 2.0]);
    let back = Schedule::discrete(0.5, 4).backward().times();
    assert_eq!(back, vec![-0.5, -1.0, -1.5, -2.0]);
    for s in [Schedule::default(), Schedule::discrete(2.0, 7).backward()] {
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Schedule>(&json).unwrap(), s);
    }
}

#[test]
fn vandermonde_examples_and_preconditions() {
    let flow = c5_123();
    let rank = |x: [f64; 4]| vandermonde_rank_check(&Vector4::from(x), &flow, 1.0).unwrap();
    assert_eq!(rank([1.0, 1.0, 1.0, 1.0]).rank, 3);
    assert_eq!(rank([1.0, 1.0, 0.0, 0.0]).rank, 2);
    assert_eq!(rank([0.0, 0.0, 1.0, 0.0]).rank, 1);
    assert_eq!(rank([0.0, 2.0, 1.0, -1.0]).rank, 3);
    assert!(vandermonde_rank_check(&e(0), &a1(), 1.0).is_err());
    assert!(vandermonde_rank_check(&e(0), &flow, 0.0).is_err());
    let collide = OneParamFlow::new(JordanCase::C5, FlowParams::new(0.0, 1.0, 1.0, 3.0)).unwrap();
    assert!(vandermonde_rank_check(&e(0), &collide, 1.0).is_err());
}

#[test]
fn replay_preconditions() {
    assert!(matches!(replay_a1(FlowParams::new(1.0, 0.0, 2.0, 0.0), 1, 0), Err(Error::Precondition(_))));
    assert!(matches!(replay_a1(FlowParams::new(1.0, 1.0, 1.0, 0.0), 1, 0), Err(Error::Precondition(_))));
    assert!(replay_c5(FlowParams::new(0.0, 2.0, 1.0, 3.0), 1, 0).is_err());
    assert!(replay_lemma_c1(9).is_err());
    assert!(replay_c1(9).is_err());
    assert!(replay_c3(0.0, 51).is_err());
    assert!(replay_c3(1.0, 50).is_err());
    assert!(replay_discrete(JordanCase::C1, FlowParams::default(), 1, 0).is_err());
}

#[test]
fn certificates_hold_on_recomputation() {
    for r in [
        replay_a1(FlowParams::new(1.0, 1.0, 2.0, 0.0), 5, 11).unwrap(),
        replay_c1(200).unwrap(),
        replay_c5(FlowParams::new(0.0, 1.0, 2.0, 3.0), 5, 11).unwrap(),
    ] {
        assert!(r.passed, "{}", r.case);
        let (a, b) = certificate_lines(&r);
        assert!(line_distance(&a, &b) >= 0.05, "{}", r.case);
        // the two limits meet, so no topological parallelism can relate them
        assert!(stacked_rank(&a, &b, 1e-6) == 3, "{}", r.case);
        for i in &r.certificate.as_ref().unwrap().incidences {
            assert!(i.residual <= 1e-6, "{}: {}", r.case, i.name);
        }
    }
}

#[test]
fn pencil_replays_pass() {
    let c3 = replay_c3(1.0, 51).unwrap();
    assert!(c3.passed, "{:?}", c3.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    let c4 = replay_c4(FlowParams::new(0.0, 1.0, 2.0, 0.0), 31).unwrap();
    assert!(c4.passed);
}

#[test]
fn discrete_reductions_pass() {
    for (case, p) in [
        (JordanCase::A2, FlowParams::new(1.0, 0.0, 0.0, 0.0)),
        (JordanCase::B1, FlowParams::new(1.0, 1.0, 2.0, 0.0)),
        (JordanCase::B2, FlowParams::new(1.0, 1.0, 0.0, 0.0)),
        (JordanCase::A1, FlowParams::new(1.0, 1.0, 1.0, 0.0)),
    ] {
        let r = replay_discrete(case, p, 10, 3).unwrap();
        assert!(r.passed, "{case}: {:?}", r.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    }
}

#[test]
fn seeded_replays_are_bit_identical() {
    let p = FlowParams::new(1.0, 1.0, 2.0, 0.0);
    let a = serde_json::to_string(&replay_a1(p, 8, 42).unwrap()).unwrap();
    let b = serde_json::to_string(&replay_a1(p, 8, 42).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_string(&replay_a1(p, 8, 43).unwrap()).unwrap();
    assert_ne!(a, c);
    let q = FlowParams::new(0.0, 1.0, 2.0, 3.0);
    assert_eq!(
        serde_json::to_string(&replay_c5(q, 6, 1).unwrap()).unwrap(),
        serde_json::to_string(&replay_c5(q, 6, 1).unwrap()).unwrap()
    );
}

#[test]
fn converged_reports_satisfy_their_invariant() {
    let r = line_orbit_limit(&c5_123(), &sample_line(9), &Schedule::default(), 1e-8).unwrap();
    assert!(r.converged);
    let n = r.trace.len();
    assert!(r.trace[n - 3..].iter().all(|(_, d)| *d <= 1e-8));
    for w in r.trace[n - n / 4..].windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-12);
    }
    assert!(r.trace_csv().starts_with("t,distance\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stepping_agrees_with_direct_evaluation(k in 0usize..9, seed in any::<u64>()) {
        let flow = OneParamFlow::canonical(JordanCase::ALL[k]);
        let l = sample_line(seed);
        // times up to about 5: every image frame stays well conditioned
        let schedule = Schedule::geometric(0.25, 1.3, 12);
        let direct = orbit(&flow, &l, &schedule).unwrap();
        let stepped = stepped_line_orbit(&flow, &l, &schedule).unwrap();
        for ((t, a), (_, b)) in direct.iter().zip(&stepped) {
            let once = flow.gamma(*t).apply_line(&l).unwrap();
            prop_assert!(grassmann_distance(a, b) <= 1e-8);
            prop_assert!(grassmann_distance(a, &once) <= 1e-8);
        }
    }

    #[test]
    fn point_orbits_agree_with_matrix_images(k in 0usize..9, seed in any::<u64>(), t in -4.0f64..4.0) {
        let flow = OneParamFlow::canonical(JordanCase::ALL[k]);
        let x = sample_line(seed).point_at(1.1);
        let direct = ProjPoint::new(flow.image_direction(x.coords(), t)).unwrap();
        let via_matrix = ProjPoint::new(flow.gamma_matrix(t) * x.coords()).unwrap();
        prop_assert!(direct.chordal_distance(&via_matrix) <= 1e-10);
    }
}
