mod common;

use nalgebra::Vector4;
use proptest::prelude::*;

use common::*;
use pg3::clifford::{
    clifford_parallel, is_clifford_parallel, quat_product, spread_audit, transfer, CliffordParallelism,
    Quaternion, ShearedWitness,
};
use pg3::projective::{
    grassmann_distance, incidence_residual, lines_meet, pairing, sample_line, Intersection, Line, ProjMap,
    ProjPoint, Tolerances,
};

fn quat() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-3.0f64..3.0)
        .prop_filter("nonzero", |a| a.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|[w, x, y, z]| Quaternion::new(w, x, y, z))
}

fn arr(q: Quaternion) -> [f64; 4] {
    let v = q.to_vector();
    [v[0], v[1], v[2], v[3]]
}

fn seeded_line() -> impl Strategy<Value = Line> {
    any::<u64>().prop_map(sample_line)
}

fn seeded_point() -> impl Strategy<Value = ProjPoint> {
    any::<u64>().prop_map(|s| sample_line(s).point_at(0.3))
}

/// `span(w, w·u⁻¹·v)` with the product written out by hand.
fn parallel_oracle(p: &ProjPoint, l: &Line) -> Line {
    let w = p.coords();
    let [u, v] = l.frame();
    let n = u.norm_squared();
    let u_inv = [u[0] / n, -u[1] / n, -u[2] / n, -u[3] / n];
    let q = hamilton([w[0], w[1], w[2], w[3]], u_inv);
    let x = hamilton(q, [v[0], v[1], v[2], v[3]]);
    Line::span(w, &Vector4::from(x)).unwrap()
}

#[test]
fn worked_examples() {
    let tol = Tolerances::default();
    let e = |i| ProjPoint::basis(i);
    assert!(grassmann_distance(&clifford_parallel(&e(0), &Line::coordinate(0, 1)), &Line::coordinate(0, 1)) < 1e-15);
    assert!(grassmann_distance(&clifford_parallel(&e(2), &Line::coordinate(0, 1)), &Line::coordinate(2, 3)) < 1e-15);
    assert!(grassmann_distance(&clifford_parallel(&e(0), &Line::coordinate(2, 3)), &Line::coordinate(0, 1)) < 1e-15);
    assert!(is_clifford_parallel(&Line::coordinate(0, 1), &Line::coordinate(2, 3), &tol));
    assert!(!is_clifford_parallel(&Line::coordinate(0, 1), &Line::coordinate(0, 2), &tol));
    assert_eq!(quat_product(Quaternion::I, Quaternion::J), Quaternion::K);
}

#[test]
fn transfer_needs_a_pencil_member() {
    let tol = Tolerances::default();
    let err = transfer(&CliffordParallelism, &ProjPoint::basis(2), &ProjPoint::basis(3), &Line::coordinate(0, 1), &tol);
    assert!(matches!(err, Err(pg3::Error::NotInPencil { .. })));
    let l = Line::coordinate(0, 1);
    let same = transfer(&CliffordParallelism, &ProjPoint::basis(0), &ProjPoint::basis(0), &l, &tol).unwrap();
    assert!(grassmann_distance(&same, &l) < 1e-15);
}

#[test]
fn transfer_is_lipschitz_in_the_pencil() {
    let tol = Tolerances::default();
    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let base = sample_line(seed);
        let p = base.point_at(0.0);
        let q = sample_line(seed + 10_000).point_at(1.0);
        let other = base.frame()[1];
        let tilted = sample_line(seed + 20_000).frame()[0];
        for delta in [1e-4, 1e-5, 1e-6] {
            let l2 = Line::span(p.coords(), &(other + tilted * delta)).unwrap();
            let moved = grassmann_distance(&base, &l2);
            let a = transfer(&CliffordParallelism, &p, &q, &base, &tol).unwrap();
            let b = transfer(&CliffordParallelism, &p, &q, &l2, &tol).unwrap();
            worst = worst.max(grassmann_distance(&a, &b) / moved);
        }
    }
    // the transfer is a projective map between pencils, so the ratio stays bounded
    assert!(worst < 1e3, "empirical Lipschitz constant {worst}");
}

#[test]
fn clifford_audit_is_clean_and_merge_is_symmetric() {
    let tol = Tolerances::default();
    let a = spread_audit(&CliffordParallelism, 300, 5, &tol);
    assert!(a.passed(), "{:?}", a.violations.first());
    assert!(a.min_disjoint_pairing > 1e-6);
    let b = spread_audit(&CliffordParallelism, 200, 6, &tol);
    assert_eq!(a.clone().merge(b.clone()).max_residuals, b.clone().merge(a.clone()).max_residuals);
    assert_eq!(a.clone().merge(b.clone()).samples, 500);
}

#[test]
fn sheared_witness_is_caught() {
    let inner = CliffordParallelism;
    let broken = ShearedWitness::new(&inner);
    let report = spread_audit(&broken, 200, 5, &Tolerances::default());
    assert!(!report.passed());
}

#[test]
fn class_members_are_pairwise_disjoint_parallels() {
    let tol = Tolerances::default();
    let l = sample_line(3);
    let members = CliffordParallelism::class_members(&l, 40);
    for (i, a) in members.iter().enumerate() {
        assert!(is_clifford_parallel(&l, a, &tol));
        for b in &members[i + 1..] {
            assert_eq!(lines_meet(a, b, &tol), Intersection::Disjoint);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn product_matches_hamilton(a in quat(), b in quat()) {
        let ours = hamilton(arr(a), arr(b));
        let theirs = arr(quat_product(a, b));
        for k in 0..4 {
            prop_assert!((ours[k] - theirs[k]).abs() <= 1e-12);
        }
        prop_assert!(((a * b).norm() - a.norm() * b.norm()).abs() <= 1e-10 * (1.0 + a.norm() * b.norm()));
    }

    #[test]
    fn inverse_is_two_sided(a in quat()) {
        let inv = a.inverse().unwrap();
        prop_assert!(((a * inv).to_vector() - Quaternion::ONE.to_vector()).norm() <= 1e-12);
        prop_assert!(((inv * a).to_vector() - Quaternion::ONE.to_vector()).norm() <= 1e-12);
    }

    #[test]
    fn parallel_matches_oracle(p in seeded_point(), l in seeded_line()) {
        let m = clifford_parallel(&p, &l);
        prop_assert!(grassmann_distance(&m, &parallel_oracle(&p, &l)) <= 1e-10);
        prop_assert!(incidence_residual(&p, &m) <= 1e-9);
        let w = CliffordParallelism;
        let other = w.parallel_with_basis(&p, &l, 1).unwrap();
        prop_assert!(grassmann_distance(&w.parallel_with_basis(&p, &l, 0).unwrap(), &other) <= 1e-10);
        prop_assert!(grassmann_distance(&clifford_parallel(&p, &m), &m) <= 1e-9);
    }

    #[test]
    fn point_on_line_gives_the_line(l in seeded_line(), s in 0.0f64..3.1) {
        prop_assert!(grassmann_distance(&clifford_parallel(&l.point_at(s), &l), &l) <= 1e-9);
    }

    #[test]
    fn uniqueness_along_the_parallel(p in seeded_point(), l in seeded_line(), s in 0.0f64..3.1) {
        let m = clifford_parallel(&p, &l);
        let x = m.point_at(s);
        prop_assert!(grassmann_distance(&clifford_parallel(&x, &l), &m) <= 1e-9);
    }

    #[test]
    fn distinct_parallels_are_disjoint(p in seeded_point(), l in seeded_line()) {
        let tol = Tolerances::default();
        let m = clifford_parallel(&p, &l);
        prop_assume!(grassmann_distance(&m, &l) > 1e-4);
        prop_assert_eq!(lines_meet(&m, &l, &tol), Intersection::Disjoint);
        prop_assert!(pairing(m.plucker(), l.plucker()).abs() > 1e-6 * grassmann_distance(&m, &l).powi(2));
    }

    #[test]
    fn equivalence_relation_on_one_class(l in seeded_line(), p in seeded_point(), q in seeded_point()) {
        let tol = Tolerances::default();
        let a = clifford_parallel(&p, &l);
        let b = clifford_parallel(&q, &l);
        prop_assert!(is_clifford_parallel(&l, &l, &tol));
        prop_assert!(is_clifford_parallel(&l, &a, &tol) && is_clifford_parallel(&a, &l, &tol));
        prop_assert!(is_clifford_parallel(&a, &b, &tol));
    }

    #[test]
    fn left_translates_are_parallel(q in quat(), l in seeded_line()) {
        let g = ProjMap::new(q.left_matrix()).unwrap();
        prop_assert!(is_clifford_parallel(&l, &g.apply_line(&l).unwrap(), &Tolerances::default()));
    }

    #[test]
    fn transfer_round_trip(l in seeded_line(), s in 0.0f64..3.1, q in seeded_point()) {
        let tol = Tolerances::default();
        let p = l.point_at(s);
        let there = transfer(&CliffordParallelism, &p, &q, &l, &tol).unwrap();
        prop_assert!(incidence_residual(&q, &there) <= 1e-9);
        let back = transfer(&CliffordParallelism, &q, &p, &there, &tol).unwrap();
        prop_assert!(grassmann_distance(&back, &l) <= 1e-9);
    }
}
