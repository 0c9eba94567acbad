mod common;

use common::*;
use num_traits::{One, ToPrimitive, Zero};
use readspace::construction::{Descriptor, ReadConstruction};
use readspace::exact::{Interval, ScaledRational, SparseVec};
use readspace::lp::{annihilator_distance, best_approximation, max_on_ball, quotient_norm};
use readspace::norm::PerturbedNorm;
use readspace::renorm::{SmoothRenorm, GAUGE_BUDGET};

fn v2(a: Q, b: Q) -> SparseVec {
    SparseVec::from_entries([(1, a), (2, b)]).unwrap()
}

#[test]
fn toy1_values_by_brute_force() {
    let c = toy1();
    let terms = oracle_terms(&c, 10);
    assert_eq!(terms.len(), 1);
    assert_eq!(terms[0].r, q(1, 8));
    // oracle first
    assert_eq!(oracle_norm(&terms, &[q(1, 1), q(0, 1)]), q(17, 16));
    assert_eq!(oracle_norm(&terms, &[q(1, 1), q(1, 1)]), q(1, 1));
    let verts = ball_vertices(&terms, 2);
    assert_eq!(vertex_dual_norm(&verts, &[q(1, 1), q(0, 1)]), q(1, 1));
    assert_eq!(vertex_dual_norm(&verts, &[q(1, 16), q(-1, 16)]), q(1, 9));
    assert_eq!(
        breakpoint_quotient(&terms, &[q(1, 1), q(0, 1)], &[q(1, 1), q(1, 1)]),
        q(9, 16)
    );

    // then the library
    let norm = PerturbedNorm::new(&c);
    let eps = q(1, 1 << 30);
    assert_eq!(
        norm.norm_certified(&SparseVec::unit(1), &eps).unwrap(),
        Interval::from_rational(&q(17, 16))
    );
    assert_eq!(
        norm.norm_certified(&v2(q(1, 1), q(1, 1)), &eps).unwrap(),
        Interval::from_rational(&q(1, 1))
    );
    assert_eq!(norm.dual_norm_truncated(&SparseVec::unit(1), 1).unwrap().value, q(1, 1));
    assert_eq!(
        norm.dual_norm_truncated(&v2(q(1, 16), q(-1, 16)), 1).unwrap().value,
        q(1, 9)
    );
    let y = [v2(q(1, 1), q(1, 1))];
    assert_eq!(quotient_norm(&c, &SparseVec::unit(1), &y, 1).unwrap(), q(9, 16));
}

#[test]
fn toy1_dual_norms_match_vertex_enumeration() {
    let c = toy1();
    let terms = oracle_terms(&c, 1);
    let verts = ball_vertices(&terms, 2);
    let norm = PerturbedNorm::new(&c);
    let mut r = rng(11);
    for _ in 0..60 {
        let f = random_vec(&mut r, 2, 2);
        let expected = vertex_dual_norm(&verts, &dense(&f, 2));
        assert_eq!(norm.dual_norm_truncated(&f, 1).unwrap().value, expected, "f = {f:?}");
        assert_eq!(max_on_ball(&c, &f, 1).unwrap().value, expected);
    }
}

#[test]
fn canonical_dual_norms_match_vertex_enumeration() {
    let c = ReadConstruction::canonical();
    let terms = oracle_terms(&c, 2);
    assert_eq!(terms.iter().map(|t| t.a).collect::<Vec<_>>(), vec![2, 3]);
    let verts = ball_vertices(&terms, 3);
    let norm = PerturbedNorm::new(&c);
    let mut r = rng(12);
    for _ in 0..40 {
        let f = random_vec(&mut r, 3, 3);
        let expected = vertex_dual_norm(&verts, &dense(&f, 3));
        assert_eq!(norm.dual_norm_truncated(&f, 2).unwrap().value, expected, "f = {f:?}");
    }
}

#[test]
fn front_loaded_dual_norms_match_vertex_enumeration() {
    let prefix = vec![v2(q(1, 2), q(1, 1)), SparseVec::unit(2).scale(&q(-1, 3))];
    let c = ReadConstruction::new(Descriptor::front_loaded(prefix));
    let terms = oracle_terms(&c, 2);
    let d = terms.iter().map(|t| t.a).max().unwrap();
    let verts = ball_vertices(&terms, d);
    let norm = PerturbedNorm::new(&c);
    let mut r = rng(13);
    for _ in 0..25 {
        let f = random_vec(&mut r, d, 3);
        assert_eq!(
            norm.dual_norm_truncated(&f, 2).unwrap().value,
            vertex_dual_norm(&verts, &dense(&f, d))
        );
    }
}

#[test]
fn truncated_norm_matches_direct_sum() {
    let c = ReadConstruction::canonical();
    let norm = PerturbedNorm::new(&c);
    let mut r = rng(14);
    for n in 0..12 {
        let terms = oracle_terms(&c, n);
        for _ in 0..10 {
            let x = random_vec(&mut r, 30, 5);
            assert_eq!(norm.norm_truncated(&x, n).unwrap(), oracle_norm(&terms, &dense(&x, 30)));
        }
    }
}

#[test]
fn quotient_norms_match_breakpoint_search() {
    let c = ReadConstruction::canonical();
    let mut r = rng(15);
    for n in 1..=3 {
        let terms = oracle_terms(&c, n);
        let d = terms.last().unwrap().a;
        for _ in 0..15 {
            let x = random_vec(&mut r, d, 3);
            let y = random_vec(&mut r, d, 2);
            let expected = breakpoint_quotient(&terms, &dense(&x, d), &dense(&y, d));
            let got = quotient_norm(&c, &x, std::slice::from_ref(&y), n).unwrap();
            assert_eq!(got, expected, "x = {x:?}, y = {y:?}");
            assert_eq!(
                annihilator_distance(&c, &x, std::slice::from_ref(&y), n).unwrap(),
                expected
            );
            let best = best_approximation(&c, &x, std::slice::from_ref(&y), n).unwrap();
            assert_eq!(oracle_norm(&terms, &dense(&x.sub(&best.y0), d)), expected);
        }
    }
}

#[test]
fn tail_bound_dominates_partial_sums() {
    let mut r = rng(16);
    for case in 0..100 {
        let prefix: Vec<SparseVec> = (0..(case % 4)).map(|_| random_vec(&mut r, 4, 2)).collect();
        let c = ReadConstruction::new(Descriptor::front_loaded(prefix));
        let n = case % 7;
        let m = q(((case * 7) % 23 + 1) as i64, ((case * 3) % 5 + 1) as i64);
        let terms = oracle_terms(&c, n + 6);
        let partial: Q = terms[n..].iter().map(|t| &t.r * &m).sum();
        let bound = c.tail_bound(n, &m).unwrap().to_rational().unwrap();
        assert!(partial < bound, "case {case}: {partial} >= {bound}");
    }
    let toy = toy1();
    assert_eq!(toy.tail_bound(0, &q(3, 1)).unwrap().to_rational().unwrap(), q(3, 8));
    assert!(toy.tail_bound(1, &q(3, 1)).unwrap().is_zero());
}

#[test]
fn partial_sums_of_weights_are_below_two() {
    let c = ReadConstruction::canonical();
    let total: Q = oracle_terms(&c, 200).iter().map(|t| t.r.clone()).sum();
    assert!(total <= q(2, 1));
    let lib = ScaledRational::sum(&c.terms(200).unwrap().iter().map(|t| t.r.clone()).collect::<Vec<_>>());
    assert_eq!(lib.to_rational().unwrap(), total);
}

fn toy_points() -> Vec<SparseVec> {
    vec![v2(q(1, 1), q(1, 1)), v2(q(8, 9), q(-8, 9))]
}

#[test]
fn toy1_smooth_dual_value_against_sqrt_oracle() {
    let c = toy1();
    let s = SmoothRenorm::new(&c, 1, toy_points()).unwrap();
    let d = s.s_dual_norm(&SparseVec::unit(1), &q(1, 1_000_000_000_000)).unwrap();
    let expected = 1.0 + 97f64.sqrt() / 18.0;
    let (lo, hi) = d.total.to_f64_pair();
    assert!((lo - expected).abs() < 1e-12 && (hi - expected).abs() < 1e-12);
    // 1 + sqrt(97)/18 lies between consecutive decimal bounds of sqrt(97)
    let below = q(98_488_578, 10_000_000);
    let above = q(98_488_579, 10_000_000);
    assert!(&below * &below < q(97, 1) && &above * &above > q(97, 1));
    let one = Q::one();
    assert!(d.total.lo() <= &ScaledRational::from_rational(&(&one + &above / q(18, 1))));
    assert!(d.total.hi() >= &ScaledRational::from_rational(&(&one + &below / q(18, 1))));
}

#[test]
fn gauge_matches_grid_search() {
    let c = toy1();
    let s = SmoothRenorm::new(&c, 1, toy_points()).unwrap();
    let terms = oracle_terms(&c, 1);
    let pts: Vec<Vec<f64>> = toy_points()
        .iter()
        .map(|p| dense(p, 2).iter().map(|v| v.to_f64().unwrap()).collect())
        .collect();
    let mut r = rng(17);
    let mut xs = vec![v2(q(1, 1), q(1, 1))];
    xs.extend((0..5).map(|_| random_vec(&mut r, 2, 2)));
    for x in xs {
        let g = s.s_gauge(&x, &q(1, 1_000_000), GAUGE_BUDGET).unwrap();
        let xf: Vec<f64> = dense(&x, 2).iter().map(|v| v.to_f64().unwrap()).collect();
        let oracle = grid_gauge(&terms, &pts, &xf);
        let (lo, hi) = g.enclosure.to_f64_pair();
        assert!(
            lo - 1e-4 <= oracle && oracle <= hi + 1e-4,
            "x = {x:?}: [{lo}, {hi}] vs {oracle}"
        );
        assert!(!g.enclosure.hi().is_zero() || x.is_zero());
        assert!(lo > 0.0 || x.is_zero());
        assert!(Q::zero() < g.enclosure.hi().to_rational().unwrap());
    }
}
