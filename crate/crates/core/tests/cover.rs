use freqstrat::dini_geometry::{DiniModulus, GraphDomain};
use freqstrat::harmonic_fields::{make_model_field, HarmonicField, ModelSpec};
use freqstrat::linalg::Point;
use freqstrat::singular_detect::{locate_singular_set, Region};
use freqstrat::strat_cover::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn poly(n: u32) -> HarmonicField {
    let dom = Arc::new(GraphDomain::flat(3, DiniModulus::zero(), 1.0).unwrap());
    make_model_field(dom, ModelSpec::HalfspacePoly { n }).unwrap()
}

fn axis(r0: f64) -> Vec<Point> {
    segment_samples(&[0.0, -1.0, 0.0], &[0.0, 1.0, 0.0], 0.9 * r0)
}

#[test]
fn linear_field_has_empty_tree() {
    let f = poly(1);
    let region = Region::Box { lo: [-0.5; 3], hi: [0.5, 0.5, 0.5] };
    let s = locate_singular_set(&f, &region, 0.05).unwrap();
    assert!(s.is_empty());
    let (tree, rep) = iterate_cover(&f, &s.positions(), &[0.0; 3], 1e-3, 0.5, &ConstantLedger::default()).unwrap();
    assert!(tree.is_empty());
    assert_eq!(rep.leaf_count, 0);
    assert_eq!(rep.packing_sum, 0.0);
    assert!(rep.coverage);
}

#[test]
fn axis_cover_tracks_the_tube() {
    let f = poly(2);
    let r0 = 1e-4;
    let s = axis(r0);
    let (tree, rep) = iterate_cover(&f, &s, &[0.0; 3], r0, 0.5, &ConstantLedger::default()).unwrap();
    assert!(rep.coverage && rep.disjoint);
    assert!((rep.lambda_star - 2.0).abs() < 1e-6);
    // each leaf of radius r covers at most 2r of the unit segment inside the root ball
    let covered_len = 1.0;
    assert!(rep.packing_sum >= covered_len / 2.0 - 1e-12);
    // tube covering of the segment by r0-balls needs about L/(2 r0); leaves stay within a small factor
    let tube = (covered_len / (2.0 * r0)).ceil();
    assert!((rep.leaf_count as f64) <= 4.0 * tube, "{} leaves vs {}", rep.leaf_count, tube);
    for b in tree.leaves() {
        assert!(b.radius >= r0 * (1.0 - 1e-12));
        assert!(b.center[0].abs() < 1e-15 && b.center[2].abs() < 1e-15);
        if b.label == BallLabel::Terminal {
            assert!((b.radius - r0).abs() <= 1e-12 * r0);
        }
    }
}

#[test]
fn large_delta_is_pure_spanning_subdivision() {
    let f = poly(2);
    let r0 = 1e-3;
    let s = axis(r0);
    let ledger = ConstantLedger { delta: 100.0, ..Default::default() };
    let (tree, rep) = iterate_cover(&f, &s, &[0.0; 3], r0, 0.5, &ledger).unwrap();
    assert_eq!(rep.rounds.len(), 1);
    assert!(tree.nodes.iter().all(|b| matches!(b.label, BallLabel::Good | BallLabel::Terminal)));
    let bad: Vec<_> = tree.leaves().filter(|b| b.label != BallLabel::Terminal).map(|b| (b.label, b.radius, b.center)).collect();
    assert!(bad.is_empty(), "{:?}", &bad[..bad.len().min(5)]);
}

#[test]
fn small_dimension_leaf_on_a_short_line() {
    let f = poly(2);
    // a segment shorter than τ·2r* collapses to a point at the root scale
    let s = segment_samples(&[0.0, -0.004, 0.0], &[0.0, 0.004, 0.0], 1e-4);
    let ledger = ConstantLedger::default();
    let cov = Coverer::new(&f, s.clone(), ledger.clone()).unwrap();
    let mut tree = cov.build_cover(&[0.0; 3], 1e-3, 0.5).unwrap();
    assert_eq!(tree.nodes.len(), 1);
    assert_eq!(tree.nodes[0].label, BallLabel::SmallDimension);
    let v = tree.nodes[0].subspace.clone().unwrap();
    assert!(v.basis.is_empty());
    cov.refine_small_dimension(&mut tree).unwrap();
    let rep = &tree.small_dimension[0];
    // direct enumeration: every child center is a sample, all within 1.2ρr of V
    let kids = &tree.nodes[0].children;
    let on = kids.iter().filter(|&&c| tree.nodes[c].label != BallLabel::FrequencyDrop).count();
    assert_eq!(rep.on_count, on);
    assert_eq!(rep.off_count, 0);
    assert!(on as f64 <= ledger.c_prime);
    assert!(rep.within_bound);
    assert!(tree.check_coverage(&s));
}

#[test]
fn no_small_dimension_leaves_leaves_tree_unchanged() {
    let f = poly(2);
    let r0 = 1e-3;
    let s = axis(r0);
    let ledger = ConstantLedger::default();
    let cov = Coverer::new(&f, s, ledger).unwrap();
    let mut tree = cov.build_cover(&[0.0; 3], r0, 0.5).unwrap();
    assert!(tree.nodes.iter().all(|b| b.label != BallLabel::SmallDimension));
    let before = tree.nodes.len();
    cov.refine_small_dimension(&mut tree).unwrap();
    assert_eq!(tree.nodes.len(), before);
}

#[test]
fn refuses_rho_violating_choice() {
    let f = poly(2);
    let s = segment_samples(&[0.0, -0.004, 0.0], &[0.0, 0.004, 0.0], 1e-4);
    let ledger = ConstantLedger { rho: 0.25, ..Default::default() };
    let cov = Coverer::new(&f, s, ledger).unwrap();
    let mut tree = cov.build_cover(&[0.0; 3], 1e-3, 0.5).unwrap();
    assert!(cov.refine_small_dimension(&mut tree).is_err());
}

#[test]
fn r0_equal_r_star_is_single_level() {
    let f = poly(2);
    let s = axis(0.5);
    let (tree, rep) = iterate_cover(&f, &s, &[0.0; 3], 0.5, 0.5, &ConstantLedger::default()).unwrap();
    assert_eq!(tree.nodes.len(), 1);
    assert_eq!(rep.leaf_count, 1);
    assert!((rep.packing_sum - 0.5).abs() < 1e-15);
    assert!(rep.c_p <= 1.0 + 1e-12);
}

#[test]
fn bad_scales_are_rejected() {
    let f = poly(2);
    let s = axis(0.01);
    let l = ConstantLedger::default();
    assert!(iterate_cover(&f, &s, &[0.0; 3], 0.6, 0.5, &l).is_err());
    assert!(iterate_cover(&f, &s, &[0.0; 3], 0.01, 2.0, &l).is_err());
    assert!(ConstantLedger { rho: 0.7, ..Default::default() }.validate().is_err());
}

#[test]
fn minkowski_segment_point_and_empty() {
    let region = Region::Ball { center: [0.0; 3], radius: 0.5 };
    let r = 2f64.powi(-5);
    let seg = segment_samples(&[0.0, -0.5, 0.0], &[0.0, 0.5, 0.0], r / 20.0);
    let m = minkowski_estimate(&seg, 3, r, &region, 1 << 20, 7).unwrap();
    // analytic tube πr²L, clipped by the ball at both ends
    assert!((m.value - PI / 4.0).abs() < 0.05 * PI / 4.0 + 3.0 * m.stderr, "{:?}", m);
    assert!(m.stderr < 0.02 * m.value);
    let e = minkowski_estimate(&[], 3, r, &region, 1000, 7).unwrap();
    assert_eq!(e.value, 0.0);
    let p = minkowski_estimate(&[[0.0; 3]], 3, 1e-3, &region, 1 << 18, 7).unwrap();
    let exact = (2.0 * 1e-3f64).powi(-2) * 4.0 / 3.0 * PI * 1e-9;
    assert!(p.value < 1e-2 && (p.value - exact).abs() < 0.05 * exact + 3.0 * p.stderr);
    assert!(minkowski_estimate(&seg, 3, r, &region, 0, 7).is_err());
}

#[test]
fn minkowski_is_seed_deterministic() {
    let region = Region::Ball { center: [0.0; 3], radius: 0.5 };
    let seg = segment_samples(&[0.0, -0.5, 0.0], &[0.0, 0.5, 0.0], 1e-3);
    let a = minkowski_estimate(&seg, 3, 0.02, &region, 200_000, 3).unwrap();
    let b = minkowski_estimate(&seg, 3, 0.02, &region, 200_000, 3).unwrap();
    assert_eq!(a.hits, b.hits);
}
