use freqstrat::beta_reifenberg::*;
use freqstrat::dini_geometry::{DiniModulus, GraphDomain};
use freqstrat::frequency::FrequencyEngine;
use freqstrat::harmonic_fields::{make_model_field, HarmonicField, ModelSpec, PolyTerm};
use freqstrat::linalg::Point;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

mod common;
use common::{in_ball, oracle_beta};

#[test]
fn planar_and_single_atom_clouds() {
    let pts = vec![[0.0, 0.0, 0.0], [0.3, 0.1, 0.0], [-0.2, 0.5, 0.0], [0.4, -0.4, 0.0]];
    let mu = WeightedCloud::new(3, pts, vec![1.0, 2.0, 0.5, 3.0]).unwrap();
    let b = beta_number(&mu, &[0.0; 3], 1.0, 2).unwrap();
    assert!(b.beta < 1e-12);
    let one = WeightedCloud::unit(3, vec![[0.2, 0.1, 0.3]]).unwrap();
    let b = beta_number(&one, &[0.0; 3], 1.0, 1).unwrap();
    assert_eq!(b.beta, 0.0);
    assert_eq!(b.center_of_mass, [0.2, 0.1, 0.3]);
    assert!(b.eigenvalues.iter().all(|v| *v == 0.0));
    let empty = beta_number(&one, &[5.0, 0.0, 0.0], 1.0, 1).unwrap();
    assert!(empty.empty && empty.beta == 0.0);
}

#[test]
fn three_atom_cloud_matches_plane_search() {
    let mu = WeightedCloud::unit(3, vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
    let b = beta_number(&mu, &[0.0; 3], 2.0, 1).unwrap();
    let o = oracle_beta(&in_ball(&mu, &[0.0; 3], 2.0), 3, 1, 2.0);
    assert!((b.beta - o).abs() < 1e-6, "{} vs {o}", b.beta);
    assert!((b.beta * b.beta - (b.eigenvalues[1] + b.eigenvalues[2])).abs() < 1e-15);
}

#[test]
fn eigen_beta_matches_plane_search_on_random_clouds() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..50 {
        let dim = if case % 2 == 0 { 2 } else { 3 };
        let n = rng.gen_range(1..=6);
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for v in p.iter_mut().take(dim) {
                    *v = rng.gen_range(-1.0..1.0);
                }
                p
            })
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let mu = WeightedCloud::new(dim, pts, w).unwrap();
        let k = if dim == 2 { 1 } else { 1 + case % 4 / 2 };
        let r = rng.gen_range(0.8..1.8);
        let p = [0.0; 3];
        let b = beta_number(&mu, &p, r, k).unwrap();
        let o = oracle_beta(&in_ball(&mu, &p, r), dim, k, r);
        assert!((b.beta - o).abs() < 1e-6, "case {case}: {} vs {o}", b.beta);
    }
}

fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let (sa, ca, sb, cb, sc, cc) = (a.sin(), a.cos(), b.sin(), b.cos(), c.sin(), c.cos());
    [
        [ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc],
        [sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc],
        [-sb, cb * sc, cb * cc],
    ]
}

fn apply(m: &[[f64; 3]; 3], p: &Point, t: &Point, s: f64) -> Point {
    let mut q = [0.0; 3];
    for i in 0..3 {
        q[i] = s * (m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2]) + t[i];
    }
    q
}

fn cloud() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(prop::array::uniform3(-0.5f64..0.5), 2..7)
}

proptest! {
    #[test]
    fn beta_rigid_and_scaling_invariance(
        pts in cloud(),
        ang in prop::array::uniform3(0.0f64..6.3),
        shift in prop::array::uniform3(-3.0f64..3.0),
        s in 0.1f64..10.0,
        k in 1usize..3,
    ) {
        // radius 2 keeps every atom strictly inside the ball
        let mu = WeightedCloud::unit(3, pts.clone()).unwrap();
        let base = beta_number(&mu, &[0.0; 3], 2.0, k).unwrap().beta;
        let rot = rotation(ang[0], ang[1], ang[2]);
        let moved = WeightedCloud::unit(3, pts.iter().map(|p| apply(&rot, p, &shift, 1.0)).collect()).unwrap();
        let b = beta_number(&moved, &shift, 2.0, k).unwrap().beta;
        prop_assert!((b - base).abs() < 1e-10);
        let scaled = WeightedCloud::new(3, pts.iter().map(|p| apply(&rot, p, &[0.0; 3], s)).collect(), vec![s.powi(k as i32); pts.len()]).unwrap();
        let b = beta_number(&scaled, &[0.0; 3], 2.0 * s, k).unwrap().beta;
        prop_assert!((b - base).abs() < 1e-10, "{} vs {}", b, base);
    }

    #[test]
    fn trailing_sums_decrease_with_k(pts in cloud(), r in 0.3f64..2.0) {
        let mu = WeightedCloud::unit(3, pts).unwrap();
        let b1 = beta_number(&mu, &[0.0; 3], r, 1).unwrap();
        let b2 = beta_number(&mu, &[0.0; 3], r, 2).unwrap();
        // same normalization: compare β² · r^{2+k}
        prop_assert!(b1.beta.powi(2) * r.powi(3) >= b2.beta.powi(2) * r.powi(4) - 1e-14);
        prop_assert!(b1.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn dini_sum_vanishes_on_planes_and_atoms() {
    let pts: Vec<Point> = (0..20).map(|i| [0.05 * i as f64 - 0.5, 0.0, 0.0]).collect();
    let mu = WeightedCloud::unit(3, pts).unwrap();
    assert!(dini_beta_integral(&mu, &[0.0; 3], 1.0, 1, MAX_GRID_RATIO).unwrap() < 1e-20);
    let one = WeightedCloud::unit(3, vec![[0.0; 3]]).unwrap();
    assert_eq!(dini_beta_integral(&one, &[0.0; 3], 1.0, 1, MAX_GRID_RATIO).unwrap(), 0.0);
    assert!(dini_beta_integral(&one, &[0.0; 3], 1.0, 1, 1.5).is_err());
}

#[test]
fn dini_sum_converges_under_refinement() {
    let mu = WeightedCloud::unit(3, vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
    let v = dini_beta_integral(&mu, &[0.0; 3], 2.0, 1, MAX_GRID_RATIO).unwrap();
    let fine = dini_beta_integral(&mu, &[0.0; 3], 2.0, 1, 2f64.powf(1.0 / 40.0)).unwrap();
    assert!(v > 0.0);
    assert!((v - fine).abs() <= 0.02 * fine, "{v} vs {fine}");
}

fn flat3() -> Arc<GraphDomain> {
    Arc::new(GraphDomain::flat(3, DiniModulus::zero(), 1.0).unwrap())
}

fn mixed_field() -> HarmonicField {
    make_model_field(flat3(), ModelSpec::SumOfPolys { terms: vec![PolyTerm { coef: 1.0, n: 1 }, PolyTerm { coef: 0.05, n: 3 }] })
        .unwrap()
}

#[test]
fn bound_check_trivial_cases() {
    let f = make_model_field(flat3(), ModelSpec::HalfspacePoly { n: 2 }).unwrap();
    let eng = FrequencyEngine::fast(3, 20.0);
    let line: Vec<Point> = (0..21).map(|i| [0.0, -0.2 + 0.02 * i as f64, 0.0]).collect();
    let mu = WeightedCloud::unit(3, line).unwrap();
    let rep = beta_frequency_bound_check(&f, &eng, &mu, &[0.0; 3], 0.25, 0.05).unwrap();
    assert!(rep.lhs < 1e-20 && rep.rhs >= 0.0);
    assert_eq!(rep.ratio, 0.0);
    let one = WeightedCloud::unit(3, vec![[0.0; 3]]).unwrap();
    let rep = beta_frequency_bound_check(&f, &eng, &one, &[0.0; 3], 0.25, 0.05).unwrap();
    assert_eq!(rep.lhs, 0.0);
    assert!(rep.rhs > 0.0 && rep.ratio == 0.0);
}

#[test]
fn bound_check_ratio_is_stable_under_resampling() {
    // nodal set of x_d + 0.05 Im((x1 + i x_d)³) near the origin is the plane x_d = 0
    let f = mixed_field();
    let eng = FrequencyEngine::fast(3, 20.0);
    let sample = |n: usize, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let (a, t): (f64, f64) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0 * PI));
                let rad = 0.24 * a.sqrt();
                [rad * t.cos(), rad * t.sin(), 0.0]
            })
            .collect();
        WeightedCloud::unit(3, pts).unwrap()
    };
    let r1 = beta_frequency_bound_check(&f, &eng, &sample(50, 1), &[0.0; 3], 0.25, 0.05).unwrap();
    let r2 = beta_frequency_bound_check(&f, &eng, &sample(100, 2), &[0.0; 3], 0.25, 0.05).unwrap();
    for r in [&r1, &r2] {
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
    }
    let q = r1.ratio / r2.ratio;
    assert!((0.5..=2.0).contains(&q), "{} vs {}", r1.ratio, r2.ratio);
}
