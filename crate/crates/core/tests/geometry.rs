use freqstrat::dini_geometry::{DiniModulus, GraphDomain, RadialPowerGraph, TransformFrame};
use freqstrat::linalg::{det, dist, norm, Point};
use proptest::prelude::*;
use std::sync::Arc;

fn moduli() -> Vec<DiniModulus> {
    vec![
        DiniModulus::power(0.075, 0.5).unwrap(),
        DiniModulus::power(0.01, 1.0).unwrap(),
        DiniModulus::power(0.2, 0.25).unwrap(),
        DiniModulus::log(0.05).unwrap(),
        DiniModulus::log(0.5).unwrap(),
    ]
}

fn curved(dim: usize) -> Arc<GraphDomain> {
    let phi = Arc::new(RadialPowerGraph { coef: 0.05, exponent: 1.5 });
    Arc::new(GraphDomain::new_unchecked(dim, phi, DiniModulus::power(0.075, 0.5).unwrap(), 0.25).unwrap())
}

fn ball_point(dim: usize, dir: [f64; 3], rad: f64) -> Point {
    let mut v = dir;
    if dim == 2 {
        v[2] = 0.0;
    }
    let n = norm(&v).max(1e-12);
    [v[0] / n * rad, v[1] / n * rad, v[2] / n * rad]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_round_trip(
        dim in 2usize..4,
        x0 in prop::array::uniform2(-0.2f64..0.2),
        dirs in prop::collection::vec((prop::array::uniform3(-1.0f64..1.0), 0.0f64..0.5), 1000),
    ) {
        let dom = curved(dim);
        let mut x0 = x0;
        if dim == 2 {
            x0[1] = 0.0;
        }
        let frame = TransformFrame::new(dom, x0);
        for (dir, rad) in dirs {
            let y = ball_point(dim, dir, rad);
            let z = frame.map_psi(&y).unwrap();
            let back = frame.inverse_psi(&z).unwrap();
            prop_assert!(dist(&back, &y) <= 1e-12, "{:?} -> {:?}", y, back);
            prop_assert!(dist(&frame.psi(&back), &z) <= 1e-12);
        }
    }

    #[test]
    fn det_jacobian_within_alpha(
        dim in 2usize..4,
        which in 0usize..5,
        dir in prop::array::uniform3(-1.0f64..1.0),
        t in 0.0f64..1.0,
    ) {
        let m = moduli()[which];
        let scale = m.admissible_scale().min(0.25);
        let dom = Arc::new(GraphDomain::flat(dim, m, scale).unwrap());
        let frame = TransformFrame::new(dom, [0.0, 0.0]);
        let y = ball_point(dim, dir, 2.0 * scale * (1e-6f64).powf(t));
        let e = frame.elliptic_data(&y).unwrap();
        let a = m.alpha(norm(&y));
        prop_assert!((e.det_jacobian - det(&e.jacobian, dim)).abs() < 1e-14);
        prop_assert!(e.det_jacobian >= 1.0 - a - 1e-15 && e.det_jacobian <= 1.0 + a + 1e-15);
    }

    #[test]
    fn image_spheres_are_nested(which in 0usize..5, t in 0.0f64..1.0, s in 0.0f64..1.0) {
        let m = moduli()[which];
        // largest R on a dyadic ladder with θ(4R) < 1/26
        let mut big_r = 1.0;
        while m.theta(4.0 * big_r) >= 1.0 / 26.0 {
            big_r *= 0.5;
        }
        let rp = big_r * (1e-6f64).powf(1.0 - t);
        let r = rp * s;
        let c = |x: f64| 3.0 * x * m.theta_tilde(x);
        // B_r(c(r)e_d) ⊂ B_r'(c(r')e_d) iff |c(r') − c(r)| + r ≤ r'
        prop_assert!((c(rp) - c(r)).abs() + r <= rp * (1.0 + 1e-14));
    }
}

#[test]
fn modulus_sandwich_bounds() {
    for m in moduli() {
        for i in 0..100 {
            let r = 10f64.powf(-8.0 + 8.0 * i as f64 / 99.0) * 0.25;
            let (th, tt, al, t4) = (m.theta(r), m.theta_tilde(r), m.alpha(r), m.theta(4.0 * r));
            let tol = 1e-12 * t4;
            assert!(th <= tt + tol && tt <= t4 + tol, "{m:?} r={r}: {th} {tt} {t4}");
            assert!(3.0 * th <= al + tol && al <= 13.0 * t4 + tol, "{m:?} r={r}: {al}");
        }
    }
}

#[test]
fn boundary_of_reduced_domain_solves_level_equation() {
    let dom = curved(3);
    let frame = TransformFrame::new(dom, [0.1, -0.05]);
    for k in 0..20 {
        let a = k as f64 * 0.31;
        let yh = [0.3 * a.cos(), 0.3 * a.sin()];
        let h = frame.boundary_height(&yh);
        let y = [yh[0], yh[1], h];
        assert!(frame.level(&y).abs() < 1e-12);
    }
}

#[test]
fn scale_conditions_are_enforced() {
    let phi = Arc::new(RadialPowerGraph { coef: 0.05, exponent: 1.5 });
    assert!(GraphDomain::new(2, phi.clone(), DiniModulus::power(0.075, 0.5).unwrap(), 1e-3).is_ok());
    assert!(GraphDomain::new(2, phi, DiniModulus::power(0.075, 0.5).unwrap(), 1.0).is_err());
    assert!(GraphDomain::flat(2, DiniModulus::constant(0.001).unwrap(), 1.0).is_err());
}
