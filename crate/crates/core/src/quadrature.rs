//! Gauss–Legendre rules, adaptive Gauss–Kronrod and clipped sphere / ball rules.

use crate::linalg::Point;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }

    /// Nodes mapped to [a, b] with scaled weights.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, w * h))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration with absolute-or-relative tolerance.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    let (whole, _) = gk15(&mut f, a, b);
    let scale = whole.abs().max(1e-300);
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = gk15(&mut f, lo, hi);
        let width = (hi - lo) / (b - a);
        if err <= tol * scale * width.max(1e-6) || depth >= 40 || err <= 1e-15 * v.abs() {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    total
}

/// Resolution of the clipped sphere / ball rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereRule {
    /// Radial Gauss–Legendre nodes for ball integrals.
    pub radial: usize,
    /// Gauss–Legendre nodes per inside arc (polar pieces in d = 3).
    pub angular: usize,
    /// Trapezoid nodes in azimuth (d = 3 only).
    pub azimuth: usize,
    /// Samples used to locate sign changes of the level function.
    pub scan: usize,
}

impl SphereRule {
    pub fn standard(dim: usize) -> Self {
        if dim == 2 {
            SphereRule { radial: 64, angular: 128, azimuth: 1, scan: 96 }
        } else {
            SphereRule { radial: 48, angular: 32, azimuth: 64, scan: 32 }
        }
    }

    pub fn coarse(dim: usize) -> Self {
        if dim == 2 {
            SphereRule { radial: 24, angular: 48, azimuth: 1, scan: 48 }
        } else {
            SphereRule { radial: 16, angular: 16, azimuth: 32, scan: 16 }
        }
    }
}

/// A quadrature node on a sphere of radius `r`: relative position, unit direction, weight.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub point: Point,
    pub dir: Point,
    pub weight: f64,
}

/// Precomputed rule tables.
#[derive(Clone, Debug)]
pub struct ClippedRule {
    pub dim: usize,
    pub spec: SphereRule,
    radial: GaussLegendre,
    angular: GaussLegendre,
}

fn direction(dim: usize, a: f64, b: f64) -> Point {
    if dim == 2 {
        [a.cos(), a.sin(), 0.0]
    } else {
        let s = a.sin();
        [s * b.cos(), s * b.sin(), a.cos()]
    }
}

fn bisect<L: Fn(f64) -> f64>(level: &L, mut lo: f64, mut hi: f64) -> f64 {
    let flo = level(lo) > 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (level(mid) > 0.0) == flo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Splits [a, b] at sign changes of `level` and returns the sub-intervals where it is positive.
fn inside_intervals<L: Fn(f64) -> f64>(level: &L, a: f64, b: f64, scan: usize) -> Vec<(f64, f64)> {
    let mut cuts = vec![a];
    let step = (b - a) / scan as f64;
    let mut prev = level(a) > 0.0;
    for k in 1..=scan {
        let t = a + step * k as f64;
        let cur = level(t) > 0.0;
        if cur != prev {
            cuts.push(bisect(level, t - step, t));
        }
        prev = cur;
    }
    cuts.push(b);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        if level(mid) > 0.0 {
            out.push((w[0], w[1]));
        }
    }
    out
}

impl ClippedRule {
    pub fn new(dim: usize, spec: SphereRule) -> Self {
        assert!(dim == 2 || dim == 3, "dimension must be 2 or 3");
        ClippedRule {
            dim,
            spec,
            radial: GaussLegendre::new(spec.radial),
            angular: GaussLegendre::new(spec.angular),
        }
    }

    /// Nodes on the part of the sphere of radius `r` (about the origin) where `level > 0`.
    /// Weights include the surface measure.
    pub fn sphere_nodes<L: Fn(&Point) -> f64>(&self, r: f64, level: &L, out: &mut Vec<Node>) {
        let scan = self.spec.scan;
        if self.dim == 2 {
            let lv = |t: f64| level(&crate::linalg::scale(&direction(2, t, 0.0), r));
            // Scan starts slightly off the axes so flat boundaries do not land on samples.
            let t0 = -PI + 1e-3;
            for (a, b) in inside_intervals(&lv, t0, t0 + 2.0 * PI, scan) {
                for (t, w) in self.angular.mapped(a, b) {
                    let dir = direction(2, t, 0.0);
                    out.push(Node { point: crate::linalg::scale(&dir, r), dir, weight: w * r });
                }
            }
        } else {
            let naz = self.spec.azimuth;
            let daz = 2.0 * PI / naz as f64;
            for j in 0..naz {
                let phi = daz * (j as f64 + 0.5);
                let lv = |t: f64| level(&crate::linalg::scale(&direction(3, t, phi), r));
                for (a, b) in inside_intervals(&lv, 0.0, PI, scan) {
                    for (t, w) in self.angular.mapped(a, b) {
                        let dir = direction(3, t, phi);
                        out.push(Node {
                            point: crate::linalg::scale(&dir, r),
                            dir,
                            weight: w * t.sin() * daz * r * r,
                        });
                    }
                }
            }
        }
    }

    /// Nodes in the part of the ball of radius `r` where `level > 0`, weights include volume.
    pub fn ball_nodes<L: Fn(&Point) -> f64>(&self, r: f64, level: &L, out: &mut Vec<Node>) {
        let mut shell = Vec::new();
        for (rho, w) in self.radial.mapped(0.0, r) {
            shell.clear();
            self.sphere_nodes(rho, level, &mut shell);
            for n in &shell {
                out.push(Node { weight: n.weight * w, ..*n });
            }
        }
    }
}
