use freqstrat::beta_reifenberg::WeightedCloud;
use freqstrat::linalg::Point;
use std::f64::consts::PI;

pub fn unit_dir(t: f64, p: f64) -> Point {
    [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
}

/// r^{-(2+k)} Σ w·dist(Y, L)² with L through the weighted centroid; `dir` is the line
/// direction for k = 1 or the plane normal for k = d − 1.
pub fn plane_cost(pts: &[(Point, f64)], dim: usize, k: usize, r: f64, dir: &Point) -> f64 {
    let m: f64 = pts.iter().map(|p| p.1).sum();
    let mut c = [0.0; 3];
    for (y, w) in pts {
        for j in 0..3 {
            c[j] += w * y[j] / m;
        }
    }
    let mut s = 0.0;
    for (y, w) in pts {
        let v = [y[0] - c[0], y[1] - c[1], y[2] - c[2]];
        let along = v[0] * dir[0] + v[1] * dir[1] + v[2] * dir[2];
        let d2 = if k == dim - 1 { along * along } else { v.iter().map(|x| x * x).sum::<f64>() - along * along };
        s += w * d2;
    }
    s / r.powi(2 + k as i32)
}

/// Dense angle grid followed by compass search over the orientation.
pub fn oracle_beta(pts: &[(Point, f64)], dim: usize, k: usize, r: f64) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    if dim == 2 {
        let f = |a: f64| plane_cost(pts, 2, k, r, &[a.cos(), a.sin(), 0.0]);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..3600 {
            let a = PI * i as f64 / 3600.0;
            let v = f(a);
            if v < best.0 {
                best = (v, a);
            }
        }
        let mut step = PI / 3600.0;
        while step > 1e-15 {
            let (l, h) = (f(best.1 - step), f(best.1 + step));
            if l < best.0 {
                best = (l, best.1 - step);
            } else if h < best.0 {
                best = (h, best.1 + step);
            } else {
                step *= 0.5;
            }
        }
        return best.0.max(0.0).sqrt();
    }
    let f = |t: f64, p: f64| plane_cost(pts, 3, k, r, &unit_dir(t, p));
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=180 {
        for j in 0..360 {
            let (t, p) = (PI * i as f64 / 180.0, 2.0 * PI * j as f64 / 360.0);
            let v = f(t, p);
            if v < best.0 {
                best = (v, t, p);
            }
        }
    }
    let mut step = PI / 180.0;
    while step > 1e-15 {
        let mut moved = false;
        for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step), (step, step), (-step, -step), (step, -step), (-step, step)] {
            let v = f(best.1 + dt, best.2 + dp);
            if v < best.0 {
                best = (v, best.1 + dt, best.2 + dp);
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best.0.max(0.0).sqrt()
}

pub fn in_ball(mu: &WeightedCloud, p: &Point, r: f64) -> Vec<(Point, f64)> {
    mu.points
        .iter()
        .zip(&mu.weights)
        .filter(|(y, _)| ((y[0] - p[0]).powi(2) + (y[1] - p[1]).powi(2) + (y[2] - p[2]).powi(2)).sqrt() <= r)
        .map(|(y, w)| (*y, *w))
        .collect()
}

