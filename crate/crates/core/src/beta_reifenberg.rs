//! L² beta-numbers of discrete measures, Dini beta sums, and the beta versus
//! frequency-drop comparison.

use crate::error::{Error, Result};
use crate::frequency::{unified_value, FrequencyEngine, PointContext};
use crate::harmonic_fields::HarmonicField;
use crate::linalg::{dist, symmetric_eigen, Point};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A discrete Radon measure Σ w_i δ_{p_i}.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct WeightedCloud {
    pub dim: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Ball radii r_X when the cloud is a packing measure Σ r_X^k δ_X.
    pub radii: Option<Vec<f64>>,
}

impl WeightedCloud {
    pub fn new(dim: usize, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim}")));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidParameter("points and weights differ in length".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        Ok(WeightedCloud { dim, points, weights, radii: None })
    }

    pub fn unit(dim: usize, points: Vec<Point>) -> Result<Self> {
        let w = vec![1.0; points.len()];
        Self::new(dim, points, w)
    }

    /// Σ ω r_X^k δ_X over a family of balls.
    pub fn packing(dim: usize, centers: Vec<Point>, radii: Vec<f64>, k: usize) -> Result<Self> {
        let w = radii.iter().map(|r| r.powi(k as i32)).collect();
        let mut c = Self::new(dim, centers, w)?;
        c.radii = Some(radii);
        Ok(c)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn mass_in(&self, p: &Point, r: f64) -> f64 {
        self.points.iter().zip(&self.weights).filter(|(y, _)| dist(y, p) <= r).map(|(_, w)| w).sum()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BetaResult {
    pub center: Point,
    pub radius: f64,
    pub k: usize,
    pub mass: f64,
    pub center_of_mass: Point,
    /// Decreasing.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub beta: f64,
    /// Leading k eigenvectors; the plane is center_of_mass + span.
    pub plane: Vec<Vec<f64>>,
    pub empty: bool,
}

fn moment_beta(atoms: &[(Point, f64)], dim: usize, p: &Point, r: f64, k: usize) -> BetaResult {
    let mass: f64 = atoms.iter().map(|a| a.1).sum();
    if mass <= 0.0 {
        return BetaResult {
            center: *p,
            radius: r,
            k,
            mass: 0.0,
            center_of_mass: *p,
            eigenvalues: vec![0.0; dim],
            eigenvectors: (0..dim).map(|i| (0..dim).map(|j| (i == j) as u8 as f64).collect()).collect(),
            beta: 0.0,
            plane: (0..k).map(|i| (0..dim).map(|j| (i == j) as u8 as f64).collect()).collect(),
            empty: true,
        };
    }
    let mut c = [0.0; 3];
    for (y, w) in atoms {
        for j in 0..dim {
            c[j] += w * y[j];
        }
    }
    for cj in c.iter_mut().take(dim) {
        *cj /= mass;
    }
    let norm = r.powi(-(2 + k as i32));
    let mut q = vec![0.0; dim * dim];
    for (y, w) in atoms {
        for i in 0..dim {
            for j in 0..dim {
                q[i * dim + j] += w * (y[i] - c[i]) * (y[j] - c[j]);
            }
        }
    }
    for v in q.iter_mut() {
        *v *= norm;
    }
    let (vals, vecs) = symmetric_eigen(&q, dim);
    // eigenvalues at roundoff level relative to the trace are exact zeros
    let tr: f64 = vals.iter().map(|v| v.abs()).sum();
    let floor = 64.0 * f64::EPSILON * tr;
    let vals: Vec<f64> = vals.into_iter().map(|v| if v <= floor { 0.0 } else { v }).collect();
    let beta2: f64 = vals[k.min(dim)..].iter().sum();
    BetaResult {
        center: *p,
        radius: r,
        k,
        mass,
        center_of_mass: c,
        plane: vecs[..k].to_vec(),
        eigenvalues: vals,
        eigenvectors: vecs,
        beta: beta2.sqrt(),
        empty: false,
    }
}

/// β^k_μ(p, r) from the trailing eigenvalues of the second-moment form on B_r(p).
pub fn beta_number(mu: &WeightedCloud, p: &Point, r: f64, k: usize) -> Result<BetaResult> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {r}")));
    }
    if k == 0 || k >= mu.dim {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= d-1, got k={k}")));
    }
    let atoms: Vec<(Point, f64)> = mu
        .points
        .iter()
        .zip(&mu.weights)
        .filter(|(y, w)| **w > 0.0 && dist(y, p) <= r)
        .map(|(y, w)| (*y, *w))
        .collect();
    Ok(moment_beta(&atoms, mu.dim, p, r, k))
}

/// Largest allowed ratio of the radial grid.
pub const MAX_GRID_RATIO: f64 = 1.189_207_115_002_721;

/// ∫_{B_s(p₀)} ∫₀^s β²(X, r) dr/r dμ(X), trapezoid in log r on a geometric grid
/// of the given ratio, restarted at every radius where the ball picks up an atom.
pub fn dini_beta_integral(mu: &WeightedCloud, p0: &Point, s: f64, k: usize, ratio: f64) -> Result<f64> {
    if !(ratio > 1.0 && ratio <= MAX_GRID_RATIO * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("radial grid ratio {ratio} outside (1, 2^(1/4)]")));
    }
    if k == 0 || k >= mu.dim {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= d-1, got k={k}")));
    }
    let idx: Vec<usize> = (0..mu.points.len())
        .filter(|&i| mu.weights[i] > 0.0 && dist(&mu.points[i], p0) <= s)
        .collect();
    let h = ratio.ln();
    let per: Vec<f64> = idx
        .par_iter()
        .map(|&i| {
            let x = mu.points[i];
            // β vanishes while the ball holds one atom, and below r_X/5 for packings.
            let floor = mu.radii.as_ref().map_or(0.0, |r| r[i] / 5.0);
            let mut near: Vec<(f64, usize)> = (0..mu.points.len())
                .filter(|&j| mu.weights[j] > 0.0)
                .map(|j| (dist(&mu.points[j], &x), j))
                .filter(|(d, _)| *d <= s)
                .collect();
            near.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut breaks: Vec<f64> = near.iter().map(|n| n.0).filter(|d| *d > 0.0 && *d > floor).collect();
            breaks.dedup();
            breaks.push(s);
            breaks.retain(|b| *b <= s);
            breaks.dedup();
            let mut total = 0.0;
            for w in breaks.windows(2) {
                let (a, b) = (w[0], w[1]);
                if b <= a {
                    continue;
                }
                let atoms: Vec<(Point, f64)> =
                    near.iter().filter(|n| n.0 <= a).map(|n| (mu.points[n.1], mu.weights[n.1])).collect();
                let f = |r: f64| moment_beta(&atoms, mu.dim, &x, r, k).beta.powi(2);
                let len = (b / a).ln();
                let n = (len / h).ceil().max(1.0) as usize;
                let step = len / n as f64;
                let mut acc = 0.5 * (f(a) + f(b));
                for j in 1..n {
                    acc += f(a * (step * j as f64).exp());
                }
                total += acc * step;
            }
            mu.weights[i] * total
        })
        .collect();
    Ok(per.iter().sum())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BetaBoundReport {
    pub center: Point,
    pub radius: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub drop_term: f64,
    pub geometry_term: f64,
    pub mass: f64,
    /// lhs / rhs, an empirical proxy for the constant of the inequality.
    pub ratio: f64,
}

/// Compares |β^{d−2}_μ(p,r)|² with
/// r^{−(d−2)}∫(W̃_X(r) + δ_in·χ_X)dμ + μ(B_r(p))·r^{−(d−2)}·(r + θ(24r)).
/// χ_X = 1 when the interior point X switches to the replaced boundary branch below 6r.
pub fn beta_frequency_bound_check(
    f: &HarmonicField,
    engine: &FrequencyEngine,
    mu: &WeightedCloud,
    p: &Point,
    r: f64,
    delta_in: f64,
) -> Result<BetaBoundReport> {
    let dim = f.domain.dim;
    let k = dim - 2;
    if k == 0 {
        return Err(Error::InvalidParameter("beta^(d-2) needs d = 3".into()));
    }
    let b = beta_number(mu, p, r, k)?;
    let lhs = b.beta * b.beta;
    let inside: Vec<usize> = (0..mu.points.len())
        .filter(|&i| mu.weights[i] > 0.0 && dist(&mu.points[i], p) <= r)
        .collect();
    let terms: Vec<f64> = inside
        .par_iter()
        .map(|&i| -> Result<f64> {
            let x = mu.points[i];
            let ctx = PointContext::new(&f.domain, &x)?;
            let n6 = unified_value(&engine.unified_sample(f, &x, 6.0 * r, &ctx)?);
            let n1 = unified_value(&engine.unified_sample(f, &x, r, &ctx)?);
            let chi = match &ctx {
                PointContext::Interior { critical, .. } if critical.value() < 6.0 * r => 1.0,
                _ => 0.0,
            };
            Ok(mu.weights[i] * ((n6 - n1) + delta_in * chi))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = r.powi(-(k as i32));
    let drop_term = scale * terms.iter().sum::<f64>();
    let geometry_term = b.mass * scale * (r + f.domain.modulus.theta(24.0 * r));
    let rhs = drop_term + geometry_term;
    let ratio = if lhs == 0.0 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    };
    Ok(BetaBoundReport { center: *p, radius: r, lhs, rhs, drop_term, geometry_term, mass: b.mass, ratio })
}
