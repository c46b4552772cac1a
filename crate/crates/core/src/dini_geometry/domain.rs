use super::modulus::{DiniModulus, ModulusValues};
use crate::error::{Error, Result};
use crate::linalg::{dist, Point};
use std::fmt::Debug;
use std::sync::Arc;

/// Horizontal coordinates x ∈ R^{d−1}, padded to two entries.
pub type Horizontal = [f64; 2];

/// Graph profile φ with an analytic gradient.
pub trait GraphFunction: Send + Sync + Debug {
    fn value(&self, x: &Horizontal) -> f64;
    fn gradient(&self, x: &Horizontal) -> Horizontal;
    fn is_flat(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FlatGraph;

impl GraphFunction for FlatGraph {
    fn value(&self, _x: &Horizontal) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &Horizontal) -> Horizontal {
        [0.0, 0.0]
    }
    fn is_flat(&self) -> bool {
        true
    }
}

/// φ(x) = coef·|x|^exponent with exponent > 1.
#[derive(Clone, Copy, Debug)]
pub struct RadialPowerGraph {
    pub coef: f64,
    pub exponent: f64,
}

impl GraphFunction for RadialPowerGraph {
    fn value(&self, x: &Horizontal) -> f64 {
        let s = (x[0] * x[0] + x[1] * x[1]).sqrt();
        self.coef * s.powf(self.exponent)
    }
    fn gradient(&self, x: &Horizontal) -> Horizontal {
        let s = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if s == 0.0 {
            return [0.0, 0.0];
        }
        let f = self.coef * self.exponent * s.powf(self.exponent - 2.0);
        [f * x[0], f * x[1]]
    }
}

/// A graph domain D = {x_d > φ(x)} with its Dini modulus and working scale R.
#[derive(Clone, Debug)]
pub struct GraphDomain {
    pub dim: usize,
    pub phi: Arc<dyn GraphFunction>,
    pub modulus: DiniModulus,
    pub scale: f64,
    pub lipschitz: f64,
}

impl GraphDomain {
    /// Builds a domain and enforces the scale conditions θ(8R) < 1/72 and ∫₀^{16R}θ/s ≤ 1.
    pub fn new(dim: usize, phi: Arc<dyn GraphFunction>, modulus: DiniModulus, scale: f64) -> Result<Self> {
        let d = Self::new_unchecked(dim, phi, modulus, scale)?;
        let t8 = modulus.theta(8.0 * scale);
        if t8 >= 1.0 / 72.0 {
            return Err(Error::DomainCondition(format!("theta(8R) = {t8} >= 1/72")));
        }
        let di = modulus.dini(16.0 * scale);
        if !(di <= 1.0) {
            return Err(Error::DomainCondition(format!("Dini integral to 16R = {di} > 1")));
        }
        Ok(d)
    }

    /// Same as [`GraphDomain::new`] without the scale conditions.
    pub fn new_unchecked(
        dim: usize,
        phi: Arc<dyn GraphFunction>,
        modulus: DiniModulus,
        scale: f64,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in {{2, 3}}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale R = {scale}")));
        }
        let p0 = phi.value(&[0.0, 0.0]);
        let g0 = phi.gradient(&[0.0, 0.0]);
        if p0.abs() > 1e-14 || g0[0].abs() > 1e-14 || g0[1].abs() > 1e-14 {
            return Err(Error::InvalidParameter("graph must satisfy phi(0) = 0, grad phi(0) = 0".into()));
        }
        let mut lipschitz: f64 = 0.0;
        let n = 64;
        for i in 0..=n {
            for j in 0..=(if dim == 3 { n } else { 0 }) {
                let x = [
                    5.0 * scale * (2.0 * i as f64 / n as f64 - 1.0),
                    if dim == 3 { 5.0 * scale * (2.0 * j as f64 / n as f64 - 1.0) } else { 0.0 },
                ];
                let g = phi.gradient(&x);
                lipschitz = lipschitz.max((g[0] * g[0] + g[1] * g[1]).sqrt());
            }
        }
        Ok(GraphDomain { dim, phi, modulus, scale, lipschitz })
    }

    pub fn flat(dim: usize, modulus: DiniModulus, scale: f64) -> Result<Self> {
        Self::new(dim, Arc::new(FlatGraph), modulus, scale)
    }

    pub fn is_flat(&self) -> bool {
        self.phi.is_flat()
    }

    /// Index of the vertical coordinate.
    pub fn vertical(&self) -> usize {
        self.dim - 1
    }

    pub fn horizontal(&self, p: &Point) -> Horizontal {
        if self.dim == 2 {
            [p[0], 0.0]
        } else {
            [p[0], p[1]]
        }
    }

    pub fn point(&self, x: &Horizontal, xd: f64) -> Point {
        if self.dim == 2 {
            [x[0], xd, 0.0]
        } else {
            [x[0], x[1], xd]
        }
    }

    pub fn phi_at(&self, x: &Horizontal) -> f64 {
        self.phi.value(x)
    }

    /// x_d − φ(x); positive inside D.
    pub fn level(&self, p: &Point) -> f64 {
        p[self.vertical()] - self.phi.value(&self.horizontal(p))
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.level(p) > 0.0
    }

    pub fn in_closure(&self, p: &Point) -> bool {
        self.level(p) >= 0.0
    }

    /// Boundary point above horizontal position x.
    pub fn boundary_point(&self, x: &Horizontal) -> Point {
        self.point(x, self.phi.value(x))
    }

    pub fn modulus_values(&self, r: f64) -> Result<ModulusValues> {
        if !(r > 0.0 && r <= 16.0 * self.scale) {
            return Err(Error::RadiusOutOfRange { r, max: 16.0 * self.scale });
        }
        self.modulus.values(r)
    }

    /// Nearest point of the graph to `p`, by damped fixed-point iteration on the
    /// stationarity condition (x − x_p) + (φ(x) − p_d)∇φ(x) = 0.
    pub fn nearest_boundary_point(&self, p: &Point) -> Point {
        let xp = self.horizontal(p);
        let pd = p[self.vertical()];
        if self.is_flat() {
            return self.boundary_point(&xp);
        }
        let mut x = xp;
        for _ in 0..500 {
            let g = self.phi.gradient(&x);
            let f = self.phi.value(&x) - pd;
            let target = [xp[0] - f * g[0], xp[1] - f * g[1]];
            let nx = [0.5 * (x[0] + target[0]), 0.5 * (x[1] + target[1])];
            let step = ((nx[0] - x[0]).powi(2) + (nx[1] - x[1]).powi(2)).sqrt();
            x = nx;
            if step < 1e-16 * (1.0 + p[0].abs() + p[1].abs()) {
                break;
            }
        }
        if self.dim == 2 {
            x[1] = 0.0;
        }
        self.boundary_point(&x)
    }

    pub fn boundary_distance(&self, p: &Point) -> f64 {
        dist(p, &self.nearest_boundary_point(p))
    }

    /// Largest observed ratio |∇φ(x) − ∇φ(y)| / θ(|x − y|) over a sample grid in B_{5R}.
    pub fn gradient_modulus_ratio(&self, samples_per_axis: usize) -> f64 {
        let n = samples_per_axis.max(2);
        let mut pts = Vec::new();
        let span = 5.0 * self.scale;
        for i in 0..n {
            for j in 0..(if self.dim == 3 { n } else { 1 }) {
                let x = [
                    span * (2.0 * (i as f64 + 0.5) / n as f64 - 1.0),
                    if self.dim == 3 { span * (2.0 * (j as f64 + 0.5) / n as f64 - 1.0) } else { 0.0 },
                ];
                pts.push((x, self.phi.gradient(&x)));
            }
        }
        pts.push(([0.0, 0.0], [0.0, 0.0]));
        let mut worst: f64 = 0.0;
        for (a, (xa, ga)) in pts.iter().enumerate() {
            for (xb, gb) in pts.iter().skip(a + 1) {
                let dx = ((xa[0] - xb[0]).powi(2) + (xa[1] - xb[1]).powi(2)).sqrt();
                let dg = ((ga[0] - gb[0]).powi(2) + (ga[1] - gb[1]).powi(2)).sqrt();
                let t = self.modulus.theta(dx);
                if dg > 0.0 {
                    worst = worst.max(if t > 0.0 { dg / t } else { f64::INFINITY });
                }
            }
        }
        worst
    }
}
