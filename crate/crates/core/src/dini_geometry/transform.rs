use super::domain::{GraphDomain, Horizontal};
use crate::error::{Error, Result};
use crate::linalg::{add, det, dot, identity, inverse, mat_vec, norm, sub, Mat, Point};
use std::sync::Arc;

/// Matrix data induced by Ψ at a point.
#[derive(Clone, Copy, Debug)]
pub struct EllipticData {
    pub a: Mat,
    pub eta_tilde: f64,
    pub mu: f64,
    pub g: Mat,
    pub jacobian: Mat,
    pub det_jacobian: f64,
}

/// The reduction map Ψ based at a boundary point X₀.
#[derive(Clone, Debug)]
pub struct TransformFrame {
    pub domain: Arc<GraphDomain>,
    pub base: Point,
    base_h: Horizontal,
    base_phi: f64,
}

impl TransformFrame {
    /// `x0` is the horizontal position of the base point; X₀ = (x0, φ(x0)).
    pub fn new(domain: Arc<GraphDomain>, x0: Horizontal) -> Self {
        let base = domain.boundary_point(&x0);
        let base_phi = base[domain.vertical()];
        let base_h = domain.horizontal(&base);
        TransformFrame { domain, base, base_h, base_phi }
    }

    /// Frame at a point assumed to lie on ∂D.
    pub fn at_point(domain: Arc<GraphDomain>, x: &Point) -> Result<Self> {
        let lv = domain.level(x);
        if lv.abs() > 1e-10 * (1.0 + norm(x)) {
            return Err(Error::NotOnBoundary(lv));
        }
        let h = domain.horizontal(x);
        Ok(Self::new(domain, h))
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    fn shift(&self, rho: f64) -> f64 {
        3.0 * rho * self.domain.modulus.theta_tilde(rho)
    }

    fn check_radius(&self, rho: f64) -> Result<()> {
        let max = 2.0 * self.domain.scale;
        if rho > max * (1.0 + 1e-12) {
            return Err(Error::RadiusOutOfRange { r: rho, max });
        }
        Ok(())
    }

    /// Ψ without the range check.
    pub fn psi(&self, y: &Point) -> Point {
        let mut z = add(&self.base, y);
        z[self.domain.vertical()] += self.shift(norm(y));
        z
    }

    pub fn map_psi(&self, y: &Point) -> Result<Point> {
        self.check_radius(norm(y))?;
        Ok(self.psi(y))
    }

    /// Inverse of Ψ by damped fixed-point iteration on the vertical coordinate.
    pub fn inverse_psi(&self, z: &Point) -> Result<Point> {
        let v = self.domain.vertical();
        let rel = sub(z, &self.base);
        let mut y = rel;
        let scale = norm(&rel).max(1e-300);
        for _ in 0..200 {
            let target = rel[v] - self.shift(norm(&y));
            let next = 0.5 * y[v] + 0.5 * target;
            let delta = (next - y[v]).abs();
            y[v] = next;
            if delta <= 1e-15 * scale {
                let back = self.psi(&y);
                if norm(&sub(&back, z)) <= 1e-12 * (1.0 + norm(z)) {
                    self.check_radius(norm(&y))?;
                    return Ok(y);
                }
            }
        }
        let back = self.psi(&y);
        if norm(&sub(&back, z)) <= 1e-12 * (1.0 + norm(z)) {
            self.check_radius(norm(&y))?;
            return Ok(y);
        }
        Err(Error::NoConvergence("inverse of Psi".into()))
    }

    /// DΨ(Y) = I + e_d wᵀ with w = α(|Y|)·Y/|Y|.
    pub fn jacobian(&self, y: &Point) -> Mat {
        let d = self.dim();
        let mut j = identity(d);
        let rho = norm(y);
        if rho > 0.0 {
            let a = self.domain.modulus.alpha(rho);
            for (k, jk) in j[d - 1].iter_mut().enumerate().take(d) {
                *jk += a * y[k] / rho;
            }
        }
        j
    }

    /// A, η̃, μ and g at Y, unchecked radius.
    pub fn elliptic_unchecked(&self, y: &Point) -> EllipticData {
        let d = self.dim();
        let rho = norm(y);
        let id = identity(d);
        if rho == 0.0 || self.domain.modulus.is_zero() {
            return EllipticData { a: id, eta_tilde: 1.0, mu: 1.0, g: id, jacobian: id, det_jacobian: 1.0 };
        }
        let alpha = self.domain.modulus.alpha(rho);
        let mut w = [0.0; 3];
        for k in 0..d {
            w[k] = alpha * y[k] / rho;
        }
        let jac = self.jacobian(y);
        let detj = 1.0 + w[d - 1];
        // Sherman–Morrison inverse of I + e_d wᵀ
        let mut jinv = id;
        for k in 0..d {
            jinv[d - 1][k] -= w[k] / detj;
        }
        let mut a = [[0.0; 3]; 3];
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += jinv[i][k] * jinv[j][k];
                }
                a[i][j] = detj * s;
                a[j][i] = detj * s;
            }
        }
        let ay = mat_vec(&a, y);
        let eta = dot(&ay, y) / (rho * rho);
        let mu = (detj / eta).powf((d as f64 - 2.0) / 2.0);
        // g = η̃ A⁻¹ = (η̃ / det J) JᵀJ
        let mut g = [[0.0; 3]; 3];
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += jac[k][i] * jac[k][j];
                }
                g[i][j] = eta / detj * s;
                g[j][i] = g[i][j];
            }
        }
        EllipticData { a, eta_tilde: eta, mu, g, jacobian: jac, det_jacobian: detj }
    }

    pub fn elliptic_data(&self, y: &Point) -> Result<EllipticData> {
        self.check_radius(norm(y))?;
        let e = self.elliptic_unchecked(y);
        if !(e.det_jacobian > 0.0) || inverse(&e.jacobian, self.dim()).is_none() {
            return Err(Error::NoConvergence("singular Jacobian of Psi".into()));
        }
        debug_assert!((det(&e.jacobian, self.dim()) - e.det_jacobian).abs() < 1e-12);
        Ok(e)
    }

    /// Level function of Ω_{X₀} = Ψ⁻¹(D): positive inside.
    pub fn level(&self, y: &Point) -> f64 {
        let v = self.dim() - 1;
        let yh = self.domain.horizontal(y);
        let x = [self.base_h[0] + yh[0], self.base_h[1] + yh[1]];
        y[v] + self.shift(norm(y)) - (self.domain.phi.value(&x) - self.base_phi)
    }

    /// Height of ∂Ω_{X₀} above horizontal offset `yh`, by bisection in the vertical coordinate.
    pub fn boundary_height(&self, yh: &Horizontal) -> f64 {
        let pt = |t: f64| self.domain.point(yh, t);
        let x = [self.base_h[0] + yh[0], self.base_h[1] + yh[1]];
        let c = self.domain.phi.value(&x) - self.base_phi;
        let mut hi = c;
        if self.level(&pt(hi)) <= 0.0 {
            hi = c.abs() + 1.0;
        }
        let mut step = (yh[0].abs() + yh[1].abs()).max(1e-300);
        let mut lo = c - step;
        while self.level(&pt(lo)) > 0.0 {
            step *= 2.0;
            lo = c - step;
        }
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m == lo || m == hi || hi - lo <= 1e-16 * (lo.abs() + hi.abs()) {
                break;
            }
            if self.level(&pt(m)) > 0.0 {
                hi = m;
            } else {
                lo = m;
            }
        }
        0.5 * (lo + hi)
    }

    /// Gradient of the level function.
    pub fn level_gradient(&self, y: &Point) -> Point {
        let d = self.dim();
        let rho = norm(y);
        let alpha = if rho > 0.0 { self.domain.modulus.alpha(rho) } else { 0.0 };
        let yh = self.domain.horizontal(y);
        let x = [self.base_h[0] + yh[0], self.base_h[1] + yh[1]];
        let gp = self.domain.phi.gradient(&x);
        let mut g = [0.0; 3];
        for k in 0..d - 1 {
            g[k] = -gp[k] + if rho > 0.0 { alpha * y[k] / rho } else { 0.0 };
        }
        g[d - 1] = 1.0 + if rho > 0.0 { alpha * y[d - 1] / rho } else { 0.0 };
        g
    }

    /// Outward unit normal of Ω_{X₀} at a boundary point.
    pub fn outward_normal(&self, y: &Point) -> Point {
        let g = self.level_gradient(y);
        let n = norm(&g);
        [-g[0] / n, -g[1] / n, -g[2] / n]
    }

    /// ⟨A(X)X, n(X)⟩ at a point of ∂Ω_{X₀}.
    pub fn convexity_defect(&self, x: &Point) -> Result<f64> {
        let rho = norm(x);
        if rho == 0.0 {
            return Ok(0.0);
        }
        self.check_radius(rho)?;
        let lv = self.level(x);
        if lv.abs() > 1e-9 * (1.0 + rho) {
            return Err(Error::NotOnBoundary(lv));
        }
        let e = self.elliptic_unchecked(x);
        let n = self.outward_normal(x);
        Ok(dot(&mat_vec(&e.a, x), &n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dini_geometry::{DiniModulus, FlatGraph};

    fn frame(m: DiniModulus) -> TransformFrame {
        let d = GraphDomain::new_unchecked(3, Arc::new(FlatGraph), m, 1.0).unwrap();
        TransformFrame::new(Arc::new(d), [0.0, 0.0])
    }

    #[test]
    fn constant_modulus_shift() {
        let f = frame(DiniModulus::constant(0.01).unwrap());
        let z = f.map_psi(&[0.0, 0.0, 1.0]).unwrap();
        assert!((z[2] - 1.03).abs() < 1e-15);
        let y = f.inverse_psi(&[0.0, 0.0, 1.03]).unwrap();
        assert!((y[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_modulus_identity_data() {
        let f = frame(DiniModulus::zero());
        let e = f.elliptic_data(&[0.3, -0.2, 0.4]).unwrap();
        assert_eq!(e.a, identity(3));
        assert_eq!((e.eta_tilde, e.mu), (1.0, 1.0));
    }
}
