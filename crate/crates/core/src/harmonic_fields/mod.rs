//! Harmonic fields vanishing on the boundary: closed-form models and a grid solver.

mod grid;
mod model;

pub use grid::{GridField, GridMeta};
pub use model::{ModelField, ModelSpec, PolyTerm, MODEL_NAMES};

use crate::dini_geometry::GraphDomain;
use crate::error::{Error, Result};
use crate::linalg::{add, scale, Mat, Point};
use crate::quadrature::{ClippedRule, SphereRule};
use std::sync::Arc;

/// Anything that can be integrated by the frequency and singular-set code.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;
    /// Positive inside the domain of the field.
    fn level(&self, p: &Point) -> f64;
    /// Value and gradient with zero extension outside the domain.
    fn value_grad(&self, p: &Point) -> Result<(f64, Point)>;
    /// One-sided value and gradient, ignoring the zero extension (for boundary traces).
    fn value_grad_inside(&self, p: &Point) -> Result<(f64, Point)>;
}

#[derive(Clone, Debug)]
pub enum FieldKind {
    Closed(Arc<ModelField>),
    Grid(Arc<GridField>),
}

#[derive(Clone, Debug)]
pub struct HarmonicField {
    pub domain: Arc<GraphDomain>,
    pub kind: FieldKind,
}

/// Builds a closed-form model field. Model fields vanish on {x_d = 0}, so the domain must be flat.
pub fn make_model_field(domain: Arc<GraphDomain>, spec: ModelSpec) -> Result<HarmonicField> {
    if !domain.is_flat() {
        return Err(Error::InvalidParameter(
            "closed-form fields vanish on a flat boundary only; use the grid solver".into(),
        ));
    }
    let m = ModelField::new(domain.dim, spec)?;
    Ok(HarmonicField { domain, kind: FieldKind::Closed(Arc::new(m)) })
}

/// Solves for the harmonic function with the given trace on the half-box of half-width 5R.
/// `trace` is evaluated in flattened coordinates (x, x_d − φ(x)).
pub fn solve_dirichlet(
    domain: Arc<GraphDomain>,
    trace: &dyn Fn(&Point) -> f64,
    resolution: usize,
) -> Result<HarmonicField> {
    let g = grid::solve(&domain, trace, resolution, 5.0 * domain.scale)?;
    Ok(HarmonicField { domain, kind: FieldKind::Grid(Arc::new(g)) })
}

impl HarmonicField {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            FieldKind::Closed(_) => "closed",
            FieldKind::Grid(_) => "grid",
        }
    }

    pub fn grid(&self) -> Option<&GridField> {
        match &self.kind {
            FieldKind::Grid(g) => Some(g),
            _ => None,
        }
    }

    /// True when the field vanishes identically (zero grid solve).
    pub fn is_trivial(&self) -> bool {
        match &self.kind {
            FieldKind::Grid(g) => g.max_abs() == 0.0,
            FieldKind::Closed(_) => false,
        }
    }

    fn flattened(&self, p: &Point) -> Point {
        let mut q = *p;
        let v = self.domain.vertical();
        q[v] = self.domain.level(p);
        q
    }

    fn grid_eval(&self, g: &GridField, p: &Point, clip: bool) -> Result<(f64, Point)> {
        let mut q = self.flattened(p);
        let v = self.domain.vertical();
        if q[v] < 0.0 {
            if clip {
                q[v] = 0.0;
                g.interpolate(&q)?;
                return Ok((0.0, [0.0; 3]));
            }
            q[v] = 0.0;
        }
        let (u, gf) = g.interpolate(&q)?;
        let gphi = self.domain.phi.gradient(&self.domain.horizontal(p));
        let mut grad = [0.0; 3];
        for k in 0..v {
            grad[k] = gf[k] - gphi[k] * gf[v];
        }
        grad[v] = gf[v];
        Ok((u, grad))
    }

    /// Value and gradient; zero extension below the graph.
    pub fn eval(&self, p: &Point) -> Result<(f64, Point)> {
        match &self.kind {
            FieldKind::Closed(m) => {
                if self.domain.level(p) < 0.0 {
                    Ok((0.0, [0.0; 3]))
                } else {
                    Ok(m.value_grad(p))
                }
            }
            FieldKind::Grid(g) => self.grid_eval(g, p, true),
        }
    }

    pub fn eval_inside(&self, p: &Point) -> Result<(f64, Point)> {
        match &self.kind {
            FieldKind::Closed(m) => Ok(m.value_grad(p)),
            FieldKind::Grid(g) => self.grid_eval(g, p, false),
        }
    }

    /// Hessian: analytic for closed forms, central differences of the gradient on grids.
    pub fn hessian(&self, p: &Point) -> Result<Mat> {
        match &self.kind {
            FieldKind::Closed(m) => Ok(m.hessian(p)),
            FieldKind::Grid(g) => {
                let d = self.domain.dim;
                let s = 0.5 * g.meta.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
                let mut h = [[0.0; 3]; 3];
                for i in 0..d {
                    let mut e = [0.0; 3];
                    e[i] = s;
                    let (_, gp) = self.eval_inside(&add(p, &e))?;
                    let (_, gm) = self.eval_inside(&add(p, &scale(&e, -1.0)))?;
                    for j in 0..d {
                        h[i][j] = (gp[j] - gm[j]) / (2.0 * s);
                    }
                }
                for i in 0..d {
                    for j in (i + 1)..d {
                        let m = 0.5 * (h[i][j] + h[j][i]);
                        h[i][j] = m;
                        h[j][i] = m;
                    }
                }
                Ok(h)
            }
        }
    }
}

impl Field for HarmonicField {
    fn dim(&self) -> usize {
        self.domain.dim
    }
    fn level(&self, p: &Point) -> f64 {
        self.domain.level(p)
    }
    fn value_grad(&self, p: &Point) -> Result<(f64, Point)> {
        self.eval(p)
    }
    fn value_grad_inside(&self, p: &Point) -> Result<(f64, Point)> {
        self.eval_inside(p)
    }
}

/// T_{X,r}u(Y) = (u(X + rY) − u(X)) / normalizer.
#[derive(Clone, Debug)]
pub struct RescaledField {
    pub base: HarmonicField,
    pub center: Point,
    pub radius: f64,
    pub normalizer: f64,
    pub center_value: f64,
}

/// (1/r^d)∬_{B_r(X)∩D}|u − u(X)|², by the clipped ball rule.
pub fn l2_average(f: &dyn Field, x: &Point, r: f64, rule: &ClippedRule) -> Result<(f64, f64)> {
    let (ux, _) = f.value_grad(x)?;
    let mut nodes = Vec::new();
    rule.ball_nodes(r, &|y: &Point| f.level(&add(x, y)), &mut nodes);
    let mut s = 0.0;
    for n in &nodes {
        let (u, _) = f.value_grad(&add(x, &n.point))?;
        s += n.weight * (u - ux) * (u - ux);
    }
    Ok((s / r.powi(f.dim() as i32), ux))
}

pub fn rescale_field(f: &HarmonicField, x: &Point, r: f64) -> Result<RescaledField> {
    let rule = ClippedRule::new(f.domain.dim, SphereRule::standard(f.domain.dim));
    let (avg, ux) = l2_average(f, x, r, &rule)?;
    if !(avg > 1e-300) {
        return Err(Error::DegenerateHeight(avg));
    }
    Ok(RescaledField { base: f.clone(), center: *x, radius: r, normalizer: avg.sqrt(), center_value: ux })
}

impl RescaledField {
    fn to_base(&self, y: &Point) -> Point {
        add(&self.center, &scale(y, self.radius))
    }
}

impl Field for RescaledField {
    fn dim(&self) -> usize {
        self.base.domain.dim
    }
    fn level(&self, y: &Point) -> f64 {
        self.base.domain.level(&self.to_base(y))
    }
    fn value_grad(&self, y: &Point) -> Result<(f64, Point)> {
        let (u, g) = self.base.eval(&self.to_base(y))?;
        Ok(((u - self.center_value) / self.normalizer, scale(&g, self.radius / self.normalizer)))
    }
    fn value_grad_inside(&self, y: &Point) -> Result<(f64, Point)> {
        let (u, g) = self.base.eval_inside(&self.to_base(y))?;
        Ok(((u - self.center_value) / self.normalizer, scale(&g, self.radius / self.normalizer)))
    }
}
