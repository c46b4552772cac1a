//! Boundary and interior frequency functions, critical scales, unified profiles,
//! monotonicity residuals and doubling diagnostics.

use crate::dini_geometry::{DiniModulus, GraphDomain, Horizontal, TransformFrame};
use crate::error::{Error, Result};
use crate::harmonic_fields::{Field, HarmonicField};
use crate::linalg::{add, dot, mat_t_vec, mat_vec, norm, sub, Point};
use crate::quadrature::{ClippedRule, GaussLegendre, SphereRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Heights at or below this are treated as a vanishing field.
pub const H_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirichletMode {
    /// Volume integral of ⟨A∇v, ∇v⟩ over the clipped ball.
    Volume,
    /// Sphere identity D = ∫ v⟨A∇v, X/|X|⟩, valid for exact solutions; much cheaper.
    Sphere,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Boundary,
    Interior,
    BoundaryReplaced,
}

impl Branch {
    pub fn tag(&self) -> &'static str {
        match self {
            Branch::Boundary => "boundary",
            Branch::Interior => "interior",
            Branch::BoundaryReplaced => "boundary-replaced",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FrequencySample {
    pub center: Point,
    pub radius: f64,
    pub dirichlet: f64,
    pub height: f64,
    pub frequency: f64,
    pub modified: f64,
    pub residual_h: f64,
    pub residual_b: f64,
    pub branch: Branch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum CriticalScale {
    Boundary,
    Scale(f64),
    BeyondRange,
}

impl CriticalScale {
    pub fn value(&self) -> f64 {
        match self {
            CriticalScale::Boundary => 0.0,
            CriticalScale::Scale(r) => *r,
            CriticalScale::BeyondRange => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub center: Point,
    pub radii: Vec<f64>,
    pub samples: Vec<FrequencySample>,
    /// N_X(r) per radius.
    pub values: Vec<f64>,
    pub critical_scale: CriticalScale,
    /// W_X(r) = N_X(3r/2) − N_X(r/2), when all radii are admissible.
    pub drops: Vec<Option<f64>>,
    /// W̃_X(r) = N_X(6r) − N_X(r).
    pub wide_drops: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoublingReport {
    pub r1: f64,
    pub r2: f64,
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Quadrature and ledger settings for frequency computations.
#[derive(Clone, Debug)]
pub struct FrequencyEngine {
    pub rule: ClippedRule,
    pub c_mod: f64,
    pub dirichlet: DirichletMode,
    pub residuals: bool,
    surface: GaussLegendre,
    surface_azimuth: usize,
}

impl FrequencyEngine {
    pub fn new(dim: usize, rule: SphereRule, c_mod: f64) -> Self {
        FrequencyEngine {
            rule: ClippedRule::new(dim, rule),
            c_mod,
            dirichlet: DirichletMode::Volume,
            residuals: true,
            surface: GaussLegendre::new(if dim == 2 { 48 } else { 24 }),
            surface_azimuth: 48,
        }
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(dim, SphereRule::standard(dim), 20.0)
    }

    /// Cheap configuration used inside covering loops.
    pub fn fast(dim: usize, c_mod: f64) -> Self {
        let mut e = Self::new(dim, SphereRule::coarse(dim), c_mod);
        e.dirichlet = DirichletMode::Sphere;
        e.residuals = false;
        e
    }

    pub fn dim(&self) -> usize {
        self.rule.dim
    }

    /// exp(C·∫₀^r θ(4s)/s ds).
    pub fn modification(&self, m: &DiniModulus, r: f64) -> f64 {
        (self.c_mod * m.dini(4.0 * r)).exp()
    }

    /// N(v_{X₀}, r) for v = u∘Ψ_{X₀}, in the Euclidean form of the weighted integrals.
    pub fn boundary_frequency(&self, frame: &TransformFrame, f: &HarmonicField, r: f64) -> Result<FrequencySample> {
        let max = 2.0 * frame.domain.scale;
        if !(r > 0.0 && r <= max * (1.0 + 1e-12)) {
            return Err(Error::RadiusOutOfRange { r, max });
        }
        let level = |y: &Point| frame.level(y);
        let mut nodes = Vec::new();
        self.rule.sphere_nodes(r, &level, &mut nodes);
        let pull = |y: &Point| -> Result<(f64, Point, crate::dini_geometry::EllipticData)> {
            let z = frame.psi(y);
            let (u, gu) = f.eval(&z)?;
            let e = frame.elliptic_unchecked(y);
            Ok((u, mat_t_vec(&e.jacobian, &gu), e))
        };
        let mut h = 0.0;
        let mut dsph = 0.0;
        let mut vals = Vec::with_capacity(nodes.len());
        for n in &nodes {
            let (v, gv, e) = pull(&n.point)?;
            let agv = mat_vec(&e.a, &gv);
            let flux = dot(&agv, &n.dir);
            h += n.weight * e.eta_tilde * v * v;
            dsph += n.weight * v * flux;
            vals.push((n.weight, v, flux, e.eta_tilde));
        }
        if !(h > H_FLOOR) {
            return Err(Error::DegenerateHeight(h));
        }
        let d = match self.dirichlet {
            DirichletMode::Sphere => dsph,
            DirichletMode::Volume => {
                let mut ball = Vec::new();
                self.rule.ball_nodes(r, &level, &mut ball);
                let mut s = 0.0;
                for n in &ball {
                    let (_, gv, e) = pull(&n.point)?;
                    s += n.weight * dot(&mat_vec(&e.a, &gv), &gv);
                }
                s
            }
        };
        let nfreq = r * d / h;
        let (rh, rb) = if self.residuals {
            let mut s = 0.0;
            for (w, v, flux, eta) in &vals {
                let vr = flux / eta;
                let t = vr - nfreq * v / r;
                s += w * eta * t * t;
            }
            (2.0 * r * s / h, self.frame_boundary_residual(frame, f, r)? / h)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(FrequencySample {
            center: frame.base,
            radius: r,
            dirichlet: d,
            height: h,
            frequency: nfreq,
            modified: nfreq * self.modification(&frame.domain.modulus, r),
            residual_h: rh,
            residual_b: rb,
            branch: Branch::Boundary,
        })
    }

    /// ∫_{∂Ω∩B_r}(∂_n v)²/η̃·⟨AX,n⟩⟨An,n⟩ dH over the graph of ∂Ω_{X₀}.
    fn frame_boundary_residual(&self, frame: &TransformFrame, f: &HarmonicField, r: f64) -> Result<f64> {
        let dom = &frame.domain;
        let height = |y: &Horizontal| frame.boundary_height(y);
        let mut total = 0.0;
        for (yh, w) in self.graph_patch(dom, &[0.0; 3], [0.0, 0.0], r, &height) {
            let x = dom.point(&yh, height(&yh));
            let gl = frame.level_gradient(&x);
            let gn = norm(&gl);
            let area = gn / gl[dom.vertical()].abs();
            let n = [-gl[0] / gn, -gl[1] / gn, -gl[2] / gn];
            let e = frame.elliptic_unchecked(&x);
            let (_, gu) = f.eval_inside(&frame.psi(&x))?;
            let gv = mat_t_vec(&e.jacobian, &gu);
            let dn = dot(&gv, &n);
            let an = mat_vec(&e.a, &n);
            let ax = mat_vec(&e.a, &x);
            total += w * area * dn * dn / e.eta_tilde * dot(&ax, &n) * dot(&an, &n);
        }
        Ok(total)
    }

    /// Horizontal nodes and weights covering {y : |(y, height(y)) − center| < r},
    /// star-shaped about the horizontal position `origin`.
    fn graph_patch(
        &self,
        dom: &GraphDomain,
        center: &Point,
        origin: Horizontal,
        r: f64,
        height: &dyn Fn(&Horizontal) -> f64,
    ) -> Vec<(Horizontal, f64)> {
        let inside = |y: &Horizontal| norm(&sub(&dom.point(y, height(y)), center)) < r;
        let mut out = Vec::new();
        if !inside(&origin) {
            return out;
        }
        let reach = |e: [f64; 2]| -> f64 {
            let at = |s: f64| [origin[0] + s * e[0], origin[1] + s * e[1]];
            let (mut lo, mut hi) = (0.0, 2.0 * r);
            if inside(&at(hi)) {
                return hi;
            }
            for _ in 0..80 {
                let m = 0.5 * (lo + hi);
                if inside(&at(m)) {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            0.5 * (lo + hi)
        };
        if dom.dim == 2 {
            for sgn in [-1.0, 1.0] {
                let s_max = reach([sgn, 0.0]);
                for (s, w) in self.surface.mapped(0.0, s_max) {
                    out.push(([origin[0] + sgn * s, 0.0], w));
                }
            }
        } else {
            let naz = self.surface_azimuth;
            let da = 2.0 * PI / naz as f64;
            for j in 0..naz {
                let a = da * (j as f64 + 0.5);
                let e = [a.cos(), a.sin()];
                let s_max = reach(e);
                for (s, w) in self.surface.mapped(0.0, s_max) {
                    out.push(([origin[0] + s * e[0], origin[1] + s * e[1]], w * s * da));
                }
            }
        }
        out
    }

    /// N(p, r) of u − u(p) over B_r(p) ∩ D.
    pub fn interior_frequency(&self, f: &dyn Field, p: &Point, r: f64) -> Result<FrequencySample> {
        self.interior_impl(f, p, r, true)
    }

    /// N(p, r) of u itself over B_r(p) ∩ D. Unlike the centred version this vanishes on ∂D,
    /// so it is the one that stays monotone up to r_cs(p) once the ball meets the boundary.
    pub fn interior_frequency_uncentred(&self, f: &dyn Field, p: &Point, r: f64) -> Result<FrequencySample> {
        self.interior_impl(f, p, r, false)
    }

    fn interior_impl(&self, f: &dyn Field, p: &Point, r: f64, centred: bool) -> Result<FrequencySample> {
        if !(r > 0.0) {
            return Err(Error::RadiusOutOfRange { r, max: f64::INFINITY });
        }
        if f.level(p) <= 0.0 {
            return Err(Error::OutsideDomain(format!("{p:?} is not an interior point")));
        }
        let up = if centred { f.value_grad(p)?.0 } else { 0.0 };
        let level = |y: &Point| f.level(&add(p, y));
        let mut nodes = Vec::new();
        self.rule.sphere_nodes(r, &level, &mut nodes);
        let mut h = 0.0;
        let mut vals = Vec::with_capacity(nodes.len());
        for n in &nodes {
            let (u, g) = f.value_grad(&add(p, &n.point))?;
            let w = u - up;
            h += n.weight * w * w;
            vals.push((n.weight, w, dot(&g, &n.dir)));
        }
        if !(h > H_FLOOR) {
            return Err(Error::DegenerateHeight(h));
        }
        let mut ball = Vec::new();
        self.rule.ball_nodes(r, &level, &mut ball);
        let mut d = 0.0;
        for n in &ball {
            let (_, g) = f.value_grad(&add(p, &n.point))?;
            d += n.weight * dot(&g, &g);
        }
        let nfreq = r * d / h;
        let rh = if self.residuals {
            let mut s = 0.0;
            for (w, v, vr) in &vals {
                let t = vr - nfreq * v / r;
                s += w * t * t;
            }
            2.0 * r * s / h
        } else {
            f64::NAN
        };
        Ok(FrequencySample {
            center: *p,
            radius: r,
            dirichlet: d,
            height: h,
            frequency: nfreq,
            modified: nfreq,
            residual_h: rh,
            residual_b: 0.0,
            branch: Branch::Interior,
        })
    }

    /// (R_h, R_b) at radius r for the frame.
    pub fn monotonicity_residuals(&self, frame: &TransformFrame, f: &HarmonicField, r: f64) -> Result<(f64, f64)> {
        let mut e = self.clone();
        e.residuals = true;
        let s = e.boundary_frequency(frame, f, r)?;
        Ok((s.residual_h, s.residual_b))
    }

    /// N_X(r) at a single radius with the branch used.
    pub fn unified_sample(&self, f: &HarmonicField, x: &Point, r: f64, ctx: &PointContext) -> Result<FrequencySample> {
        match ctx {
            PointContext::Boundary(frame) => self.boundary_frequency(frame, f, r),
            PointContext::Interior { critical, frame } => {
                if r <= critical.value() {
                    self.interior_frequency(f, x, r)
                } else {
                    let mut s = self.boundary_frequency(frame, f, r)?;
                    s.branch = Branch::BoundaryReplaced;
                    Ok(s)
                }
            }
        }
    }

    /// Frequency profile N_X(r) over the given radii, with drops when requested.
    pub fn unified_frequency_profile(
        &self,
        f: &HarmonicField,
        x: &Point,
        radii: &[f64],
        with_drops: bool,
    ) -> Result<FrequencyProfile> {
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("radii must be strictly increasing".into()));
        }
        let ctx = PointContext::new(&f.domain, x)?;
        let samples: Vec<FrequencySample> = radii
            .par_iter()
            .map(|&r| self.unified_sample(f, x, r, &ctx))
            .collect::<Result<Vec<_>>>()?;
        let values = samples.iter().map(|s| unified_value(s)).collect();
        let (mut drops, mut wide) = (vec![None; radii.len()], vec![None; radii.len()]);
        if with_drops {
            let pairs: Vec<(Option<f64>, Option<f64>)> = radii
                .par_iter()
                .map(|&r| {
                    let nx = |t: f64| self.unified_sample(f, x, t, &ctx).ok().map(|s| unified_value(&s));
                    let w = match (nx(1.5 * r), nx(0.5 * r)) {
                        (Some(a), Some(b)) => Some(a - b),
                        _ => None,
                    };
                    let ww = match (nx(6.0 * r), nx(r)) {
                        (Some(a), Some(b)) => Some(a - b),
                        _ => None,
                    };
                    (w, ww)
                })
                .collect();
            for (k, (a, b)) in pairs.into_iter().enumerate() {
                drops[k] = a;
                wide[k] = b;
            }
        }
        Ok(FrequencyProfile {
            center: *x,
            radii: radii.to_vec(),
            samples,
            values,
            critical_scale: ctx.critical(),
            drops,
            wide_drops: wide,
        })
    }
}

/// N_X(r): Ñ on boundary branches, N on the interior branch.
pub fn unified_value(s: &FrequencySample) -> f64 {
    match s.branch {
        Branch::Interior => s.frequency,
        _ => s.modified,
    }
}

/// Classification of a center for the unified frequency.
#[derive(Clone, Debug)]
pub enum PointContext {
    Boundary(TransformFrame),
    Interior { critical: CriticalScale, frame: TransformFrame },
}

impl PointContext {
    pub fn new(domain: &Arc<GraphDomain>, x: &Point) -> Result<Self> {
        let lv = domain.level(x);
        let tol = 1e-12 * (1.0 + norm(x));
        if lv.abs() <= tol {
            let h = domain.horizontal(x);
            return Ok(PointContext::Boundary(TransformFrame::new(domain.clone(), h)));
        }
        if lv < 0.0 {
            return Err(Error::OutsideDomain(format!("{x:?} lies below the graph")));
        }
        let critical = critical_scale(domain, x);
        let foot = domain.nearest_boundary_point(x);
        let frame = TransformFrame::new(domain.clone(), domain.horizontal(&foot));
        Ok(PointContext::Interior { critical, frame })
    }

    pub fn critical(&self) -> CriticalScale {
        match self {
            PointContext::Boundary(_) => CriticalScale::Boundary,
            PointContext::Interior { critical, .. } => *critical,
        }
    }
}

/// The r with dist(p, ∂D) = r·θ̃(r), searched on (0, 16R].
pub fn critical_scale(domain: &GraphDomain, p: &Point) -> CriticalScale {
    if domain.level(p).abs() <= 1e-14 * (1.0 + norm(p)) {
        return CriticalScale::Boundary;
    }
    let dist = domain.boundary_distance(p);
    if dist == 0.0 {
        return CriticalScale::Boundary;
    }
    let m = &domain.modulus;
    let g = |r: f64| r * m.theta_tilde(r);
    let top = 16.0 * domain.scale;
    if m.is_zero() || g(top) < dist {
        return CriticalScale::BeyondRange;
    }
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < dist {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    CriticalScale::Scale(0.5 * (lo + hi))
}

fn sample_at(profile: &FrequencyProfile, r: f64) -> Option<&FrequencySample> {
    profile.samples.iter().find(|s| (s.radius - r).abs() <= 1e-12 * r)
}

/// Compares H̃(r₂)/H̃(r₁), H̃ = H/r^{d−1}, with the doubling bounds built from Ñ.
pub fn doubling_check(
    profile: &FrequencyProfile,
    r1: f64,
    r2: f64,
    dim: usize,
    modulus: &DiniModulus,
    c_mod: f64,
    slack: f64,
) -> Result<DoublingReport> {
    let s1 = sample_at(profile, r1).ok_or_else(|| Error::InvalidParameter(format!("radius {r1} not in profile")))?;
    let s2 = sample_at(profile, r2).ok_or_else(|| Error::InvalidParameter(format!("radius {r2} not in profile")))?;
    if r1 > r2 {
        return Err(Error::InvalidParameter("doubling check needs r1 <= r2".into()));
    }
    let ht = |s: &FrequencySample| s.height / s.radius.powi(dim as i32 - 1);
    let ratio = ht(s2) / ht(s1);
    let i = |r: f64| modulus.dini(4.0 * r);
    let q = r2 / r1;
    let lower = q.powf(2.0 * s1.modified * (-c_mod * i(r2)).exp()) * (-c_mod * (i(r2) - i(r1))).exp();
    let upper = q.powf(2.0 * s2.modified * (-c_mod * i(r1)).exp()) * (c_mod * (i(r2) - i(r1))).exp();
    let pass = ratio >= lower * (1.0 - slack) && ratio <= upper * (1.0 + slack);
    Ok(DoublingReport { r1, r2, ratio, lower, upper, slack, pass })
}

/// Dyadic radii r_max·2^{-k}, k = count−1..0, increasing.
pub fn dyadic_radii(r_max: f64, count: usize) -> Vec<f64> {
    (0..count).rev().map(|k| r_max * 0.5f64.powi(k as i32)).collect()
}
