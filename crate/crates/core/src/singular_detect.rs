//! Nodal, critical, singular and effective critical sets; effective spanning; spine checks.

use crate::error::{Error, Result};
use crate::frequency::FrequencyEngine;
use crate::harmonic_fields::{l2_average, HarmonicField};
use crate::linalg::{add, dist, dot, symmetric_eigen, mat_vec, norm, scale, sub, Point};
use crate::quadrature::{ClippedRule, GaussLegendre, SphereRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", content = "r", rename_all = "kebab-case")]
pub enum PointTag {
    Nodal,
    Critical,
    Singular,
    EffectiveCritical(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaggedPoint {
    pub point: Point,
    pub tags: Vec<PointTag>,
    /// |u| + |∇u| at the point.
    pub residual: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PointSampleSet {
    pub dim: usize,
    pub resolution: f64,
    pub points: Vec<TaggedPoint>,
}

impl PointSampleSet {
    pub fn from_points(dim: usize, resolution: f64, pts: &[Point], tags: &[PointTag]) -> Self {
        PointSampleSet {
            dim,
            resolution,
            points: pts.iter().map(|p| TaggedPoint { point: *p, tags: tags.to_vec(), residual: 0.0 }).collect(),
        }
    }

    pub fn positions(&self) -> Vec<Point> {
        self.points.iter().map(|p| p.point).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Axis-aligned box or ball.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Box { lo: Point, hi: Point },
    Ball { center: Point, radius: f64 },
}

impl Region {
    pub fn contains(&self, p: &Point, dim: usize, slack: f64) -> bool {
        match self {
            Region::Box { lo, hi } => (0..dim).all(|k| p[k] >= lo[k] - slack && p[k] <= hi[k] + slack),
            Region::Ball { center, radius } => dist(p, center) <= radius + slack,
        }
    }

    pub fn bounds(&self) -> (Point, Point) {
        match self {
            Region::Box { lo, hi } => (*lo, *hi),
            Region::Ball { center, radius } => {
                let r = [*radius; 3];
                (sub(center, &r), add(center, &r))
            }
        }
    }

    pub fn volume(&self, dim: usize) -> f64 {
        match self {
            Region::Box { lo, hi } => (0..dim).map(|k| hi[k] - lo[k]).product(),
            Region::Ball { radius, .. } => {
                if dim == 2 {
                    PI * radius * radius
                } else {
                    4.0 / 3.0 * PI * radius.powi(3)
                }
            }
        }
    }
}

/// Uniform grid points of spacing h inside the region.
pub fn grid_points(region: &Region, dim: usize, h: f64) -> Vec<Point> {
    let (lo, hi) = region.bounds();
    let counts: Vec<usize> = (0..dim).map(|k| ((hi[k] - lo[k]) / h).floor() as usize + 1).collect();
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut t = idx;
        let mut p = [0.0; 3];
        for k in 0..dim {
            p[k] = lo[k] + h * (t % counts[k]) as f64;
            t /= counts[k];
        }
        if region.contains(&p, dim, 1e-12) {
            out.push(p);
        }
    }
    out
}

fn frob(h: &crate::linalg::Mat) -> f64 {
    h.iter().flat_map(|r| r.iter()).map(|v| v * v).sum::<f64>().sqrt()
}

/// Damped Gauss–Newton on the residual (u, ∇u), with pseudo-inverse steps.
fn refine(f: &HarmonicField, start: &Point, tol: f64) -> Option<(Point, f64)> {
    let dim = f.domain.dim;
    let resid = |p: &Point| -> Option<(f64, Point, f64)> {
        let (u, g) = f.eval_inside(p).ok()?;
        Some((u, g, u.abs() + norm(&g)))
    };
    let mut x = *start;
    let (mut u, mut g, mut res) = resid(&x)?;
    for _ in 0..200 {
        if res <= tol {
            return Some((x, res));
        }
        let h = f.hessian(&x).ok()?;
        // normal matrix JᵀJ = ∇u∇uᵀ + H², right side Jᵀr = u∇u + H∇u
        let hg = mat_vec(&h, &g);
        let mut m = vec![0.0; dim * dim];
        let mut rhs = [0.0; 3];
        for i in 0..dim {
            rhs[i] = u * g[i] + hg[i];
            for j in 0..dim {
                let mut s = g[i] * g[j];
                for k in 0..dim {
                    s += h[i][k] * h[k][j];
                }
                m[i * dim + j] = s;
            }
        }
        let (vals, vecs) = symmetric_eigen(&m, dim);
        let top = vals[0].abs().max(1e-300);
        let mut step = [0.0; 3];
        for (l, v) in vals.iter().zip(&vecs) {
            if *l > 1e-12 * top {
                let c: f64 = (0..dim).map(|k| v[k] * rhs[k]).sum::<f64>() / l;
                for k in 0..dim {
                    step[k] -= c * v[k];
                }
            }
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = add(&x, &scale(&step, t));
            if let Some((cu, cg, cr)) = resid(&cand) {
                if cr < res {
                    x = cand;
                    u = cu;
                    g = cg;
                    res = cr;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res <= tol {
        Some((x, res))
    } else {
        None
    }
}

fn dedup(points: Vec<(Point, f64)>, radius: f64, dim: usize) -> Vec<(Point, f64)> {
    let mut pts = points;
    pts.sort_by(|a, b| {
        for k in 0..dim {
            match a.0[k].partial_cmp(&b.0[k]).unwrap() {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });
    let cell = |p: &Point| -> (i64, i64, i64) {
        let c = |v: f64| (v / radius).floor() as i64;
        (c(p[0]), c(p[1]), c(p[2]))
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut kept: Vec<(Point, f64)> = Vec::new();
    for (p, r) in pts {
        let (a, b, c) = cell(&p);
        let mut clash = false;
        'outer: for da in -1..=1 {
            for db in -1..=1 {
                for dc in -1..=1 {
                    if let Some(ids) = grid.get(&(a + da, b + db, c + dc)) {
                        if ids.iter().any(|&i| dist(&kept[i].0, &p) <= radius) {
                            clash = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if !clash {
            grid.entry((a, b, c)).or_default().push(kept.len());
            kept.push((p, r));
        }
    }
    kept
}

/// Grid scan for small |u| and |∇u|, Newton refinement, de-duplication at h/2.
pub fn locate_singular_set(f: &HarmonicField, region: &Region, h: f64) -> Result<PointSampleSet> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("scan spacing h = {h}")));
    }
    let dim = f.domain.dim;
    let grid = grid_points(region, dim, h);
    let evals: Vec<Option<(Point, f64, f64)>> = grid
        .par_iter()
        .map(|p| {
            if !f.domain.in_closure(p) {
                return None;
            }
            let (u, g) = f.eval(p).ok()?;
            Some((*p, u, norm(&g)))
        })
        .collect();
    let gscale = evals.iter().flatten().fold(0.0f64, |m, e| m.max(e.2));
    if gscale == 0.0 {
        return Ok(PointSampleSet { dim, resolution: h, points: Vec::new() });
    }
    let sd = (dim as f64).sqrt();
    let tol = 1e-10 * gscale.max(1.0);
    let refined: Vec<Option<(Point, f64)>> = evals
        .par_iter()
        .map(|e| {
            let (p, u, gn) = (*e)?;
            let lam = frob(&f.hessian(&p).ok()?);
            let eg = 2.0 * lam * h * sd;
            let eu = 2.0 * (lam * h * h * dim as f64 + gn * h * sd);
            if gn > eg || u.abs() > eu {
                return None;
            }
            let (x, res) = refine(f, &p, tol)?;
            let inside = f.domain.level(&x) >= -1e-9 * (1.0 + norm(&x));
            (inside && region.contains(&x, dim, 1e-12)).then_some((x, res))
        })
        .collect();
    let kept = dedup(refined.into_iter().flatten().collect(), 0.5 * h, dim);
    Ok(PointSampleSet {
        dim,
        resolution: h,
        points: kept
            .into_iter()
            .map(|(p, r)| TaggedPoint {
                point: p,
                tags: vec![PointTag::Nodal, PointTag::Critical, PointTag::Singular],
                residual: r,
            })
            .collect(),
    })
}

/// α_d¹ from ω_{d−1}|α|²∫₀¹t²(1−t²)^{(d−1)/2}dt = 1.
pub fn alpha_d1(dim: usize) -> f64 {
    let k = dim as f64 - 1.0;
    let omega = PI.powf(k / 2.0) / gamma_half_int(k / 2.0 + 1.0);
    // t = sin s turns the integrand into sin²s·cos^{d}s on [0, π/2]
    let j = GaussLegendre::new(64).integrate(0.0, PI / 2.0, |s: f64| s.sin().powi(2) * s.cos().powi(dim as i32));
    1.0 / (omega * j).sqrt()
}

fn gamma_half_int(x: f64) -> f64 {
    // Γ on positive integers and half-integers
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as i64).map(|i| i as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut t = 0.5;
        while t < x - 1e-12 {
            g *= t;
            t += 1.0;
        }
        g
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CriticalParams {
    pub alpha0: f64,
    pub beta: f64,
}

impl CriticalParams {
    pub fn default_for(dim: usize) -> Self {
        CriticalParams { alpha0: 0.25 * alpha_d1(dim), beta: 0.3 }
    }
}

/// Membership of X in 𝒞_r(u): inf_{B_{βr}(X)} r²|∇u|² ≤ α₀²·(1/r^d)∬_{B_r(X)∩D}|u − u(X)|².
pub fn effective_critical_test(f: &HarmonicField, x: &Point, r: f64, params: &CriticalParams) -> Result<bool> {
    let dim = f.domain.dim;
    let rule = ClippedRule::new(dim, SphereRule::coarse(dim));
    let (avg, _) = l2_average(f, x, r, &rule)?;
    let rhs = params.alpha0 * params.alpha0 * avg;
    let br = params.beta * r;
    let val = |p: &Point| -> Option<f64> {
        if dist(p, x) > br * (1.0 + 1e-12) || !f.domain.in_closure(p) {
            return None;
        }
        let (_, g) = f.eval_inside(p).ok()?;
        Some(r * r * dot(&g, &g))
    };
    let m = ((10.0 * params.beta).ceil() as usize).max(2);
    let mut best = (val(x).unwrap_or(f64::INFINITY), *x);
    let total = m.pow(dim as u32);
    for idx in 0..total {
        let mut t = idx;
        let mut p = *x;
        for k in 0..dim {
            let i = t % m;
            t /= m;
            p[k] += br * (2.0 * (i as f64 + 0.5) / m as f64 - 1.0);
        }
        if let Some(v) = val(&p) {
            if v < best.0 {
                best = (v, p);
            }
        }
    }
    if best.0 <= rhs {
        return Ok(true);
    }
    // projected gradient descent on |∇u|² from the best grid point
    let (mut v, mut p) = best;
    let mut step = 0.25 * br;
    for _ in 0..60 {
        let (_, g) = f.eval_inside(&p)?;
        let h = f.hessian(&p)?;
        let d = mat_vec(&h, &g);
        let dn = norm(&d);
        if dn == 0.0 {
            break;
        }
        let mut moved = false;
        while step > 1e-6 * br {
            let mut cand = sub(&p, &scale(&d, step / dn));
            let off = sub(&cand, x);
            let on = norm(&off);
            if on > br {
                cand = add(x, &scale(&off, br / on));
            }
            if let Some(cv) = val(&cand) {
                if cv < v {
                    p = cand;
                    v = cv;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved || v <= rhs {
            break;
        }
    }
    Ok(v <= rhs)
}

/// Dyadic scales r_c, r_c/2, … down to r0 (r0 included).
pub fn dyadic_scales(r0: f64, r_c: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = r_c;
    while s > r0 * (1.0 + 1e-12) {
        out.push(s);
        s *= 0.5;
    }
    out.push(r0);
    out
}

/// C̃_{r0}(u) sampled on `candidates`: the intersection over dyadic scales of 𝒞_s(u).
pub fn effective_critical_set(
    f: &HarmonicField,
    candidates: &[Point],
    r0: f64,
    r_c: f64,
    params: &CriticalParams,
) -> Result<PointSampleSet> {
    if !(r0 > 0.0 && r0 <= r_c) {
        return Err(Error::InvalidParameter(format!("need 0 < r0 <= r_c (r0={r0}, r_c={r_c})")));
    }
    let scales = dyadic_scales(r0, r_c);
    let keep: Vec<Result<bool>> = candidates
        .par_iter()
        .map(|p| {
            for &s in &scales {
                if !effective_critical_test(f, p, s, params)? {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect();
    let mut points = Vec::new();
    for (p, k) in candidates.iter().zip(keep) {
        if k? {
            let (u, g) = f.eval_inside(p)?;
            points.push(TaggedPoint { point: *p, tags: vec![PointTag::EffectiveCritical(r0)], residual: u.abs() + norm(&g) });
        }
    }
    Ok(PointSampleSet { dim: f.domain.dim, resolution: r0, points })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpanningCertificate {
    /// A (k+1)-tuple whose step distances all exceed τr.
    Spanning { tuple: Vec<Point>, distances: Vec<f64> },
    /// An affine subspace of dimension `basis.len()` < k containing every candidate within τr.
    Contained { origin: Point, basis: Vec<Point>, max_distance: f64, tuple: Vec<Point> },
}

impl SpanningCertificate {
    pub fn spans(&self) -> bool {
        matches!(self, SpanningCertificate::Spanning { .. })
    }
}

/// Distance from p to origin + span(basis) for an orthonormal basis.
pub fn affine_distance(p: &Point, origin: &Point, basis: &[Point]) -> f64 {
    let mut v = sub(p, origin);
    for b in basis {
        let c = dot(&v, b);
        v = sub(&v, &scale(b, c));
    }
    norm(&v)
}

/// Greedy effective spanning where membership in F is decided lazily.
/// Returns `Ok(None)` when no candidate is a member.
pub fn effective_spanning_lazy<M>(candidates: &[Point], member: M, k: usize, tau: f64, r: f64) -> Result<Option<SpanningCertificate>>
where
    M: Fn(usize) -> Result<bool>,
{
    let mut y0 = None;
    for i in 0..candidates.len() {
        if member(i)? {
            y0 = Some(i);
            break;
        }
    }
    let Some(i0) = y0 else { return Ok(None) };
    let origin = candidates[i0];
    let mut basis: Vec<Point> = Vec::new();
    let mut tuple = vec![origin];
    let mut distances = Vec::new();
    for _ in 0..k {
        let mut order: Vec<(f64, usize)> = candidates
            .iter()
            .enumerate()
            .map(|(i, p)| (affine_distance(p, &origin, &basis), i))
            .collect();
        order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut far = None;
        for &(d, i) in &order {
            if member(i)? {
                far = Some((d, i));
                break;
            }
        }
        let (d, i) = far.expect("origin is a member");
        if d > tau * r {
            let p = candidates[i];
            let mut v = sub(&p, &origin);
            for b in &basis {
                let c = dot(&v, b);
                v = sub(&v, &scale(b, c));
            }
            basis.push(scale(&v, 1.0 / norm(&v)));
            tuple.push(p);
            distances.push(d);
        } else {
            return Ok(Some(SpanningCertificate::Contained { origin, basis, max_distance: d, tuple }));
        }
    }
    Ok(Some(SpanningCertificate::Spanning { tuple, distances }))
}

/// Def. of τr-effective spanning applied greedily to the whole of F.
pub fn effective_spanning_test(f_set: &[Point], k: usize, tau: f64, r: f64) -> Result<SpanningCertificate> {
    if f_set.is_empty() {
        return Err(Error::InvalidParameter("empty point set".into()));
    }
    let cert = effective_spanning_lazy(f_set, |_| Ok(true), k, tau, r)?.expect("nonempty");
    match cert {
        SpanningCertificate::Contained { origin, basis, max_distance, tuple } if !basis.is_empty() => {
            // least-squares subspace of the same dimension, kept when it still certifies containment
            let (c, fit) = principal_subspace(f_set, basis.len());
            let md = f_set.iter().map(|p| affine_distance(p, &c, &fit)).fold(0.0, f64::max);
            if md <= tau * r && md <= max_distance {
                Ok(SpanningCertificate::Contained { origin: c, basis: fit, max_distance: md, tuple })
            } else {
                Ok(SpanningCertificate::Contained { origin, basis, max_distance, tuple })
            }
        }
        other => Ok(other),
    }
}

/// Centroid and leading m principal directions of a point set.
pub fn principal_subspace(pts: &[Point], m: usize) -> (Point, Vec<Point>) {
    let n = pts.len() as f64;
    let mut c = [0.0; 3];
    for p in pts {
        for k in 0..3 {
            c[k] += p[k] / n;
        }
    }
    let mut cov = vec![0.0; 9];
    for p in pts {
        let v = sub(p, &c);
        for i in 0..3 {
            for j in 0..3 {
                cov[i * 3 + j] += v[i] * v[j];
            }
        }
    }
    let (_, vecs) = symmetric_eigen(&cov, 3);
    (c, vecs.iter().take(m).map(|v| [v[0], v[1], v[2]]).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpineReport {
    pub applicable: bool,
    pub spread: [f64; 2],
    pub linear: bool,
    pub max_deviation: f64,
    pub samples: usize,
}

/// Checks translation invariance of u along X₂ − X₁ when both frequency profiles are constant.
pub fn spine_invariance_check(
    f: &HarmonicField,
    engine: &FrequencyEngine,
    x1: &Point,
    x2: &Point,
    radii: &[f64],
    tol: f64,
) -> Result<SpineReport> {
    if dist(x1, x2) == 0.0 {
        return Err(Error::InvalidParameter("spine check needs distinct points".into()));
    }
    let spread = |x: &Point| -> Result<f64> {
        let p = engine.unified_frequency_profile(f, x, radii, false)?;
        let mx = p.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mn = p.values.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(mx - mn)
    };
    let s = [spread(x1)?, spread(x2)?];
    let dim = f.domain.dim;
    if s[0] > tol || s[1] > tol {
        return Ok(SpineReport { applicable: false, spread: s, linear: false, max_deviation: f64::NAN, samples: 0 });
    }
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let pts: Vec<Point> = grid_points(&Region::Ball { center: *x1, radius: rmax }, dim, rmax / 4.0)
        .into_iter()
        .filter(|p| f.domain.in_closure(p))
        .collect();
    let mut linear = true;
    for p in &pts {
        if frob(&f.hessian(p)?) > tol {
            linear = false;
            break;
        }
    }
    let t = sub(x2, x1);
    let mut dev: f64 = 0.0;
    let mut n = 0;
    for p in &pts {
        for s in [0.5, 1.0, 2.0] {
            let q = add(p, &scale(&t, s));
            if !f.domain.in_closure(&q) {
                continue;
            }
            let (a, _) = f.eval(p)?;
            let (b, _) = f.eval(&q)?;
            dev = dev.max((a - b).abs());
            n += 1;
        }
    }
    Ok(SpineReport { applicable: true, spread: s, linear, max_deviation: dev, samples: n })
}
