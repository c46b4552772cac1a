//! Q1 finite-element solver for the flattened divergence-form problem on the half-box
//! [−L, L]^{d−1} × [0, L] in coordinates (x, w = x_d − φ(x)).

use crate::dini_geometry::GraphDomain;
use crate::error::{Error, Result};
use crate::linalg::Point;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridMeta {
    pub dim: usize,
    pub resolution: usize,
    pub half_width: f64,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct GridField {
    pub meta: GridMeta,
    values: Vec<f64>,
    grads: Vec<[f64; 3]>,
}

struct Layout {
    dim: usize,
    n: usize,
    np: usize,
    h: [f64; 3],
    lo: [f64; 3],
}

impl Layout {
    fn new(dim: usize, n: usize, half_width: f64) -> Self {
        let mut h = [0.0; 3];
        let mut lo = [0.0; 3];
        for k in 0..dim - 1 {
            h[k] = 2.0 * half_width / n as f64;
            lo[k] = -half_width;
        }
        h[dim - 1] = half_width / n as f64;
        Layout { dim, n, np: n + 1, h, lo }
    }

    fn count(&self) -> usize {
        self.np.pow(self.dim as u32)
    }

    fn index(&self, c: &[usize; 3]) -> usize {
        let mut idx = 0;
        for k in (0..self.dim).rev() {
            idx = idx * self.np + c[k];
        }
        idx
    }

    fn coords(&self, mut idx: usize) -> [usize; 3] {
        let mut c = [0; 3];
        for ck in c.iter_mut().take(self.dim) {
            *ck = idx % self.np;
            idx /= self.np;
        }
        c
    }

    fn position(&self, c: &[usize; 3]) -> Point {
        let mut p = [0.0; 3];
        for k in 0..self.dim {
            p[k] = self.lo[k] + self.h[k] * c[k] as f64;
        }
        p
    }

    fn on_boundary(&self, c: &[usize; 3]) -> bool {
        (0..self.dim).any(|k| c[k] == 0 || c[k] == self.n)
    }
}

/// Solves the flattened Laplace problem with Dirichlet data `trace` given in flattened
/// coordinates (x, w). The trace must vanish on the bottom face w = 0.
pub fn solve(domain: &GraphDomain, trace: &dyn Fn(&Point) -> f64, resolution: usize, half_width: f64) -> Result<GridField> {
    if resolution < 2 || !resolution.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("grid resolution {resolution} is not a power of two")));
    }
    let dim = domain.dim;
    let lay = Layout::new(dim, resolution, half_width);
    let nn = lay.count();
    let stencil_len = 3usize.pow(dim as u32);

    let mut fixed = vec![false; nn];
    let mut u = vec![0.0; nn];
    let mut trace_scale: f64 = 0.0;
    let mut bottom_max: f64 = 0.0;
    for (idx, (fx, uv)) in fixed.iter_mut().zip(u.iter_mut()).enumerate() {
        let c = lay.coords(idx);
        if lay.on_boundary(&c) {
            *fx = true;
            let p = lay.position(&c);
            let g = trace(&p);
            *uv = g;
            trace_scale = trace_scale.max(g.abs());
            if c[dim - 1] == 0 {
                bottom_max = bottom_max.max(g.abs());
            }
        }
    }
    if bottom_max > 1e-10 * trace_scale.max(1e-300) && bottom_max > 0.0 {
        return Err(Error::InvalidParameter(format!(
            "boundary trace does not vanish on the graph (max {bottom_max:e})"
        )));
    }

    let stencil = assemble(domain, &lay);
    let offset = |c: &[usize; 3], o: usize| -> Option<usize> {
        let mut cc = [0usize; 3];
        let mut oo = o;
        for k in 0..dim {
            let d = (oo % 3) as isize - 1;
            oo /= 3;
            let v = c[k] as isize + d;
            if v < 0 || v > lay.n as isize {
                return None;
            }
            cc[k] = v as usize;
        }
        Some(lay.index(&cc))
    };
    let neighbors: Vec<[usize; 27]> = (0..nn)
        .map(|i| {
            let c = lay.coords(i);
            let mut nb = [usize::MAX; 27];
            for (o, slot) in nb.iter_mut().enumerate().take(stencil_len) {
                if let Some(j) = offset(&c, o) {
                    *slot = j;
                }
            }
            nb
        })
        .collect();
    let center = stencil_len / 2;

    let apply = |x: &[f64], y: &mut [f64], include_fixed: bool| {
        for i in 0..nn {
            if fixed[i] {
                y[i] = 0.0;
                continue;
            }
            let mut s = 0.0;
            let row = &stencil[i * stencil_len..(i + 1) * stencil_len];
            for o in 0..stencil_len {
                let j = neighbors[i][o];
                if j != usize::MAX && (include_fixed || !fixed[j]) {
                    s += row[o] * x[j];
                }
            }
            y[i] = s;
        }
    };

    // b = −K_IB g_B
    let mut b = vec![0.0; nn];
    apply(&u, &mut b, true);
    for (i, bi) in b.iter_mut().enumerate() {
        *bi = if fixed[i] { 0.0 } else { -*bi };
    }
    let diag: Vec<f64> = (0..nn).map(|i| stencil[i * stencil_len + center]).collect();
    let mut x = vec![0.0; nn];
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut iterations = 0;
    let mut rel = 0.0;
    if bnorm > 0.0 {
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&diag).enumerate().map(|(i, (ri, di))| if fixed[i] { 0.0 } else { ri / di }).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; nn];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let max_iter = 40 * lay.np * dim + 1000;
        loop {
            apply(&p, &mut ap, false);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rz / pap;
            for i in 0..nn {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
            if rel <= 1e-10 {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::NoConvergence(format!("grid CG stalled at relative residual {rel:e}")));
            }
            for i in 0..nn {
                z[i] = if fixed[i] { 0.0 } else { r[i] / diag[i] };
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..nn {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
    for i in 0..nn {
        if !fixed[i] {
            u[i] = x[i];
        }
    }
    let grads = nodal_gradients(&lay, &u);
    let meta = GridMeta {
        dim,
        resolution,
        half_width,
        spacing: lay.h[..dim].to_vec(),
        origin: lay.lo[..dim].to_vec(),
        residual: rel,
        iterations,
    };
    Ok(GridField { meta, values: u, grads })
}

fn assemble(domain: &GraphDomain, lay: &Layout) -> Vec<f64> {
    let dim = lay.dim;
    let corners = 1usize << dim;
    let stencil_len = 3usize.pow(dim as u32);
    let mut stencil = vec![0.0; lay.count() * stencil_len];
    let g = 0.5 / 3f64.sqrt();
    let gp = [0.5 - g, 0.5 + g];
    let ne = lay.n;
    let elems = ne.pow(dim as u32);
    let vol: f64 = lay.h[..dim].iter().product();
    for e in 0..elems {
        let mut ec = [0usize; 3];
        let mut t = e;
        for ck in ec.iter_mut().take(dim) {
            *ck = t % ne;
            t /= ne;
        }
        let mut k_loc = [[0.0; 8]; 8];
        for q in 0..corners {
            let mut xi = [0.0; 3];
            for k in 0..dim {
                xi[k] = gp[(q >> k) & 1];
            }
            let mut xh = [0.0; 2];
            for k in 0..dim - 1 {
                xh[k] = lay.lo[k] + lay.h[k] * (ec[k] as f64 + xi[k]);
            }
            let gphi = domain.phi.gradient(&xh);
            let mut m = [[0.0; 3]; 3];
            for k in 0..dim - 1 {
                m[k][k] = 1.0;
                m[k][dim - 1] = -gphi[k];
                m[dim - 1][k] = -gphi[k];
            }
            m[dim - 1][dim - 1] = 1.0 + gphi[0] * gphi[0] + gphi[1] * gphi[1];
            let mut grads = [[0.0; 3]; 8];
            for (a, ga) in grads.iter_mut().enumerate().take(corners) {
                for k in 0..dim {
                    let mut v = (if (a >> k) & 1 == 1 { 1.0 } else { -1.0 }) / lay.h[k];
                    for j in 0..dim {
                        if j != k {
                            v *= if (a >> j) & 1 == 1 { xi[j] } else { 1.0 - xi[j] };
                        }
                    }
                    ga[k] = v;
                }
            }
            let w = vol / corners as f64;
            for a in 0..corners {
                let mut mg = [0.0; 3];
                for i in 0..dim {
                    for j in 0..dim {
                        mg[i] += m[i][j] * grads[a][j];
                    }
                }
                for b in 0..corners {
                    let mut s = 0.0;
                    for i in 0..dim {
                        s += mg[i] * grads[b][i];
                    }
                    k_loc[a][b] += w * s;
                }
            }
        }
        for a in 0..corners {
            let mut ca = ec;
            for k in 0..dim {
                ca[k] += (a >> k) & 1;
            }
            let ia = lay.index(&ca);
            for b in 0..corners {
                let mut o = 0;
                let mut mul = 1;
                for k in 0..dim {
                    let d = ((b >> k) & 1) as isize - ((a >> k) & 1) as isize + 1;
                    o += d as usize * mul;
                    mul *= 3;
                }
                stencil[ia * stencil_len + o] += k_loc[a][b];
            }
        }
    }
    stencil
}

fn nodal_gradients(lay: &Layout, u: &[f64]) -> Vec<[f64; 3]> {
    let dim = lay.dim;
    (0..lay.count())
        .map(|i| {
            let c = lay.coords(i);
            let mut g = [0.0; 3];
            for k in 0..dim {
                let at = |s: isize| {
                    let mut cc = c;
                    cc[k] = (c[k] as isize + s) as usize;
                    u[lay.index(&cc)]
                };
                let h = lay.h[k];
                g[k] = if c[k] == 0 {
                    (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                } else if c[k] == lay.n {
                    (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
                } else {
                    (at(1) - at(-1)) / (2.0 * h)
                };
            }
            g
        })
        .collect()
}

impl GridField {
    fn layout(&self) -> Layout {
        Layout::new(self.meta.dim, self.meta.resolution, self.meta.half_width)
    }

    /// Interpolated value and flattened gradient at flattened coordinates `q`.
    pub fn interpolate(&self, q: &Point) -> Result<(f64, Point)> {
        let lay = self.layout();
        let dim = lay.dim;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for k in 0..dim {
            let t = (q[k] - lay.lo[k]) / lay.h[k];
            let tol = 1e-9;
            if !(t >= -tol && t <= lay.n as f64 + tol) {
                return Err(Error::OutsideDomain(format!("point {q:?} outside the meshed box")));
            }
            let t = t.clamp(0.0, lay.n as f64);
            let i = (t.floor() as usize).min(lay.n - 1);
            base[k] = i;
            frac[k] = t - i as f64;
        }
        let mut v = 0.0;
        let mut g = [0.0; 3];
        for a in 0..(1usize << dim) {
            let mut c = base;
            let mut w = 1.0;
            for k in 0..dim {
                let bit = (a >> k) & 1;
                c[k] += bit;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            let idx = lay.index(&c);
            v += w * self.values[idx];
            for k in 0..dim {
                g[k] += w * self.grads[idx][k];
            }
        }
        Ok((v, g))
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `<stem>.bin` (little-endian f64 node values) and `<stem>.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(dir.join(format!("{stem}.bin")), bytes)?;
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let meta: GridMeta = serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)?;
        let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Config("grid payload length is not a multiple of 8".into()));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let lay = Layout::new(meta.dim, meta.resolution, meta.half_width);
        if values.len() != lay.count() {
            return Err(Error::Config("grid payload does not match sidecar".into()));
        }
        let grads = nodal_gradients(&lay, &values);
        Ok(GridField { meta, values, grads })
    }
}
