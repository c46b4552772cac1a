use crate::error::{Error, Result};
use crate::linalg::{Mat, Point};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coef: f64,
    pub n: u32,
}

/// Closed-form model fields; each is a sum of c·Im((⟨x, e⟩ + i·x_d)^N).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum ModelSpec {
    HalfspacePoly { n: u32 },
    TiltedHalfspacePoly { n: u32, slope: f64 },
    SumOfPolys { terms: Vec<PolyTerm> },
    PerturbedPoly { n: u32, eps: f64, m: u32 },
}

pub const MODEL_NAMES: [&str; 4] = ["halfspace_poly", "tilted_halfspace_poly", "sum_of_polys", "perturbed_poly"];

impl ModelSpec {
    /// Parses a (name, params) pair as found in config files.
    pub fn from_name(name: &str, params: &serde_json::Value) -> Result<Self> {
        if !MODEL_NAMES.contains(&name) {
            return Err(Error::UnknownField(name.to_string()));
        }
        let v = serde_json::json!({ "name": name, "params": params });
        serde_json::from_value(v).map_err(|e| Error::Config(format!("field.params: {e}")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::HalfspacePoly { .. } => "halfspace_poly",
            ModelSpec::TiltedHalfspacePoly { .. } => "tilted_halfspace_poly",
            ModelSpec::SumOfPolys { .. } => "sum_of_polys",
            ModelSpec::PerturbedPoly { .. } => "perturbed_poly",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelField {
    pub spec: ModelSpec,
    terms: Vec<PolyTerm>,
    /// Horizontal direction e (unit).
    dir: [f64; 2],
    dim: usize,
}

fn cpow(re: f64, im: f64, n: u32) -> (f64, f64) {
    let (mut ar, mut ai) = (1.0, 0.0);
    for _ in 0..n {
        let t = ar * re - ai * im;
        ai = ar * im + ai * re;
        ar = t;
    }
    (ar, ai)
}

impl ModelField {
    pub fn new(dim: usize, spec: ModelSpec) -> Result<Self> {
        let check = |n: u32| {
            if n < 1 {
                Err(Error::InvalidParameter(format!("degree {n} < 1")))
            } else {
                Ok(())
            }
        };
        let (terms, dir) = match &spec {
            ModelSpec::HalfspacePoly { n } => {
                check(*n)?;
                (vec![PolyTerm { coef: 1.0, n: *n }], [1.0, 0.0])
            }
            ModelSpec::TiltedHalfspacePoly { n, slope } => {
                check(*n)?;
                let dir = if dim == 3 {
                    let s = (1.0 + slope * slope).sqrt();
                    [1.0 / s, slope / s]
                } else {
                    [1.0, 0.0]
                };
                (vec![PolyTerm { coef: 1.0, n: *n }], dir)
            }
            ModelSpec::SumOfPolys { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidParameter("empty sum_of_polys".into()));
                }
                for t in terms {
                    check(t.n)?;
                }
                (terms.clone(), [1.0, 0.0])
            }
            ModelSpec::PerturbedPoly { n, eps, m } => {
                check(*n)?;
                check(*m)?;
                (vec![PolyTerm { coef: 1.0, n: *n }, PolyTerm { coef: *eps, n: *m }], [1.0, 0.0])
            }
        };
        Ok(ModelField { spec, terms, dir, dim })
    }

    fn coords(&self, p: &Point) -> (f64, f64) {
        let v = self.dim - 1;
        let s = if self.dim == 2 { p[0] } else { self.dir[0] * p[0] + self.dir[1] * p[1] };
        (s, p[v])
    }

    /// Value and gradient without zero extension.
    pub fn value_grad(&self, p: &Point) -> (f64, Point) {
        let (s, t) = self.coords(p);
        let (mut u, mut us, mut ut) = (0.0, 0.0, 0.0);
        for term in &self.terms {
            let n = term.n;
            let (_, im) = cpow(s, t, n);
            let (dr, di) = cpow(s, t, n - 1);
            u += term.coef * im;
            us += term.coef * n as f64 * di;
            ut += term.coef * n as f64 * dr;
        }
        let mut g = [0.0; 3];
        if self.dim == 2 {
            g[0] = us;
            g[1] = ut;
        } else {
            g[0] = us * self.dir[0];
            g[1] = us * self.dir[1];
            g[2] = ut;
        }
        (u, g)
    }

    pub fn hessian(&self, p: &Point) -> Mat {
        let (s, t) = self.coords(p);
        let (mut uss, mut ust) = (0.0, 0.0);
        for term in &self.terms {
            let n = term.n;
            if n < 2 {
                continue;
            }
            let (r2, i2) = cpow(s, t, n - 2);
            let k = term.coef * (n * (n - 1)) as f64;
            uss += k * i2;
            ust += k * r2;
        }
        let utt = -uss;
        let mut h = [[0.0; 3]; 3];
        let v = self.dim - 1;
        let e: [f64; 3] = if self.dim == 2 { [1.0, 0.0, 0.0] } else { [self.dir[0], self.dir[1], 0.0] };
        for i in 0..v {
            for j in 0..v {
                h[i][j] = uss * e[i] * e[j];
            }
            h[i][v] = ust * e[i];
            h[v][i] = ust * e[i];
        }
        h[v][v] = utt;
        h
    }
}
