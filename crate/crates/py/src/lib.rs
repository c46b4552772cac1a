use freqstrat::beta_reifenberg::{beta_number as beta_core, WeightedCloud};
use freqstrat::cli_harness::{run_experiment as run_core, write_artifacts, ExperimentConfig};
use freqstrat::dini_geometry::{DiniModulus, FlatGraph, GraphDomain, GraphFunction, ModulusFamily, RadialPowerGraph};
use freqstrat::frequency::FrequencyEngine;
use freqstrat::harmonic_fields::{make_model_field, solve_dirichlet, HarmonicField as CoreField, ModelField, ModelSpec};
use freqstrat::linalg::Point;
use freqstrat::singular_detect::{locate_singular_set as locate_core, Region};
use freqstrat::strat_cover::{minkowski_estimate as mink_core, ConstantLedger, Coverer};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::Path;
use std::sync::Arc;

fn err(e: freqstrat::Error) -> PyErr {
    match e {
        freqstrat::Error::NoConvergence(_) | freqstrat::Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn point(v: &[f64]) -> PyResult<Point> {
    if v.len() < 2 || v.len() > 3 {
        return Err(PyValueError::new_err(format!("points need 2 or 3 coordinates, got {}", v.len())));
    }
    let mut p = [0.0; 3];
    p[..v.len()].copy_from_slice(v);
    Ok(p)
}

fn modulus(family: &str, c: f64, a: f64) -> PyResult<DiniModulus> {
    let fam = match family {
        "zero" => ModulusFamily::Zero,
        "power" => ModulusFamily::Power { c, a },
        "constant" => ModulusFamily::Power { c, a: 0.0 },
        "log" => ModulusFamily::Log { c },
        other => return Err(PyValueError::new_err(format!("unknown modulus family `{other}`"))),
    };
    DiniModulus::new(fam).map_err(err)
}

/// Dini modulus of continuity.
#[pyclass(name = "Modulus", frozen)]
struct PyModulus {
    inner: DiniModulus,
}

#[pymethods]
impl PyModulus {
    #[new]
    #[pyo3(signature = (family = "zero", c = 0.0, a = 0.0))]
    fn new(family: &str, c: f64, a: f64) -> PyResult<Self> {
        Ok(PyModulus { inner: modulus(family, c, a)? })
    }

    fn theta(&self, r: f64) -> f64 {
        self.inner.theta(r)
    }

    fn theta_tilde(&self, r: f64) -> f64 {
        self.inner.theta_tilde(r)
    }

    fn alpha(&self, r: f64) -> f64 {
        self.inner.alpha(r)
    }

    fn dini(&self, r: f64) -> f64 {
        self.inner.dini(r)
    }

    fn admissible_scale(&self) -> f64 {
        self.inner.admissible_scale()
    }
}

/// Graph domain {x_d > φ(x)}; φ is flat or coef·|x|^exponent.
#[pyclass(name = "Domain", frozen)]
struct PyDomain {
    inner: Arc<GraphDomain>,
}

#[pymethods]
impl PyDomain {
    #[new]
    #[pyo3(signature = (dim, family = "zero", c = 0.0, a = 0.0, coef = 0.0, exponent = 1.5, scale = None, check = true))]
    #[allow(clippy::too_many_arguments)]
    fn new(dim: usize, family: &str, c: f64, a: f64, coef: f64, exponent: f64, scale: Option<f64>, check: bool) -> PyResult<Self> {
        let m = modulus(family, c, a)?;
        let phi: Arc<dyn GraphFunction> = if coef == 0.0 { Arc::new(FlatGraph) } else { Arc::new(RadialPowerGraph { coef, exponent }) };
        let r = scale.unwrap_or_else(|| if m.is_zero() { 1.0 } else { m.admissible_scale() });
        let d = if check { GraphDomain::new(dim, phi, m, r) } else { GraphDomain::new_unchecked(dim, phi, m, r) };
        Ok(PyDomain { inner: Arc::new(d.map_err(err)?) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale
    }

    fn level(&self, p: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.level(&point(&p)?))
    }

    fn critical_scale(&self, p: Vec<f64>) -> PyResult<f64> {
        Ok(freqstrat::frequency::critical_scale(&self.inner, &point(&p)?).value())
    }
}

/// Harmonic field vanishing on the boundary of its domain.
#[pyclass(name = "HarmonicField", frozen)]
struct PyField {
    inner: CoreField,
}

#[pymethods]
impl PyField {
    /// Closed-form model; `params` is a JSON object such as '{"n": 2}'.
    #[staticmethod]
    #[pyo3(signature = (domain, name, params = "{}"))]
    fn model(domain: &PyDomain, name: &str, params: &str) -> PyResult<Self> {
        let v: serde_json::Value = serde_json::from_str(params).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let spec = ModelSpec::from_name(name, &v).map_err(err)?;
        Ok(PyField { inner: make_model_field(domain.inner.clone(), spec).map_err(err)? })
    }

    /// Grid solve with trace `x_d` or a model name, in flattened coordinates.
    #[staticmethod]
    #[pyo3(signature = (domain, trace = "x_d", resolution = 64, params = "{}"))]
    fn solve(domain: &PyDomain, trace: &str, resolution: usize, params: &str) -> PyResult<Self> {
        let dim = domain.inner.dim;
        let f = if trace == "x_d" {
            solve_dirichlet(domain.inner.clone(), &move |p: &Point| p[dim - 1], resolution)
        } else {
            let v: serde_json::Value = serde_json::from_str(params).map_err(|e| PyValueError::new_err(e.to_string()))?;
            let m = ModelField::new(dim, ModelSpec::from_name(trace, &v).map_err(err)?).map_err(err)?;
            solve_dirichlet(domain.inner.clone(), &move |p: &Point| m.value_grad(p).0, resolution)
        };
        Ok(PyField { inner: f.map_err(err)? })
    }

    fn eval(&self, p: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        let (u, g) = self.inner.eval(&point(&p)?).map_err(err)?;
        Ok((u, g[..self.inner.domain.dim].to_vec()))
    }

    /// Rows (r, branch, N, N_tilde, unified, H, D, R_h, R_b).
    #[pyo3(signature = (center, radii, fast = false))]
    #[allow(clippy::type_complexity)]
    fn frequency_profile(
        &self,
        center: Vec<f64>,
        radii: Vec<f64>,
        fast: bool,
    ) -> PyResult<Vec<(f64, String, f64, f64, f64, f64, f64, f64, f64)>> {
        let dim = self.inner.domain.dim;
        let eng = if fast { FrequencyEngine::fast(dim, 20.0) } else { FrequencyEngine::standard(dim) };
        let p = eng.unified_frequency_profile(&self.inner, &point(&center)?, &radii, false).map_err(err)?;
        Ok(p
            .samples
            .iter()
            .zip(&p.values)
            .map(|(s, v)| {
                (s.radius, s.branch.tag().to_string(), s.frequency, s.modified, *v, s.height, s.dirichlet, s.residual_h, s.residual_b)
            })
            .collect())
    }

    /// Singular points in the box [lo, hi] at scan spacing h.
    fn singular_points(&self, lo: Vec<f64>, hi: Vec<f64>, h: f64) -> PyResult<Vec<Vec<f64>>> {
        let region = Region::Box { lo: point(&lo)?, hi: point(&hi)? };
        let s = locate_core(&self.inner, &region, h).map_err(err)?;
        let dim = self.inner.domain.dim;
        Ok(s.points.iter().map(|p| p.point[..dim].to_vec()).collect())
    }

    /// Covering with default ledger; returns the packing report.
    #[pyo3(signature = (samples, r0, r_star = 0.5, center = None))]
    fn iterate_cover<'py>(
        &self,
        py: Python<'py>,
        samples: Vec<Vec<f64>>,
        r0: f64,
        r_star: f64,
        center: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let pts = samples.iter().map(|p| point(p)).collect::<PyResult<Vec<_>>>()?;
        let c = match center {
            Some(c) => point(&c)?,
            None => [0.0; 3],
        };
        let cov = Coverer::new(&self.inner, pts, ConstantLedger::default()).map_err(err)?;
        let (_, rep) = cov.iterate_cover(&c, r0, r_star).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("leaf_count", rep.leaf_count)?;
        d.set_item("packing_sum", rep.packing_sum)?;
        d.set_item("c_p", rep.c_p)?;
        d.set_item("scaling", rep.scaling)?;
        d.set_item("lambda_star", rep.lambda_star)?;
        d.set_item("coverage", rep.coverage)?;
        d.set_item("disjoint", rep.disjoint)?;
        Ok(d)
    }
}

/// (beta, eigenvalues, center of mass) of a weighted cloud on B_r(p).
#[pyfunction]
#[pyo3(signature = (points, p, r, k, weights = None))]
fn beta_number(points: Vec<Vec<f64>>, p: Vec<f64>, r: f64, k: usize, weights: Option<Vec<f64>>) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
    let dim = p.len();
    let pts = points.iter().map(|q| point(q)).collect::<PyResult<Vec<_>>>()?;
    let w = weights.unwrap_or_else(|| vec![1.0; pts.len()]);
    let cloud = WeightedCloud::new(dim, pts, w).map_err(err)?;
    let b = beta_core(&cloud, &point(&p)?, r, k).map_err(err)?;
    Ok((b.beta, b.eigenvalues, b.center_of_mass[..dim].to_vec()))
}

/// (value, stderr) of the Monte Carlo Minkowski estimate.
#[pyfunction]
#[pyo3(signature = (points, r, probes = 1_000_000, seed = 0))]
fn minkowski_estimate(points: Vec<Vec<f64>>, r: f64, probes: usize, seed: u64) -> PyResult<(f64, f64)> {
    let dim = points.first().map_or(3, |p| p.len());
    let pts = points.iter().map(|q| point(q)).collect::<PyResult<Vec<_>>>()?;
    let region = Region::Box { lo: [-1e3; 3], hi: [1e3; 3] };
    let e = mink_core(&pts, dim, r, &region, probes, seed).map_err(err)?;
    Ok((e.value, e.stderr))
}

/// Runs a JSON experiment config and writes its artifacts; returns whether all checks passed.
#[pyfunction]
fn run_experiment(config: &str, out: &str) -> PyResult<bool> {
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    let exp = cfg.experiment.clone().ok_or_else(|| PyValueError::new_err("config needs `experiment`"))?;
    let art = run_core(&cfg, &exp).map_err(err)?;
    write_artifacts(&cfg, &exp, &art, Path::new(out)).map_err(err)?;
    Ok(art.all_pass())
}

#[pymodule]
fn freqstrat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModulus>()?;
    m.add_class::<PyDomain>()?;
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(beta_number, m)?)?;
    m.add_function(wrap_pyfunction!(minkowski_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
