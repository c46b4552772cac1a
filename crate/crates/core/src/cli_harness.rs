//! Experiment configs, runners and reports behind the `freqstrat` binary.

use crate::beta_reifenberg::{beta_frequency_bound_check, beta_number, dini_beta_integral, WeightedCloud, MAX_GRID_RATIO};
use crate::dini_geometry::{DiniModulus, FlatGraph, GraphDomain, GraphFunction, ModulusFamily, RadialPowerGraph};
use crate::error::{Error, Result};
use crate::frequency::{doubling_check, dyadic_radii, Branch, FrequencyEngine, FrequencyProfile};
use crate::harmonic_fields::{make_model_field, solve_dirichlet, HarmonicField, ModelField, ModelSpec};
use crate::linalg::Point;
use crate::singular_detect::{effective_critical_set, grid_points, locate_singular_set, CriticalParams, PointSampleSet, Region};
use crate::strat_cover::{minkowski_estimate, segment_samples, ConstantLedger, Coverer};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXPERIMENTS: [&str; 8] = [
    "frequency-profile",
    "monotonicity-sweep",
    "rigidity",
    "doubling",
    "singular-map",
    "beta-sweep",
    "cover-and-pack",
    "minkowski",
];

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    #[default]
    Flat,
    RadialPower { coef: f64, exponent: f64 },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default = "zero_family")]
    pub modulus: ModulusFamily,
    /// Enforce the admissibility conditions on the scale.
    #[serde(default = "yes")]
    pub check: bool,
}

fn zero_family() -> ModulusFamily {
    ModulusFamily::Zero
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    /// `x_d` or a model name, evaluated in flattened coordinates.
    pub trace: String,
    #[serde(default)]
    pub trace_params: Value,
    pub resolution: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub solve: Option<SolveConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleSource {
    Segment { a: Vec<f64>, b: Vec<f64>, spacing: f64 },
    Locate { h: f64, #[serde(default)] region: Option<Region> },
    Points { points: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub centers: Vec<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub r_max: f64,
    pub count: usize,
    /// `standard` or `fast`.
    pub engine: String,
    pub expected_frequency: Option<f64>,
    pub tolerance: f64,
    pub eps_num: f64,
    pub rigidity_tol: Option<f64>,
    pub doubling_slack: f64,
    pub h: f64,
    pub region: Option<Region>,
    pub r0: Option<f64>,
    pub r_c: Option<f64>,
    pub candidate_spacing: Option<f64>,
    pub k: Option<usize>,
    pub samples: Option<SampleSource>,
    pub bound_check: bool,
    pub r_star: f64,
    pub tree_json: bool,
    pub tube_radius: f64,
    pub probes: usize,
    pub expected_content: Option<f64>,
    pub content_tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            centers: Vec::new(),
            radii: None,
            r_max: 0.5,
            count: 10,
            engine: "standard".into(),
            expected_frequency: None,
            tolerance: 2e-3,
            eps_num: 1e-4,
            rigidity_tol: None,
            doubling_slack: 0.05,
            h: 0.05,
            region: None,
            r0: None,
            r_c: None,
            candidate_spacing: None,
            k: None,
            samples: None,
            bound_check: false,
            r_star: 0.5,
            tree_json: true,
            tube_radius: 1.0 / 64.0,
            probes: 1_000_000,
            expected_content: None,
            content_tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub domain: DomainConfig,
    pub field: FieldConfig,
    pub ledger: ConstantLedger,
    pub params: Params,
    /// Not part of the config hash.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub seed: u64,
}

fn block<T: for<'de> Deserialize<'de>>(v: &Value, path: &str) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("{path}: {e}")))
}

impl ExperimentConfig {
    /// Parses a config, reporting the failing block path.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        let obj = v.as_object().ok_or_else(|| Error::Config("config: top level must be an object".into()))?;
        for key in obj.keys() {
            if !["experiment", "domain", "field", "ledger", "params", "out", "seed"].contains(&key.as_str()) {
                return Err(Error::Config(format!("config: unknown field `{key}`")));
            }
        }
        let get = |k: &str| obj.get(k).cloned().unwrap_or(Value::Null);
        let need = |k: &str| obj.get(k).cloned().ok_or_else(|| Error::Config(format!("config: missing field `{k}`")));
        let cfg = ExperimentConfig {
            experiment: block(&get("experiment"), "experiment")?,
            domain: block(&need("domain")?, "domain")?,
            field: block(&need("field")?, "field")?,
            ledger: if obj.contains_key("ledger") { block(&get("ledger"), "ledger")? } else { ConstantLedger::default() },
            params: if obj.contains_key("params") { block(&get("params"), "params")? } else { Params::default() },
            out: block(&get("out"), "out")?,
            seed: if obj.contains_key("seed") { block(&get("seed"), "seed")? } else { 0 },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = &self.experiment {
            if !EXPERIMENTS.contains(&e.as_str()) {
                return Err(Error::Config(format!("experiment: unknown experiment `{e}`")));
            }
        }
        if !(2..=3).contains(&self.domain.dim) {
            return Err(Error::Config(format!("domain.dim: {} is not 2 or 3", self.domain.dim)));
        }
        DiniModulus::new(self.domain.modulus).map_err(|e| Error::Config(format!("domain.modulus: {e}")))?;
        match (&self.field.model, &self.field.solve) {
            (Some(name), None) => {
                ModelSpec::from_name(name, &self.field.params).map_err(|e| Error::Config(format!("field.model: {e}")))?;
            }
            (None, Some(s)) => {
                if s.trace != "x_d" {
                    ModelSpec::from_name(&s.trace, &s.trace_params)
                        .map_err(|e| Error::Config(format!("field.solve.trace: {e}")))?;
                }
            }
            _ => return Err(Error::Config("field: give exactly one of `model` or `solve`".into())),
        }
        self.ledger.validate().map_err(|e| Error::Config(format!("ledger: {e}")))?;
        if !["standard", "fast"].contains(&self.params.engine.as_str()) {
            return Err(Error::Config(format!("params.engine: unknown engine `{}`", self.params.engine)));
        }
        for (i, c) in self.params.centers.iter().enumerate() {
            if c.len() != self.domain.dim {
                return Err(Error::Config(format!("params.centers[{i}]: expected {} coordinates", self.domain.dim)));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn build_domain(&self) -> Result<Arc<GraphDomain>> {
        let d = &self.domain;
        let m = DiniModulus::new(d.modulus)?;
        let phi: Arc<dyn GraphFunction> = match d.graph {
            GraphConfig::Flat => Arc::new(FlatGraph),
            GraphConfig::RadialPower { coef, exponent } => {
                if !(exponent > 1.0) {
                    return Err(Error::Config(format!("domain.graph.exponent: {exponent} must exceed 1")));
                }
                Arc::new(RadialPowerGraph { coef, exponent })
            }
        };
        let scale = d.scale.unwrap_or_else(|| if m.is_zero() { 1.0 } else { m.admissible_scale() });
        let dom = if d.check {
            GraphDomain::new(d.dim, phi, m, scale)
        } else {
            GraphDomain::new_unchecked(d.dim, phi, m, scale)
        };
        Ok(Arc::new(dom.map_err(|e| Error::Config(format!("domain: {e}")))?))
    }

    pub fn build_field(&self, domain: Arc<GraphDomain>) -> Result<HarmonicField> {
        let dim = domain.dim;
        if let Some(name) = &self.field.model {
            let spec = ModelSpec::from_name(name, &self.field.params)?;
            return make_model_field(domain, spec).map_err(|e| Error::Config(format!("field: {e}")));
        }
        let s = self.field.solve.as_ref().expect("validated");
        if s.trace == "x_d" {
            solve_dirichlet(domain, &move |p: &Point| p[dim - 1], s.resolution)
        } else {
            let m = ModelField::new(dim, ModelSpec::from_name(&s.trace, &s.trace_params)?)?;
            solve_dirichlet(domain, &move |p: &Point| m.value_grad(p).0, s.resolution)
        }
    }

    fn engine(&self, dim: usize) -> FrequencyEngine {
        if self.params.engine == "fast" {
            FrequencyEngine::fast(dim, self.ledger.c_mod)
        } else {
            let mut e = FrequencyEngine::standard(dim);
            e.c_mod = self.ledger.c_mod;
            e
        }
    }

    fn radii(&self) -> Vec<f64> {
        self.params.radii.clone().unwrap_or_else(|| dyadic_radii(self.params.r_max, self.params.count))
    }

    fn centers(&self) -> Vec<Point> {
        if self.params.centers.is_empty() {
            return vec![[0.0; 3]];
        }
        self.params.centers.iter().map(|c| pad(c)).collect()
    }
}

fn pad(c: &[f64]) -> Point {
    let mut p = [0.0; 3];
    for (k, v) in c.iter().take(3).enumerate() {
        p[k] = *v;
    }
    p
}

/// 17 significant digits, or `nan`/`inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON with every float printed at 17 significant digits.
pub fn to_json_string(v: &Value) -> String {
    fn go(v: &Value, ind: usize, out: &mut String) {
        let pad = "  ".repeat(ind + 1);
        match v {
            Value::Null => out.push_str("null"),
            Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Value::Number(n) => {
                if n.is_f64() {
                    out.push_str(&fmt_f64(n.as_f64().unwrap()));
                } else {
                    out.push_str(&n.to_string());
                }
            }
            Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
            Value::Array(a) => {
                if a.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push_str("[\n");
                for (i, x) in a.iter().enumerate() {
                    out.push_str(&pad);
                    go(x, ind + 1, out);
                    out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(ind));
                out.push(']');
            }
            Value::Object(m) => {
                if m.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push_str("{\n");
                for (i, (k, x)) in m.iter().enumerate() {
                    out.push_str(&pad);
                    out.push_str(&Value::String(k.clone()).to_string());
                    out.push_str(": ");
                    go(x, ind + 1, out);
                    out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(ind));
                out.push('}');
            }
        }
    }
    let mut s = String::new();
    go(v, 0, &mut s);
    s.push('\n');
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

/// Files and checks produced by one experiment, written only after it completed.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Artifacts {
    fn file(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn coord_names(dim: usize, prefix: &str) -> Vec<String> {
    (1..=dim).map(|k| format!("{prefix}{k}")).collect()
}

fn coords(p: &Point, dim: usize) -> Vec<String> {
    p[..dim].iter().map(|v| fmt_f64(*v)).collect()
}

fn profile_rows(profiles: &[FrequencyProfile], dim: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = coord_names(dim, "x");
    header.extend(["r", "branch", "H", "D", "N", "N_tilde", "N_unified", "R_h", "R_b"].map(String::from));
    let mut rows = Vec::new();
    for p in profiles {
        for (s, v) in p.samples.iter().zip(&p.values) {
            let mut row = coords(&p.center, dim);
            row.push(fmt_f64(s.radius));
            row.push(s.branch.tag().into());
            for x in [s.height, s.dirichlet, s.frequency, s.modified, *v, s.residual_h, s.residual_b] {
                row.push(fmt_f64(x));
            }
            rows.push(row);
        }
    }
    (header, rows)
}

fn sample_points(src: &SampleSource, f: &HarmonicField) -> Result<Vec<Point>> {
    let dim = f.domain.dim;
    Ok(match src {
        SampleSource::Segment { a, b, spacing } => {
            if !(*spacing > 0.0) {
                return Err(Error::Config("params.samples.spacing must be positive".into()));
            }
            segment_samples(&pad(a), &pad(b), *spacing)
        }
        SampleSource::Locate { h, region } => {
            let reg = region.unwrap_or_else(|| default_region(dim));
            locate_singular_set(f, &reg, *h)?.positions()
        }
        SampleSource::Points { points } => points.iter().map(|p| pad(p)).collect(),
    })
}

fn default_region(dim: usize) -> Region {
    if dim == 2 {
        Region::Box { lo: [-0.5, 0.0, 0.0], hi: [0.5, 0.5, 0.0] }
    } else {
        Region::Box { lo: [-0.5, -0.5, 0.0], hi: [0.5, 0.5, 0.5] }
    }
}

/// Resolves the experiment name, checking it against the subcommand.
pub fn resolve_experiment(cfg: &ExperimentConfig, subcommand: &str) -> Result<String> {
    let allowed: &[&str] = match subcommand {
        "frequency" => &["frequency-profile", "monotonicity-sweep", "rigidity", "doubling"],
        "singular" => &["singular-map"],
        "beta" => &["beta-sweep"],
        "cover" => &["cover-and-pack"],
        "mink" => &["minkowski"],
        "verify" => &EXPERIMENTS,
        other => return Err(Error::Config(format!("unknown subcommand `{other}`"))),
    };
    match &cfg.experiment {
        Some(e) if allowed.contains(&e.as_str()) => Ok(e.clone()),
        Some(e) => Err(Error::Config(format!("experiment `{e}` cannot run under `{subcommand}`"))),
        None if subcommand == "verify" => Err(Error::Config("experiment: required for verify".into())),
        None => Ok(allowed[0].to_string()),
    }
}

/// Runs an experiment and returns its artifacts without touching the file system.
pub fn run_experiment(cfg: &ExperimentConfig, experiment: &str) -> Result<Artifacts> {
    let domain = cfg.build_domain()?;
    let f = cfg.build_field(domain.clone())?;
    let dim = domain.dim;
    let p = &cfg.params;
    let mut art = Artifacts::default();
    match experiment {
        "frequency-profile" | "monotonicity-sweep" | "rigidity" | "doubling" => {
            let eng = cfg.engine(dim);
            let radii = cfg.radii();
            let profiles = cfg
                .centers()
                .iter()
                .map(|c| eng.unified_frequency_profile(&f, c, &radii, false))
                .collect::<Result<Vec<_>>>()?;
            let (header, rows) = profile_rows(&profiles, dim);
            art.file("profile.csv", csv(&header, &rows));
            match experiment {
                "frequency-profile" => {
                    if let Some(n) = p.expected_frequency {
                        for pr in &profiles {
                            let worst = pr.values.iter().map(|v| (v - n).abs()).fold(0.0, f64::max);
                            art.checks.push(Check::new(
                                format!("frequency-constant@{:?}", &pr.center[..dim]),
                                worst <= p.tolerance,
                                format!("max |N - {n}| = {}", fmt_f64(worst)),
                            ));
                        }
                    }
                }
                "monotonicity-sweep" => monotonicity_checks(&profiles, p.eps_num, &mut art),
                "rigidity" => {
                    if let Some(tol) = p.rigidity_tol {
                        for pr in &profiles {
                            for s in &pr.samples {
                                let worst = s.residual_h.abs().max(s.residual_b.abs());
                                art.checks.push(Check::new(
                                    format!("rigidity@{:?},r={}", &pr.center[..dim], fmt_f64(s.radius)),
                                    worst <= tol,
                                    format!("max(|R_h|, |R_b|) = {}", fmt_f64(worst)),
                                ));
                            }
                        }
                    }
                }
                _ => {
                    let mut rows = Vec::new();
                    for pr in &profiles {
                        for w in pr.radii.windows(2) {
                            let rep = doubling_check(pr, w[0], w[1], dim, &domain.modulus, eng.c_mod, p.doubling_slack)?;
                            art.checks.push(Check::new(
                                format!("doubling@{:?},r1={},r2={}", &pr.center[..dim], fmt_f64(w[0]), fmt_f64(w[1])),
                                rep.pass,
                                format!("{} <= {} <= {}", fmt_f64(rep.lower), fmt_f64(rep.ratio), fmt_f64(rep.upper)),
                            ));
                            let mut row = coords(&pr.center, dim);
                            row.extend([rep.r1, rep.r2, rep.lower, rep.ratio, rep.upper].map(fmt_f64));
                            row.push(rep.pass.to_string());
                            rows.push(row);
                        }
                    }
                    let mut header = coord_names(dim, "x");
                    header.extend(["r1", "r2", "lower", "ratio", "upper", "pass"].map(String::from));
                    art.file("doubling.csv", csv(&header, &rows));
                }
            }
        }
        "singular-map" => {
            let region = p.region.unwrap_or_else(|| default_region(dim));
            let set = locate_singular_set(&f, &region, p.h)?;
            let params = CriticalParams { alpha0: cfg.ledger.alpha0_for(dim), beta: cfg.ledger.beta };
            let mut out = json!({
                "region": region,
                "h": p.h,
                "alpha0": params.alpha0,
                "beta": params.beta,
                "singular": set,
            });
            if let Some(r0) = p.r0 {
                let r_c = p.r_c.unwrap_or(cfg.ledger.r_c);
                let cand = grid_points(&region, dim, p.candidate_spacing.unwrap_or(p.h))
                    .into_iter()
                    .filter(|q| domain.in_closure(q))
                    .collect::<Vec<_>>();
                let eff = effective_critical_set(&f, &cand, r0, r_c, &params)?;
                out["r0"] = json!(r0);
                out["r_c"] = json!(r_c);
                out["effective_critical"] = serde_json::to_value(&eff)?;
            }
            art.checks.push(Check::new("singular-residuals", residuals_ok(&set), format!("{} points", set.len())));
            art.file("singular.json", to_json_string(&out));
        }
        "beta-sweep" => {
            let src = p.samples.as_ref().ok_or_else(|| Error::Config("params.samples: required for beta-sweep".into()))?;
            let pts = sample_points(src, &f)?;
            let cloud = WeightedCloud::unit(dim, pts)?;
            let k = p.k.unwrap_or((dim - 2).max(1));
            let mut rows = Vec::new();
            let mut extra = Vec::new();
            for c in cfg.centers() {
                for &r in &cfg.radii() {
                    let b = beta_number(&cloud, &c, r, k)?;
                    let mut row = coords(&c, dim);
                    row.push(fmt_f64(r));
                    row.push(k.to_string());
                    row.push(fmt_f64(b.beta));
                    row.extend(b.eigenvalues.iter().map(|v| fmt_f64(*v)));
                    row.extend(b.plane.iter().flat_map(|v| v.iter().map(|x| fmt_f64(*x))));
                    rows.push(row);
                    if p.bound_check && dim == 3 {
                        let eng = FrequencyEngine::fast(dim, cfg.ledger.c_mod);
                        let rep = beta_frequency_bound_check(&f, &eng, &cloud, &c, r, cfg.ledger.delta_in)?;
                        extra.push(serde_json::to_value(rep)?);
                    }
                }
                let s = p.r_max;
                let dini = dini_beta_integral(&cloud, &c, s, k, MAX_GRID_RATIO)?;
                extra.push(json!({"center": &c[..dim], "s": s, "dini_beta_integral": dini,
                    "eta_dr_bound": cfg.ledger.eta_dr * s.powi(k as i32)}));
            }
            let mut header = coord_names(dim, "p");
            header.extend(["r", "k", "beta"].map(String::from));
            header.extend((1..=dim).map(|i| format!("lambda_{i}")));
            for a in 0..k {
                header.extend((1..=dim).map(|i| format!("plane{}_{i}", a + 1)));
            }
            art.file("beta.csv", csv(&header, &rows));
            art.file("beta_summary.json", to_json_string(&Value::Array(extra)));
        }
        "cover-and-pack" => {
            let src = p.samples.as_ref().ok_or_else(|| Error::Config("params.samples: required for cover-and-pack".into()))?;
            let r0 = p.r0.ok_or_else(|| Error::Config("params.r0: required for cover-and-pack".into()))?;
            let pts = sample_points(src, &f)?;
            let cov = Coverer::new(&f, pts, cfg.ledger.clone())?;
            let center = cfg.centers()[0];
            let (tree, rep) = cov.iterate_cover(&center, r0, p.r_star)?;
            art.checks.push(Check::new("cover-coverage", rep.coverage, format!("{} samples", tree.sample_count)));
            art.checks.push(Check::new("cover-fifth-disjoint", rep.disjoint, format!("{} nodes", tree.nodes.len())));
            art.checks.push(Check::new(
                "cover-small-dimension-count",
                rep.small_dimension_ok,
                format!("{} refinements", tree.small_dimension.len()),
            ));
            let rows: Vec<Vec<String>> = rep
                .levels
                .iter()
                .map(|l| vec![l.level.to_string(), l.count.to_string(), fmt_f64(l.sum), fmt_f64(l.min_radius)])
                .collect();
            art.file("packing.csv", csv(&["level", "count", "sum_r_pow", "min_radius"].map(String::from), &rows));
            art.file("packing.json", to_json_string(&serde_json::to_value(&rep)?));
            if p.tree_json {
                art.file("cover_tree.json", to_json_string(&tree.nested_json()));
            }
        }
        "minkowski" => {
            let src = p.samples.as_ref().ok_or_else(|| Error::Config("params.samples: required for minkowski".into()))?;
            let pts = sample_points(src, &f)?;
            let region = p.region.unwrap_or(Region::Box { lo: [-1e3; 3], hi: [1e3; 3] });
            let est = minkowski_estimate(&pts, dim, p.tube_radius, &region, p.probes, cfg.seed)?;
            if let Some(e) = p.expected_content {
                let rel = (est.value - e).abs() / e;
                art.checks.push(Check::new("minkowski-content", rel <= p.content_tolerance, format!("relative error {}", fmt_f64(rel))));
            }
            art.file("minkowski.json", to_json_string(&serde_json::to_value(&est)?));
        }
        other => return Err(Error::Config(format!("experiment: unknown experiment `{other}`"))),
    }
    Ok(art)
}

fn residuals_ok(set: &PointSampleSet) -> bool {
    set.points.iter().all(|p| p.residual.is_finite())
}

fn monotonicity_checks(profiles: &[FrequencyProfile], eps: f64, art: &mut Artifacts) {
    for pr in profiles {
        let mut worst: Option<(f64, f64)> = None;
        let pick: Vec<(f64, f64)> = pr
            .samples
            .iter()
            .zip(&pr.values)
            .filter(|(s, _)| match s.branch {
                Branch::Interior => true,
                _ => pr.samples.iter().all(|t| t.branch != Branch::Interior),
            })
            .map(|(s, v)| (s.radius, *v))
            .collect();
        for w in pick.windows(2) {
            let excess = w[0].1 - w[1].1 - eps * (1.0 + w[0].1);
            if excess > 0.0 && worst.is_none_or(|(_, e)| excess > e) {
                worst = Some((w[1].0, excess));
            }
        }
        let name = format!("monotone@{:?}", &pr.center[..]);
        match worst {
            None => art.checks.push(Check::new(name, true, format!("{} radii", pick.len()))),
            Some((r, e)) => art.checks.push(Check::new(name, false, format!("decrease beyond tolerance by {} at r = {}", fmt_f64(e), fmt_f64(r)))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub ledger: ConstantLedger,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
}

/// Writes artifacts and the manifest into `dir`.
pub fn write_artifacts(cfg: &ExperimentConfig, experiment: &str, art: &Artifacts, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in &art.files {
        std::fs::write(dir.join(name), body)?;
    }
    let m = Manifest {
        experiment: experiment.to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        ledger: cfg.ledger.clone(),
        files: art.files.iter().map(|f| f.0.clone()).collect(),
        checks: art.checks.clone(),
    };
    std::fs::write(dir.join("manifest.json"), to_json_string(&serde_json::to_value(&m)?))?;
    Ok(m)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub experiments: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
    pub all_pass: bool,
}

/// Aggregates manifests in `dir` (or its immediate subdirectories) into summary.json and summary.txt.
pub fn emit_report(dir: &Path) -> Result<Summary> {
    let mut manifests = Vec::new();
    if dir.join("manifest.json").is_file() {
        manifests.push(dir.join("manifest.json"));
    } else if dir.is_dir() {
        let mut subs: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("manifest.json").is_file())
            .collect();
        subs.sort();
        manifests.extend(subs.into_iter().map(|p| p.join("manifest.json")));
    }
    if manifests.is_empty() {
        return Err(Error::Config(format!("{}: missing manifest", dir.display())));
    }
    let mut experiments = Vec::new();
    let mut checks = Vec::new();
    for m in manifests {
        let man: Manifest = serde_json::from_str(&std::fs::read_to_string(&m)?)?;
        experiments.push(man.experiment.clone());
        checks.extend(man.checks.into_iter().map(|mut c| {
            c.name = format!("{}/{}", man.experiment, c.name);
            c
        }));
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    let s = Summary { experiments, passed: checks.len() - failed, failed, all_pass: failed == 0, checks };
    std::fs::write(dir.join("summary.json"), to_json_string(&serde_json::to_value(&s)?))?;
    let w = s.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let mut txt = format!("{:<w$}  status  detail\n", "check");
    for c in &s.checks {
        let _ = writeln!(txt, "{:<w$}  {:<6}  {}", c.name, if c.pass { "pass" } else { "FAIL" }, c.detail);
    }
    let _ = writeln!(txt, "{} passed, {} failed", s.passed, s.failed);
    std::fs::write(dir.join("summary.txt"), txt)?;
    Ok(s)
}
