//! Inductive covering of sampled singular sets, packing sums, and Minkowski-content estimates.

use crate::error::{Error, Result};
use crate::frequency::{unified_value, FrequencyEngine, PointContext};
use crate::harmonic_fields::HarmonicField;
use crate::linalg::{dist, Point};
use crate::singular_detect::{affine_distance, alpha_d1, effective_spanning_lazy, Region, SpanningCertificate};
use crate::spatial::KdTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

/// Every tunable constant of the covering argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantLedger {
    /// Effective-critical threshold; `None` means 0.25·α_d¹.
    pub alpha0: Option<f64>,
    pub beta: f64,
    pub delta: f64,
    pub delta_in: f64,
    pub delta0: f64,
    pub rho: f64,
    pub tau: f64,
    pub c_mod: f64,
    pub eta_dr: f64,
    pub c_dr: f64,
    /// Constant in the small-dimension ball count bound C′_d·ρ^{3−d}.
    pub c_prime: f64,
    pub r_c: f64,
    pub r_in: f64,
    pub r_b: f64,
    pub r_tn: f64,
    /// Fixed Λ*; measured from the samples when absent.
    pub lambda_star: Option<f64>,
    /// Number of samples used to measure Λ*.
    pub lambda_samples: usize,
}

impl Default for ConstantLedger {
    fn default() -> Self {
        ConstantLedger {
            alpha0: None,
            beta: 0.3,
            delta: 0.1,
            delta_in: 0.05,
            delta0: 0.05,
            rho: 0.1,
            tau: 0.01,
            c_mod: 20.0,
            eta_dr: 0.01,
            c_dr: 100.0,
            c_prime: 5.0,
            r_c: 1.0,
            r_in: 1.0,
            r_b: 1.0,
            r_tn: 1.0,
            lambda_star: None,
            lambda_samples: 4096,
        }
    }
}

impl ConstantLedger {
    pub fn alpha0_for(&self, dim: usize) -> f64 {
        self.alpha0.unwrap_or_else(|| 0.25 * alpha_d1(dim))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.rho > 0.0 && self.rho <= 0.5) {
            return bad(format!("ledger.rho = {} outside (0, 1/2]", self.rho));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("delta_in", self.delta_in),
            ("delta0", self.delta0),
            ("tau", self.tau),
            ("beta", self.beta),
            ("r_c", self.r_c),
            ("r_in", self.r_in),
            ("r_b", self.r_b),
            ("r_tn", self.r_tn),
            ("c_prime", self.c_prime),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("ledger.{name} = {v} must be positive"));
            }
        }
        if let Some(a) = self.alpha0 {
            if !(a > 0.0) {
                return bad(format!("ledger.alpha0 = {a} must be positive"));
            }
        }
        if self.lambda_samples == 0 {
            return bad("ledger.lambda_samples must be positive".into());
        }
        Ok(())
    }

    /// Checks r0 < r* ≤ r_c.
    pub fn check_scales(&self, r0: f64, r_star: f64) -> Result<()> {
        if !(r0 > 0.0 && r0 <= r_star && r_star <= self.r_c) {
            return Err(Error::Config(format!("need 0 < r0 <= r* <= r_c (r0={r0}, r*={r_star}, r_c={})", self.r_c)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallLabel {
    Good,
    Terminal,
    SmallDimension,
    FrequencyDrop,
    EmptyF,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffineSubspace {
    pub origin: Point,
    pub basis: Vec<Point>,
    pub max_distance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverBall {
    pub center: Point,
    pub radius: f64,
    pub label: BallLabel,
    pub level: usize,
    pub round: usize,
    pub batch: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub subspace: Option<AffineSubspace>,
    /// Set once the ball has been split; a split ball whose samples were all taken by
    /// neighbours of the same batch ends with no children.
    #[serde(default)]
    pub subdivided: bool,
    #[serde(skip)]
    members: Vec<usize>,
}

impl CoverBall {
    pub fn is_leaf(&self) -> bool {
        !self.subdivided && self.children.is_empty()
    }

    /// Sample indices assigned to this leaf.
    pub fn members(&self) -> &[usize] {
        &self.members
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmallDimReport {
    pub node: usize,
    pub on_count: usize,
    pub off_count: usize,
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverTree {
    pub dim: usize,
    pub root_center: Point,
    pub r_star: f64,
    pub r0: f64,
    pub lambda_star: f64,
    pub threshold: f64,
    pub round: usize,
    pub nodes: Vec<CoverBall>,
    pub small_dimension: Vec<SmallDimReport>,
    pub sample_count: usize,
    batches: usize,
}

impl CoverTree {
    pub fn leaves(&self) -> impl Iterator<Item = &CoverBall> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ r_X^{d−2} over the leaves.
    pub fn packing_sum(&self) -> f64 {
        self.leaves().map(|b| b.radius.powi(self.dim as i32 - 2)).sum()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// (level, radius, count, Σ r^{d−2}) of the leaves, by level.
    pub fn level_sums(&self) -> Vec<LevelPacking> {
        let mut m: BTreeMap<usize, LevelPacking> = BTreeMap::new();
        for b in self.leaves() {
            let e = m.entry(b.level).or_insert(LevelPacking { level: b.level, count: 0, sum: 0.0, min_radius: f64::INFINITY });
            e.count += 1;
            e.sum += b.radius.powi(self.dim as i32 - 2);
            e.min_radius = e.min_radius.min(b.radius);
        }
        m.into_values().collect()
    }

    /// Every covered sample lies in its leaf, and each root sample is covered exactly once.
    pub fn check_coverage(&self, samples: &[Point]) -> bool {
        if self.nodes.is_empty() {
            return self.sample_count == 0;
        }
        let mut seen = vec![false; samples.len()];
        let mut n = 0;
        for b in self.leaves() {
            for &i in &b.members {
                if seen[i] || dist(&samples[i], &b.center) > b.radius * (1.0 + 1e-12) {
                    return false;
                }
                seen[i] = true;
                n += 1;
            }
        }
        n == self.sample_count
    }

    /// Centers in one batch are separated by more than (r_X + r_X′)/5.
    pub fn check_disjointness(&self) -> bool {
        let mut by_batch: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, b) in self.nodes.iter().enumerate() {
            by_batch.entry(b.batch).or_default().push(i);
        }
        by_batch.values().all(|ids| {
            let pts: Vec<Point> = ids.iter().map(|&i| self.nodes[i].center).collect();
            let rmax = ids.iter().map(|&i| self.nodes[i].radius).fold(0.0, f64::max);
            let tree = KdTree::new(pts.clone(), self.dim);
            ids.iter().enumerate().all(|(a, &i)| {
                let ri = self.nodes[i].radius;
                tree.within(&pts[a], (ri + rmax) / 5.0).into_iter().all(|b| {
                    b == a || dist(&pts[a], &pts[b]) > (ri + self.nodes[ids[b]].radius) / 5.0
                })
            })
        })
    }

    /// Nested JSON view of the tree.
    pub fn nested_json(&self) -> serde_json::Value {
        fn walk(t: &CoverTree, i: usize) -> serde_json::Value {
            let b = &t.nodes[i];
            serde_json::json!({
                "center": &b.center[..t.dim],
                "radius": b.radius,
                "label": b.label,
                "level": b.level,
                "round": b.round,
                "children": b.children.iter().map(|&c| walk(t, c)).collect::<Vec<_>>(),
            })
        }
        if self.nodes.is_empty() {
            serde_json::Value::Null
        } else {
            walk(self, 0)
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LevelPacking {
    pub level: usize,
    pub count: usize,
    pub sum: f64,
    pub min_radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundPacking {
    pub round: usize,
    pub threshold: f64,
    pub leaves: usize,
    pub packing_sum: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PackingReport {
    pub rounds: Vec<RoundPacking>,
    pub levels: Vec<LevelPacking>,
    pub lambda_star: f64,
    pub leaf_count: usize,
    pub packing_sum: f64,
    /// Σ r_X^{d−2} / r*^{d−2}.
    pub c_p: f64,
    /// N_balls·(r0/r*)^{d−2}.
    pub scaling: f64,
    pub coverage: bool,
    pub disjoint: bool,
    pub small_dimension_ok: bool,
    pub frequency_evaluations: usize,
}

/// Memo of N_Y(r) keyed by exact sample index and radius bits.
#[derive(Default)]
struct FrequencyMemo {
    map: RwLock<HashMap<(usize, u64), f64>>,
}

impl FrequencyMemo {
    fn get_or<F: FnOnce() -> Result<f64>>(&self, i: usize, r: f64, f: F) -> Result<f64> {
        let key = (i, r.to_bits());
        if let Some(v) = self.map.read().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = f()?;
        self.map.write().unwrap().insert(key, v);
        Ok(v)
    }

    fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }
}

/// Field, samples and ledger shared by the covering steps.
pub struct Coverer<'a> {
    pub field: &'a HarmonicField,
    pub engine: FrequencyEngine,
    pub ledger: ConstantLedger,
    samples: Vec<Point>,
    tree: KdTree,
    memo: FrequencyMemo,
}

enum Outcome {
    Terminal,
    Empty,
    Small(AffineSubspace),
    Spanning,
}

impl<'a> Coverer<'a> {
    pub fn new(field: &'a HarmonicField, samples: Vec<Point>, ledger: ConstantLedger) -> Result<Self> {
        ledger.validate()?;
        let dim = field.domain.dim;
        let engine = FrequencyEngine::fast(dim, ledger.c_mod);
        let tree = KdTree::new(samples.clone(), dim);
        Ok(Coverer { field, engine, ledger, samples, tree, memo: FrequencyMemo::default() })
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn frequency_evaluations(&self) -> usize {
        self.memo.len()
    }

    /// N_Y(r) for sample i.
    pub fn sample_frequency(&self, i: usize, r: f64) -> Result<f64> {
        self.memo.get_or(i, r, || {
            let y = self.samples[i];
            let ctx = PointContext::new(&self.field.domain, &y)?;
            Ok(unified_value(&self.engine.unified_sample(self.field, &y, r, &ctx)?))
        })
    }

    /// Λ* = max N_Y(r*) over an evenly strided subsample of the root ball.
    pub fn measure_lambda_star(&self, members: &[usize], r_star: f64) -> Result<f64> {
        if let Some(l) = self.ledger.lambda_star {
            return Ok(l);
        }
        let stride = members.len().div_ceil(self.ledger.lambda_samples).max(1);
        let picks: Vec<usize> = members.iter().step_by(stride).copied().collect();
        let vals = picks.par_iter().map(|&i| self.sample_frequency(i, r_star)).collect::<Result<Vec<_>>>()?;
        Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    fn classify(&self, ball: &CoverBall, r0: f64, threshold: f64) -> Result<Outcome> {
        if ball.radius <= r0 * (1.0 + 1e-12) {
            return Ok(Outcome::Terminal);
        }
        let reach = 2.0 * ball.radius;
        let mut cand = self.tree.within(&ball.center, reach);
        cand.sort_by(|&a, &b| {
            dist(&self.samples[a], &ball.center).partial_cmp(&dist(&self.samples[b], &ball.center)).unwrap().then(a.cmp(&b))
        });
        let pts: Vec<Point> = cand.iter().map(|&i| self.samples[i]).collect();
        let probe = self.ledger.rho * ball.radius / 10.0;
        let member = |j: usize| -> Result<bool> { Ok(self.sample_frequency(cand[j], probe)? >= threshold) };
        let k = self.field.domain.dim - 2;
        match effective_spanning_lazy(&pts, member, k, self.ledger.tau, reach)? {
            None => Ok(Outcome::Empty),
            Some(SpanningCertificate::Spanning { .. }) => Ok(Outcome::Spanning),
            Some(SpanningCertificate::Contained { origin, basis, max_distance, .. }) => {
                Ok(Outcome::Small(AffineSubspace { origin, basis, max_distance }))
            }
        }
    }

    /// Greedy net of radius `radius` over the union of member lists, farthest from the
    /// own parent's center first.
    fn net(&self, parents: &[(usize, &[usize], Point)], radius: f64) -> Vec<(usize, usize, Vec<usize>)> {
        let mut items: Vec<(f64, usize, usize)> = Vec::new();
        for (p, mem, c) in parents {
            for &i in mem.iter() {
                items.push((dist(&self.samples[i], c), i, *p));
            }
        }
        items.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let pts: Vec<Point> = items.iter().map(|t| self.samples[t.1]).collect();
        let local = KdTree::new(pts.clone(), self.field.domain.dim);
        let mut covered = vec![false; items.len()];
        let mut out = Vec::new();
        for a in 0..items.len() {
            if covered[a] {
                continue;
            }
            let mut mem = Vec::new();
            for b in local.within(&pts[a], radius) {
                if !covered[b] {
                    covered[b] = true;
                    mem.push(items[b].1);
                }
            }
            mem.sort_unstable();
            out.push((items[a].1, items[a].2, mem));
        }
        out
    }

    fn push_children(
        &self,
        tree: &mut CoverTree,
        parents: &[usize],
        radius: f64,
        label_of: &dyn Fn(&Point, usize) -> BallLabel,
    ) -> Vec<usize> {
        let views: Vec<(usize, &[usize], Point)> =
            parents.iter().map(|&p| (p, tree.nodes[p].members.as_slice(), tree.nodes[p].center)).collect();
        let kids = self.net(&views, radius);
        let batch = tree.batches;
        tree.batches += 1;
        let mut ids = Vec::with_capacity(kids.len());
        for (c, p, mem) in kids {
            let center = self.samples[c];
            let id = tree.nodes.len();
            let parent = &tree.nodes[p];
            let node = CoverBall {
                center,
                radius,
                label: label_of(&center, p),
                level: parent.level + 1,
                round: tree.round,
                batch,
                parent: Some(p),
                children: Vec::new(),
                subspace: None,
                subdivided: false,
                members: mem,
            };
            tree.nodes.push(node);
            tree.nodes[p].children.push(id);
            ids.push(id);
        }
        for &p in parents {
            tree.nodes[p].members = Vec::new();
            tree.nodes[p].subdivided = true;
        }
        ids
    }

    fn child_radius(&self, r: f64, r0: f64) -> f64 {
        (self.ledger.rho * r).max(r0)
    }

    /// Subdivides good balls until every leaf is terminal, small-dimensional or dropped.
    fn grow(&self, tree: &mut CoverTree, mut frontier: Vec<usize>) -> Result<()> {
        while !frontier.is_empty() {
            let outcomes: Vec<Outcome> = frontier
                .par_iter()
                .map(|&i| self.classify(&tree.nodes[i], tree.r0, tree.threshold))
                .collect::<Result<Vec<_>>>()?;
            // group subdivisions by child radius and child label
            let mut groups: BTreeMap<(u64, u8), Vec<usize>> = BTreeMap::new();
            for (&i, o) in frontier.iter().zip(outcomes) {
                let r = tree.nodes[i].radius;
                let cr = self.child_radius(r, tree.r0).to_bits();
                match o {
                    Outcome::Terminal => tree.nodes[i].label = BallLabel::Terminal,
                    Outcome::Small(v) => {
                        tree.nodes[i].label = BallLabel::SmallDimension;
                        tree.nodes[i].subspace = Some(v);
                    }
                    Outcome::Empty => {
                        tree.nodes[i].label = BallLabel::EmptyF;
                        groups.entry((cr, 1)).or_default().push(i);
                    }
                    Outcome::Spanning => groups.entry((cr, 0)).or_default().push(i),
                }
            }
            let mut next = Vec::new();
            for ((rb, kind), parents) in groups {
                let label = if kind == 0 { BallLabel::Good } else { BallLabel::FrequencyDrop };
                let ids = self.push_children(tree, &parents, f64::from_bits(rb), &|_, _| label);
                if kind == 0 {
                    next.extend(ids);
                }
            }
            frontier = next;
        }
        Ok(())
    }

    fn root_members(&self, center: &Point, r_star: f64) -> Vec<usize> {
        self.tree.within(center, r_star)
    }

    /// One covering round with threshold Λ* − δ.
    pub fn build_cover(&self, center: &Point, r0: f64, r_star: f64) -> Result<CoverTree> {
        self.ledger.check_scales(r0, r_star)?;
        let dim = self.field.domain.dim;
        let members = self.root_members(center, r_star);
        let mut tree = CoverTree {
            dim,
            root_center: *center,
            r_star,
            r0,
            lambda_star: f64::NAN,
            threshold: f64::NAN,
            round: 0,
            nodes: Vec::new(),
            small_dimension: Vec::new(),
            sample_count: members.len(),
            batches: 1,
        };
        if members.is_empty() {
            return Ok(tree);
        }
        tree.lambda_star = self.measure_lambda_star(&members, r_star)?;
        tree.threshold = tree.lambda_star - self.ledger.delta;
        tree.nodes.push(CoverBall {
            center: *center,
            radius: r_star,
            label: BallLabel::Good,
            level: 0,
            round: 0,
            batch: 0,
            parent: None,
            children: Vec::new(),
            subspace: None,
            subdivided: false,
            members,
        });
        self.grow(&mut tree, vec![0])?;
        Ok(tree)
    }

    /// Replaces small-dimension leaves by balls of radius ρr_X and keeps subdividing the
    /// ones near the subspace.
    pub fn refine_small_dimension(&self, tree: &mut CoverTree) -> Result<()> {
        let rho = self.ledger.rho;
        let dim = tree.dim as i32;
        let cd = self.ledger.c_prime;
        if cd * rho >= 1.0 {
            return Err(Error::Cover(format!("C'_d*rho = {} >= 1 violates the choice of rho", cd * rho)));
        }
        let bound = cd * rho.powi(3 - dim);
        loop {
            let small: Vec<usize> = (0..tree.nodes.len())
                .filter(|&i| tree.nodes[i].label == BallLabel::SmallDimension && tree.nodes[i].is_leaf())
                .collect();
            if small.is_empty() {
                return Ok(());
            }
            let mut frontier = Vec::new();
            for i in small {
                let r = tree.nodes[i].radius;
                let v = tree.nodes[i].subspace.clone().expect("small-dimension leaf has a subspace");
                let reach = 1.2 * rho * r;
                let cr = self.child_radius(r, tree.r0);
                let ids = self.push_children(tree, &[i], cr, &|c, _| {
                    if affine_distance(c, &v.origin, &v.basis) <= reach {
                        BallLabel::Good
                    } else {
                        BallLabel::FrequencyDrop
                    }
                });
                let on: Vec<usize> = ids.iter().copied().filter(|&c| tree.nodes[c].label == BallLabel::Good).collect();
                tree.small_dimension.push(SmallDimReport {
                    node: i,
                    on_count: on.len(),
                    off_count: ids.len() - on.len(),
                    bound,
                    within_bound: on.len() as f64 <= bound,
                });
                frontier.extend(on);
            }
            self.grow(tree, frontier)?;
        }
    }

    /// Rounds of covering with thresholds Λ* − jδ until every leaf is terminal.
    pub fn iterate_cover(&self, center: &Point, r0: f64, r_star: f64) -> Result<(CoverTree, PackingReport)> {
        let mut tree = self.build_cover(center, r0, r_star)?;
        let mut rounds = Vec::new();
        if tree.nodes.is_empty() {
            let report = self.report(&tree, rounds);
            return Ok((tree, report));
        }
        let cap = ((tree.lambda_star / self.ledger.delta).ceil() as i64 - 1).max(0) as usize;
        loop {
            self.refine_small_dimension(&mut tree)?;
            rounds.push(RoundPacking {
                round: tree.round,
                threshold: tree.threshold,
                leaves: tree.leaf_count(),
                packing_sum: tree.packing_sum(),
            });
            let open: Vec<usize> = (0..tree.nodes.len())
                .filter(|&i| {
                    let b = &tree.nodes[i];
                    b.is_leaf() && b.label == BallLabel::FrequencyDrop && b.radius > r0 * (1.0 + 1e-12)
                })
                .collect();
            if open.is_empty() {
                break;
            }
            if tree.round >= cap {
                return Err(Error::Cover(format!(
                    "round cap {cap} exceeded with {} open balls; delta too small for the frequency range",
                    open.len()
                )));
            }
            tree.round += 1;
            tree.threshold = tree.lambda_star - (tree.round as f64 + 1.0) * self.ledger.delta;
            // dropped balls restart as good balls of the next round
            let mut frontier = Vec::new();
            for i in open {
                let b = &tree.nodes[i];
                let id = tree.nodes.len();
                let node = CoverBall {
                    center: b.center,
                    radius: b.radius,
                    label: BallLabel::Good,
                    level: b.level,
                    round: tree.round,
                    batch: tree.batches,
                    parent: Some(i),
                    children: Vec::new(),
                    subspace: None,
                    subdivided: false,
                    members: b.members.clone(),
                };
                tree.nodes[i].members = Vec::new();
                tree.nodes[i].subdivided = true;
                tree.nodes[i].children.push(id);
                tree.nodes.push(node);
                frontier.push(id);
            }
            tree.batches += 1;
            self.grow(&mut tree, frontier)?;
        }
        for b in tree.nodes.iter_mut().filter(|b| b.is_leaf() && b.radius <= r0 * (1.0 + 1e-12)) {
            b.label = BallLabel::Terminal;
        }
        let report = self.report(&tree, rounds);
        Ok((tree, report))
    }

    fn report(&self, tree: &CoverTree, rounds: Vec<RoundPacking>) -> PackingReport {
        let d2 = tree.dim as i32 - 2;
        let sum = tree.packing_sum();
        let n = tree.leaf_count();
        PackingReport {
            rounds,
            levels: tree.level_sums(),
            lambda_star: tree.lambda_star,
            leaf_count: n,
            packing_sum: sum,
            c_p: sum / tree.r_star.powi(d2),
            scaling: n as f64 * (tree.r0 / tree.r_star).powi(d2),
            coverage: tree.check_coverage(&self.samples),
            disjoint: tree.check_disjointness(),
            small_dimension_ok: tree.small_dimension.iter().all(|s| s.within_bound),
            frequency_evaluations: self.frequency_evaluations(),
        }
    }
}

/// One covering round over `samples` rooted at `center`.
pub fn build_cover(
    f: &HarmonicField,
    samples: &[Point],
    center: &Point,
    r0: f64,
    r_star: f64,
    ledger: &ConstantLedger,
) -> Result<CoverTree> {
    Coverer::new(f, samples.to_vec(), ledger.clone())?.build_cover(center, r0, r_star)
}

/// Full iteration with packing report.
pub fn iterate_cover(
    f: &HarmonicField,
    samples: &[Point],
    center: &Point,
    r0: f64,
    r_star: f64,
    ledger: &ConstantLedger,
) -> Result<(CoverTree, PackingReport)> {
    Coverer::new(f, samples.to_vec(), ledger.clone())?.iterate_cover(center, r0, r_star)
}

/// Points on the segment [a, b] with spacing at most `spacing`.
pub fn segment_samples(a: &Point, b: &Point, spacing: f64) -> Vec<Point> {
    let len = dist(a, b);
    let n = (len / spacing).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinkowskiEstimate {
    pub radius: f64,
    pub value: f64,
    pub stderr: f64,
    pub tube_volume: f64,
    pub probes: usize,
    pub hits: usize,
    pub box_volume: f64,
    pub seed: u64,
}

const CHUNK: usize = 1 << 16;

/// (2r)^{−2}·|B_r(A) ∩ region| by Monte Carlo on the bounding box of the tube.
pub fn minkowski_estimate(points: &[Point], dim: usize, r: f64, region: &Region, probes: usize, seed: u64) -> Result<MinkowskiEstimate> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("tube radius {r}")));
    }
    if probes == 0 {
        return Err(Error::InvalidParameter("no probes".into()));
    }
    let empty = MinkowskiEstimate { radius: r, value: 0.0, stderr: 0.0, tube_volume: 0.0, probes, hits: 0, box_volume: 0.0, seed };
    if points.is_empty() {
        return Ok(empty);
    }
    let (rlo, rhi) = region.bounds();
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for p in points {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k] - r);
            hi[k] = hi[k].max(p[k] + r);
        }
    }
    for k in 0..dim {
        lo[k] = lo[k].max(rlo[k]);
        hi[k] = hi[k].min(rhi[k]);
        if !(hi[k] > lo[k]) {
            return Err(Error::InvalidParameter("probe region misses the tube".into()));
        }
    }
    let vol: f64 = (0..dim).map(|k| hi[k] - lo[k]).product();
    let tree = KdTree::new(points.to_vec(), dim);
    let chunks = probes.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(probes - c * CHUNK);
            let mut h = 0;
            for _ in 0..n {
                let mut q = [0.0; 3];
                for k in 0..dim {
                    q[k] = rng.gen_range(lo[k]..hi[k]);
                }
                if region.contains(&q, dim, 0.0) && tree.nearest(&q).is_some_and(|(_, d)| d <= r) {
                    h += 1;
                }
            }
            h
        })
        .sum();
    let p = hits as f64 / probes as f64;
    let tube = vol * p;
    let norm = (2.0 * r).powi(-2);
    Ok(MinkowskiEstimate {
        radius: r,
        value: norm * tube,
        stderr: norm * vol * (p * (1.0 - p) / probes as f64).sqrt(),
        tube_volume: tube,
        probes,
        hits,
        box_volume: vol,
        seed,
    })
}
