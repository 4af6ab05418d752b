//! Experimental protocol: pair sampling, splits, transitivity, significance
//! and the experiment runner that compares the learned ranker with the
//! baselines.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::baselines::Method;
use crate::error::{Error, Result};
use crate::features::{FeatureGroup, FeatureLayout, FeatureVector};
use crate::graph::InteractionGraph;
use crate::ltr::{self, Aspect, Candidate, Hyper, LinearRankModel, PreferencePair};
use crate::paths::ExplanationPath;

/// Default number of pairs sampled per feed item.
pub const DEFAULT_PAIRS_PER_ITEM: usize = 25;

/// Significance threshold for the paired t-test.
pub const SIGNIFICANCE: f64 = 0.05;

/// A stored preference judgment; paths are referenced by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub pair_id: String,
    pub better: String,
    pub worse: String,
    pub aspect: Aspect,
    pub judge: String,
    pub judged_at: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

/// Order-independent id of a pair of paths.
pub fn pair_id(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}-{b}")
    } else {
        format!("{b}-{a}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    User,
    Category,
    Item,
}

/// Graph-independent description of a mined path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathMeta {
    pub node_ids: Vec<String>,
    pub node_types: Vec<String>,
    pub roles: Vec<NodeRole>,
    pub edge_types: Vec<String>,
}

impl PathMeta {
    pub fn of(g: &InteractionGraph, path: &ExplanationPath) -> Self {
        let schema = g.schema();
        let node_types: Vec<String> = path.nodes.iter().map(|&n| g.node(n).node_type.clone()).collect();
        let roles = node_types
            .iter()
            .map(|t| {
                if schema.is_user_type(t) {
                    NodeRole::User
                } else if schema.is_category_type(t) {
                    NodeRole::Category
                } else {
                    NodeRole::Item
                }
            })
            .collect();
        PathMeta {
            node_ids: path.nodes.iter().map(|&n| g.node(n).id.clone()).collect(),
            node_types,
            roles,
            edge_types: path.edges.iter().map(|&e| g.kind_name(g.edge(e).kind)).collect(),
        }
    }

    /// Edge count.
    pub fn len(&self) -> usize {
        self.edge_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_types.is_empty()
    }

    /// Position at which `other` differs from `self` in exactly one node
    /// instance of the same type, with identical edge types.
    pub fn perturbation_position(&self, other: &PathMeta) -> Option<usize> {
        if self.node_ids.len() != other.node_ids.len() || self.edge_types != other.edge_types {
            return None;
        }
        let mut diff = self
            .node_ids
            .iter()
            .zip(&other.node_ids)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i);
        let pos = diff.next()?;
        if diff.next().is_some() || self.node_types[pos] != other.node_types[pos] {
            return None;
        }
        Some(pos)
    }
}

/// Sampled pairs as indices into the input, plus whether fewer than
/// requested were available.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sampled {
    pub pairs: Vec<(usize, usize)>,
    pub short: bool,
}

fn unrank_pair(mut r: usize, k: usize) -> (usize, usize) {
    let mut i = 0;
    while r >= k - 1 - i {
        r -= k - 1 - i;
        i += 1;
    }
    (i, i + 1 + r)
}

fn choose<T: Clone>(items: &[T], n: usize, rng: &mut ChaCha8Rng) -> (Vec<T>, bool) {
    if items.len() <= n {
        return (items.to_vec(), items.len() < n);
    }
    let mut picked = index::sample(rng, items.len(), n).into_vec();
    picked.sort_unstable();
    (picked.into_iter().map(|i| items[i].clone()).collect(), false)
}

/// `n` distinct unordered pairs drawn uniformly without replacement.
pub fn sample_random_pairs(count: usize, n: usize, seed: u64) -> Result<Sampled> {
    if count < 2 {
        return Err(Error::InvalidArgument("need at least two paths to form a pair".into()));
    }
    let total = count * (count - 1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if total <= n {
        let pairs = (0..total).map(|r| unrank_pair(r, count)).collect();
        return Ok(Sampled { pairs, short: total < n });
    }
    let mut ranks = index::sample(&mut rng, total, n).into_vec();
    ranks.sort_unstable();
    Ok(Sampled {
        pairs: ranks.into_iter().map(|r| unrank_pair(r, count)).collect(),
        short: false,
    })
}

/// All pairs of `paths` that are perturbations at a node accepted by `at`.
pub fn perturbation_candidates(paths: &[PathMeta], at: impl Fn(&PathMeta, usize) -> bool) -> Vec<(usize, usize)> {
    let mut buckets: BTreeMap<(usize, Vec<&str>, &[String]), Vec<usize>> = BTreeMap::new();
    for (ix, p) in paths.iter().enumerate() {
        for pos in 0..p.node_ids.len() {
            if !at(p, pos) {
                continue;
            }
            let mut key_nodes: Vec<&str> = p.node_ids.iter().map(String::as_str).collect();
            key_nodes[pos] = p.node_types[pos].as_str();
            buckets.entry((pos, key_nodes, &p.edge_types)).or_default().push(ix);
        }
    }
    let mut out = BTreeSet::new();
    for members in buckets.values() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                if paths[i].node_ids != paths[j].node_ids {
                    out.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Up to `n` pairs differing in exactly one node, of type `node_type`.
pub fn sample_perturbation_pairs(
    paths: &[ExplanationPath],
    g: &InteractionGraph,
    node_type: &str,
    n: usize,
    seed: u64,
) -> Sampled {
    let metas: Vec<PathMeta> = paths.iter().map(|p| PathMeta::of(g, p)).collect();
    let all = perturbation_candidates(&metas, |m, pos| m.node_types[pos] == node_type);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pairs, short) = choose(&all, n, &mut rng);
    Sampled { pairs, short: short || all.is_empty() }
}

/// Up to `n` pairs differing in exactly one node playing `role`.
pub fn sample_role_pairs(metas: &[PathMeta], role: NodeRole, n: usize, seed: u64) -> Sampled {
    let all = perturbation_candidates(metas, |m, pos| m.roles[pos] == role);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pairs, short) = choose(&all, n, &mut rng);
    Sampled { pairs, short: short || all.is_empty() }
}

/// 80/10/10 split; dev and test sizes round down, the rest goes to train.
pub fn split<T: Clone>(items: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if items.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "split needs at least 10 pairs, got {}",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let tenth = items.len() / 10;
    let pick = |ix: &[usize]| ix.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok((
        pick(&order[2 * tenth..]),
        pick(&order[..tenth]),
        pick(&order[tenth..2 * tenth]),
    ))
}

/// Fraction of fully judged triplets that are consistent with some total
/// order. The latest judgment of an unordered pair wins. `None` when no
/// triplet is fully judged.
pub fn transitivity_score<'a>(prefs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Option<f64> {
    let mut beats: HashMap<(&str, &str), bool> = HashMap::new();
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (better, worse) in prefs {
        if better == worse {
            continue;
        }
        let (lo, hi) = if better < worse { (better, worse) } else { (worse, better) };
        beats.insert((lo, hi), better == lo);
        adj.entry(lo).or_default().insert(hi);
        adj.entry(hi).or_default().insert(lo);
    }
    let wins = |a: &str, b: &str| -> bool {
        if a < b {
            beats[&(a, b)]
        } else {
            !beats[&(b, a)]
        }
    };
    let (mut total, mut consistent) = (0usize, 0usize);
    for (&a, na) in &adj {
        for &b in na.range::<&str, _>((std::ops::Bound::Excluded(a), std::ops::Bound::Unbounded)) {
            let nb = &adj[b];
            for &c in na.range::<&str, _>((std::ops::Bound::Excluded(b), std::ops::Bound::Unbounded)) {
                if !nb.contains(c) {
                    continue;
                }
                total += 1;
                let cycle = (wins(a, b) && wins(b, c) && wins(c, a)) || (wins(b, a) && wins(c, b) && wins(a, c));
                if !cycle {
                    consistent += 1;
                }
            }
        }
    }
    (total > 0).then(|| consistent as f64 / total as f64)
}

/// Two-tailed p-value of a paired t-test on `a - b`. Zero variance gives 1
/// when the mean difference is zero and 0 otherwise.
pub fn paired_t_test_values(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("paired samples differ in length".into()));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least two pairs".into()));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = mean / (var / n).sqrt();
    Ok(t_two_tailed(t, n - 1.0))
}

pub fn paired_t_test(a: &[bool], b: &[bool]) -> Result<f64> {
    let f = |xs: &[bool]| xs.iter().map(|&x| f64::from(u8::from(x))).collect::<Vec<_>>();
    paired_t_test_values(&f(a), &f(b))
}

pub fn t_two_tailed(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Path features, baseline scores and judgments for one dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub label: String,
    pub layout: Arc<FeatureLayout>,
    pub features: BTreeMap<String, FeatureVector>,
    pub baselines: HashMap<(String, Method), f64>,
    pub meta: BTreeMap<String, PathMeta>,
    pub judgments: Vec<Judgment>,
}

impl Dataset {
    fn vector(&self, id: &str) -> Result<&FeatureVector> {
        self.features
            .get(id)
            .ok_or_else(|| Error::UnknownPath(format!("{id} (no features)")))
    }

    fn baseline(&self, id: &str, m: Method) -> Result<f64> {
        self.baselines
            .get(&(id.to_owned(), m))
            .copied()
            .ok_or_else(|| Error::UnknownPath(format!("{id} (no {m} score)")))
    }

    /// Checks that every judgment references known paths.
    pub fn validate(&self) -> Result<()> {
        for j in &self.judgments {
            if j.better == j.worse {
                return Err(Error::InvalidArgument(format!("judgment {} compares a path with itself", j.pair_id)));
            }
            self.vector(&j.better)?;
            self.vector(&j.worse)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Random,
    PerturbUser,
    PerturbCategory,
    PerturbItem,
}

impl Sampling {
    pub fn name(self) -> &'static str {
        match self {
            Sampling::Random => "random",
            Sampling::PerturbUser => "perturb_user",
            Sampling::PerturbCategory => "perturb_category",
            Sampling::PerturbItem => "perturb_item",
        }
    }

    pub fn role(self) -> Option<NodeRole> {
        match self {
            Sampling::Random => None,
            Sampling::PerturbUser => Some(NodeRole::User),
            Sampling::PerturbCategory => Some(NodeRole::Category),
            Sampling::PerturbItem => Some(NodeRole::Item),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub sampling: Sampling,
    /// Feature group on/off flags; unlisted groups stay on.
    #[serde(default)]
    pub features: BTreeMap<String, bool>,
    /// Restrict perturbation sampling to the test split.
    #[serde(default)]
    pub eval_only: bool,
}

impl RunConfig {
    pub fn full(name: &str) -> Self {
        RunConfig {
            name: name.into(),
            sampling: Sampling::Random,
            features: BTreeMap::new(),
            eval_only: false,
        }
    }

    pub fn enabled_groups(&self) -> Result<HashSet<FeatureGroup>> {
        let mut on: HashSet<FeatureGroup> = FeatureGroup::ALL.into_iter().collect();
        for (name, &flag) in &self.features {
            let g = FeatureGroup::parse(name)
                .ok_or_else(|| Error::Config(format!("unknown feature group `{name}`")))?;
            if !flag {
                on.remove(&g);
            }
        }
        if on.is_empty() {
            return Err(Error::Config(format!("run `{}` disables every feature group", self.name)));
        }
        Ok(on)
    }
}

fn default_aspects() -> Vec<Aspect> {
    Aspect::BOTH.to_vec()
}

fn default_grid() -> Vec<f64> {
    ltr::C_GRID.to_vec()
}

fn default_runs() -> Vec<RunConfig> {
    vec![RunConfig::full("all")]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub train_seed: u64,
    #[serde(default = "default_aspects")]
    pub aspects: Vec<Aspect>,
    #[serde(default = "default_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: Vec<RunConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            label: String::new(),
            split_seed: 0,
            train_seed: 0,
            aspects: default_aspects(),
            c_grid: default_grid(),
            runs: default_runs(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        for r in &cfg.runs {
            r.enabled_groups()?;
        }
        if cfg.c_grid.is_empty() || cfg.c_grid.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Config("C grid must hold positive values".into()));
        }
        Ok(cfg)
    }
}

/// The learned ranker's row label in results.
pub const LTR_METHOD: &str = "ltr";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run: String,
    pub sampling: String,
    pub aspect: Aspect,
    pub method: String,
    pub accuracy: f64,
    pub test_pairs: usize,
    /// Learned ranker vs the best baseline; set on the learned ranker's row.
    pub p_value: Option<f64>,
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub label: String,
    pub rows: Vec<ResultRow>,
}

/// Higher baseline score wins; ties go to the smaller path id.
fn baseline_correct(data: &Dataset, m: Method, j: &Judgment) -> Result<bool> {
    let (b, w) = (data.baseline(&j.better, m)?, data.baseline(&j.worse, m)?);
    Ok(if b != w { b > w } else { j.better < j.worse })
}

fn to_pairs(data: &Dataset, js: &[Judgment], layout: &Arc<FeatureLayout>, keep: &[usize]) -> Result<Vec<PreferencePair>> {
    js.iter()
        .map(|j| {
            let cand = |id: &str| -> Result<Candidate> {
                Ok(Candidate {
                    id: id.to_owned(),
                    features: data.vector(id)?.project(layout, keep),
                })
            };
            Ok(PreferencePair {
                pair_id: j.pair_id.clone(),
                better: cand(&j.better)?,
                worse: cand(&j.worse)?,
                aspect: j.aspect,
                judge: j.judge.clone(),
                judged_at: j.judged_at,
            })
        })
        .collect()
}

fn is_perturbation(data: &Dataset, j: &Judgment, role: NodeRole) -> bool {
    match (data.meta.get(&j.better), data.meta.get(&j.worse)) {
        (Some(a), Some(b)) => a.perturbation_position(b).is_some_and(|p| a.roles[p] == role),
        _ => false,
    }
}

/// Splits judgments by distinct pair id.
fn split_judgments(js: &[Judgment], seed: u64) -> Result<(Vec<Judgment>, Vec<Judgment>, Vec<Judgment>)> {
    let ids: Vec<&str> = js.iter().map(|j| j.pair_id.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    let (_, dv, te) = split(&ids, seed)?;
    let (dv, te): (HashSet<&str>, HashSet<&str>) = (dv.into_iter().collect(), te.into_iter().collect());
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for j in js {
        if dv.contains(j.pair_id.as_str()) {
            b.push(j.clone());
        } else if te.contains(j.pair_id.as_str()) {
            c.push(j.clone());
        } else {
            a.push(j.clone());
        }
    }
    Ok((a, b, c))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub model: LinearRankModel,
    pub dev_accuracy: f64,
    pub test: Vec<Judgment>,
    pub ltr_correct: Vec<bool>,
    pub baseline_correct: BTreeMap<Method, Vec<bool>>,
}

/// Trains on one aspect's judgments under a run's mask and sampling, and
/// scores every method on the test split.
pub fn run_one(data: &Dataset, cfg: &ExperimentConfig, run: &RunConfig, aspect: Aspect, judgments: &[Judgment]) -> Result<RunOutcome> {
    let groups = run.enabled_groups()?;
    let (layout, keep) = data.layout.masked(&groups);
    let layout = Arc::new(layout);
    let mine: Vec<Judgment> = judgments.iter().filter(|j| j.aspect == aspect).cloned().collect();
    let (train, dev, mut test) = match run.sampling.role() {
        Some(role) if !run.eval_only => {
            let kept: Vec<Judgment> = mine.into_iter().filter(|j| is_perturbation(data, j, role)).collect();
            split_judgments(&kept, cfg.split_seed)?
        }
        _ => split_judgments(&mine, cfg.split_seed)?,
    };
    if let (Some(role), true) = (run.sampling.role(), run.eval_only) {
        test.retain(|j| is_perturbation(data, j, role));
    }
    if test.is_empty() {
        return Err(Error::Empty(format!("run `{}` has no {aspect} test pairs", run.name)));
    }
    let train_pairs = to_pairs(data, &train, &layout, &keep)?;
    let dev_pairs = to_pairs(data, &dev, &layout, &keep)?;
    let test_pairs = to_pairs(data, &test, &layout, &keep)?;
    let base = Hyper { seed: cfg.train_seed, ..Hyper::default() };
    let (model, dev_accuracy) = ltr::select_c(&train_pairs, &dev_pairs, &cfg.c_grid, &base)?;
    let ltr_correct = model.pairwise_correctness(&test_pairs)?;
    let mut baseline = BTreeMap::new();
    for m in Method::ALL {
        let v = test.iter().map(|j| baseline_correct(data, m, j)).collect::<Result<Vec<_>>>()?;
        baseline.insert(m, v);
    }
    Ok(RunOutcome {
        model,
        dev_accuracy,
        test,
        ltr_correct,
        baseline_correct: baseline,
    })
}

pub fn run_experiment(data: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    data.validate()?;
    let mut rows = Vec::new();
    for run in &cfg.runs {
        for &aspect in &cfg.aspects {
            let out = run_one(data, cfg, run, aspect, &data.judgments)?;
            let n = out.test.len();
            let ltr_acc = ltr::mean_bool(&out.ltr_correct);
            let best_correct = out
                .baseline_correct
                .iter()
                .max_by(|(ma, a), (mb, b)| {
                    ltr::mean_bool(a)
                        .partial_cmp(&ltr::mean_bool(b))
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(mb.cmp(ma))
                })
                .map(|(_, v)| v.clone())
                .expect("three baselines");
            let p = (n >= 2).then(|| paired_t_test(&out.ltr_correct, &best_correct)).transpose()?;
            rows.push(ResultRow {
                run: run.name.clone(),
                sampling: run.sampling.name().into(),
                aspect,
                method: LTR_METHOD.into(),
                accuracy: ltr_acc,
                test_pairs: n,
                p_value: p,
                c: Some(out.model.hyper.c),
            });
            for (m, v) in &out.baseline_correct {
                rows.push(ResultRow {
                    run: run.name.clone(),
                    sampling: run.sampling.name().into(),
                    aspect,
                    method: m.name().into(),
                    accuracy: ltr::mean_bool(v),
                    test_pairs: n,
                    p_value: None,
                    c: None,
                });
            }
        }
    }
    Ok(ExperimentResults {
        label: cfg.label.clone(),
        rows,
    })
}

impl ExperimentResults {
    pub fn accuracy(&self, run: &str, aspect: Aspect, method: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.run == run && r.aspect == aspect && r.method == method)
            .map(|r| r.accuracy)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["run", "sampling", "aspect", "method", "accuracy", "test_pairs", "p_value", "c"])
            .map_err(|e| Error::parse("results", e))?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.run.clone(),
                r.sampling.clone(),
                r.aspect.to_string(),
                r.method.clone(),
                format!("{:.6}", r.accuracy),
                r.test_pairs.to_string(),
                opt(r.p_value),
                opt(r.c),
            ])
            .map_err(|e| Error::parse("results", e))?;
        }
        w.flush().map_err(|e| Error::parse("results", e))?;
        Ok(())
    }

    /// One block per run: methods as rows, aspects as columns. A `*` marks
    /// a learned ranker that beats the best baseline at the significance
    /// threshold.
    pub fn table(&self) -> String {
        let mut out = String::new();
        if !self.label.is_empty() {
            let _ = writeln!(out, "{}", self.label);
        }
        let mut runs: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !runs.contains(&r.run.as_str()) {
                runs.push(&r.run);
            }
        }
        for run in runs {
            let rows: Vec<&ResultRow> = self.rows.iter().filter(|r| r.run == run).collect();
            let mut aspects: Vec<Aspect> = rows.iter().map(|r| r.aspect).collect();
            aspects.dedup();
            let _ = writeln!(out, "[{run}] sampling={}", rows[0].sampling);
            let _ = write!(out, "{:<12}", "method");
            for a in &aspects {
                let _ = write!(out, "{:>12}", a.name());
            }
            out.push('\n');
            let mut methods: Vec<&str> = Vec::new();
            for r in &rows {
                if !methods.contains(&r.method.as_str()) {
                    methods.push(&r.method);
                }
            }
            for m in methods {
                let _ = write!(out, "{m:<12}");
                for a in &aspects {
                    let cell = rows
                        .iter()
                        .find(|r| r.method == m && r.aspect == *a)
                        .map(|r| {
                            let best_baseline = rows
                                .iter()
                                .filter(|b| b.aspect == *a && b.p_value.is_none())
                                .map(|b| b.accuracy)
                                .fold(f64::NEG_INFINITY, f64::max);
                            let better = r.p_value.is_some_and(|p| p < SIGNIFICANCE) && r.accuracy > best_baseline;
                            let star = if better { "*" } else { "" };
                            format!("{:.1}%{star}", 100.0 * r.accuracy)
                        })
                        .unwrap_or_else(|| "-".into());
                    let _ = write!(out, "{cell:>12}");
                }
                out.push('\n');
            }
            let n = rows.iter().map(|r| r.test_pairs).max().unwrap_or(0);
            let _ = writeln!(out, "test pairs: {n}\n");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeAccuracy {
    pub judge: String,
    pub accuracy: f64,
    pub test_pairs: usize,
}

/// One model per judge on that judge's own pairs, sorted by descending
/// accuracy. Judges with too few pairs to split are skipped.
pub fn per_judge_accuracy(data: &Dataset, cfg: &ExperimentConfig, aspect: Aspect) -> Result<Vec<JudgeAccuracy>> {
    let judges: BTreeSet<&str> = data.judgments.iter().map(|j| j.judge.as_str()).collect();
    let run = RunConfig::full("per-judge");
    let mut out = Vec::new();
    for judge in judges {
        let own: Vec<Judgment> = data.judgments.iter().filter(|j| j.judge == judge).cloned().collect();
        match run_one(data, cfg, &run, aspect, &own) {
            Ok(o) => out.push(JudgeAccuracy {
                judge: judge.to_owned(),
                accuracy: ltr::mean_bool(&o.ltr_correct),
                test_pairs: o.test.len(),
            }),
            Err(Error::InvalidArgument(_)) | Err(Error::Empty(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    out.sort_by(|a, b| {
        b.accuracy
            .partial_cmp(&a.accuracy)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.judge.cmp(&b.judge))
    });
    Ok(out)
}

/// Among surprisal judgments whose paths differ in length, the fraction in
/// which the more surprising path is the shorter one.
pub fn shorter_more_surprising(data: &Dataset) -> Option<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for j in data.judgments.iter().filter(|j| j.aspect == Aspect::Surprisal) {
        let (Some(b), Some(w)) = (data.meta.get(&j.better), data.meta.get(&j.worse)) else {
            continue;
        };
        if b.len() != w.len() {
            total += 1;
            hits += usize::from(b.len() < w.len());
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unrank_covers_every_pair_once() {
        let k = 7;
        let got: Vec<_> = (0..k * (k - 1) / 2).map(|r| unrank_pair(r, k)).collect();
        let mut want = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                want.push((i, j));
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn random_pairs() {
        let s = sample_random_pairs(2, 1, 0).unwrap();
        assert_eq!(s, Sampled { pairs: vec![(0, 1)], short: false });
        let a = sample_random_pairs(40, DEFAULT_PAIRS_PER_ITEM, 3).unwrap();
        assert_eq!(a, sample_random_pairs(40, DEFAULT_PAIRS_PER_ITEM, 3).unwrap());
        assert_eq!(a.pairs.len(), 25);
        assert_eq!(a.pairs.iter().collect::<HashSet<_>>().len(), 25);
        let short = sample_random_pairs(3, 25, 0).unwrap();
        assert!(short.short);
        assert_eq!(short.pairs.len(), 3);
        assert!(sample_random_pairs(1, 1, 0).is_err());
    }

    #[test]
    fn user_perturbation_on_toy() {
        use crate::fixtures;
        use crate::graph::{EdgeRecord, NodeRecord};
        use crate::paths::{enumerate_paths, FeedItem};
        let jack = NodeRecord {
            id: "Jack".into(),
            node_type: "user".into(),
            weight: 1.0,
            attrs: Default::default(),
            is_user: false,
        };
        let e = |s: &str, d: &str| EdgeRecord {
            src: s.into(),
            dst: d.into(),
            edge_type: "follows".into(),
            weight: 1.0,
            ts: Some(4),
            id: None,
        };
        let g = fixtures::toy_graph()
            .rebuild_with(vec![jack], vec![e("Alice", "Jack"), e("Jack", "Health"), e("Bob", "Health")])
            .unwrap();
        let item = FeedItem { node: "Health".into(), seen_at: 99, session: None };
        let paths: Vec<ExplanationPath> = enumerate_paths(&g, "Alice", &item, 2)
            .unwrap()
            .into_iter()
            .filter(|p| p.len() == 2)
            .collect();
        let render = |i: usize| paths[i].render(&g);
        let s = sample_perturbation_pairs(&paths, &g, "user", 10, 0);
        assert!(!s.short || !s.pairs.is_empty());
        let rendered: Vec<(String, String)> = s.pairs.iter().map(|&(a, b)| (render(a), render(b))).collect();
        assert!(rendered.iter().any(|(a, b)| {
            let mut v = [a.as_str(), b.as_str()];
            v.sort();
            v == ["Alice -follows-> Bob -follows-> Health", "Alice -follows-> Jack -follows-> Health"]
        }));
        assert!(sample_perturbation_pairs(&paths, &g, "category", 10, 0).pairs.is_empty());
        for &(a, b) in &s.pairs {
            let (ma, mb) = (PathMeta::of(&g, &paths[a]), PathMeta::of(&g, &paths[b]));
            let pos = ma.perturbation_position(&mb).unwrap();
            assert_eq!(ma.node_types[pos], "user");
        }
    }

    #[test]
    fn perturbation_excludes_two_differences() {
        let m = |ids: [&str; 4]| PathMeta {
            node_ids: ids.iter().map(|s| s.to_string()).collect(),
            node_types: vec!["user".into(); 4],
            roles: vec![NodeRole::User; 4],
            edge_types: vec!["follows".into(); 3],
        };
        let a = m(["u", "x", "y", "f"]);
        let b = m(["u", "p", "q", "f"]);
        assert_eq!(a.perturbation_position(&b), None);
        assert!(perturbation_candidates(&[a.clone(), b], |_, _| true).is_empty());
        let c = m(["u", "x", "q", "f"]);
        assert_eq!(a.perturbation_position(&c), Some(2));
        assert_eq!(perturbation_candidates(&[a, c], |_, _| true), vec![(0, 1)]);
    }

    #[test]
    fn split_sizes() {
        let items: Vec<u32> = (0..10).collect();
        let (a, b, c) = split(&items, 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (8, 1, 1));
        let mut all: Vec<u32> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort();
        assert_eq!(all, items);
        assert_eq!(split(&items, 1).unwrap(), (a, b, c));
        let (a, b, c) = split(&(0..37).collect::<Vec<_>>(), 0).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (31, 3, 3));
        assert!(split(&items[..9], 0).is_err());
    }

    #[test]
    fn transitivity_basic() {
        assert_eq!(transitivity_score([("a", "b"), ("b", "c"), ("a", "c")]), Some(1.0));
        assert_eq!(transitivity_score([("a", "b"), ("b", "c"), ("c", "a")]), Some(0.0));
        assert_eq!(transitivity_score([("a", "b"), ("b", "c")]), None);
        // the later judgment of a pair replaces the earlier one
        assert_eq!(transitivity_score([("a", "b"), ("b", "c"), ("c", "a"), ("a", "c")]), Some(1.0));
    }

    #[test]
    fn t_test_degenerate_and_symmetric() {
        let a = [true, false, true, true];
        assert_eq!(paired_t_test(&a, &a).unwrap(), 1.0);
        assert_eq!(paired_t_test(&[true, true], &[false, false]).unwrap(), 0.0);
        let b = [false, false, true, false];
        let c = [true, true, false, false];
        assert_eq!(paired_t_test(&a, &c).unwrap(), paired_t_test(&c, &a).unwrap());
        let p = paired_t_test(&a, &b).unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert!(paired_t_test(&a, &b[..3]).is_err());
    }

    #[test]
    fn run_config_masks() {
        let mut r = RunConfig::full("x");
        r.features.insert("pattern".into(), false);
        assert_eq!(r.enabled_groups().unwrap().len(), 4);
        r.features.insert("nonsense".into(), false);
        assert!(matches!(r.enabled_groups(), Err(Error::Config(_))));
        let mut all_off = RunConfig::full("y");
        for g in FeatureGroup::ALL {
            all_off.features.insert(g.name().into(), false);
        }
        assert!(all_off.enabled_groups().is_err());
    }
}
