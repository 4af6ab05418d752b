//! Path features in five groups: users, categories, content items, the path
//! instance as a whole, and the path pattern.
//!
//! Node-level groups average over every internal node of the relevant type.
//! When a path has no such node the group is emitted as zeros and its
//! presence flag is 0.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{InteractionGraph, NodeIx};
use crate::paths::{ExplanationPath, FeedItem};
use crate::pattern::{pattern_of, PatternStats};
use crate::similarity::SimilarityProvider;

/// Recency assigned to a path without any timestamped edge.
pub const DEFAULT_RECENCY_HORIZON: f64 = 2_147_483_648.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    User,
    Category,
    Item,
    Instance,
    Pattern,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::User,
        FeatureGroup::Category,
        FeatureGroup::Item,
        FeatureGroup::Instance,
        FeatureGroup::Pattern,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::User => "user",
            FeatureGroup::Category => "category",
            FeatureGroup::Item => "item",
            FeatureGroup::Instance => "instance",
            FeatureGroup::Pattern => "pattern",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == s)
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub group: FeatureGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub columns: Vec<Column>,
}

impl FeatureLayout {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Columns whose group is enabled, with their indices in `self`.
    pub fn masked(&self, enabled: &HashSet<FeatureGroup>) -> (FeatureLayout, Vec<usize>) {
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&i| enabled.contains(&self.columns[i].group))
            .collect();
        let layout = FeatureLayout {
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
        };
        (layout, keep)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Arc<FeatureLayout>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.layout.position(name).map(|i| self.values[i])
    }

    pub fn project(&self, layout: &Arc<FeatureLayout>, keep: &[usize]) -> FeatureVector {
        FeatureVector {
            values: keep.iter().map(|&i| self.values[i]).collect(),
            layout: Arc::clone(layout),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

/// Knobs that change the feature layout or values. The non-default switches
/// exist for ablation runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Node attribute used as category popularity; node weight when absent.
    pub popularity_attr: String,
    pub recency_horizon: f64,
    pub user_activity: Aggregation,
    /// Adds per-node-type counts to the pattern group.
    pub node_type_counts: bool,
    /// Replaces per-edge-type counts with user-user / user-content /
    /// content-content counts.
    pub edge_category_counts: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            popularity_attr: "followers".into(),
            recency_horizon: DEFAULT_RECENCY_HORIZON,
            user_activity: Aggregation::Mean,
            node_type_counts: false,
            edge_category_counts: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserFeatures {
    pub link_ratio: f64,
    pub activity: Vec<f64>,
    pub present: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryFeatures {
    pub popularity: f64,
    pub depth: f64,
    pub child_count: f64,
    pub present: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemFeatures {
    pub specificity: f64,
    pub engagement: f64,
    pub present: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceFeatures {
    pub sim_item: f64,
    pub sim_user: f64,
    pub length: f64,
    pub recency: f64,
    /// `None` when the schema has no repeatable action.
    pub mean_edge_weight: Option<f64>,
    pub has_internal: bool,
    pub has_timestamp: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternFeatures {
    pub frequency: f64,
    pub confidence: f64,
    pub counts: Vec<f64>,
    pub node_type_counts: Vec<f64>,
}

/// Similarity plug-ins for the item-side and user-side instance features.
#[derive(Debug, Clone)]
pub struct Providers {
    pub item: SimilarityProvider,
    pub user: SimilarityProvider,
}

impl Providers {
    pub fn both(p: SimilarityProvider) -> Self {
        Providers {
            item: p.clone(),
            user: p,
        }
    }
}

/// Per-node statistics precomputed once per graph.
#[derive(Debug)]
pub struct Featurizer<'g> {
    g: &'g InteractionGraph,
    config: FeatureConfig,
    providers: Providers,
    layout: Arc<FeatureLayout>,
    user_actions: Vec<u16>,
    depth: Vec<Option<u32>>,
    cache: NodeCache,
    sims: Mutex<HashMap<(u8, NodeIx, NodeIx), f64>>,
}

#[derive(Debug, Default)]
struct NodeCache {
    link_ratio: Vec<f64>,
    activity: Vec<Vec<f64>>,
    children: Vec<u32>,
    specificity: Vec<u32>,
    engagement: Vec<u32>,
}

fn edge_class(g: &InteractionGraph, a: NodeIx, b: NodeIx) -> usize {
    let schema = g.schema();
    let ua = schema.is_user_type(&g.node(a).node_type);
    let ub = schema.is_user_type(&g.node(b).node_type);
    match (ua, ub) {
        (true, true) => 0,
        (false, false) => 2,
        _ => 1,
    }
}

const EDGE_CLASSES: [&str; 3] = ["user-user", "user-content", "content-content"];

impl<'g> Featurizer<'g> {
    pub fn new(g: &'g InteractionGraph, providers: Providers, config: FeatureConfig) -> Self {
        let schema = g.schema();
        let user_actions = schema
            .user_action_types()
            .into_iter()
            .map(|t| schema.edge_type_index(t).expect("declared") as u16)
            .collect();
        let layout = Arc::new(Self::layout_for(g.schema(), &config));
        let depth = category_depths(g);
        let mut f = Featurizer {
            g,
            config,
            providers,
            layout,
            user_actions,
            depth,
            cache: NodeCache::default(),
            sims: Mutex::new(HashMap::new()),
        };
        f.cache = f.node_cache();
        f
    }

    fn node_cache(&self) -> NodeCache {
        let g = self.g;
        let schema = g.schema();
        let n = g.node_count();
        let mut c = NodeCache {
            link_ratio: vec![0.0; n],
            activity: vec![Vec::new(); n],
            children: vec![0; n],
            specificity: vec![0; n],
            engagement: vec![0; n],
        };
        for ix in 0..n as NodeIx {
            let t = &g.node(ix).node_type;
            if schema.is_user_type(t) {
                c.link_ratio[ix as usize] = self.compute_link_ratio(ix);
                c.activity[ix as usize] = self.compute_activity(ix);
            } else if schema.is_category_type(t) {
                c.children[ix as usize] = self.compute_child_count(ix) as u32;
            } else {
                c.specificity[ix as usize] = self.compute_specificity(ix) as u32;
                c.engagement[ix as usize] = self.compute_engagement(ix) as u32;
            }
        }
        c
    }

    fn similarity(&self, side: u8, n: NodeIx, anchor: NodeIx) -> f64 {
        let key = (side, n, anchor);
        if let Some(&s) = self.sims.lock().expect("similarity memo poisoned").get(&key) {
            return s;
        }
        let provider = if side == 0 { &self.providers.item } else { &self.providers.user };
        let s = provider.similarity(self.g, n, anchor);
        self.sims.lock().expect("similarity memo poisoned").insert(key, s);
        s
    }

    /// The layout implied by a schema and configuration alone.
    pub fn layout_for(schema: &crate::schema::Schema, config: &FeatureConfig) -> FeatureLayout {
        let mut cols = Vec::new();
        let mut push = |name: String, group| cols.push(Column { name, group });
        push("user.link_ratio".into(), FeatureGroup::User);
        for t in schema.user_action_types() {
            push(format!("user.activity.{t}"), FeatureGroup::User);
        }
        push("category.popularity".into(), FeatureGroup::Category);
        push("category.depth".into(), FeatureGroup::Category);
        push("category.children".into(), FeatureGroup::Category);
        push("item.specificity".into(), FeatureGroup::Item);
        push("item.engagement".into(), FeatureGroup::Item);
        push("instance.sim_item".into(), FeatureGroup::Instance);
        push("instance.sim_user".into(), FeatureGroup::Instance);
        push("instance.length".into(), FeatureGroup::Instance);
        push("instance.recency".into(), FeatureGroup::Instance);
        if schema.has_repeatable() {
            push("instance.edge_weight".into(), FeatureGroup::Instance);
        }
        push("pattern.frequency".into(), FeatureGroup::Pattern);
        push("pattern.confidence".into(), FeatureGroup::Pattern);
        if config.edge_category_counts {
            for c in EDGE_CLASSES {
                push(format!("pattern.count.{c}"), FeatureGroup::Pattern);
            }
        } else {
            for t in schema.edge_types() {
                push(format!("pattern.count.{t}"), FeatureGroup::Pattern);
            }
        }
        if config.node_type_counts {
            for t in schema.node_types() {
                push(format!("pattern.nodes.{t}"), FeatureGroup::Pattern);
            }
        }
        push("present.user".into(), FeatureGroup::User);
        push("present.category".into(), FeatureGroup::Category);
        push("present.item".into(), FeatureGroup::Item);
        push("present.internal".into(), FeatureGroup::Instance);
        push("present.timestamp".into(), FeatureGroup::Instance);
        FeatureLayout { columns: cols }
    }

    pub fn layout(&self) -> &Arc<FeatureLayout> {
        &self.layout
    }

    pub fn graph(&self) -> &InteractionGraph {
        self.g
    }

    fn internal_of<'p>(&self, path: &'p ExplanationPath, pred: impl Fn(&str) -> bool) -> Vec<NodeIx> {
        path.internal_nodes()
            .iter()
            .copied()
            .filter(|&n| pred(&self.g.node(n).node_type))
            .collect()
    }

    /// Followers over followees (denominator clamped to 1). Attribute counters
    /// take precedence over the counts visible in the local graph.
    pub fn link_ratio(&self, n: NodeIx) -> f64 {
        self.cache.link_ratio[n as usize]
    }

    fn compute_link_ratio(&self, n: NodeIx) -> f64 {
        let node = self.g.node(n);
        let (followers, followees) = match (node.attr_f64("followers"), node.attr_f64("followees")) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                let schema = self.g.schema();
                let follow = schema.edge_type_index(&schema.roles().follow);
                let mut ers = 0.0;
                let mut ees = 0.0;
                for &e in self.g.out_edges(n) {
                    let edge = self.g.edge(e);
                    if Some(edge.kind.base as usize) != follow
                        || !schema.is_user_type(&self.g.node(edge.target).node_type)
                    {
                        continue;
                    }
                    if edge.is_inverse() {
                        ers += 1.0;
                    } else {
                        ees += 1.0;
                    }
                }
                (ers, ees)
            }
        };
        followers / followees.max(1.0)
    }

    fn activity(&self, n: NodeIx) -> &[f64] {
        &self.cache.activity[n as usize]
    }

    fn compute_activity(&self, n: NodeIx) -> Vec<f64> {
        let mut counts = vec![0.0; self.user_actions.len()];
        for &e in self.g.out_edges(n) {
            let edge = self.g.edge(e);
            if edge.is_inverse() {
                continue;
            }
            if let Some(k) = self.user_actions.iter().position(|&b| b == edge.kind.base) {
                counts[k] += 1.0;
            }
        }
        counts
    }

    pub fn user_features(&self, path: &ExplanationPath) -> UserFeatures {
        let schema = self.g.schema();
        let users = self.internal_of(path, |t| schema.is_user_type(t));
        let k = self.user_actions.len();
        if users.is_empty() {
            return UserFeatures {
                link_ratio: 0.0,
                activity: vec![0.0; k],
                present: false,
            };
        }
        let link_ratio = mean(users.iter().map(|&u| self.link_ratio(u)));
        let per_user: Vec<&[f64]> = users.iter().map(|&u| self.activity(u)).collect();
        let activity = (0..k)
            .map(|i| {
                let col = per_user.iter().map(|a| a[i]);
                match self.config.user_activity {
                    Aggregation::Mean => mean(col),
                    Aggregation::Max => col.fold(f64::MIN, f64::max),
                }
            })
            .collect();
        UserFeatures {
            link_ratio,
            activity,
            present: true,
        }
    }

    pub fn category_depth(&self, n: NodeIx) -> Result<u32> {
        self.depth[n as usize].ok_or_else(|| {
            Error::InvalidArgument(format!(
                "category `{}` is not connected to a taxonomy root",
                self.g.node(n).id
            ))
        })
    }

    fn child_count(&self, n: NodeIx) -> usize {
        self.cache.children[n as usize] as usize
    }

    fn compute_child_count(&self, n: NodeIx) -> usize {
        let schema = self.g.schema();
        let mut children = HashSet::new();
        for &e in self.g.out_edges(n) {
            let edge = self.g.edge(e);
            if edge.is_inverse()
                && self.g.base_name(edge.kind) == schema.roles().membership
                && schema.is_category_type(&self.g.node(edge.target).node_type)
            {
                children.insert(edge.target);
            }
        }
        children.len()
    }

    fn popularity(&self, n: NodeIx) -> f64 {
        let node = self.g.node(n);
        node.attr_f64(&self.config.popularity_attr).unwrap_or(node.weight)
    }

    pub fn category_features(&self, path: &ExplanationPath) -> Result<CategoryFeatures> {
        let schema = self.g.schema();
        let cats = self.internal_of(path, |t| schema.is_category_type(t));
        if cats.is_empty() {
            return Ok(CategoryFeatures {
                popularity: 0.0,
                depth: 0.0,
                child_count: 0.0,
                present: false,
            });
        }
        let mut depth = 0.0;
        for &c in &cats {
            depth += f64::from(self.category_depth(c)?);
        }
        Ok(CategoryFeatures {
            popularity: mean(cats.iter().map(|&c| self.popularity(c))),
            depth: depth / cats.len() as f64,
            child_count: mean(cats.iter().map(|&c| self.child_count(c) as f64)),
            present: true,
        })
    }

    /// Number of categories the item belongs to.
    pub fn specificity(&self, n: NodeIx) -> usize {
        self.cache.specificity[n as usize] as usize
    }

    fn compute_specificity(&self, n: NodeIx) -> usize {
        let schema = self.g.schema();
        let mut cats = HashSet::new();
        for &e in self.g.out_edges(n) {
            let edge = self.g.edge(e);
            if !edge.is_inverse()
                && self.g.base_name(edge.kind) == schema.roles().membership
                && schema.is_category_type(&self.g.node(edge.target).node_type)
            {
                cats.insert(edge.target);
            }
        }
        cats.len()
    }

    /// Number of distinct users with any action on the item.
    pub fn engagement(&self, n: NodeIx) -> usize {
        self.cache.engagement[n as usize] as usize
    }

    fn compute_engagement(&self, n: NodeIx) -> usize {
        let schema = self.g.schema();
        let mut users = HashSet::new();
        for &e in self.g.out_edges(n) {
            let edge = self.g.edge(e);
            if edge.is_inverse() && schema.is_user_type(&self.g.node(edge.target).node_type) {
                users.insert(edge.target);
            }
        }
        users.len()
    }

    pub fn item_features(&self, path: &ExplanationPath) -> ItemFeatures {
        let schema = self.g.schema();
        let items = self.internal_of(path, |t| schema.is_item_type(t));
        if items.is_empty() {
            return ItemFeatures {
                specificity: 0.0,
                engagement: 0.0,
                present: false,
            };
        }
        ItemFeatures {
            specificity: mean(items.iter().map(|&i| self.specificity(i) as f64)),
            engagement: mean(items.iter().map(|&i| self.engagement(i) as f64)),
            present: true,
        }
    }

    pub fn instance_features(&self, path: &ExplanationPath, item: &FeedItem) -> InstanceFeatures {
        let g = self.g;
        let u = path.nodes[0];
        let f = *path.nodes.last().expect("non-empty path");
        let internal = path.internal_nodes();
        let (sim_item, sim_user) = if internal.is_empty() {
            (0.0, 0.0)
        } else {
            let denom = (path.len() - 1) as f64;
            let si: f64 = internal.iter().map(|&n| self.similarity(0, n, f)).sum();
            let su: f64 = internal.iter().map(|&n| self.similarity(1, n, u)).sum();
            (si / denom, su / denom)
        };
        let recency = path
            .edges
            .iter()
            .filter_map(|&e| g.edge(e).timestamp)
            .map(|t| (item.seen_at - t) as f64)
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))));
        let mean_edge_weight = g
            .schema()
            .has_repeatable()
            .then(|| mean(path.edges.iter().map(|&e| g.edge(e).weight)));
        InstanceFeatures {
            sim_item,
            sim_user,
            length: path.len() as f64,
            recency: recency.unwrap_or(self.config.recency_horizon),
            mean_edge_weight,
            has_internal: !internal.is_empty(),
            has_timestamp: recency.is_some(),
        }
    }

    pub fn pattern_features(&self, stats: &PatternStats, path: &ExplanationPath) -> Result<PatternFeatures> {
        let g = self.g;
        let pattern = pattern_of(g, path)?;
        let schema = g.schema();
        let counts = if self.config.edge_category_counts {
            let mut c = vec![0.0; EDGE_CLASSES.len()];
            for w in path.nodes.windows(2) {
                c[edge_class(g, w[0], w[1])] += 1.0;
            }
            c
        } else {
            let mut c = vec![0.0; schema.edge_types().len()];
            for &e in &path.edges {
                c[g.edge(e).kind.base as usize] += 1.0;
            }
            c
        };
        let node_type_counts = if self.config.node_type_counts {
            let mut c = vec![0.0; schema.node_types().len()];
            for &n in &path.nodes {
                c[g.node_type_ix(n) as usize] += 1.0;
            }
            c
        } else {
            Vec::new()
        };
        Ok(PatternFeatures {
            frequency: stats.frequency(&pattern),
            confidence: stats.confidence(&pattern),
            counts,
            node_type_counts,
        })
    }

    /// The full vector in layout order.
    pub fn featurize(&self, path: &ExplanationPath, item: &FeedItem, stats: &PatternStats) -> Result<FeatureVector> {
        if path.is_empty() {
            return Err(Error::InvalidArgument("cannot featurize an empty path".into()));
        }
        let user = self.user_features(path);
        let cat = self.category_features(path)?;
        let it = self.item_features(path);
        let inst = self.instance_features(path, item);
        let pat = self.pattern_features(stats, path)?;
        let flag = |b: bool| if b { 1.0 } else { 0.0 };

        let mut v = Vec::with_capacity(self.layout.len());
        v.push(user.link_ratio);
        v.extend(&user.activity);
        v.extend([cat.popularity, cat.depth, cat.child_count]);
        v.extend([it.specificity, it.engagement]);
        v.extend([inst.sim_item, inst.sim_user, inst.length, inst.recency]);
        if let Some(w) = inst.mean_edge_weight {
            v.push(w);
        }
        v.extend([pat.frequency, pat.confidence]);
        v.extend(&pat.counts);
        v.extend(&pat.node_type_counts);
        v.extend([
            flag(user.present),
            flag(cat.present),
            flag(it.present),
            flag(inst.has_internal),
            flag(inst.has_timestamp),
        ]);
        debug_assert_eq!(v.len(), self.layout.len());
        Ok(FeatureVector {
            values: v,
            layout: Arc::clone(&self.layout),
        })
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for x in it {
        sum += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Shortest distance from each category to any taxonomy root (a category
/// with no parent category); `None` for non-categories and orphaned cycles.
fn category_depths(g: &InteractionGraph) -> Vec<Option<u32>> {
    let schema = g.schema();
    let membership = schema.edge_type_index(&schema.roles().membership);
    let is_cat = |n: NodeIx| schema.is_category_type(&g.node(n).node_type);
    let is_tax = |e: &crate::graph::Edge| {
        Some(e.kind.base as usize) == membership && is_cat(e.source) && is_cat(e.target)
    };
    let mut depth = vec![None; g.node_count()];
    let mut queue = VecDeque::new();
    for n in 0..g.node_count() as NodeIx {
        if !is_cat(n) {
            continue;
        }
        let has_parent = g
            .out_edges(n)
            .iter()
            .any(|&e| !g.edge(e).is_inverse() && is_tax(g.edge(e)));
        if !has_parent {
            depth[n as usize] = Some(0);
            queue.push_back(n);
        }
    }
    while let Some(n) = queue.pop_front() {
        let d = depth[n as usize].expect("queued nodes have a depth");
        for &e in g.out_edges(n) {
            let edge = g.edge(e);
            // child -belongs to-> parent, so children are reached via inverse edges.
            if edge.is_inverse() && is_tax(edge) && depth[edge.target as usize].is_none() {
                depth[edge.target as usize] = Some(d + 1);
                queue.push_back(edge.target);
            }
        }
    }
    depth
}

/// Feature dump: one CSV row per path, header `path_id` followed by the layout.
pub fn write_feature_csv<W: std::io::Write>(
    out: W,
    layout: &FeatureLayout,
    rows: &[(String, FeatureVector)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["path_id".to_owned()];
    header.extend(layout.names().map(str::to_owned));
    w.write_record(&header)
        .map_err(|e| Error::parse("feature csv", e))?;
    for (id, v) in rows {
        if v.layout.as_ref() != layout {
            return Err(Error::LayoutMismatch(format!("row {id}")));
        }
        let mut rec = vec![id.clone()];
        rec.extend(v.values.iter().map(|x| format!("{x}")));
        w.write_record(&rec).map_err(|e| Error::parse("feature csv", e))?;
    }
    w.flush().map_err(|e| Error::parse("feature csv", e))?;
    Ok(())
}

/// Reads a feature dump. Group membership is recovered from column prefixes.
pub fn read_feature_csv<R: std::io::Read>(input: R) -> Result<(Arc<FeatureLayout>, BTreeMap<String, FeatureVector>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::parse("feature csv", e))?.clone();
    if header.get(0) != Some("path_id") {
        return Err(Error::parse("feature csv", "first column must be path_id"));
    }
    let columns = header
        .iter()
        .skip(1)
        .map(|name| {
            Ok(Column {
                name: name.to_owned(),
                group: group_of_column(name)
                    .ok_or_else(|| Error::parse("feature csv", format!("unknown column `{name}`")))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let layout = Arc::new(FeatureLayout { columns });
    let mut rows = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::parse("feature csv", e))?;
        let id = rec.get(0).unwrap_or_default().to_owned();
        let values = rec
            .iter()
            .skip(1)
            .map(|x| x.parse::<f64>().map_err(|e| Error::parse("feature csv", e)))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != layout.len() {
            return Err(Error::LayoutMismatch(format!("row {id} has {} values", values.len())));
        }
        rows.entry(id).or_insert(FeatureVector {
            values,
            layout: Arc::clone(&layout),
        });
    }
    Ok((layout, rows))
}

fn group_of_column(name: &str) -> Option<FeatureGroup> {
    match name {
        "present.user" => Some(FeatureGroup::User),
        "present.category" => Some(FeatureGroup::Category),
        "present.item" => Some(FeatureGroup::Item),
        "present.internal" | "present.timestamp" => Some(FeatureGroup::Instance),
        _ => FeatureGroup::parse(name.split('.').next()?),
    }
}
