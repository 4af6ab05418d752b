//! Reference implementations for tests. Everything here works from the raw
//! node and edge records, never from the graph's own adjacency, so it checks
//! the library rather than restating it.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use feedpath_core::graph::{EdgeRecord, NodeRecord};
use feedpath_core::paths::FeedItem;
use feedpath_core::schema::Schema;

pub const RANDOM_SCHEMA: &str = r#"{
  "platform": "random",
  "node_types": ["user", "category", "post"],
  "edge_types": ["follows", "asks", "upvotes", "belongs to"],
  "triples": [
    ["user", "follows", "user"],
    ["user", "follows", "category"],
    ["user", "asks", "post"],
    ["user", "upvotes", "post"],
    ["post", "belongs to", "category"],
    ["category", "belongs to", "category"]
  ],
  "repeatable": ["upvotes"]
}"#;

pub fn random_schema() -> Schema {
    Schema::from_json(RANDOM_SCHEMA).unwrap()
}

#[derive(Debug, Clone)]
pub struct RandomGraph {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub user: String,
}

/// A seeded random graph with at most `max_nodes` nodes and `max_edges`
/// forward edges, about a quarter of them untimed. Node `n0` is the user.
pub fn random_graph(seed: u64, max_nodes: usize, max_edges: usize) -> RandomGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=max_nodes);
    let types = ["user", "category", "post"];
    let mut nodes = Vec::with_capacity(n);
    let mut by_type: HashMap<&str, Vec<String>> = HashMap::new();
    for i in 0..n {
        let t = if i == 0 { "user" } else { types[rng.gen_range(0..3)] };
        let id = format!("n{i}");
        by_type.entry(t).or_default().push(id.clone());
        nodes.push(NodeRecord {
            id,
            node_type: t.into(),
            weight: rng.gen_range(1..50) as f64,
            attrs: BTreeMap::new(),
            is_user: i == 0,
        });
    }
    let schema = random_schema();
    let triples: Vec<(String, String, String)> = schema
        .triples()
        .map(|(a, b, c)| (a.to_owned(), b.to_owned(), c.to_owned()))
        .collect();
    let m = rng.gen_range(n..=max_edges);
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    for _ in 0..m * 4 {
        if edges.len() >= m {
            break;
        }
        let (st, et, dt) = &triples[rng.gen_range(0..triples.len())];
        let (Some(srcs), Some(dsts)) = (by_type.get(st.as_str()), by_type.get(dt.as_str())) else {
            continue;
        };
        let src = &srcs[rng.gen_range(0..srcs.len())];
        let dst = &dsts[rng.gen_range(0..dsts.len())];
        if src == dst || !seen.insert((src.clone(), et.clone(), dst.clone())) {
            continue;
        }
        let ts = if rng.gen_bool(0.25) { None } else { Some(rng.gen_range(0..20)) };
        let weight = if et == "upvotes" { rng.gen_range(1..=3) as f64 } else { 1.0 };
        edges.push(EdgeRecord {
            src: src.clone(),
            dst: dst.clone(),
            edge_type: et.clone(),
            weight,
            ts,
            id: None,
        });
    }
    RandomGraph {
        nodes,
        edges,
        user: "n0".into(),
    }
}

impl RandomGraph {
    pub fn node_type(&self, id: &str) -> &str {
        &self.nodes.iter().find(|n| n.id == id).unwrap().node_type
    }

    /// A seeded non-user feed item and viewing time.
    pub fn feed_item(&self, seed: u64) -> FeedItem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let k = rng.gen_range(1..self.nodes.len());
        FeedItem {
            node: self.nodes[k].id.clone(),
            seen_at: rng.gen_range(0..23),
            session: None,
        }
    }
}

/// One traversal step: target, edge label (`⁻¹` for inverses), timestamp, weight.
#[derive(Debug, Clone)]
pub struct Step {
    pub to: String,
    pub label: String,
    pub ts: Option<i64>,
    pub weight: f64,
}

/// Out-steps per node, inverses included.
pub fn adjacency(nodes: &[NodeRecord], edges: &[EdgeRecord]) -> BTreeMap<String, Vec<Step>> {
    let mut adj: BTreeMap<String, Vec<Step>> = nodes.iter().map(|n| (n.id.clone(), Vec::new())).collect();
    for e in edges {
        adj.get_mut(&e.src).unwrap().push(Step {
            to: e.dst.clone(),
            label: e.edge_type.clone(),
            ts: e.ts,
            weight: e.weight,
        });
        adj.get_mut(&e.dst).unwrap().push(Step {
            to: e.src.clone(),
            label: format!("{}⁻¹", e.edge_type),
            ts: e.ts,
            weight: e.weight,
        });
    }
    adj
}

/// A path as its node ids and edge labels.
pub type PathKey = (Vec<String>, Vec<String>);

/// Every simple path from `user` of at most `max_len` edges, unpruned, then
/// filtered to those ending at the item whose timed edges predate viewing.
pub fn brute_paths(nodes: &[NodeRecord], edges: &[EdgeRecord], user: &str, item: &FeedItem, max_len: usize) -> BTreeSet<PathKey> {
    let adj = adjacency(nodes, edges);
    let mut all: Vec<(Vec<String>, Vec<String>, Vec<Option<i64>>)> = Vec::new();
    let mut stack = vec![(vec![user.to_owned()], Vec::new(), Vec::new())];
    while let Some((ns, ls, ts)) = stack.pop() {
        if !ls.is_empty() {
            all.push((ns.clone(), ls.clone(), ts.clone()));
        }
        if ls.len() == max_len {
            continue;
        }
        for s in &adj[ns.last().unwrap()] {
            if ns.contains(&s.to) {
                continue;
            }
            let (mut ns2, mut ls2, mut ts2) = (ns.clone(), ls.clone(), ts.clone());
            ns2.push(s.to.clone());
            ls2.push(s.label.clone());
            ts2.push(s.ts);
            stack.push((ns2, ls2, ts2));
        }
    }
    all.into_iter()
        .filter(|(ns, _, _)| ns.last().unwrap() == &item.node)
        .filter(|(_, _, ts)| ts.iter().all(|t| t.map_or(true, |t| t < item.seen_at)))
        .map(|(ns, ls, _)| (ns, ls))
        .collect()
}

/// Mass bookkeeping for a pattern-constrained walk from `user`: products of
/// completed walks, and mass stranded at nodes with no admissible step.
#[derive(Debug, Clone, Default)]
pub struct WalkMass {
    pub complete: Vec<(PathKey, f64)>,
    pub stranded: f64,
}

pub fn pattern_walks(nodes: &[NodeRecord], edges: &[EdgeRecord], user: &str, node_types: &[String], labels: &[String]) -> WalkMass {
    let adj = adjacency(nodes, edges);
    let ty: HashMap<&str, &str> = nodes.iter().map(|n| (n.id.as_str(), n.node_type.as_str())).collect();
    let mut out = WalkMass::default();
    let mut frontier = vec![((vec![user.to_owned()], Vec::<String>::new()), 1.0)];
    for (i, label) in labels.iter().enumerate() {
        let mut next = Vec::new();
        for ((ns, ls), mass) in frontier {
            let steps: Vec<&Step> = adj[ns.last().unwrap()]
                .iter()
                .filter(|s| &s.label == label && ty[s.to.as_str()] == node_types[i + 1])
                .collect();
            if steps.is_empty() {
                out.stranded += mass;
                continue;
            }
            for s in &steps {
                let (mut ns2, mut ls2) = (ns.clone(), ls.clone());
                ns2.push(s.to.clone());
                ls2.push(s.label.clone());
                next.push(((ns2, ls2), mass / steps.len() as f64));
            }
        }
        frontier = next;
    }
    out.complete = frontier;
    out
}

/// Pattern of a path key: node types and labels.
pub fn pattern_key(g: &RandomGraph, key: &PathKey) -> (Vec<String>, Vec<String>) {
    (key.0.iter().map(|n| g.node_type(n).to_owned()).collect(), key.1.clone())
}

/// Truncated random walk with restart as a dense matrix iteration.
pub struct DenseRwr {
    index: HashMap<String, usize>,
    /// Row-stochastic transition matrix; all-zero rows for dangling nodes.
    p: Vec<Vec<f64>>,
    restart: f64,
    iterations: usize,
}

impl DenseRwr {
    pub fn new(nodes: &[NodeRecord], edges: &[EdgeRecord], restart: f64, iterations: usize) -> Self {
        let index: HashMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        let k = nodes.len();
        let mut p = vec![vec![0.0; k]; k];
        for e in edges {
            let (a, b) = (index[&e.src], index[&e.dst]);
            p[a][b] += e.weight;
            p[b][a] += e.weight;
        }
        for row in &mut p {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|x| *x /= s);
            }
        }
        DenseRwr {
            index,
            p,
            restart,
            iterations,
        }
    }

    pub fn from(&self, source: &str) -> Vec<f64> {
        let k = self.p.len();
        let s = self.index[source];
        let mut x = vec![0.0; k];
        x[s] = 1.0;
        for _ in 0..self.iterations {
            let mut y = vec![0.0; k];
            for i in 0..k {
                let row_sum: f64 = self.p[i].iter().sum();
                if row_sum == 0.0 {
                    y[s] += (1.0 - self.restart) * x[i];
                }
                for j in 0..k {
                    y[j] += (1.0 - self.restart) * x[i] * self.p[i][j];
                }
            }
            y[s] += self.restart;
            x = y;
        }
        x
    }

    pub fn sim(&self, a: &str, b: &str) -> f64 {
        (self.from(a)[self.index[b]] + self.from(b)[self.index[a]]) / 2.0
    }
}

/// Center-based path score: pick the internal node closest to both ends
/// (by the smaller of its two similarities, ties to the smaller id), grow
/// the selection outward one neighbor at a time, then average the internal
/// scores after dividing by the largest similarity consulted.
pub fn espresso_oracle(rw: &DenseRwr, path: &[String]) -> f64 {
    let last = path.len() - 1;
    if last < 2 {
        return 1.0;
    }
    let (u, f) = (&path[0], &path[last]);
    let mut center = 1;
    let mut best = f64::NEG_INFINITY;
    for i in 1..last {
        let key = rw.sim(&path[i], u).min(rw.sim(&path[i], f));
        if key > best || (key == best && path[i] < path[center]) {
            best = key;
            center = i;
        }
    }
    let mut score: BTreeMap<usize, f64> = BTreeMap::new();
    let mut consulted = Vec::new();
    let (cu, cf) = (rw.sim(&path[center], u), rw.sim(&path[center], f));
    consulted.extend([cu, cf]);
    score.insert(center, (cu + cf) / 2.0);
    let (mut lo, mut hi) = (center, center);
    while lo > 1 || hi < last - 1 {
        if lo > 1 {
            let s = rw.sim(&path[lo - 1], &path[lo]);
            consulted.push(s);
            score.insert(lo - 1, s);
            lo -= 1;
        }
        if hi < last - 1 {
            let s = rw.sim(&path[hi + 1], &path[hi]);
            consulted.push(s);
            score.insert(hi + 1, s);
            hi += 1;
        }
    }
    let max = consulted.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    score.values().map(|s| s / max).sum::<f64>() / (last - 1) as f64
}
