//! Baseline path scorers: PRA, global REX and a per-path ESPRESSO reduction.
//! Higher is more preferred; one ranking serves both aspects.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeIx, InteractionGraph, NodeIx};
use crate::paths::ExplanationPath;
use crate::pattern::{pattern_of, PatternStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pra,
    RexGlobal,
    Espresso,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pra, Method::RexGlobal, Method::Espresso];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pra => "pra",
            Method::RexGlobal => "rex_global",
            Method::Espresso => "espresso",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineScore {
    pub path_id: String,
    pub method: Method,
    pub value: f64,
}

fn check(g: &InteractionGraph, nodes: &[NodeIx], edges: &[EdgeIx]) -> Result<()> {
    if nodes.len() != edges.len() + 1 {
        return Err(Error::DanglingPath("node/edge counts disagree".into()));
    }
    for (i, &e) in edges.iter().enumerate() {
        if e as usize >= g.edge_count() {
            return Err(Error::DanglingPath(format!("edge index {e} out of range")));
        }
        let edge = g.edge(e);
        if edge.source != nodes[i] || edge.target != nodes[i + 1] {
            return Err(Error::DanglingPath(format!("edge {e} does not join positions {i} and {}", i + 1)));
        }
    }
    Ok(())
}

/// Product of reciprocal type-constrained out-degrees along a walk.
pub fn pra_walk(g: &InteractionGraph, nodes: &[NodeIx], edges: &[EdgeIx]) -> Result<f64> {
    check(g, nodes, edges)?;
    let mut p = 1.0;
    for (i, &e) in edges.iter().enumerate() {
        let edge = g.edge(e);
        let d = g.constrained_degree(nodes[i], Some(edge.kind), Some(g.node_type_ix(nodes[i + 1])));
        p /= d as f64;
    }
    Ok(p)
}

pub fn pra_score(g: &InteractionGraph, path: &ExplanationPath) -> Result<f64> {
    pra_walk(g, &path.nodes, &path.edges)
}

pub fn rex_global_score(stats: &PatternStats, path: &ExplanationPath, g: &InteractionGraph) -> Result<f64> {
    Ok(1.0 - stats.confidence(&pattern_of(g, path)?))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterRule {
    /// Maximize `min(sim(n, u), sim(n, f))`.
    #[default]
    Min,
    /// Maximize `(sim(n, u) + sim(n, f)) / 2`.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwrConfig {
    pub restart: f64,
    pub iterations: usize,
}

impl Default for RwrConfig {
    fn default() -> Self {
        RwrConfig {
            restart: 0.15,
            iterations: 10,
        }
    }
}

/// Truncated random walk with restart from `source` over the weighted
/// adjacency (inverse edges included). Mass at a node without out-edges
/// returns to the source.
pub fn rwr(g: &InteractionGraph, source: NodeIx, cfg: RwrConfig) -> Vec<f64> {
    let n = g.node_count();
    let mut p = vec![0.0; n];
    p[source as usize] = 1.0;
    let out_weight: Vec<f64> = (0..n as NodeIx)
        .map(|v| g.out_edges(v).iter().map(|&e| g.edge(e).weight).sum())
        .collect();
    for _ in 0..cfg.iterations {
        let mut next = vec![0.0; n];
        next[source as usize] += cfg.restart;
        let walk = 1.0 - cfg.restart;
        for v in 0..n {
            let mass = p[v];
            if mass == 0.0 {
                continue;
            }
            if out_weight[v] <= 0.0 {
                next[source as usize] += walk * mass;
                continue;
            }
            for &e in g.out_edges(v as NodeIx) {
                let edge = g.edge(e);
                next[edge.target as usize] += walk * mass * edge.weight / out_weight[v];
            }
        }
        p = next;
    }
    p
}

/// Random-walk similarity with per-source memoization.
#[derive(Debug)]
pub struct Espresso<'g> {
    g: &'g InteractionGraph,
    cfg: RwrConfig,
    rule: CenterRule,
    memo: Mutex<HashMap<NodeIx, Arc<Vec<f64>>>>,
}

impl<'g> Espresso<'g> {
    pub fn new(g: &'g InteractionGraph, cfg: RwrConfig, rule: CenterRule) -> Self {
        Espresso {
            g,
            cfg,
            rule,
            memo: Mutex::new(HashMap::new()),
        }
    }

    fn walk_from(&self, s: NodeIx) -> Arc<Vec<f64>> {
        if let Some(v) = self.memo.lock().expect("rwr memo poisoned").get(&s) {
            return Arc::clone(v);
        }
        let v = Arc::new(rwr(self.g, s, self.cfg));
        self.memo
            .lock()
            .expect("rwr memo poisoned")
            .insert(s, Arc::clone(&v));
        v
    }

    /// Symmetrized, unnormalized random-walk similarity.
    pub fn raw_sim(&self, a: NodeIx, b: NodeIx) -> f64 {
        (self.walk_from(a)[b as usize] + self.walk_from(b)[a as usize]) / 2.0
    }

    /// Index into `path.nodes` of the chosen center.
    pub fn center(&self, path: &ExplanationPath) -> Option<usize> {
        let (u, f) = (path.nodes[0], *path.nodes.last()?);
        let mut best: Option<(usize, f64)> = None;
        for i in 1..path.nodes.len().saturating_sub(1) {
            let n = path.nodes[i];
            let (su, sf) = (self.raw_sim(n, u), self.raw_sim(n, f));
            let key = match self.rule {
                CenterRule::Min => su.min(sf),
                CenterRule::Mean => (su + sf) / 2.0,
            };
            let better = match best {
                None => true,
                Some((j, k)) => key > k || (key == k && self.g.node(n).id < self.g.node(path.nodes[j]).id),
            };
            if better {
                best = Some((i, key));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn score(&self, path: &ExplanationPath) -> Result<f64> {
        check(self.g, &path.nodes, &path.edges)?;
        let Some(c) = self.center(path) else {
            return Ok(1.0);
        };
        let nodes = &path.nodes;
        let last = nodes.len() - 1;
        let mut raw = vec![0.0; nodes.len()];
        let (cu, cf) = (self.raw_sim(nodes[c], nodes[0]), self.raw_sim(nodes[c], nodes[last]));
        let mut max = cu.max(cf);
        raw[c] = (cu + cf) / 2.0;
        for i in (1..c).rev() {
            raw[i] = self.raw_sim(nodes[i], nodes[i + 1]);
            max = max.max(raw[i]);
        }
        for i in c + 1..last {
            raw[i] = self.raw_sim(nodes[i], nodes[i - 1]);
            max = max.max(raw[i]);
        }
        if max <= 0.0 {
            return Ok(0.0);
        }
        let internal = &raw[1..last];
        Ok(internal.iter().map(|r| r / max).sum::<f64>() / internal.len() as f64)
    }
}

pub fn espresso_score(g: &InteractionGraph, path: &ExplanationPath) -> Result<f64> {
    Espresso::new(g, RwrConfig::default(), CenterRule::Min).score(path)
}

/// Scores every path with every method.
pub fn score_all(
    g: &InteractionGraph,
    stats: &PatternStats,
    espresso: &Espresso<'_>,
    paths: &[ExplanationPath],
) -> Result<Vec<BaselineScore>> {
    let mut out = Vec::with_capacity(paths.len() * 3);
    for p in paths {
        let id = p.id.to_string();
        for (method, value) in [
            (Method::Pra, pra_score(g, p)?),
            (Method::RexGlobal, rex_global_score(stats, p, g)?),
            (Method::Espresso, espresso.score(p)?),
        ] {
            out.push(BaselineScore { path_id: id.clone(), method, value });
        }
    }
    Ok(out)
}

pub fn write_score_csv<W: std::io::Write>(out: W, scores: &[BaselineScore]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path_id", "method", "value"])
        .map_err(|e| Error::parse("score dump", e))?;
    for s in scores {
        w.write_record([s.path_id.as_str(), s.method.name(), &s.value.to_string()])
            .map_err(|e| Error::parse("score dump", e))?;
    }
    w.flush().map_err(|e| Error::parse("score dump", e))?;
    Ok(())
}
