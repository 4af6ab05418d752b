//! Temporal explanation-path mining.
//!
//! A path from the focal user to a feed item is an explanation when it is
//! simple and every timestamped edge on it predates the moment the item was
//! seen. Enumeration prunes with both rules during the DFS, and additionally
//! with a hop-distance bound to the target computed over admissible edges.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeIx, InteractionGraph, NodeIx};

pub const DEFAULT_PATH_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedItem {
    #[serde(rename = "item")]
    pub node: String,
    pub seen_at: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
}

/// Identifies one (user, feed item) pair; rendered as `user|item|seen_at`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    pub user: String,
    pub item: String,
    pub seen_at: i64,
}

impl PairKey {
    pub fn new(user: &str, item: &FeedItem) -> Self {
        PairKey {
            user: user.to_owned(),
            item: item.node.clone(),
            seen_at: item.seen_at,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.rsplitn(3, '|');
        let (Some(ts), Some(item), Some(user)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse("pair key", format!("`{s}` is not user|item|seen_at")));
        };
        let seen_at = ts
            .parse()
            .map_err(|_| Error::parse("pair key", format!("bad timestamp in `{s}`")))?;
        Ok(PairKey {
            user: user.to_owned(),
            item: item.to_owned(),
            seen_at,
        })
    }

    pub fn feed_item(&self) -> FeedItem {
        FeedItem {
            node: self.item.clone(),
            seen_at: self.seen_at,
            session: None,
        }
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}", self.user, self.item, self.seen_at)
    }
}

/// Stable 64-bit identifier of a path instance, printed as 16 hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct PathId(pub u64);

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl From<PathId> for String {
    fn from(id: PathId) -> String {
        id.to_string()
    }
}

impl TryFrom<String> for PathId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl std::str::FromStr for PathId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        u64::from_str_radix(s, 16)
            .map(PathId)
            .map_err(|_| Error::parse("path id", format!("`{s}` is not a hex id")))
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(FNV_OFFSET)
    }

    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplanationPath {
    pub nodes: Vec<NodeIx>,
    pub edges: Vec<EdgeIx>,
    pub id: PathId,
}

impl ExplanationPath {
    pub fn new(g: &InteractionGraph, nodes: Vec<NodeIx>, edges: Vec<EdgeIx>) -> Self {
        debug_assert_eq!(nodes.len(), edges.len() + 1);
        let id = path_id(g, &nodes, &edges);
        ExplanationPath { nodes, edges, id }
    }

    /// Edge count.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn internal_nodes(&self) -> &[NodeIx] {
        if self.nodes.len() <= 2 {
            &[]
        } else {
            &self.nodes[1..self.nodes.len() - 1]
        }
    }

    pub fn render(&self, g: &InteractionGraph) -> String {
        let mut out = g.node(self.nodes[0]).label().to_owned();
        for (i, &e) in self.edges.iter().enumerate() {
            out.push_str(&format!(
                " -{}-> {}",
                g.kind_name(g.edge(e).kind),
                g.node(self.nodes[i + 1]).label()
            ));
        }
        out
    }
}

pub fn path_id(g: &InteractionGraph, nodes: &[NodeIx], edges: &[EdgeIx]) -> PathId {
    let mut h = Fnv::new();
    for (i, &n) in nodes.iter().enumerate() {
        h.write(g.node(n).id.as_bytes());
        h.write(&[0x1f]);
        if let Some(&e) = edges.get(i) {
            let edge = g.edge(e);
            h.write(g.kind_name(edge.kind).as_bytes());
            if let Some(id) = &edge.id {
                h.write(&[0x1d]);
                h.write(id.as_bytes());
            }
            h.write(&[0x1e]);
        }
    }
    PathId(h.finish())
}

fn admissible(ts: Option<i64>, seen_at: i64) -> bool {
    ts.is_none_or(|t| t < seen_at)
}

/// True iff every timestamped edge on the path strictly predates `seen_at`.
pub fn is_valid(g: &InteractionGraph, path: &ExplanationPath, seen_at: i64) -> bool {
    path.edges
        .iter()
        .all(|&e| admissible(g.edge(e).timestamp, seen_at))
}

#[derive(Debug, Clone, Copy)]
pub struct MinerConfig {
    pub max_len: usize,
    pub cap: Option<usize>,
}

impl MinerConfig {
    pub fn new(max_len: usize) -> Self {
        MinerConfig {
            max_len,
            cap: Some(DEFAULT_PATH_CAP),
        }
    }
}

pub fn cmp_paths(a: &ExplanationPath, b: &ExplanationPath) -> Ordering {
    a.len()
        .cmp(&b.len())
        .then(a.id.cmp(&b.id))
        .then_with(|| a.edges.cmp(&b.edges))
}

/// Every simple, temporally admissible path from `user` to `item.node` with
/// at most `max_len` edges, ordered by (length, id).
pub fn enumerate_paths(
    g: &InteractionGraph,
    user: &str,
    item: &FeedItem,
    max_len: usize,
) -> Result<Vec<ExplanationPath>> {
    enumerate_paths_with(g, user, item, MinerConfig::new(max_len))
}

pub fn enumerate_paths_with(
    g: &InteractionGraph,
    user: &str,
    item: &FeedItem,
    config: MinerConfig,
) -> Result<Vec<ExplanationPath>> {
    let u = g.require(user)?;
    let f = g.require(&item.node)?;
    if config.max_len < 1 {
        return Err(Error::InvalidArgument("max_len must be at least 1".into()));
    }
    if u == f {
        return Err(Error::InvalidArgument("user and feed item coincide".into()));
    }
    let seen_at = item.seen_at;
    let to_target = distances_to(g, f, seen_at, config.max_len);
    if to_target[u as usize] as usize > config.max_len {
        return Ok(Vec::new());
    }

    let emitted = AtomicUsize::new(0);
    let cap = config.cap.unwrap_or(usize::MAX);
    let pair = || PairKey::new(user, item).to_string();

    let first_hops: Vec<EdgeIx> = g
        .out_edges(u)
        .iter()
        .copied()
        .filter(|&e| {
            let edge = g.edge(e);
            admissible(edge.timestamp, seen_at)
                && 1 + to_target[edge.target as usize] as usize <= config.max_len
        })
        .collect();

    let chunks: Vec<Result<Vec<ExplanationPath>>> = first_hops
        .par_iter()
        .map(|&e| {
            let mut search = Search {
                g,
                target: f,
                seen_at,
                max_len: config.max_len,
                to_target: &to_target,
                visited: vec![false; g.node_count()],
                nodes: vec![u],
                edges: Vec::with_capacity(config.max_len),
                out: Vec::new(),
                emitted: &emitted,
                cap,
                overflow: false,
            };
            search.visited[u as usize] = true;
            search.step(e);
            if search.overflow {
                Err(Error::PathCapExceeded { pair: pair(), cap })
            } else {
                Ok(search.out)
            }
        })
        .collect();

    let mut paths = Vec::new();
    for chunk in chunks {
        paths.extend(chunk?);
    }
    paths.sort_by(cmp_paths);
    Ok(paths)
}

struct Search<'a> {
    g: &'a InteractionGraph,
    target: NodeIx,
    seen_at: i64,
    max_len: usize,
    to_target: &'a [u32],
    visited: Vec<bool>,
    nodes: Vec<NodeIx>,
    edges: Vec<EdgeIx>,
    out: Vec<ExplanationPath>,
    emitted: &'a AtomicUsize,
    cap: usize,
    overflow: bool,
}

impl Search<'_> {
    fn step(&mut self, e: EdgeIx) {
        if self.overflow {
            return;
        }
        let t = self.g.edge(e).target;
        self.edges.push(e);
        self.nodes.push(t);
        if t == self.target {
            if self.emitted.fetch_add(1, AtomicOrdering::Relaxed) >= self.cap {
                self.overflow = true;
            } else {
                self.out
                    .push(ExplanationPath::new(self.g, self.nodes.clone(), self.edges.clone()));
            }
        } else {
            self.visited[t as usize] = true;
            let depth = self.edges.len();
            for &next in self.g.out_edges(t) {
                let edge = self.g.edge(next);
                let n = edge.target as usize;
                if self.visited[n]
                    || !admissible(edge.timestamp, self.seen_at)
                    || depth + 1 + self.to_target[n] as usize > self.max_len
                {
                    continue;
                }
                self.step(next);
            }
            self.visited[t as usize] = false;
        }
        self.edges.pop();
        self.nodes.pop();
    }
}

/// Hop distance from every node to `target` over admissible edges, bounded
/// by `limit`; nodes further away get `u32::MAX`.
fn distances_to(g: &InteractionGraph, target: NodeIx, seen_at: i64, limit: usize) -> Vec<u32> {
    // Every edge has a twin with the same timestamp running the other way,
    // so a forward BFS from the target yields distances *to* the target.
    let mut dist = vec![u32::MAX; g.node_count()];
    let mut queue = VecDeque::new();
    dist[target as usize] = 0;
    queue.push_back(target);
    while let Some(n) = queue.pop_front() {
        let d = dist[n as usize];
        if d as usize >= limit {
            continue;
        }
        for &e in g.out_edges(n) {
            let edge = g.edge(e);
            let t = edge.target as usize;
            if dist[t] == u32::MAX && admissible(edge.timestamp, seen_at) {
                dist[t] = d + 1;
                queue.push_back(t as NodeIx);
            }
        }
    }
    dist
}

/// One line of a path dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub pair: String,
    pub nodes: Vec<String>,
    pub edge_types: Vec<String>,
    pub timestamps: Vec<Option<i64>>,
    pub id: PathId,
}

impl PathRecord {
    pub fn from_path(g: &InteractionGraph, pair: &PairKey, path: &ExplanationPath) -> Self {
        PathRecord {
            pair: pair.to_string(),
            nodes: path.nodes.iter().map(|&n| g.node(n).id.clone()).collect(),
            edge_types: path
                .edges
                .iter()
                .map(|&e| g.kind_name(g.edge(e).kind))
                .collect(),
            timestamps: path.edges.iter().map(|&e| g.edge(e).timestamp).collect(),
            id: path.id,
        }
    }

    /// Resolves the record back onto graph indices.
    pub fn resolve(&self, g: &InteractionGraph) -> Result<ExplanationPath> {
        if self.nodes.len() != self.edge_types.len() + 1 || self.nodes.len() < 2 {
            return Err(Error::DanglingPath(format!("path {} is malformed", self.id)));
        }
        let nodes = self
            .nodes
            .iter()
            .map(|id| g.require(id))
            .collect::<Result<Vec<_>>>()?;
        let mut edges = Vec::with_capacity(self.edge_types.len());
        for (i, name) in self.edge_types.iter().enumerate() {
            let kind = g
                .parse_kind(name)
                .ok_or_else(|| Error::DanglingPath(format!("unknown edge type `{name}`")))?;
            let ts = self.timestamps.get(i).copied().flatten();
            let candidates = || {
                g.out_edges(nodes[i]).iter().copied().filter(|&e| {
                    let edge = g.edge(e);
                    edge.kind == kind && edge.target == nodes[i + 1]
                })
            };
            let found = candidates()
                .find(|&e| g.edge(e).timestamp == ts)
                .or_else(|| candidates().next())
                .ok_or_else(|| {
                    Error::DanglingPath(format!(
                        "{} -{name}-> {} is not in the graph",
                        self.nodes[i],
                        self.nodes[i + 1]
                    ))
                })?;
            edges.push(found);
        }
        let path = ExplanationPath::new(g, nodes, edges);
        if path.id != self.id {
            return Err(Error::DanglingPath(format!(
                "path {} resolves to a different id {}",
                self.id, path.id
            )));
        }
        Ok(path)
    }
}
