//! The per-user interaction graph: a typed, weighted, timestamped multigraph
//! in which every ingested edge is paired with a synthesized inverse edge.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::schema::{Schema, INVERSE_MARKER};

pub type NodeIx = u32;
pub type EdgeIx = u32;

/// An edge type together with its direction. `base` indexes `Schema::edge_types`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKind {
    pub base: u16,
    pub inverse: bool,
}

impl EdgeKind {
    pub fn flipped(self) -> Self {
        EdgeKind {
            base: self.base,
            inverse: !self.inverse,
        }
    }
}

/// One line of a node file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub node_type: String,
    #[serde(default)]
    pub weight: f64,
    #[serde(default)]
    pub attrs: BTreeMap<String, Value>,
    #[serde(default)]
    pub is_user: bool,
}

/// One line of an edge file. Inverse edges are never ingested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    #[serde(rename = "type")]
    pub edge_type: String,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub ts: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub node_type: String,
    pub weight: f64,
    pub attrs: BTreeMap<String, Value>,
}

impl Node {
    /// Numeric attribute, accepting JSON numbers and numeric strings.
    pub fn attr_f64(&self, key: &str) -> Option<f64> {
        match self.attrs.get(key)? {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    }

    pub fn label(&self) -> &str {
        match self.attrs.get("label") {
            Some(Value::String(s)) => s,
            _ => &self.id,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: Option<String>,
    pub source: NodeIx,
    pub target: NodeIx,
    pub kind: EdgeKind,
    pub weight: f64,
    /// `None` means the edge has existed since the epoch.
    pub timestamp: Option<i64>,
}

impl Edge {
    pub fn is_inverse(&self) -> bool {
        self.kind.inverse
    }
}

/// Immutable after construction. Forward edges live at even indices and
/// their inverses at the following odd index, so `e ^ 1` is the twin of `e`.
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    schema: Arc<Schema>,
    nodes: Vec<Node>,
    node_types: Vec<u16>,
    index: HashMap<String, NodeIx>,
    edges: Vec<Edge>,
    offsets: Vec<u32>,
    adjacency: Vec<EdgeIx>,
    user: NodeIx,
    revision: u64,
}

impl InteractionGraph {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn user(&self) -> NodeIx {
        self.user
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Directed edge count, inverses included.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, ix: NodeIx) -> &Node {
        &self.nodes[ix as usize]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_type_ix(&self, ix: NodeIx) -> u16 {
        self.node_types[ix as usize]
    }

    pub fn node_ix(&self, id: &str) -> Option<NodeIx> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<NodeIx> {
        self.node_ix(id)
            .ok_or_else(|| Error::MissingNode(id.to_owned()))
    }

    pub fn edge(&self, e: EdgeIx) -> &Edge {
        &self.edges[e as usize]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, n: NodeIx) -> &[EdgeIx] {
        let lo = self.offsets[n as usize] as usize;
        let hi = self.offsets[n as usize + 1] as usize;
        &self.adjacency[lo..hi]
    }

    pub fn inverse_of(&self, e: EdgeIx) -> EdgeIx {
        e ^ 1
    }

    /// Display name of an edge kind, with the inverse marker when reversed.
    pub fn kind_name(&self, kind: EdgeKind) -> String {
        let base = &self.schema.edge_types()[kind.base as usize];
        if kind.inverse {
            format!("{base}{INVERSE_MARKER}")
        } else {
            base.clone()
        }
    }

    pub fn base_name(&self, kind: EdgeKind) -> &str {
        &self.schema.edge_types()[kind.base as usize]
    }

    /// Parses `follows` or `follows⁻¹` into an edge kind.
    pub fn parse_kind(&self, name: &str) -> Option<EdgeKind> {
        let (base, inverse) = match name.strip_suffix(INVERSE_MARKER) {
            Some(b) => (b, true),
            None => (name, false),
        };
        self.schema.edge_type_index(base).map(|i| EdgeKind {
            base: i as u16,
            inverse,
        })
    }

    /// Hop distances over outgoing edges (inverses included, so this is the
    /// undirected view). `u32::MAX` marks unreachable nodes.
    pub fn distances(&self, from: NodeIx) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.nodes.len()];
        let mut queue = VecDeque::new();
        dist[from as usize] = 0;
        queue.push_back(from);
        while let Some(n) = queue.pop_front() {
            let d = dist[n as usize];
            for &e in self.out_edges(n) {
                let t = self.edges[e as usize].target as usize;
                if dist[t] == u32::MAX {
                    dist[t] = d + 1;
                    queue.push_back(t as NodeIx);
                }
            }
        }
        dist
    }

    /// Greatest geodesic distance from `id` to any node of its component.
    pub fn eccentricity(&self, id: &str) -> Result<u32> {
        let n = self.require(id)?;
        Ok(self
            .distances(n)
            .into_iter()
            .filter(|&d| d != u32::MAX)
            .max()
            .unwrap_or(0))
    }

    /// Outgoing edge count of `id`, optionally filtered by edge type (with or
    /// without the inverse marker) and by target node type.
    pub fn degree(&self, id: &str, edge_type: Option<&str>, target_type: Option<&str>) -> Result<usize> {
        let n = self.require(id)?;
        let kind = match edge_type {
            Some(name) => match self.parse_kind(name) {
                Some(k) => Some(k),
                None => return Ok(0),
            },
            None => None,
        };
        let ttype = match target_type {
            Some(t) => match self.schema.node_type_index(t) {
                Some(i) => Some(i as u16),
                None => return Ok(0),
            },
            None => None,
        };
        Ok(self.constrained_degree(n, kind, ttype))
    }

    pub fn constrained_degree(&self, n: NodeIx, kind: Option<EdgeKind>, target_type: Option<u16>) -> usize {
        self.out_edges(n)
            .iter()
            .filter(|&&e| {
                let edge = &self.edges[e as usize];
                kind.is_none_or(|k| edge.kind == k)
                    && target_type.is_none_or(|t| self.node_types[edge.target as usize] == t)
            })
            .count()
    }

    /// Induced subgraph on the nodes within `radius` hops of `center`, with
    /// `center` as the focal user of the result.
    pub fn ego_subgraph(&self, center: &str, radius: u32) -> Result<InteractionGraph> {
        let c = self.require(center)?;
        let dist = self.distances(c);
        let keep: Vec<bool> = dist.iter().map(|&d| d <= radius).collect();
        let (mut nodes, edges) = self.to_records();
        let mut kept_nodes = Vec::new();
        for (i, mut rec) in nodes.drain(..).enumerate() {
            if keep[i] {
                rec.is_user = i as NodeIx == c;
                kept_nodes.push(rec);
            }
        }
        let kept_edges = edges
            .into_iter()
            .filter(|r| keep[self.index[&r.src] as usize] && keep[self.index[&r.dst] as usize])
            .collect::<Vec<_>>();
        build_graph(self.schema_arc(), kept_nodes, kept_edges)
    }

    /// Node and forward-edge records reproducing this graph.
    pub fn to_records(&self) -> (Vec<NodeRecord>, Vec<EdgeRecord>) {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| NodeRecord {
                id: n.id.clone(),
                node_type: n.node_type.clone(),
                weight: n.weight,
                attrs: n.attrs.clone(),
                is_user: i as NodeIx == self.user,
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .step_by(2)
            .map(|e| EdgeRecord {
                src: self.nodes[e.source as usize].id.clone(),
                dst: self.nodes[e.target as usize].id.clone(),
                edge_type: self.base_name(e.kind).to_owned(),
                weight: e.weight,
                ts: e.timestamp,
                id: e.id.clone(),
            })
            .collect();
        (nodes, edges)
    }

    /// Rebuilds the graph with additional records; the result carries the
    /// next revision number.
    pub fn rebuild_with(&self, nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Result<InteractionGraph> {
        let (mut all_nodes, mut all_edges) = self.to_records();
        all_nodes.extend(nodes);
        all_edges.extend(edges);
        let mut g = build_graph(self.schema_arc(), all_nodes, all_edges)?;
        g.revision = self.revision + 1;
        Ok(g)
    }
}

fn earlier(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (None, _) | (_, None) => None,
        (Some(x), Some(y)) => Some(x.min(y)),
    }
}

/// Validates the records against the schema and assembles the graph.
/// Repeated instances of one action collapse into a single edge whose weight
/// counts the repetitions and whose timestamp is the first instance.
pub fn build_graph(
    schema: impl Into<Arc<Schema>>,
    nodes: impl IntoIterator<Item = NodeRecord>,
    edges: impl IntoIterator<Item = EdgeRecord>,
) -> Result<InteractionGraph> {
    let schema = schema.into();
    let mut node_vec = Vec::new();
    let mut node_types = Vec::new();
    let mut index = HashMap::new();
    let mut users = Vec::new();

    for rec in nodes {
        let Some(t) = schema.node_type_index(&rec.node_type) else {
            return Err(Error::SchemaViolation {
                record: format!("node `{}`", rec.id),
                message: format!("undeclared node type `{}`", rec.node_type),
            });
        };
        if !(rec.weight.is_finite() && rec.weight >= 0.0) {
            return Err(Error::SchemaViolation {
                record: format!("node `{}`", rec.id),
                message: format!("weight {} is not a non-negative number", rec.weight),
            });
        }
        let ix = node_vec.len() as NodeIx;
        if index.insert(rec.id.clone(), ix).is_some() {
            return Err(Error::DuplicateNode(rec.id));
        }
        if rec.is_user {
            users.push(ix);
        }
        node_types.push(t as u16);
        node_vec.push(Node {
            id: rec.id,
            node_type: rec.node_type,
            weight: rec.weight,
            attrs: rec.attrs,
        });
    }
    if users.len() != 1 {
        return Err(Error::FocalUser(users.len()));
    }

    let mut forward: Vec<Edge> = Vec::new();
    let mut seen: HashMap<(NodeIx, NodeIx, u16, Option<String>), usize> = HashMap::new();
    for rec in edges {
        let record = format!("edge {} -{}-> {}", rec.src, rec.edge_type, rec.dst);
        if rec.edge_type.contains(INVERSE_MARKER) {
            return Err(Error::SchemaViolation {
                record,
                message: "inverse edges are synthesized and cannot be ingested".into(),
            });
        }
        let Some(base) = schema.edge_type_index(&rec.edge_type) else {
            return Err(Error::SchemaViolation {
                record,
                message: format!("undeclared edge type `{}`", rec.edge_type),
            });
        };
        let src = *index.get(&rec.src).ok_or_else(|| Error::MissingNode(rec.src.clone()))?;
        let dst = *index.get(&rec.dst).ok_or_else(|| Error::MissingNode(rec.dst.clone()))?;
        let (st, dt) = (&node_vec[src as usize].node_type, &node_vec[dst as usize].node_type);
        if !schema.permits(st, &rec.edge_type, dt) {
            return Err(Error::SchemaViolation {
                record,
                message: format!("({st}, {}, {dt}) is not a permitted relationship", rec.edge_type),
            });
        }
        let repeatable = schema.is_repeatable(&rec.edge_type);
        if !(rec.weight.is_finite() && rec.weight >= 0.0) || (!repeatable && rec.weight > 1.0) {
            return Err(Error::SchemaViolation {
                record,
                message: format!("invalid weight {} for this action", rec.weight),
            });
        }
        if src == dst {
            return Err(Error::SchemaViolation {
                record,
                message: "self-loops are not allowed".into(),
            });
        }
        let key = (src, dst, base as u16, rec.id.clone());
        match seen.get(&key) {
            Some(&i) => {
                let e = &mut forward[i];
                e.weight = if repeatable { e.weight + rec.weight } else { e.weight.max(rec.weight) };
                e.timestamp = earlier(e.timestamp, rec.ts);
            }
            None => {
                seen.insert(key, forward.len());
                forward.push(Edge {
                    id: rec.id,
                    source: src,
                    target: dst,
                    kind: EdgeKind { base: base as u16, inverse: false },
                    weight: rec.weight,
                    timestamp: rec.ts,
                });
            }
        }
    }

    let mut edge_vec = Vec::with_capacity(forward.len() * 2);
    for e in forward {
        let inv = Edge {
            id: e.id.clone(),
            source: e.target,
            target: e.source,
            kind: e.kind.flipped(),
            weight: e.weight,
            timestamp: e.timestamp,
        };
        edge_vec.push(e);
        edge_vec.push(inv);
    }

    let n = node_vec.len();
    let mut counts = vec![0u32; n + 1];
    for e in &edge_vec {
        counts[e.source as usize + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let offsets = counts.clone();
    let mut cursor = counts;
    let mut adjacency = vec![0; edge_vec.len()];
    for (i, e) in edge_vec.iter().enumerate() {
        let slot = &mut cursor[e.source as usize];
        adjacency[*slot as usize] = i as EdgeIx;
        *slot += 1;
    }

    Ok(InteractionGraph {
        schema,
        nodes: node_vec,
        node_types,
        index,
        edges: edge_vec,
        offsets,
        adjacency,
        user: users[0],
        revision: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn node(id: &str, t: &str) -> NodeRecord {
        NodeRecord {
            id: id.into(),
            node_type: t.into(),
            weight: 0.0,
            attrs: BTreeMap::new(),
            is_user: false,
        }
    }

    fn edge(s: &str, t: &str, d: &str, ts: Option<i64>) -> EdgeRecord {
        EdgeRecord {
            src: s.into(),
            dst: d.into(),
            edge_type: t.into(),
            weight: 1.0,
            ts,
            id: None,
        }
    }

    fn quora_pair() -> (Vec<NodeRecord>, Vec<EdgeRecord>) {
        let mut a = node("a", "user");
        a.is_user = true;
        (vec![a, node("b", "user")], vec![edge("a", "follows", "b", Some(3))])
    }

    #[test]
    fn one_forward_edge_yields_two_directed_edges() {
        let (n, e) = quora_pair();
        let g = build_graph(Schema::bundled("quora").unwrap(), n, e).unwrap();
        assert_eq!(g.edge_count(), 2);
        let inv = g.edge(1);
        assert!(inv.is_inverse());
        assert_eq!(g.kind_name(inv.kind), "follows⁻¹");
        assert_eq!(inv.timestamp, Some(3));
        assert_eq!(g.revision(), 0);
    }

    #[test]
    fn orientation_is_enforced() {
        let mut a = node("a", "user");
        a.is_user = true;
        let err = build_graph(
            Schema::bundled("quora").unwrap(),
            vec![a, node("c", "category")],
            vec![edge("c", "follows", "a", None)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::SchemaViolation { .. }), "{err}");
    }

    #[test]
    fn ingestion_errors() {
        let schema = Arc::new(Schema::bundled("quora").unwrap());
        let (n, _) = quora_pair();
        let err = build_graph(schema.clone(), n.clone(), vec![edge("a", "follows⁻¹", "b", None)]);
        assert!(matches!(err, Err(Error::SchemaViolation { .. })));
        let err = build_graph(schema.clone(), n.clone(), vec![edge("a", "follows", "zz", None)]);
        assert!(matches!(err, Err(Error::MissingNode(_))));
        let mut dup = n.clone();
        dup.push(node("b", "user"));
        assert!(matches!(build_graph(schema.clone(), dup, vec![]), Err(Error::DuplicateNode(_))));
        let none: Vec<NodeRecord> = vec![node("x", "user")];
        assert!(matches!(build_graph(schema.clone(), none, vec![]), Err(Error::FocalUser(0))));
        let mut w = edge("a", "follows", "b", None);
        w.weight = 2.0;
        assert!(build_graph(schema, n, vec![w]).is_err());
    }

    #[test]
    fn repeated_actions_collapse() {
        let schema = Schema::bundled("lastfm").unwrap();
        let mut u = node("u", "user");
        u.is_user = true;
        let nodes = vec![u, node("t", "track")];
        let edges = vec![
            edge("u", "scrobbles", "t", Some(20)),
            edge("u", "scrobbles", "t", Some(5)),
            edge("u", "scrobbles", "t", Some(9)),
            edge("u", "loves", "t", Some(30)),
        ];
        let g = build_graph(schema, nodes, edges).unwrap();
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.edge(0).weight, 3.0);
        assert_eq!(g.edge(0).timestamp, Some(5));
        assert_eq!(g.edge(1).weight, 3.0);
        assert_eq!(g.degree("u", None, None).unwrap(), 2);
    }

    #[test]
    fn toy_eccentricity_and_degree() {
        let g = fixtures::toy_graph();
        assert_eq!(g.eccentricity("Alice").unwrap(), 4);
        assert_eq!(g.degree("Alice", Some("follows"), Some("user")).unwrap(), 1);
        assert_eq!(g.degree("Alice", Some("sings"), None).unwrap(), 0);
        assert!(g.eccentricity("Nobody").is_err());
    }

    #[test]
    fn small_eccentricities() {
        let (n, e) = quora_pair();
        let g = build_graph(Schema::bundled("quora").unwrap(), n, e).unwrap();
        assert_eq!(g.eccentricity("a").unwrap(), 1);

        let mut nodes = vec![node("hub", "user")];
        nodes[0].is_user = true;
        let mut edges = vec![];
        for i in 0..3 {
            nodes.push(node(&format!("l{i}"), "user"));
            edges.push(edge("hub", "follows", &format!("l{i}"), None));
        }
        let g = build_graph(Schema::bundled("quora").unwrap(), nodes, edges).unwrap();
        assert_eq!(g.eccentricity("hub").unwrap(), 1);
        assert_eq!(g.eccentricity("l0").unwrap(), 2);
        assert_eq!(g.degree("hub", Some("follows"), None).unwrap(), 3);
    }

    #[test]
    fn ego_subgraph_radii() {
        let g = fixtures::toy_graph();
        let zero = g.ego_subgraph("Alice", 0).unwrap();
        assert_eq!(zero.node_count(), 1);
        assert_eq!(zero.edge_count(), 0);

        let whole = g.ego_subgraph("Alice", 4).unwrap();
        assert_eq!(whole.node_count(), g.node_count());
        assert_eq!(whole.edge_count(), g.edge_count());

        let three = g.ego_subgraph("Alice", 3).unwrap();
        let dist = g.distances(g.require("Alice").unwrap());
        let far: Vec<&str> = g
            .nodes()
            .iter()
            .zip(&dist)
            .filter(|(_, &d)| d == 4)
            .map(|(n, _)| n.id.as_str())
            .collect();
        assert_eq!(far, vec!["bomb-post"]);
        assert_eq!(three.node_count(), g.node_count() - 1);
        assert!(three.node_ix("bomb-post").is_none());

        let around_bob = g.ego_subgraph("Bob", 1).unwrap();
        assert_eq!(around_bob.node(around_bob.user()).id, "Bob");
    }

    #[test]
    fn rebuild_increments_revision() {
        let g = fixtures::toy_graph();
        let g2 = g.rebuild_with(vec![node("Zed", "user")], vec![edge("Zed", "follows", "Alice", Some(1))]).unwrap();
        assert_eq!(g2.revision(), 1);
        assert_eq!(g2.edge_count(), g.edge_count() + 2);
    }
}
