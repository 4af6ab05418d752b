//! Node similarity plug-ins, both mapping into [0, 1].
//!
//! Similarity is defined between categories (or tags). Other nodes are
//! represented by the categories they are associated with: content items by
//! the categories they belong to, users by the categories they follow. A
//! node's similarity to another is the mean over all pairs of associated
//! categories, and 0 when either side has none.

use std::collections::{HashMap, VecDeque};
use std::io::BufRead;
use std::path::Path;
use std::sync::{Arc, Mutex};

use log::warn;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{InteractionGraph, NodeIx};

/// Categories associated with a node, in adjacency order, deduplicated.
pub fn associated_categories(g: &InteractionGraph, n: NodeIx) -> Vec<NodeIx> {
    let schema = g.schema();
    let node_type = &g.node(n).node_type;
    if schema.is_category_type(node_type) {
        return vec![n];
    }
    let via = if schema.is_user_type(node_type) {
        &schema.roles().follow
    } else {
        &schema.roles().membership
    };
    let mut out = Vec::new();
    for &e in g.out_edges(n) {
        let edge = g.edge(e);
        if !edge.is_inverse()
            && g.base_name(edge.kind) == via
            && schema.is_category_type(&g.node(edge.target).node_type)
            && !out.contains(&edge.target)
        {
            out.push(edge.target);
        }
    }
    out
}

/// The category DAG viewed as an undirected graph, with memoized BFS rows.
#[derive(Debug)]
pub struct Taxonomy {
    slot: HashMap<NodeIx, u32>,
    neighbors: Vec<Vec<u32>>,
    rows: Mutex<HashMap<u32, Arc<Vec<u32>>>>,
}

impl Taxonomy {
    pub fn new(g: &InteractionGraph) -> Self {
        let schema = g.schema();
        let mut slot = HashMap::new();
        for (i, n) in g.nodes().iter().enumerate() {
            if schema.is_category_type(&n.node_type) {
                let next = slot.len() as u32;
                slot.insert(i as NodeIx, next);
            }
        }
        let mut neighbors = vec![Vec::new(); slot.len()];
        for edge in g.edges() {
            if g.base_name(edge.kind) != schema.roles().membership {
                continue;
            }
            if let (Some(&a), Some(&b)) = (slot.get(&edge.source), slot.get(&edge.target)) {
                if !neighbors[a as usize].contains(&b) {
                    neighbors[a as usize].push(b);
                }
            }
        }
        Taxonomy {
            slot,
            neighbors,
            rows: Mutex::new(HashMap::new()),
        }
    }

    fn row(&self, from: u32) -> Arc<Vec<u32>> {
        if let Some(r) = self.rows.lock().expect("taxonomy memo poisoned").get(&from) {
            return Arc::clone(r);
        }
        let mut dist = vec![u32::MAX; self.neighbors.len()];
        let mut queue = VecDeque::new();
        dist[from as usize] = 0;
        queue.push_back(from);
        while let Some(c) = queue.pop_front() {
            for &n in &self.neighbors[c as usize] {
                if dist[n as usize] == u32::MAX {
                    dist[n as usize] = dist[c as usize] + 1;
                    queue.push_back(n);
                }
            }
        }
        let row = Arc::new(dist);
        self.rows
            .lock()
            .expect("taxonomy memo poisoned")
            .insert(from, Arc::clone(&row));
        row
    }

    /// Undirected taxonomy distance between two category nodes.
    pub fn distance(&self, a: NodeIx, b: NodeIx) -> Option<u32> {
        let (&sa, &sb) = (self.slot.get(&a)?, self.slot.get(&b)?);
        let d = self.row(sa)[sb as usize];
        (d != u32::MAX).then_some(d)
    }

    pub fn category_similarity(&self, a: NodeIx, b: NodeIx) -> f64 {
        if a == b {
            return 1.0;
        }
        match self.distance(a, b) {
            Some(d) => 1.0 / (1.0 + f64::from(d)),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum SimilarityProvider {
    Taxonomic(Arc<Taxonomy>),
    Embedding {
        vectors: Arc<HashMap<String, Vec<f64>>>,
        fallback: Option<Box<SimilarityProvider>>,
    },
}

impl SimilarityProvider {
    pub fn taxonomic(g: &InteractionGraph) -> Self {
        SimilarityProvider::Taxonomic(Arc::new(Taxonomy::new(g)))
    }

    pub fn embedding(vectors: HashMap<String, Vec<f64>>, fallback: Option<SimilarityProvider>) -> Self {
        SimilarityProvider::Embedding {
            vectors: Arc::new(vectors),
            fallback: fallback.map(Box::new),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SimilarityProvider::Taxonomic(_) => "taxonomic",
            SimilarityProvider::Embedding { .. } => "embedding",
        }
    }

    pub fn similarity(&self, g: &InteractionGraph, a: NodeIx, b: NodeIx) -> f64 {
        if a == b {
            return 1.0;
        }
        match self {
            SimilarityProvider::Taxonomic(tax) => taxonomic_similarity(g, tax, a, b),
            SimilarityProvider::Embedding { vectors, fallback } => {
                embedding_similarity(g, vectors, fallback.as_deref(), a, b)
            }
        }
    }
}

pub fn taxonomic_similarity(g: &InteractionGraph, tax: &Taxonomy, a: NodeIx, b: NodeIx) -> f64 {
    if a == b {
        return 1.0;
    }
    let (ca, cb) = (associated_categories(g, a), associated_categories(g, b));
    mean_over_pairs(&ca, &cb, |x, y| tax.category_similarity(*x, *y))
}

/// Cosine similarity rescaled from [-1, 1] to [0, 1].
pub fn cosine_unit(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() {
        return None;
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return None;
    }
    if x == y {
        return Some(1.0);
    }
    let cos = (dot / (nx * ny)).clamp(-1.0, 1.0);
    Some((cos + 1.0) / 2.0)
}

fn vectors_for<'a>(
    g: &InteractionGraph,
    vectors: &'a HashMap<String, Vec<f64>>,
    n: NodeIx,
) -> Vec<&'a [f64]> {
    if let Some(v) = vectors.get(&g.node(n).id) {
        return vec![v.as_slice()];
    }
    associated_categories(g, n)
        .into_iter()
        .filter_map(|c| vectors.get(&g.node(c).id).map(Vec::as_slice))
        .collect()
}

pub fn embedding_similarity(
    g: &InteractionGraph,
    vectors: &HashMap<String, Vec<f64>>,
    fallback: Option<&SimilarityProvider>,
    a: NodeIx,
    b: NodeIx,
) -> f64 {
    if a == b {
        return 1.0;
    }
    let (va, vb) = (vectors_for(g, vectors, a), vectors_for(g, vectors, b));
    let mut sum = 0.0;
    let mut count = 0usize;
    for x in &va {
        for y in &vb {
            if let Some(s) = cosine_unit(x, y) {
                sum += s;
                count += 1;
            }
        }
    }
    if count > 0 {
        return sum / count as f64;
    }
    match fallback {
        Some(f) => f.similarity(g, a, b),
        None => {
            warn!(
                "no embedding for `{}` / `{}` and no fallback; similarity set to 0",
                g.node(a).id,
                g.node(b).id
            );
            0.0
        }
    }
}

fn mean_over_pairs<T>(xs: &[T], ys: &[T], f: impl Fn(&T, &T) -> f64) -> f64 {
    if xs.is_empty() || ys.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for x in xs {
        for y in ys {
            sum += f(x, y);
        }
    }
    sum / (xs.len() * ys.len()) as f64
}

#[derive(Deserialize)]
struct EmbeddingLine {
    id: String,
    vec: Vec<f64>,
}

/// Reads an embedding file (`{"id", "vec"}` per line); all vectors must share one length.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<HashMap<String, Vec<f64>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    let mut dim = None;
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingLine = serde_json::from_str(&line)
            .map_err(|e| Error::parse("embedding file", format!("line {}: {e}", i + 1)))?;
        match dim {
            None => dim = Some(rec.vec.len()),
            Some(d) if d != rec.vec.len() => {
                return Err(Error::parse(
                    "embedding file",
                    format!("line {}: vector length {} differs from {d}", i + 1, rec.vec.len()),
                ))
            }
            _ => {}
        }
        out.insert(rec.id, rec.vec);
    }
    Ok(out)
}
