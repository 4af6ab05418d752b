//! Path patterns (meta-paths) and their corpus statistics.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::InteractionGraph;
use crate::paths::{ExplanationPath, Fnv};

/// The node-type and edge-type sequence of a path, instances erased.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathPattern {
    pub node_types: Vec<String>,
    pub edge_types: Vec<String>,
}

impl PathPattern {
    pub fn canonical_hash(&self) -> u64 {
        let mut h = Fnv::new();
        for (i, n) in self.node_types.iter().enumerate() {
            h.write(n.as_bytes());
            h.write(&[0x1f]);
            if let Some(e) = self.edge_types.get(i) {
                h.write(e.as_bytes());
                h.write(&[0x1e]);
            }
        }
        h.finish()
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.node_types[0])?;
        for (e, n) in self.edge_types.iter().zip(&self.node_types[1..]) {
            write!(f, " -{e}-> {n}")?;
        }
        Ok(())
    }
}

pub fn pattern_of(g: &InteractionGraph, path: &ExplanationPath) -> Result<PathPattern> {
    if path.nodes.len() != path.edges.len() + 1 {
        return Err(Error::DanglingPath(format!("path {} is malformed", path.id)));
    }
    let mut node_types = Vec::with_capacity(path.nodes.len());
    for &n in &path.nodes {
        if n as usize >= g.node_count() {
            return Err(Error::DanglingPath(format!("node index {n} out of range")));
        }
        node_types.push(g.node(n).node_type.clone());
    }
    let mut edge_types = Vec::with_capacity(path.edges.len());
    for &e in &path.edges {
        if e as usize >= g.edge_count() {
            return Err(Error::DanglingPath(format!("edge index {e} out of range")));
        }
        edge_types.push(g.kind_name(g.edge(e).kind));
    }
    Ok(PathPattern {
        node_types,
        edge_types,
    })
}

/// Per-pattern instance counts over a corpus of (user, item) pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatternStats {
    support: HashMap<PathPattern, BTreeMap<String, usize>>,
    total_pairs: usize,
}

impl PatternStats {
    /// `corpus` holds, for each pair id, the paths mined for that pair.
    pub fn build<'a, I>(g: &InteractionGraph, corpus: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, &'a [ExplanationPath])>,
    {
        let mut stats = PatternStats::default();
        for (pair, paths) in corpus {
            stats.add_pair(g, &pair, paths)?;
        }
        if stats.total_pairs == 0 {
            return Err(Error::Empty("pattern statistics need at least one pair".into()));
        }
        Ok(stats)
    }

    /// Adds one pair. Paths for one pair may come from a different graph than
    /// the next pair's, so corpora spanning several users are built this way.
    pub fn add_pair(&mut self, g: &InteractionGraph, pair: &str, paths: &[ExplanationPath]) -> Result<()> {
        self.total_pairs += 1;
        for p in paths {
            let pattern = pattern_of(g, p)?;
            *self
                .support
                .entry(pattern)
                .or_default()
                .entry(pair.to_owned())
                .or_default() += 1;
        }
        Ok(())
    }

    pub fn total_pairs(&self) -> usize {
        self.total_pairs
    }

    pub fn patterns(&self) -> impl Iterator<Item = &PathPattern> {
        self.support.keys()
    }

    /// Mean instance count per pair, with pairs lacking the pattern counted as zero.
    pub fn frequency(&self, pattern: &PathPattern) -> f64 {
        if self.total_pairs == 0 {
            return 0.0;
        }
        self.support
            .get(pattern)
            .map(|m| m.values().sum::<usize>() as f64 / self.total_pairs as f64)
            .unwrap_or(0.0)
    }

    /// Fraction of pairs with at least one instance of the pattern.
    pub fn confidence(&self, pattern: &PathPattern) -> f64 {
        if self.total_pairs == 0 {
            return 0.0;
        }
        self.support
            .get(pattern)
            .map(|m| m.values().filter(|&&c| c > 0).count() as f64 / self.total_pairs as f64)
            .unwrap_or(0.0)
    }
}
