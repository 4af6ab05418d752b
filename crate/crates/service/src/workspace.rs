//! On-disk layout shared by the CLI and the HTTP server.
//!
//! ```text
//! <root>/config.json
//! <root>/graph/{schema.json,nodes.jsonl,edges.jsonl}
//! <root>/feed.jsonl
//! <root>/paths.jsonl
//! <root>/features.csv
//! <root>/baselines.csv
//! <root>/pairs.jsonl
//! <root>/judgments.jsonl        (append-only)
//! <root>/models/<aspect>.json
//! <root>/results.csv, results.txt
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use feedpath_core::baselines::{BaselineScore, CenterRule, Method};
use feedpath_core::eval::Judgment;
use feedpath_core::features::{read_feature_csv, FeatureConfig, FeatureLayout, FeatureVector, Providers};
use feedpath_core::graph::InteractionGraph;
use feedpath_core::io;
use feedpath_core::ltr::{Aspect, LinearRankModel};
use feedpath_core::paths::{FeedItem, PathRecord};
use feedpath_core::similarity::{load_embeddings, SimilarityProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityConfig {
    Taxonomic,
    /// Embedding file of `{"id", "vec"}` lines, relative to the workspace;
    /// taxonomic similarity fills in for nodes without vectors.
    Embedding { path: PathBuf, fallback: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceConfig {
    pub label: String,
    pub max_len: usize,
    pub path_cap: usize,
    pub seed: u64,
    pub pairs_per_item: usize,
    pub similarity: SimilarityConfig,
    pub features: FeatureConfig,
    pub center_rule: CenterRule,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        WorkspaceConfig {
            label: String::new(),
            max_len: 5,
            path_cap: feedpath_core::paths::DEFAULT_PATH_CAP,
            seed: 0,
            pairs_per_item: feedpath_core::eval::DEFAULT_PAIRS_PER_ITEM,
            similarity: SimilarityConfig::Taxonomic,
            features: FeatureConfig::default(),
            center_rule: CenterRule::Min,
        }
    }
}

/// A sampled pair awaiting judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair_id: String,
    pub pair: String,
    pub a: String,
    pub b: String,
    pub strategy: String,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn graph_dir(&self) -> PathBuf {
        self.root.join("graph")
    }
    pub fn feed_path(&self) -> PathBuf {
        self.root.join("feed.jsonl")
    }
    pub fn paths_path(&self) -> PathBuf {
        self.root.join("paths.jsonl")
    }
    pub fn features_path(&self) -> PathBuf {
        self.root.join("features.csv")
    }
    pub fn baselines_path(&self) -> PathBuf {
        self.root.join("baselines.csv")
    }
    pub fn pairs_path(&self) -> PathBuf {
        self.root.join("pairs.jsonl")
    }
    pub fn judgments_path(&self) -> PathBuf {
        self.root.join("judgments.jsonl")
    }
    pub fn model_path(&self, aspect: Aspect) -> PathBuf {
        self.root.join("models").join(format!("{}.json", aspect.name()))
    }
    pub fn results_path(&self) -> PathBuf {
        self.root.join("results.csv")
    }
    pub fn table_path(&self) -> PathBuf {
        self.root.join("results.txt")
    }

    /// The stored config, or defaults when the file is absent.
    pub fn config(&self) -> Result<WorkspaceConfig> {
        let p = self.config_path();
        if !p.exists() {
            return Ok(WorkspaceConfig::default());
        }
        let text = io::read_string(&p)?;
        serde_json::from_str(&text).with_context(|| format!("reading {}", p.display()))
    }

    pub fn graph(&self) -> Result<InteractionGraph> {
        io::read_snapshot(self.graph_dir()).context("loading graph snapshot")
    }

    pub fn providers(&self, cfg: &WorkspaceConfig, g: &InteractionGraph) -> Result<Providers> {
        let p = match &cfg.similarity {
            SimilarityConfig::Taxonomic => SimilarityProvider::taxonomic(g),
            SimilarityConfig::Embedding { path, fallback } => {
                let path = if path.is_absolute() { path.clone() } else { self.root.join(path) };
                let vectors = load_embeddings(&path)?;
                SimilarityProvider::embedding(vectors, fallback.then(|| SimilarityProvider::taxonomic(g)))
            }
        };
        Ok(Providers::both(p))
    }
}

pub fn read_feed(path: &Path) -> Result<Vec<FeedItem>> {
    Ok(io::read_jsonl(path)?)
}

pub fn read_paths(path: &Path) -> Result<Vec<PathRecord>> {
    Ok(io::read_jsonl(path)?)
}

pub fn read_judgments(path: &Path) -> Result<Vec<Judgment>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(io::read_jsonl(path)?)
}

pub fn read_features(path: &Path) -> Result<(Arc<FeatureLayout>, BTreeMap<String, FeatureVector>)> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_feature_csv(f)?)
}

pub fn read_model(path: &Path) -> Result<LinearRankModel> {
    let text = io::read_string(path)?;
    Ok(LinearRankModel::from_json(&text)?)
}

pub fn read_scores(path: &Path) -> Result<Vec<BaselineScore>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("{} row {}", path.display(), i + 1))?;
        let method = match rec.get(1) {
            Some("pra") => Method::Pra,
            Some("rex_global") => Method::RexGlobal,
            Some("espresso") => Method::Espresso,
            other => bail!("{} row {}: unknown method {other:?}", path.display(), i + 1),
        };
        let value: f64 = rec
            .get(2)
            .unwrap_or_default()
            .parse()
            .with_context(|| format!("{} row {}: bad value", path.display(), i + 1))?;
        out.push(BaselineScore {
            path_id: rec.get(0).unwrap_or_default().to_owned(),
            method,
            value,
        });
    }
    Ok(out)
}

/// Path records keyed by id; the first record wins for repeated ids.
pub fn index_paths(records: Vec<PathRecord>) -> HashMap<String, PathRecord> {
    let mut out = HashMap::new();
    for r in records {
        out.entry(r.id.to_string()).or_insert(r);
    }
    out
}
