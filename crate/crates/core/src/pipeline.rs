//! Glue between the stages: mine a feed, build pattern statistics,
//! featurize and score every mined path.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use log::warn;
use rayon::prelude::*;

use crate::baselines::{self, BaselineScore, CenterRule, Espresso, Method, RwrConfig};
use crate::error::Result;
use crate::eval::{Dataset, Judgment, PathMeta};
use crate::features::{FeatureConfig, FeatureLayout, FeatureVector, Featurizer, Providers};
use crate::graph::InteractionGraph;
use crate::paths::{enumerate_paths_with, ExplanationPath, FeedItem, MinerConfig, PairKey, PathRecord};
use crate::pattern::PatternStats;

/// Paths mined for one (user, feed item) pair.
#[derive(Debug, Clone)]
pub struct Mined {
    pub pair: PairKey,
    pub item: FeedItem,
    pub paths: Vec<ExplanationPath>,
}

pub fn mine_feed(g: &InteractionGraph, user: &str, feed: &[FeedItem], cfg: MinerConfig) -> Result<Vec<Mined>> {
    feed.iter()
        .map(|item| {
            Ok(Mined {
                pair: PairKey::new(user, item),
                item: item.clone(),
                paths: enumerate_paths_with(g, user, item, cfg)?,
            })
        })
        .collect()
}

pub fn pattern_stats(g: &InteractionGraph, mined: &[Mined]) -> Result<PatternStats> {
    PatternStats::build(g, mined.iter().map(|m| (m.pair.to_string(), m.paths.as_slice())))
}

/// Rebuilds mined pairs from a path dump; records keep their dump order.
pub fn from_records(g: &InteractionGraph, records: &[PathRecord], feed: &[FeedItem]) -> Result<Vec<Mined>> {
    let mut by_pair: BTreeMap<String, Vec<ExplanationPath>> = BTreeMap::new();
    for r in records {
        by_pair.entry(r.pair.clone()).or_default().push(r.resolve(g)?);
    }
    let user = g.node(g.user()).id.clone();
    let mut out = Vec::new();
    for item in feed {
        let pair = PairKey::new(&user, item);
        let paths = by_pair.remove(&pair.to_string()).unwrap_or_default();
        out.push(Mined { pair, item: item.clone(), paths });
    }
    for (pair, paths) in by_pair {
        let key = PairKey::parse(&pair)?;
        out.push(Mined { item: key.feed_item(), pair: key, paths });
    }
    Ok(out)
}

pub fn to_records(g: &InteractionGraph, mined: &[Mined]) -> Vec<PathRecord> {
    mined
        .iter()
        .flat_map(|m| m.paths.iter().map(|p| PathRecord::from_path(g, &m.pair, p)))
        .collect()
}

/// Feature vectors keyed by path id. A path id mined for several pairs keeps
/// the vector of the first pair.
pub fn featurize_corpus(
    g: &InteractionGraph,
    mined: &[Mined],
    stats: &PatternStats,
    providers: Providers,
    config: FeatureConfig,
) -> Result<(Arc<FeatureLayout>, BTreeMap<String, FeatureVector>)> {
    let fz = Featurizer::new(g, providers, config);
    let mut out = BTreeMap::new();
    for m in mined {
        let vs = m
            .paths
            .par_iter()
            .map(|p| Ok((p.id.to_string(), fz.featurize(p, &m.item, stats)?)))
            .collect::<Result<Vec<_>>>()?;
        for (id, v) in vs {
            if out.contains_key(&id) {
                warn!("path {id} mined for more than one pair; keeping its first vector");
                continue;
            }
            out.insert(id, v);
        }
    }
    Ok((Arc::clone(fz.layout()), out))
}

pub fn baseline_corpus(g: &InteractionGraph, mined: &[Mined], stats: &PatternStats, rule: CenterRule) -> Result<Vec<BaselineScore>> {
    let esp = Espresso::new(g, RwrConfig::default(), rule);
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for m in mined {
        let fresh: Vec<ExplanationPath> = m.paths.iter().filter(|p| seen.insert(p.id)).cloned().collect();
        out.extend(baselines::score_all(g, stats, &esp, &fresh)?);
    }
    Ok(out)
}

pub fn path_metas(g: &InteractionGraph, mined: &[Mined]) -> BTreeMap<String, PathMeta> {
    mined
        .iter()
        .flat_map(|m| m.paths.iter())
        .map(|p| (p.id.to_string(), PathMeta::of(g, p)))
        .collect()
}

pub fn dataset(
    label: &str,
    layout: Arc<FeatureLayout>,
    features: BTreeMap<String, FeatureVector>,
    scores: &[BaselineScore],
    meta: BTreeMap<String, PathMeta>,
    judgments: Vec<Judgment>,
) -> Dataset {
    let baselines: HashMap<(String, Method), f64> = scores
        .iter()
        .map(|s| ((s.path_id.clone(), s.method), s.value))
        .collect();
    Dataset {
        label: label.to_owned(),
        layout,
        features,
        baselines,
        meta,
        judgments,
    }
}

/// Mines, featurizes and scores a feed in one go.
pub fn build_dataset(
    label: &str,
    g: &InteractionGraph,
    feed: &[FeedItem],
    max_len: usize,
    providers: Providers,
    config: FeatureConfig,
    judgments: Vec<Judgment>,
) -> Result<(Vec<Mined>, Dataset)> {
    let user = g.node(g.user()).id.clone();
    let mined = mine_feed(g, &user, feed, MinerConfig::new(max_len))?;
    let stats = pattern_stats(g, &mined)?;
    let (layout, features) = featurize_corpus(g, &mined, &stats, providers, config)?;
    let scores = baseline_corpus(g, &mined, &stats, CenterRule::Min)?;
    let meta = path_metas(g, &mined);
    let data = dataset(label, layout, features, &scores, meta, judgments);
    Ok((mined, data))
}
