//! Training and ranking steps shared by the CLI and the server.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Result};
use serde::Serialize;

use feedpath_core::eval::{self, Judgment};
use feedpath_core::features::FeatureVector;
use feedpath_core::ltr::{self, Aspect, Candidate, Hyper, LinearRankModel, PreferencePair};

pub fn preference_pairs(
    judgments: &[Judgment],
    features: &BTreeMap<String, FeatureVector>,
    aspect: Aspect,
) -> Result<Vec<PreferencePair>> {
    let cand = |id: &str| -> Result<Candidate> {
        let v = features
            .get(id)
            .ok_or_else(|| anyhow!("judged path {id} has no feature vector"))?;
        Ok(Candidate { id: id.to_owned(), features: v.clone() })
    };
    judgments
        .iter()
        .filter(|j| j.aspect == aspect)
        .map(|j| {
            Ok(PreferencePair {
                pair_id: j.pair_id.clone(),
                better: cand(&j.better)?,
                worse: cand(&j.worse)?,
                aspect,
                judge: j.judge.clone(),
                judged_at: j.judged_at,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub aspect: Aspect,
    pub c: f64,
    /// Development accuracy, or training accuracy when there were too few
    /// pairs to hold a development split out.
    pub dev_accuracy: f64,
    pub dev_split: bool,
    pub train_pairs: usize,
}

/// Selects `C` on a development split when there are at least ten pairs;
/// otherwise trains once on everything with the default `C`.
pub fn train_model(
    judgments: &[Judgment],
    features: &BTreeMap<String, FeatureVector>,
    aspect: Aspect,
    seed: u64,
) -> Result<(LinearRankModel, TrainSummary)> {
    let pairs = preference_pairs(judgments, features, aspect)?;
    if pairs.is_empty() {
        bail!("no {aspect} judgments to train on");
    }
    let hyper = Hyper { seed, ..Hyper::default() };
    if pairs.len() >= 10 {
        let (train, dev, test) = eval::split(&pairs, seed)?;
        let mut train = train;
        train.extend(test);
        let (model, acc) = ltr::select_c(&train, &dev, &ltr::C_GRID, &hyper)?;
        let summary = TrainSummary { aspect, c: model.hyper.c, dev_accuracy: acc, dev_split: true, train_pairs: train.len() };
        Ok((model, summary))
    } else {
        let model = ltr::train(&pairs, &hyper)?;
        let acc = model.pairwise_accuracy(&pairs)?;
        let summary = TrainSummary { aspect, c: model.hyper.c, dev_accuracy: acc, dev_split: false, train_pairs: pairs.len() };
        Ok((model, summary))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Contribution {
    pub feature: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedPath {
    pub rank: usize,
    pub id: String,
    pub score: f64,
    pub contributions: Vec<Contribution>,
}

/// Ranks the given path ids; all must have feature vectors.
pub fn rank_ids(model: &LinearRankModel, ids: &[String], features: &BTreeMap<String, FeatureVector>, k: Option<usize>) -> Result<Vec<RankedPath>> {
    let cands = ids
        .iter()
        .map(|id| {
            let v = features.get(id).ok_or_else(|| anyhow!("path {id} has no feature vector"))?;
            Ok(Candidate { id: id.clone(), features: v.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    let ranked = model.rank(&cands)?;
    let take = k.unwrap_or(ranked.len());
    ranked
        .into_iter()
        .take(take)
        .enumerate()
        .map(|(i, r)| {
            let contributions = model
                .contributions(&r.candidate.features)?
                .into_iter()
                .map(|(feature, value)| Contribution { feature, value })
                .collect();
            Ok(RankedPath { rank: i + 1, id: r.candidate.id.clone(), score: r.score, contributions })
        })
        .collect()
}
