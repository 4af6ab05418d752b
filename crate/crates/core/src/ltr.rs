//! Pairwise linear ranking.
//!
//! Minimizes `0.5 * |w|^2 + C * sum_i max(0, 1 - w . (x_better - x_worse))`
//! over z-scored features with Pegasos-style stochastic subgradient steps
//! (step `1 / (lambda * t)`, `lambda = 1 / (C * n)`) in a seeded order. An
//! epoch whose end point raises the objective is rolled back, so the recorded
//! objective never increases.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{FeatureLayout, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Relevance,
    Surprisal,
}

impl Aspect {
    pub const BOTH: [Aspect; 2] = [Aspect::Relevance, Aspect::Surprisal];

    pub fn name(self) -> &'static str {
        match self {
            Aspect::Relevance => "relevance",
            Aspect::Surprisal => "surprisal",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Aspect {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relevance" => Ok(Aspect::Relevance),
            "surprisal" => Ok(Aspect::Surprisal),
            other => Err(Error::InvalidArgument(format!("unknown aspect `{other}`"))),
        }
    }
}

/// A path id paired with its features.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub pair_id: String,
    pub better: Candidate,
    pub worse: Candidate,
    pub aspect: Aspect,
    pub judge: String,
    pub judged_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub c: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            c: 1.0,
            tolerance: 1e-6,
            max_epochs: 200,
            seed: 0,
        }
    }
}

/// Consecutive rejected epochs after which training stops.
const STALL_EPOCHS: usize = 10;

/// Candidate values of `C` searched on the development split.
pub const C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Population mean and standard deviation; constant columns get std 1.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Self {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((v, x), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRankModel {
    pub aspect: Aspect,
    pub layout: Arc<FeatureLayout>,
    pub weights: Vec<f64>,
    pub scaler: Scaler,
    pub hyper: Hyper,
    /// Objective value after each accepted epoch.
    pub objective: Vec<f64>,
    /// SHA-256 over the training pairs.
    pub training_digest: String,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn objective(w: &[f64], diffs: &[Vec<f64>], c: f64) -> f64 {
    let reg = 0.5 * dot(w, w);
    let loss: f64 = diffs.iter().map(|d| (1.0 - dot(w, d)).max(0.0)).sum();
    reg + c * loss
}

fn digest(pairs: &[PreferencePair]) -> String {
    let mut h = Sha256::new();
    for p in pairs {
        h.update(p.pair_id.as_bytes());
        h.update([0]);
        h.update(p.better.id.as_bytes());
        h.update([0]);
        h.update(p.worse.id.as_bytes());
        h.update([0]);
        for x in p.better.features.values.iter().chain(&p.worse.features.values) {
            h.update(x.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

pub fn train(pairs: &[PreferencePair], hyper: &Hyper) -> Result<LinearRankModel> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::Empty("no training pairs".into()))?;
    let aspect = first.aspect;
    let layout = Arc::clone(&first.better.features.layout);
    for p in pairs {
        if p.aspect != aspect {
            return Err(Error::InvalidArgument("training pairs mix aspects".into()));
        }
        for v in [&p.better.features, &p.worse.features] {
            if v.layout != layout && *v.layout != *layout {
                return Err(Error::LayoutMismatch(format!("pair {}", p.pair_id)));
            }
        }
    }
    if !(hyper.c > 0.0) {
        return Err(Error::InvalidArgument("C must be positive".into()));
    }
    let dim = layout.len();
    let scaler = Scaler::fit(
        pairs
            .iter()
            .flat_map(|p| [p.better.features.values.as_slice(), p.worse.features.values.as_slice()]),
        dim,
    );
    let diffs: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| {
            let b = scaler.apply(&p.better.features.values);
            let w = scaler.apply(&p.worse.features.values);
            b.iter().zip(&w).map(|(x, y)| x - y).collect()
        })
        .collect();

    let n = diffs.len();
    let lambda = 1.0 / (hyper.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![0.0; dim];
    let mut best = objective(&w, &diffs, hyper.c);
    let mut history = vec![best];
    let mut t = 0u64;
    let mut stalled = 0;

    for _ in 0..hyper.max_epochs {
        order.shuffle(&mut rng);
        let mut cand = w.clone();
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let d = &diffs[i];
            let violated = dot(&cand, d) < 1.0;
            let shrink = 1.0 - eta * lambda;
            cand.iter_mut().for_each(|x| *x *= shrink);
            if violated {
                for (x, di) in cand.iter_mut().zip(d) {
                    *x += eta * di;
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if norm > radius {
                let s = radius / norm;
                cand.iter_mut().for_each(|x| *x *= s);
            }
        }
        let obj = objective(&cand, &diffs, hyper.c);
        if obj <= best {
            let improvement = (best - obj) / best.max(1e-12);
            w = cand;
            best = obj;
            history.push(obj);
            stalled = 0;
            if improvement < hyper.tolerance {
                break;
            }
        } else {
            history.push(best);
            stalled += 1;
            if stalled >= STALL_EPOCHS {
                break;
            }
        }
    }

    Ok(LinearRankModel {
        aspect,
        layout,
        weights: w,
        scaler,
        hyper: hyper.clone(),
        objective: history,
        training_digest: digest(pairs),
    })
}

/// Which argument of a pairwise comparison the model prefers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preferred {
    First,
    Second,
}

impl LinearRankModel {
    fn check(&self, x: &FeatureVector) -> Result<()> {
        if !Arc::ptr_eq(&self.layout, &x.layout) && *self.layout != *x.layout {
            return Err(Error::LayoutMismatch(format!(
                "model expects {} columns, vector has {}",
                self.layout.len(),
                x.layout.len()
            )));
        }
        Ok(())
    }

    pub fn score(&self, x: &FeatureVector) -> Result<f64> {
        self.check(x)?;
        Ok(dot(&self.weights, &self.scaler.apply(&x.values)))
    }

    /// Per-column `w_j * z_j`; sums to the score.
    pub fn contributions(&self, x: &FeatureVector) -> Result<Vec<(String, f64)>> {
        self.check(x)?;
        let z = self.scaler.apply(&x.values);
        Ok(self
            .layout
            .names()
            .zip(self.weights.iter().zip(&z))
            .map(|(n, (w, z))| (n.to_owned(), w * z))
            .collect())
    }

    /// Higher score wins; an exact tie goes to the lexicographically smaller id.
    pub fn predict_pair(&self, a: &Candidate, b: &Candidate) -> Result<Preferred> {
        let (sa, sb) = (self.score(&a.features)?, self.score(&b.features)?);
        Ok(match sa.partial_cmp(&sb).unwrap_or(Ordering::Equal) {
            Ordering::Greater => Preferred::First,
            Ordering::Less => Preferred::Second,
            Ordering::Equal if a.id <= b.id => Preferred::First,
            Ordering::Equal => Preferred::Second,
        })
    }

    pub fn pairwise_accuracy(&self, pairs: &[PreferencePair]) -> Result<f64> {
        Ok(mean_bool(&self.pairwise_correctness(pairs)?))
    }

    /// Per-pair 0/1 correctness, in input order.
    pub fn pairwise_correctness(&self, pairs: &[PreferencePair]) -> Result<Vec<bool>> {
        if pairs.is_empty() {
            return Err(Error::Empty("no pairs to evaluate".into()));
        }
        pairs
            .iter()
            .map(|p| Ok(self.predict_pair(&p.better, &p.worse)? == Preferred::First))
            .collect()
    }

    pub fn rank<'a>(&self, candidates: &'a [Candidate]) -> Result<Vec<Ranked<'a>>> {
        let scored = candidates
            .iter()
            .map(|c| Ok((c, self.score(&c.features)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(rank_by_score(scored))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: LinearRankModel = serde_json::from_str(s).map_err(|e| Error::parse("model", e))?;
        if m.weights.len() != m.layout.len()
            || m.scaler.mean.len() != m.layout.len()
            || m.scaler.std.len() != m.layout.len()
        {
            return Err(Error::parse("model", "weight/scaler length differs from layout"));
        }
        if m.scaler.std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::parse("model", "scaler deviations must be positive"));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked<'a> {
    pub candidate: &'a Candidate,
    pub score: f64,
}

/// Descending score, ties by ascending id.
pub fn rank_by_score(mut scored: Vec<(&Candidate, f64)>) -> Vec<Ranked<'_>> {
    scored.sort_by(|(a, sa), (b, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    scored
        .into_iter()
        .map(|(candidate, score)| Ranked { candidate, score })
        .collect()
}

pub fn mean_bool(xs: &[bool]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().filter(|&&b| b).count() as f64 / xs.len() as f64
}

/// Trains one model per grid value on `train` and keeps the one with the
/// best development accuracy (first wins on ties).
pub fn select_c(
    train_pairs: &[PreferencePair],
    dev_pairs: &[PreferencePair],
    grid: &[f64],
    base: &Hyper,
) -> Result<(LinearRankModel, f64)> {
    let mut best: Option<(LinearRankModel, f64)> = None;
    for &c in grid {
        let hyper = Hyper { c, ..base.clone() };
        let model = train(train_pairs, &hyper)?;
        let acc = if dev_pairs.is_empty() {
            model.pairwise_accuracy(train_pairs)?
        } else {
            model.pairwise_accuracy(dev_pairs)?
        };
        if best.as_ref().is_none_or(|(_, a)| acc > *a) {
            best = Some((model, acc));
        }
    }
    best.ok_or_else(|| Error::Empty("empty C grid".into()))
}
