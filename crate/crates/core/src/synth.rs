//! Seeded synthetic corpora: planted ranking problems, a corpus whose
//! preferences depend only on pattern frequency, and platform-scale graphs.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::Result;
use crate::eval::{pair_id, sample_random_pairs, Judgment};
use crate::features::{Column, FeatureGroup, FeatureLayout, FeatureVector};
use crate::graph::{build_graph, EdgeRecord, InteractionGraph, NodeRecord};
use crate::ltr::{Aspect, Candidate, PreferencePair};
use crate::pattern::{pattern_of, PatternStats};
use crate::pipeline::Mined;
use crate::schema::Schema;

/// A graph in record form plus the focal user's feed.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub schema: Schema,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub user: String,
    pub feed: Vec<crate::paths::FeedItem>,
}

impl Corpus {
    pub fn graph(&self) -> Result<InteractionGraph> {
        build_graph(self.schema.clone(), self.nodes.clone(), self.edges.clone())
    }
}

fn node(id: String, node_type: &str, is_user: bool, attrs: BTreeMap<String, Value>) -> NodeRecord {
    NodeRecord {
        id,
        node_type: node_type.into(),
        weight: 1.0,
        attrs,
        is_user,
    }
}

fn edge(src: &str, dst: &str, edge_type: &str, weight: f64, ts: i64) -> EdgeRecord {
    EdgeRecord {
        src: src.into(),
        dst: dst.into(),
        edge_type: edge_type.into(),
        weight,
        ts: Some(ts),
        id: None,
    }
}

/// Pairs ordered by a hidden weight vector over `dim` uniform features, kept
/// only when the planted margin is at least 1.
pub fn planted_ranking_pairs(dim: usize, n: usize, seed: u64) -> (Vec<f64>, Vec<PreferencePair>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let layout = Arc::new(FeatureLayout {
        columns: (0..dim)
            .map(|i| Column { name: format!("x{i:02}"), group: FeatureGroup::Instance })
            .collect(),
    });
    let mut pairs = Vec::with_capacity(n);
    let mut k = 0usize;
    while pairs.len() < n {
        let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let margin: f64 = w.iter().zip(a.iter().zip(&b)).map(|(w, (x, y))| w * (x - y)).sum();
        if margin.abs() < 1.0 {
            continue;
        }
        let (ia, ib) = (format!("a{k:05}"), format!("b{k:05}"));
        let cand = |id: String, v: Vec<f64>| Candidate { id, features: FeatureVector { values: v, layout: Arc::clone(&layout) } };
        let (better, worse) = if margin > 0.0 {
            (cand(ia, a), cand(ib, b))
        } else {
            (cand(ib, b), cand(ia, a))
        };
        pairs.push(PreferencePair {
            pair_id: pair_id(&better.id, &worse.id),
            better,
            worse,
            aspect: Aspect::Relevance,
            judge: "planted".into(),
            judged_at: k as i64,
        });
        k += 1;
    }
    (w, pairs)
}

pub fn planted_schema() -> Schema {
    Schema::from_json(
        r#"{
            "platform": "planted",
            "node_types": ["user", "post"],
            "edge_types": ["likes", "shares"],
            "triples": [["user", "likes", "post"], ["user", "shares", "post"]],
            "repeatable": []
        }"#,
    )
    .expect("planted schema is valid")
}

pub const PLANTED_SEEN_AT: i64 = 100;

/// One focal user and `items` feed posts. Each post is reached through
/// `bridges` private length-3 routes `u -a-> x <-b- y -c-> f`, where the
/// action triple (a, b, c) is drawn with probability proportional to its
/// rank. Every bridge user performs exactly two likes and two shares and
/// every bridge post has two engaged users, all edges share one timestamp
/// and nothing has a category, so only pattern statistics separate paths.
pub fn planted_dependence(seed: u64, items: usize, bridges: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actions = ["likes", "shares"];
    let total_weight: usize = (1..=8).sum();
    let mut nodes = vec![node("u".into(), "user", true, BTreeMap::new())];
    let mut edges = Vec::new();
    let mut feed = Vec::new();
    let mut pad = 0usize;
    for k in 0..items {
        let f = format!("f{k:03}");
        nodes.push(node(f.clone(), "post", false, BTreeMap::new()));
        feed.push(crate::paths::FeedItem { node: f.clone(), seen_at: PLANTED_SEEN_AT, session: None });
        for b in 0..bridges {
            let mut r = rng.gen_range(0..total_weight);
            let mut pattern = 0;
            while r > pattern {
                r -= pattern + 1;
                pattern += 1;
            }
            let (a1, a2, a3) = (actions[pattern & 1], actions[(pattern >> 1) & 1], actions[(pattern >> 2) & 1]);
            let (x, y) = (format!("x{k:03}-{b:02}"), format!("y{k:03}-{b:02}"));
            nodes.push(node(x.clone(), "post", false, BTreeMap::new()));
            nodes.push(node(y.clone(), "user", false, BTreeMap::new()));
            edges.push(edge("u", &x, a1, 1.0, 1));
            edges.push(edge(&y, &x, a2, 1.0, 1));
            edges.push(edge(&y, &f, a3, 1.0, 1));
            for act in actions {
                let used = [a2, a3].iter().filter(|&&a| a == act).count();
                for _ in used..2 {
                    let z = format!("pad{pad:05}");
                    pad += 1;
                    nodes.push(node(z.clone(), "post", false, BTreeMap::new()));
                    edges.push(edge(&y, &z, act, 1.0, 1));
                }
            }
        }
    }
    Corpus {
        schema: planted_schema(),
        nodes,
        edges,
        user: "u".into(),
        feed,
    }
}

/// Judgments that prefer the more frequent pattern for relevance and the
/// rarer one for surprisal. Pairs whose patterns are equally frequent are
/// skipped. Judges rotate through `judges` labels.
pub fn frequency_judgments(
    g: &InteractionGraph,
    mined: &[Mined],
    stats: &PatternStats,
    per_item: usize,
    seed: u64,
    judges: usize,
) -> Result<Vec<Judgment>> {
    let mut out = Vec::new();
    let mut t = 0i64;
    for (k, m) in mined.iter().enumerate() {
        if m.paths.len() < 2 {
            continue;
        }
        let freq = m
            .paths
            .iter()
            .map(|p| Ok(stats.frequency(&pattern_of(g, p)?)))
            .collect::<Result<Vec<f64>>>()?;
        let sampled = sample_random_pairs(m.paths.len(), per_item, seed.wrapping_add(k as u64))?;
        for (i, j) in sampled.pairs {
            if freq[i] == freq[j] {
                continue;
            }
            let (hi, lo) = if freq[i] > freq[j] { (i, j) } else { (j, i) };
            let (hi, lo) = (m.paths[hi].id.to_string(), m.paths[lo].id.to_string());
            let judge = format!("judge-{}", out.len() / 2 % judges.max(1));
            for (aspect, better, worse) in [(Aspect::Relevance, &hi, &lo), (Aspect::Surprisal, &lo, &hi)] {
                out.push(Judgment {
                    pair_id: pair_id(better, worse),
                    better: better.clone(),
                    worse: worse.clone(),
                    aspect,
                    judge: judge.clone(),
                    judged_at: t,
                    comment: None,
                });
                t += 1;
            }
        }
    }
    Ok(out)
}

/// Index skewed toward 0: `floor(n * r^skew)` for uniform `r`.
fn skewed(rng: &mut ChaCha8Rng, n: usize, skew: f64) -> usize {
    let r: f64 = rng.gen();
    ((n as f64) * r.powf(skew)).floor().min((n - 1) as f64) as usize
}

/// Size knobs for the platform-scale generators.
#[derive(Debug, Clone, Copy)]
pub struct ScaleSpec {
    /// Node counts per schema node type, in schema order.
    pub nodes: &'static [(&'static str, usize)],
    /// `(src type, edge type, dst type, count)` forward edges to draw.
    pub edges: &'static [(&'static str, &'static str, &'static str, usize)],
    pub skew: f64,
    pub feed_items: usize,
}

pub const LASTFM_SCALE: ScaleSpec = ScaleSpec {
    nodes: &[("user", 2000), ("track", 14000), ("album", 3000), ("artist", 3500), ("tag", 500)],
    edges: &[
        ("user", "follows", "user", 3000),
        ("user", "scrobbles", "track", 12000),
        ("user", "loves", "track", 3000),
        ("artist", "sings", "track", 7000),
        ("album", "contains", "track", 6000),
        ("track", "belongs to", "tag", 6000),
        ("album", "belongs to", "tag", 1000),
        ("artist", "belongs to", "tag", 1500),
        ("tag", "belongs to", "tag", 500),
    ],
    skew: 2.75,
    feed_items: 5,
};

pub const QUORA_SCALE: ScaleSpec = ScaleSpec {
    nodes: &[("user", 8000), ("question", 12000), ("answer", 11500), ("category", 500)],
    edges: &[
        ("user", "follows", "user", 60000),
        ("user", "follows", "category", 15000),
        ("user", "follows", "question", 20000),
        ("user", "asks", "question", 12000),
        ("user", "answers", "answer", 11500),
        ("answer", "answers", "question", 11500),
        ("user", "upvotes", "answer", 110000),
        ("question", "belongs to", "category", 9000),
        ("category", "belongs to", "category", 500),
    ],
    skew: 2.0,
    feed_items: 5,
};

pub const SCALE_SEEN_AT: i64 = 900_000;

/// A platform-shaped random graph. Edge endpoints are drawn with a
/// popularity skew; category-to-category edges always point at a smaller
/// index so every category reaches a root. The focal user is `user-0` and
/// the feed holds the most popular items of the type the first
/// user-to-content edge targets.
pub fn scale_corpus(schema: Schema, spec: &ScaleSpec, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    let count = |t: &str| spec.nodes.iter().find(|(n, _)| *n == t).map(|(_, c)| *c).expect("typed count");
    for &(t, c) in spec.nodes {
        for i in 0..c {
            let mut attrs = BTreeMap::new();
            if schema.is_user_type(t) {
                attrs.insert("followers".into(), json!(rng.gen_range(0..500)));
                attrs.insert("followees".into(), json!(rng.gen_range(0..500)));
            } else if schema.is_category_type(t) {
                attrs.insert("followers".into(), json!(rng.gen_range(0..10_000)));
            }
            nodes.push(node(format!("{t}-{i}"), t, schema.is_user_type(t) && i == 0, attrs));
        }
    }
    let mut edges = Vec::new();
    for &(st, et, dt, c) in spec.edges {
        let (ns, nd) = (count(st), count(dt));
        let mut drawn = 0;
        while drawn < c {
            let s = rng.gen_range(0..ns);
            let d = if st == dt && schema.is_category_type(st) {
                if s == 0 {
                    continue;
                }
                skewed(&mut rng, s, spec.skew)
            } else {
                skewed(&mut rng, nd, spec.skew)
            };
            if st == dt && s == d {
                continue;
            }
            let w = if schema.is_repeatable(et) { f64::from(rng.gen_range(1..50u32)) } else { 1.0 };
            edges.push(edge(&format!("{st}-{s}"), &format!("{dt}-{d}"), et, w, rng.gen_range(1..1_000_000)));
            drawn += 1;
        }
    }
    let item_type = spec
        .edges
        .iter()
        .find(|(s, _, d, _)| schema.is_user_type(s) && schema.is_item_type(d))
        .map(|(_, _, d, _)| *d)
        .expect("a user-to-item edge");
    let feed = (0..spec.feed_items)
        .map(|i| crate::paths::FeedItem {
            node: format!("{item_type}-{}", i * 7 + 3),
            seen_at: SCALE_SEEN_AT,
            session: None,
        })
        .collect();
    Corpus {
        schema,
        nodes,
        edges,
        user: "user-0".into(),
        feed,
    }
}

pub fn lastfm_like(seed: u64) -> Corpus {
    scale_corpus(Schema::bundled("lastfm").expect("bundled"), &LASTFM_SCALE, seed)
}

pub fn quora_like(seed: u64) -> Corpus {
    scale_corpus(Schema::bundled("quora").expect("bundled"), &QUORA_SCALE, seed)
}
