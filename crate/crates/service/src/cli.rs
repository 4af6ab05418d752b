//! Command-line entry point. Every subcommand reads and writes inside one
//! workspace directory; outputs are written atomically.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use feedpath_core::baselines::write_score_csv;
use feedpath_core::eval::{self, pair_id, ExperimentConfig, Sampling};
use feedpath_core::features::write_feature_csv;
use feedpath_core::graph::build_graph;
use feedpath_core::io;
use feedpath_core::ltr::Aspect;
use feedpath_core::paths::MinerConfig;
use feedpath_core::pipeline;
use feedpath_core::synth;

use crate::ops;
use crate::workspace::{self, PairRecord, Workspace, WorkspaceConfig};

#[derive(Debug, Parser)]
#[command(name = "feedpath", version, about = "Mine, rank and evaluate explanation paths for feed items")]
pub struct Cli {
    /// Workspace directory.
    #[arg(long, global = true, env = "FAIRY_WORKSPACE", default_value = ".")]
    pub workspace: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    PerturbUser,
    PerturbCategory,
    PerturbItem,
}

impl From<Strategy> for Sampling {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Random => Sampling::Random,
            Strategy::PerturbUser => Sampling::PerturbUser,
            Strategy::PerturbCategory => Sampling::PerturbCategory,
            Strategy::PerturbItem => Sampling::PerturbItem,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the graph snapshot from a schema and node/edge JSON Lines files.
    BuildGraph {
        /// Bundled schema name (`quora`, `lastfm`) or a schema file.
        #[arg(long)]
        schema: String,
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long)]
        edges: PathBuf,
    },
    /// Mine explanation paths for every item of a feed.
    Mine {
        /// Focal user id; defaults to the graph's user node.
        #[arg(long)]
        user: Option<String>,
        /// Feed file of `{"node", "seen_at"}` lines; copied into the workspace.
        #[arg(long)]
        feed: PathBuf,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute feature vectors for the path dump.
    Featurize {
        #[arg(long)]
        paths: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample path pairs for judging.
    Sample {
        #[arg(long, value_enum, default_value = "random")]
        strategy: Strategy,
        /// Pairs per feed item.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a ranking model on the stored judgments.
    Train {
        #[arg(long, default_value = "relevance")]
        aspect: Aspect,
        #[arg(long)]
        judgments: Option<PathBuf>,
    },
    /// Print the ranked paths of one feed item as JSON.
    Rank {
        #[arg(long)]
        item: String,
        #[arg(long)]
        user: Option<String>,
        #[arg(long, default_value = "relevance")]
        aspect: Aspect,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Score the path dump with the baseline rankers.
    Baselines {
        #[arg(long)]
        paths: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment config and write results.csv and results.txt.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        judgments: Option<PathBuf>,
    },
    /// Serve the JSON API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Write the planted synthetic dataset used by the bundled example.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SYNTH_SEED)]
        seed: u64,
    },
}

/// Seed of the bundled synthetic dataset.
pub const SYNTH_SEED: u64 = 11;
pub const SYNTH_ITEMS: usize = 40;
pub const SYNTH_BRIDGES: usize = 12;
pub const SYNTH_MAX_LEN: usize = 3;
pub const SYNTH_PAIRS_PER_ITEM: usize = 30;
pub const SYNTH_JUDGES: usize = 3;

/// Raised by `rank` when the aspect has no trained model; exits with 2.
#[derive(Debug)]
pub struct NoModel(pub Aspect);

impl std::fmt::Display for NoModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "no trained {} model; run `feedpath train --aspect {}` first", self.0, self.0)
    }
}

impl std::error::Error for NoModel {}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<NoModel>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ws = Workspace::new(cli.workspace);
    match cli.command {
        Command::BuildGraph { schema, nodes, edges } => build_graph_cmd(&ws, &schema, &nodes, &edges),
        Command::Mine { user, feed, max_len, out } => mine(&ws, user, &feed, max_len, out),
        Command::Featurize { paths, out } => featurize(&ws, paths, out),
        Command::Sample { strategy, n, seed, out } => sample(&ws, strategy.into(), n, seed, out),
        Command::Train { aspect, judgments } => train(&ws, aspect, judgments),
        Command::Rank { item, user, aspect, k } => {
            let ranked = rank(&ws, &item, user.as_deref(), aspect, k)?;
            emit(&(serde_json::to_string_pretty(&ranked)? + "\n"))
        }
        Command::Baselines { paths, out } => baselines(&ws, paths, out),
        Command::Eval { config, judgments } => {
            let results = evaluate(&ws, &config, judgments)?;
            emit(&results.table())
        }
        Command::Serve { port, host } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::api::serve(ws, SocketAddr::new(host, port)))
        }
        Command::GenSynthetic { out, seed } => gen_synthetic(&out, seed),
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn build_graph_cmd(ws: &Workspace, schema: &str, nodes: &Path, edges: &Path) -> Result<()> {
    let schema = io::resolve_schema(schema)?;
    let nodes = io::read_jsonl(nodes)?;
    let edges = io::read_jsonl(edges)?;
    let g = build_graph(schema, nodes, edges)?;
    io::write_snapshot(ws.graph_dir(), &g)?;
    info!("graph: {} nodes, {} edges", g.node_count(), g.edge_count());
    Ok(())
}

fn mine(ws: &Workspace, user: Option<String>, feed: &Path, max_len: Option<usize>, out: Option<PathBuf>) -> Result<()> {
    let cfg = ws.config()?;
    let g = ws.graph()?;
    let user = user.unwrap_or_else(|| g.node(g.user()).id.clone());
    let items = workspace::read_feed(feed)?;
    let miner = MinerConfig { max_len: max_len.unwrap_or(cfg.max_len), cap: Some(cfg.path_cap) };
    let mined = pipeline::mine_feed(&g, &user, &items, miner)?;
    let records = pipeline::to_records(&g, &mined);
    for m in &mined {
        info!("{}: {} paths", m.item.node, m.paths.len());
    }
    io::write_jsonl(out.unwrap_or_else(|| ws.paths_path()), &records)?;
    if feed != ws.feed_path() {
        io::write_jsonl(ws.feed_path(), &items)?;
    }
    Ok(())
}

fn load_mined(ws: &Workspace, g: &feedpath_core::graph::InteractionGraph, paths: Option<PathBuf>) -> Result<Vec<pipeline::Mined>> {
    let records = workspace::read_paths(&paths.unwrap_or_else(|| ws.paths_path()))?;
    let feed = workspace::read_feed(&ws.feed_path())?;
    Ok(pipeline::from_records(g, &records, &feed)?)
}

fn featurize(ws: &Workspace, paths: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let cfg = ws.config()?;
    let g = ws.graph()?;
    let mined = load_mined(ws, &g, paths)?;
    let stats = pipeline::pattern_stats(&g, &mined)?;
    let providers = ws.providers(&cfg, &g)?;
    let (layout, vectors) = pipeline::featurize_corpus(&g, &mined, &stats, providers, cfg.features.clone())?;
    let rows: Vec<_> = vectors.into_iter().collect();
    io::atomic_write(out.unwrap_or_else(|| ws.features_path()), |w| write_feature_csv(w, &layout, &rows))?;
    info!("featurized {} paths over {} columns", rows.len(), layout.len());
    Ok(())
}

fn sample(ws: &Workspace, strategy: Sampling, n: Option<usize>, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let cfg = ws.config()?;
    let g = ws.graph()?;
    let mined = load_mined(ws, &g, None)?;
    let n = n.unwrap_or(cfg.pairs_per_item);
    let seed = seed.unwrap_or(cfg.seed);
    let mut seen = HashSet::new();
    let mut out_pairs = Vec::new();
    let mut short = 0;
    for (k, m) in mined.iter().enumerate() {
        if m.paths.len() < 2 {
            continue;
        }
        let item_seed = seed.wrapping_add(k as u64);
        let sampled = match strategy.role() {
            None => eval::sample_random_pairs(m.paths.len(), n, item_seed)?,
            Some(role) => {
                let metas: Vec<_> = m.paths.iter().map(|p| eval::PathMeta::of(&g, p)).collect();
                eval::sample_role_pairs(&metas, role, n, item_seed)
            }
        };
        short += usize::from(sampled.short);
        for (i, j) in sampled.pairs {
            let (a, b) = (m.paths[i].id.to_string(), m.paths[j].id.to_string());
            let id = pair_id(&a, &b);
            if seen.insert(id.clone()) {
                out_pairs.push(PairRecord { pair_id: id, pair: m.pair.to_string(), a, b, strategy: strategy.name().into() });
            }
        }
    }
    if short > 0 {
        warn!("{short} of {} feed items had fewer than {n} {} pairs", mined.len(), strategy.name());
    }
    info!("sampled {} pairs", out_pairs.len());
    io::write_jsonl(out.unwrap_or_else(|| ws.pairs_path()), &out_pairs)?;
    Ok(())
}

fn train(ws: &Workspace, aspect: Aspect, judgments: Option<PathBuf>) -> Result<()> {
    let cfg = ws.config()?;
    let judgments = workspace::read_judgments(&judgments.unwrap_or_else(|| ws.judgments_path()))?;
    let (_, features) = workspace::read_features(&ws.features_path())?;
    let (model, summary) = ops::train_model(&judgments, &features, aspect, cfg.seed)?;
    io::write_string(ws.model_path(aspect), &model.to_json())?;
    emit(&(serde_json::to_string_pretty(&summary)? + "\n"))
}

/// Ranked paths of one feed item, as printed by `feedpath rank`.
pub fn rank(ws: &Workspace, item: &str, user: Option<&str>, aspect: Aspect, k: Option<usize>) -> Result<Vec<ops::RankedPath>> {
    let model_path = ws.model_path(aspect);
    if !model_path.exists() {
        return Err(NoModel(aspect).into());
    }
    let model = workspace::read_model(&model_path)?;
    let records = workspace::read_paths(&ws.paths_path())?;
    let mut ids = Vec::new();
    let mut pair = None;
    for r in &records {
        let key = feedpath_core::paths::PairKey::parse(&r.pair)?;
        if key.item != item || user.is_some_and(|u| u != key.user) {
            continue;
        }
        if pair.get_or_insert_with(|| r.pair.clone()) != &r.pair {
            continue;
        }
        let id = r.id.to_string();
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    if pair.is_none() {
        bail!("no mined paths for item `{item}`");
    }
    let (_, features) = workspace::read_features(&ws.features_path())?;
    ops::rank_ids(&model, &ids, &features, k)
}

fn baselines(ws: &Workspace, paths: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let cfg = ws.config()?;
    let g = ws.graph()?;
    let mined = load_mined(ws, &g, paths)?;
    let stats = pipeline::pattern_stats(&g, &mined)?;
    let scores = pipeline::baseline_corpus(&g, &mined, &stats, cfg.center_rule)?;
    io::atomic_write(out.unwrap_or_else(|| ws.baselines_path()), |w| write_score_csv(w, &scores))?;
    info!("scored {} paths", scores.len() / 3);
    Ok(())
}

/// Runs an experiment over the workspace artifacts and writes the results.
pub fn evaluate(ws: &Workspace, config: &Path, judgments: Option<PathBuf>) -> Result<eval::ExperimentResults> {
    let mut exp = ExperimentConfig::from_json(&io::read_string(config)?)?;
    let cfg = ws.config()?;
    if exp.label.is_empty() {
        exp.label = cfg.label.clone();
    }
    let g = ws.graph()?;
    let mined = load_mined(ws, &g, None)?;
    let (layout, features) = workspace::read_features(&ws.features_path())?;
    let scores = workspace::read_scores(&ws.baselines_path())?;
    let judgments = workspace::read_judgments(&judgments.unwrap_or_else(|| ws.judgments_path()))?;
    if judgments.is_empty() {
        bail!("no judgments to evaluate against");
    }
    let meta = pipeline::path_metas(&g, &mined);
    let data = pipeline::dataset(&exp.label, layout, features, &scores, meta, judgments);
    data.validate()?;
    let results = eval::run_experiment(&data, &exp)?;
    io::atomic_write(ws.results_path(), |w| results.write_csv(w))?;
    io::write_string(ws.table_path(), &results.table())?;
    Ok(results)
}

/// Writes the planted synthetic dataset: schema, graph records, feed,
/// judgments, a workspace config and an experiment config.
pub fn gen_synthetic(out: &Path, seed: u64) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let corpus = synth::planted_dependence(seed, SYNTH_ITEMS, SYNTH_BRIDGES);
    let g = corpus.graph()?;
    let mined = pipeline::mine_feed(&g, &corpus.user, &corpus.feed, MinerConfig::new(SYNTH_MAX_LEN))?;
    let stats = pipeline::pattern_stats(&g, &mined)?;
    let judgments = synth::frequency_judgments(&g, &mined, &stats, SYNTH_PAIRS_PER_ITEM, seed, SYNTH_JUDGES)?;

    io::write_string(out.join("schema.json"), &corpus.schema.to_json())?;
    io::write_jsonl(out.join("nodes.jsonl"), &corpus.nodes)?;
    io::write_jsonl(out.join("edges.jsonl"), &corpus.edges)?;
    io::write_jsonl(out.join("feed.jsonl"), &corpus.feed)?;
    io::write_jsonl(out.join("judgments.jsonl"), &judgments)?;

    let cfg = WorkspaceConfig { label: "synthetic".into(), max_len: SYNTH_MAX_LEN, seed, ..WorkspaceConfig::default() };
    io::write_string(out.join("config.json"), &(serde_json::to_string_pretty(&cfg)? + "\n"))?;

    let mut runs = vec![eval::RunConfig::full("all")];
    for group in ["pattern", "user"] {
        let mut r = eval::RunConfig::full(&format!("no-{group}"));
        r.features = BTreeMap::from([(group.to_owned(), false)]);
        runs.push(r);
    }
    let exp = ExperimentConfig { label: "synthetic".into(), split_seed: seed, train_seed: seed, runs, ..ExperimentConfig::default() };
    io::write_string(out.join("experiment.json"), &(serde_json::to_string_pretty(&exp)? + "\n"))?;
    info!("wrote {} judgments over {} feed items to {}", judgments.len(), corpus.feed.len(), out.display());
    Ok(())
}
