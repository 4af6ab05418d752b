#![allow(dead_code)]

use std::path::{Path, PathBuf};

use clap::Parser;
use feedpath_service::cli::{self, Cli};
use feedpath_service::workspace::Workspace;

pub fn synthetic_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic")
}

/// Runs one `feedpath` invocation against `ws`.
pub fn feedpath(ws: &Path, args: &[&str]) -> anyhow::Result<()> {
    let mut argv = vec!["feedpath".to_owned(), "--workspace".to_owned(), ws.display().to_string()];
    argv.extend(args.iter().map(|a| a.to_string()));
    cli::run(Cli::try_parse_from(argv)?)
}

/// A workspace holding the bundled graph, mined paths, features and
/// sampled pairs, with no judgments or models yet.
pub fn prepared_workspace(dir: &Path) -> Workspace {
    let data = synthetic_dir();
    let p = |f: &str| data.join(f).display().to_string();
    std::fs::copy(data.join("config.json"), dir.join("config.json")).unwrap();
    feedpath(dir, &["build-graph", "--schema", &p("schema.json"), "--nodes", &p("nodes.jsonl"), "--edges", &p("edges.jsonl")]).unwrap();
    feedpath(dir, &["mine", "--feed", &p("feed.jsonl")]).unwrap();
    feedpath(dir, &["featurize"]).unwrap();
    feedpath(dir, &["sample", "--n", "5"]).unwrap();
    Workspace::new(dir)
}
