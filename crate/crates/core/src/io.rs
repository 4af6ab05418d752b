//! JSON Lines files, graph snapshots and atomic writes.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{build_graph, EdgeRecord, InteractionGraph, NodeRecord};
use crate::schema::{load_schema, Schema};

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn atomic_write(path: impl AsRef<Path>, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path.display().to_string(), format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    atomic_write(path, |w| {
        for it in items {
            serde_json::to_writer(&mut *w, it).map_err(|e| Error::parse("json", e))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    })
}

/// Appends one record and syncs it to disk.
pub fn append_jsonl<T: Serialize>(path: impl AsRef<Path>, item: &T) -> Result<()> {
    let path = path.as_ref();
    let mut line = serde_json::to_vec(item).map_err(|e| Error::parse("json", e))?;
    line.push(b'\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(&line).map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_string(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    atomic_write(path, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e)))
}

pub fn read_string(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub const SCHEMA_FILE: &str = "schema.json";
pub const NODES_FILE: &str = "nodes.jsonl";
pub const EDGES_FILE: &str = "edges.jsonl";

/// Builds a graph from a schema file and node/edge JSON Lines files.
pub fn load_graph(schema: impl AsRef<Path>, nodes: impl AsRef<Path>, edges: impl AsRef<Path>) -> Result<InteractionGraph> {
    let schema = load_schema(schema)?;
    let nodes: Vec<NodeRecord> = read_jsonl(nodes)?;
    let edges: Vec<EdgeRecord> = read_jsonl(edges)?;
    build_graph(schema, nodes, edges)
}

/// Writes `schema.json`, `nodes.jsonl` and `edges.jsonl` under `dir`.
pub fn write_snapshot(dir: impl AsRef<Path>, g: &InteractionGraph) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (nodes, edges) = g.to_records();
    write_string(dir.join(SCHEMA_FILE), &g.schema().to_json())?;
    write_jsonl(dir.join(NODES_FILE), &nodes)?;
    write_jsonl(dir.join(EDGES_FILE), &edges)
}

pub fn read_snapshot(dir: impl AsRef<Path>) -> Result<InteractionGraph> {
    let dir = dir.as_ref();
    load_graph(dir.join(SCHEMA_FILE), dir.join(NODES_FILE), dir.join(EDGES_FILE))
}

/// Resolves a schema argument: a bundled name (`quora`, `lastfm`) or a path.
pub fn resolve_schema(arg: &str) -> Result<Schema> {
    match Schema::bundled(arg) {
        Ok(s) => Ok(s),
        Err(_) => load_schema(arg),
    }
}
