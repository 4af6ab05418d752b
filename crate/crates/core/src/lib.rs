//! Explanation paths between a user and the items in their social feed.
//!
//! The crate models one user's neighborhood as a typed, timestamped
//! interaction graph, mines every temporally admissible simple path from the
//! user to a feed item, featurizes those paths and ranks them with pairwise
//! linear models learned from preference judgments. Baseline scorers and an
//! evaluation harness sit alongside.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod features;
pub mod graph;
pub mod io;
pub mod ltr;
pub mod paths;
pub mod pattern;
pub mod pipeline;
pub mod schema;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{build_graph, EdgeRecord, InteractionGraph, NodeRecord};
pub use paths::{enumerate_paths, is_valid, ExplanationPath, FeedItem, PairKey, PathId};
pub use pattern::{pattern_of, PathPattern, PatternStats};
pub use schema::{load_schema, Schema};
