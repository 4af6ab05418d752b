//! Workspace plumbing, the JSON API and the `feedpath` command line.

pub mod api;
pub mod cli;
pub mod ops;
pub mod workspace;
