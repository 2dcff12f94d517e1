//! Import resolution, repository graph and dependency extraction.

mod builtins;
mod extract;
mod graph;
mod imports;

use std::path::PathBuf;

use thiserror::Error;

use crate::model::{DependencyRecord, FunctionRecord, InvariantError, RepositorySnapshot};

pub use builtins::is_builtin;
pub use extract::names_by_origin;
pub use graph::{build_repo_graph, module_id_for, RepoGraph};
pub use imports::{resolve_imports, ImportBinding, ImportMap, KindHint};

#[derive(Debug, Error)]
pub enum DepError {
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("walking repository: {0}")]
    Walk(String),
    #[error("target `{0}` is not part of the repository graph")]
    TargetNotFound(String),
    #[error("dependency depth {0} is outside 1..=100")]
    Depth(u32),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

/// Convenience wrapper that rebuilds the analysis state for `graph`.
/// Prefer [`RepoGraph::extract_dependencies`] when extracting many targets.
pub fn extract_dependencies(
    target: &FunctionRecord,
    graph: &RepositorySnapshot,
    max_depth: u32,
) -> Result<Vec<DependencyRecord>, DepError> {
    RepoGraph::from_snapshot(graph)?.extract_dependencies(target, max_depth)
}
