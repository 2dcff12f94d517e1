//! Turning an analyzed repository into benchmark samples.

use std::path::Path;

use rayon::prelude::*;

use crate::deps::{DepError, RepoGraph};
use crate::model::{BenchmarkSample, CoverageStats, FunctionRecord};
use crate::prompt::{build_all_prompts, ContextParts, PromptError};
use crate::python::{extract_functions, SkippedFunction};

#[derive(Debug, thiserror::Error)]
pub enum SampleError {
    #[error(transparent)]
    Deps(#[from] DepError),
    #[error("prompt for `{name}`: {source}")]
    Prompt {
        name: String,
        #[source]
        source: PromptError,
    },
    #[error("sample `{0}`: {1}")]
    Invalid(String, crate::model::InvariantError),
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub depth: u32,
    pub max_prompt_tokens: Option<usize>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            depth: 1,
            max_prompt_tokens: None,
        }
    }
}

/// Samples plus the functions that were passed over.
#[derive(Debug, Default)]
pub struct Extracted {
    pub samples: Vec<BenchmarkSample>,
    pub skipped: Vec<SkippedFunction>,
}

pub fn sample_id(repo: &str, target: &FunctionRecord) -> String {
    format!("{repo}::{}::{}", target.module_id, target.qualified_name)
}

/// One untested sample per eligible function of the repository, in module
/// then source order.
pub fn extract_samples(
    root: &Path,
    repo: &str,
    opts: &SampleOptions,
) -> Result<Extracted, SampleError> {
    let graph = RepoGraph::build(root)?;
    extract_from_graph(&graph, repo, opts)
}

pub fn extract_from_graph(
    graph: &RepoGraph,
    repo: &str,
    opts: &SampleOptions,
) -> Result<Extracted, SampleError> {
    let mut modules: Vec<_> = graph.snapshot().modules().iter().collect();
    modules.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Extracted::default();
    let mut targets = Vec::new();
    for module in modules {
        let Some(parsed) = graph.parsed(&module.id) else {
            continue;
        };
        let found = extract_functions(parsed);
        out.skipped.extend(found.skipped);
        targets.extend(found.functions.into_iter().map(|f| (module, f)));
    }
    let built: Result<Vec<_>, SampleError> = targets
        .into_par_iter()
        .map(|(module, target)| {
            let deps = graph.extract_dependencies(&target, opts.depth)?;
            let parts = ContextParts {
                imports: &module.import_statements,
                dependencies: &deps,
                target: &target,
            };
            let prompts = build_all_prompts(parts, opts.max_prompt_tokens).map_err(|source| {
                SampleError::Prompt {
                    name: target.qualified_name.clone(),
                    source,
                }
            })?;
            let id = sample_id(repo, &target);
            BenchmarkSample::new(
                id.clone(),
                repo.to_owned(),
                module.path.clone(),
                target,
                module.import_statements.clone(),
                deps,
                prompts,
                Vec::new(),
                CoverageStats::default(),
            )
            .map_err(|e| SampleError::Invalid(id, e))
        })
        .collect();
    out.samples = built?;
    Ok(out)
}
