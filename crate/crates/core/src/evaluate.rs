//! Sampling candidates for a prompt and scoring them against the tests.

use crate::backend::{extract_code, Backend, BackendError, GenerationParams};
use crate::exec::{assemble_candidate, run_candidate, EnvHandle, ExecError, RunSettings, Runner};
use crate::model::{BenchmarkSample, ContextLevel, GenerationRecord, PromptFormat};
use crate::prompt::{build_prompt, PromptError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// `params.num_samples` candidates for one prompt variant, each run
/// against every validated test.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_sample(
    runner: &dyn Runner,
    env: &EnvHandle,
    sample: &BenchmarkSample,
    backend: &dyn Backend,
    level: ContextLevel,
    format: PromptFormat,
    params: &GenerationParams,
    run: &RunSettings,
) -> Result<Vec<GenerationRecord>, EvalError> {
    let prompt = match sample.prompt(level, format) {
        Some(p) => p.text.clone(),
        None => build_prompt(sample, level, format)?.text,
    };
    let completions = backend.complete(&prompt, params)?;
    completions
        .iter()
        .enumerate()
        .map(|(i, completion)| {
            let candidate = assemble_candidate(&sample.target, &extract_code(completion));
            Ok(run_candidate(runner, env, sample, i, &candidate, run)?.0)
        })
        .collect()
}
