//! Run configuration, read from a TOML file and overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::GenerationParams;
use crate::debug::DEFAULT_MAX_ROUNDS;
use crate::model::{ContextLevel, PromptFormat};
use crate::testgen::{DEFAULT_MIN_COVERAGE, DEFAULT_REPEATS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub repos: Vec<PathBuf>,
    pub context_levels: Vec<ContextLevel>,
    pub prompt_formats: Vec<PromptFormat>,
    pub generation: GenerationParams,
    pub coverage_threshold: f64,
    pub flaky_repeats: u32,
    pub max_debug_rounds: u32,
    pub dependency_depth: u32,
    pub timeout_secs: f64,
    pub ks: Vec<usize>,
    pub max_prompt_tokens: Option<usize>,
    /// Interpreter used for environments and the helper script.
    pub python: PathBuf,
    /// Helper script implementing the run-test / capture-call contract.
    pub shim: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            repos: Vec::new(),
            context_levels: ContextLevel::ALL.to_vec(),
            prompt_formats: PromptFormat::ALL.to_vec(),
            generation: GenerationParams::default(),
            coverage_threshold: DEFAULT_MIN_COVERAGE,
            flaky_repeats: DEFAULT_REPEATS,
            max_debug_rounds: DEFAULT_MAX_ROUNDS,
            dependency_depth: 1,
            timeout_secs: 30.0,
            ks: vec![1, 5],
            max_prompt_tokens: None,
            python: PathBuf::from("python3"),
            shim: None,
            jobs: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = toml::from_str("dependency_depth = 2\nks = [1]\n").unwrap();
        assert_eq!(cfg.dependency_depth, 2);
        assert_eq!(cfg.ks, [1]);
        assert_eq!(cfg.coverage_threshold, 40.0);
        assert_eq!(cfg.flaky_repeats, 10);
        assert_eq!(cfg.max_debug_rounds, 3);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }
}
