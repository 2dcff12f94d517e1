//! Multi-round repair: feed the first failing test and its error log back
//! to the model until the candidate passes or the rounds run out.

use serde::{Deserialize, Serialize};

use crate::backend::{extract_code, Backend, GenerationParams};
use crate::exec::{assemble_candidate, run_candidate, EnvHandle, ExecError, RunSettings, Runner};
use crate::model::{BenchmarkSample, ContextLevel, PromptFormat, TestOutcome};
use crate::prompt::{build_debug_prompt_at, build_prompt};

/// Characters of runner output passed back to the model.
pub const ERROR_LOG_LIMIT: usize = 4000;
pub const DEFAULT_MAX_ROUNDS: u32 = 3;

#[derive(Debug, Clone)]
pub struct DebugConfig {
    pub max_rounds: u32,
    pub level: ContextLevel,
    pub format: PromptFormat,
    pub params: GenerationParams,
    pub run: RunSettings,
}

impl Default for DebugConfig {
    fn default() -> Self {
        Self {
            max_rounds: DEFAULT_MAX_ROUNDS,
            level: ContextLevel::Full,
            format: PromptFormat::InstructV2,
            params: GenerationParams::greedy(),
            run: RunSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebugRound {
    /// 0 is the initial generation.
    pub round_index: u32,
    pub candidate: String,
    pub per_test_outcome: Vec<TestOutcome>,
    pub dir_value: Option<f64>,
}

impl DebugRound {
    pub fn passed(&self) -> bool {
        self.per_test_outcome
            .iter()
            .all(|o| *o == TestOutcome::Pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Solved,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebugTrace {
    pub sample_id: String,
    pub rounds: Vec<DebugRound>,
    pub terminal_status: TerminalStatus,
    /// Set when the loop stopped because the backend or runner failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl DebugTrace {
    /// Round at which the candidate first passed every test.
    pub fn solved_at(&self) -> Option<u32> {
        self.rounds
            .iter()
            .find(|r| r.passed())
            .map(|r| r.round_index)
    }
}

fn truncate_chars(text: &str, limit: usize) -> &str {
    match text.char_indices().nth(limit) {
        Some((i, _)) => &text[..i],
        None => text,
    }
}

enum Step {
    Candidate(String),
    Failed(String),
}

fn generate(
    backend: &dyn Backend,
    sample: &BenchmarkSample,
    prompt: &str,
    params: &GenerationParams,
) -> Step {
    match backend.complete(prompt, params) {
        Ok(mut out) if !out.is_empty() => {
            let code = extract_code(&out.swap_remove(0));
            Step::Candidate(assemble_candidate(&sample.target, &code))
        }
        Ok(_) => Step::Failed("backend returned no completion".into()),
        Err(e) => Step::Failed(e.to_string()),
    }
}

pub fn run_debug(
    runner: &dyn Runner,
    env: &EnvHandle,
    sample: &BenchmarkSample,
    backend: &dyn Backend,
    cfg: &DebugConfig,
) -> Result<DebugTrace, ExecError> {
    let mut trace = DebugTrace {
        sample_id: sample.sample_id.clone(),
        rounds: Vec::new(),
        terminal_status: TerminalStatus::Exhausted,
        error: None,
    };
    let first_prompt = match sample.prompt(cfg.level, cfg.format) {
        Some(p) => p.text.clone(),
        None => match build_prompt(sample, cfg.level, cfg.format) {
            Ok(p) => p.text,
            Err(e) => {
                trace.error = Some(e.to_string());
                return Ok(trace);
            }
        },
    };
    let mut prompt = first_prompt;
    for round in 0..=cfg.max_rounds {
        let candidate = match generate(backend, sample, &prompt, &cfg.params) {
            Step::Candidate(c) => c,
            Step::Failed(e) => {
                log::warn!("{}: round {round} generation failed: {e}", sample.sample_id);
                trace.error = Some(e);
                return Ok(trace);
            }
        };
        let (record, outcomes) =
            run_candidate(runner, env, sample, round as usize, &candidate, &cfg.run)?;
        trace.rounds.push(DebugRound {
            round_index: round,
            candidate: candidate.clone(),
            per_test_outcome: record.per_test_outcome.clone(),
            dir_value: record.dir_value,
        });
        if record.passed_all {
            trace.terminal_status = TerminalStatus::Solved;
            return Ok(trace);
        }
        let failing = record
            .per_test_outcome
            .iter()
            .position(|o| *o != TestOutcome::Pass)
            .expect("a failed record has a failing test");
        let log = outcomes[failing].log();
        let log = truncate_chars(&log, ERROR_LOG_LIMIT);
        let log = if log.trim().is_empty() {
            "AssertionError"
        } else {
            log
        };
        prompt = match build_debug_prompt_at(
            sample,
            cfg.level,
            &candidate,
            &sample.tests[failing].source_text,
            log,
        ) {
            Ok(p) => p.text,
            Err(e) => {
                trace.error = Some(e.to_string());
                return Ok(trace);
            }
        };
    }
    Ok(trace)
}

/// Fraction of traces solved by each round, from 0 to `max_rounds`.
pub fn solved_rate_by_round(traces: &[DebugTrace], max_rounds: u32) -> Vec<f64> {
    (0..=max_rounds)
        .map(|r| {
            if traces.is_empty() {
                return 0.0;
            }
            let solved = traces
                .iter()
                .filter(|t| t.solved_at().is_some_and(|s| s <= r))
                .count();
            solved as f64 / traces.len() as f64
        })
        .collect()
}
