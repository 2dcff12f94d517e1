//! Executable environments, isolated test runs and line coverage.
//!
//! Actual execution is delegated to a [`Runner`]. [`ShimRunner`] talks to
//! the interpreter-side helper over its command-line contract;
//! [`FakeRunner`] answers in-process for tests.

mod env;
mod fake;
mod run;
mod shim;
mod splice;
pub mod stdlib;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use env::{provision_env, requirements, EnvHandle, InstallMode, ProvisionOptions};
pub use fake::{FakeCall, FakeRunner};
pub use run::{
    body_lines, capture_call, measure_coverage, outcome_to_test, run_candidate, run_test,
    test_file_source, CapturedValue, RunSettings, BLOB_DIR,
};
pub use shim::ShimRunner;
pub use splice::{assemble_candidate, splice_candidate, SpliceError};

/// Default per-run limit.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("runner failed: {0}")]
    Runner(String),
    #[error("runner output is not valid: {0}")]
    Protocol(String),
    #[error("importing `{module}` failed: {detail}")]
    Import { module: String, detail: String },
    #[error("environment is not ready")]
    NotReady,
}

impl ExecError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Pass,
    AssertionError,
    OtherError,
    Timeout,
}

/// Result of one execution, matching the runner's outcome JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    #[serde(default)]
    pub exception_type: Option<String>,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    #[serde(default)]
    pub wall_time: f64,
}

impl ExecutionOutcome {
    pub fn pass() -> Self {
        Self::with_status(ExecStatus::Pass, None)
    }

    pub fn assertion_error() -> Self {
        Self::with_status(ExecStatus::AssertionError, Some("AssertionError"))
    }

    pub fn error(exception_type: &str) -> Self {
        Self::with_status(ExecStatus::OtherError, Some(exception_type))
    }

    pub fn timeout() -> Self {
        Self::with_status(ExecStatus::Timeout, None)
    }

    fn with_status(status: ExecStatus, exception_type: Option<&str>) -> Self {
        Self {
            status,
            exception_type: exception_type.map(str::to_owned),
            stdout: String::new(),
            stderr: String::new(),
            wall_time: 0.0,
        }
    }

    /// `other_error` always names its exception.
    pub fn check(&self) -> Result<(), ExecError> {
        if self.status == ExecStatus::OtherError && self.exception_type.is_none() {
            return Err(ExecError::Protocol(
                "other_error without exception_type".into(),
            ));
        }
        Ok(())
    }

    /// The parts compared when screening for flaky tests.
    pub fn fingerprint(&self) -> (ExecStatus, Option<&str>, &str) {
        (self.status, self.exception_type.as_deref(), &self.stdout)
    }

    /// Captured output for error logs.
    pub fn log(&self) -> String {
        let mut log = String::new();
        if let Some(t) = &self.exception_type {
            log.push_str(t);
            log.push('\n');
        }
        for part in [&self.stdout, &self.stderr] {
            if !part.trim().is_empty() {
                log.push_str(part.trim_end());
                log.push('\n');
            }
        }
        if self.status == ExecStatus::Timeout {
            log.push_str("Timeout\n");
        }
        log
    }
}

/// Coverage JSON written by the runner.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub file: String,
    pub executable_lines: Vec<u32>,
    pub covered_lines: Vec<u32>,
}

/// One invocation of `run-test`. Paths are relative to `workdir`.
#[derive(Debug, Clone)]
pub struct TestJob {
    pub workdir: PathBuf,
    pub module: PathBuf,
    pub test_file: PathBuf,
    pub repeat: u32,
    pub timeout: Duration,
    pub coverage_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestRun {
    pub outcomes: Vec<ExecutionOutcome>,
    pub coverage: Option<CoverageReport>,
}

/// One invocation of `capture-call`.
#[derive(Debug, Clone)]
pub struct CaptureJob {
    pub workdir: PathBuf,
    pub module: PathBuf,
    pub call: String,
    pub blob_out: PathBuf,
    pub timeout: Duration,
}

/// Value of a call evaluated against the gold solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capture {
    #[serde(flatten)]
    pub outcome: ExecutionOutcome,
    /// Source literal for simple values.
    #[serde(default)]
    pub literal: Option<String>,
    /// Serialized value, present when the call returned.
    #[serde(default)]
    pub value_blob: Option<PathBuf>,
}

pub trait Runner: Send + Sync {
    fn run_tests(&self, job: &TestJob) -> Result<TestRun, ExecError>;
    fn capture_call(&self, job: &CaptureJob) -> Result<Capture, ExecError>;
}

impl<R: Runner + ?Sized> Runner for &R {
    fn run_tests(&self, job: &TestJob) -> Result<TestRun, ExecError> {
        (**self).run_tests(job)
    }

    fn capture_call(&self, job: &CaptureJob) -> Result<Capture, ExecError> {
        (**self).capture_call(job)
    }
}

impl<R: Runner + ?Sized> Runner for Box<R> {
    fn run_tests(&self, job: &TestJob) -> Result<TestRun, ExecError> {
        (**self).run_tests(job)
    }

    fn capture_call(&self, job: &CaptureJob) -> Result<Capture, ExecError> {
        (**self).capture_call(job)
    }
}

/// Dotted import name of a repository-relative `.py` path.
pub fn import_name(module: &Path) -> String {
    let mut parts: Vec<String> = module
        .with_extension("")
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    if parts.last().is_some_and(|p| p == "__init__") {
        parts.pop();
    }
    parts.join(".")
}
