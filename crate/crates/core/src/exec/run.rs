use std::collections::BTreeSet;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::Duration;

use tempfile::TempDir;

use super::{
    import_name, splice_candidate, Capture, CaptureJob, EnvHandle, ExecError, ExecStatus,
    ExecutionOutcome, Runner, TestJob, TestRun, DEFAULT_TIMEOUT,
};
use crate::dataset::sanitize;
use crate::metrics::dir_of_text;
use crate::model::{
    BenchmarkSample, CoverageStats, FunctionRecord, GenerationRecord, TestOutcome, TestRecord,
};
use crate::text::indent;

/// Directory, relative to the run directory, where blobs are placed.
pub const BLOB_DIR: &str = ".depbench_blobs";
const TEST_FILE: &str = "test_depbench.py";
const COVERAGE_FILE: &str = ".depbench_coverage.json";

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub timeout: Duration,
    /// Directory that test `expected_blob` keys are relative to.
    pub blob_root: Option<PathBuf>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TIMEOUT,
            blob_root: None,
        }
    }
}

/// A test module holding one test function per record.
pub fn test_file_source(sample: &BenchmarkSample, tests: &[&TestRecord]) -> String {
    let module = import_name(&sample.module_path);
    let top = sample.target.class_name().unwrap_or(sample.target.name());
    let mut out = format!("from {module} import *\nfrom {module} import {top}\n");
    for test in tests {
        out.push_str(&format!(
            "\n\ndef test_{}():\n{}\n",
            sanitize(&test.test_id).replace(['.', '-'], "_"),
            indent(test.source_text.trim_end(), "    ")
        ));
    }
    out
}

pub fn outcome_to_test(outcome: &ExecutionOutcome) -> TestOutcome {
    match outcome.status {
        ExecStatus::Pass => TestOutcome::Pass,
        ExecStatus::AssertionError => TestOutcome::Fail,
        ExecStatus::OtherError | ExecStatus::Timeout => TestOutcome::Error,
    }
}

/// Lines of the target that follow its docstring, 1-based.
pub fn body_lines(target: &FunctionRecord) -> RangeInclusive<u32> {
    let prompt_lines = target.prompt.lines().count() as u32;
    (target.span.start_line + prompt_lines)..=target.span.end_line
}

struct Prepared {
    dir: TempDir,
    job: TestJob,
}

#[allow(clippy::too_many_arguments)]
fn prepare(
    env: &EnvHandle,
    sample: &BenchmarkSample,
    module_source: Option<&str>,
    test_source: &str,
    tests: &[&TestRecord],
    repeat: u32,
    coverage: bool,
    settings: &RunSettings,
) -> Result<Prepared, ExecError> {
    if !env.is_ready() {
        return Err(ExecError::NotReady);
    }
    let dir = env.scratch()?;
    let root = dir.path();
    if let Some(src) = module_source {
        let path = root.join(&sample.module_path);
        fs::write(&path, src)
            .map_err(|e| ExecError::io(format!("writing {}", path.display()), e))?;
    }
    fs::write(root.join(TEST_FILE), test_source)
        .map_err(|e| ExecError::io("writing test file", e))?;
    for key in tests.iter().filter_map(|t| t.expected_blob.as_deref()) {
        let Some(blob_root) = &settings.blob_root else {
            return Err(ExecError::Runner(format!(
                "test needs blob {key} but no blob directory is set"
            )));
        };
        let dest = root.join(BLOB_DIR).join(key);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent).map_err(|e| ExecError::io("creating blob directory", e))?;
        }
        fs::copy(blob_root.join(key), &dest)
            .map_err(|e| ExecError::io(format!("copying blob {key}"), e))?;
    }
    let job = TestJob {
        workdir: root.to_owned(),
        module: sample.module_path.clone(),
        test_file: PathBuf::from(TEST_FILE),
        repeat,
        timeout: settings.timeout,
        coverage_out: coverage.then(|| PathBuf::from(COVERAGE_FILE)),
    };
    Ok(Prepared { dir, job })
}

fn checked(run: TestRun, repeat: u32) -> Result<TestRun, ExecError> {
    if run.outcomes.len() != repeat as usize {
        return Err(ExecError::Protocol(format!(
            "asked for {repeat} runs, got {} outcomes",
            run.outcomes.len()
        )));
    }
    for outcome in &run.outcomes {
        outcome.check()?;
    }
    Ok(run)
}

/// Runs one test `repeats` times against the gold solution.
pub fn run_test(
    runner: &dyn Runner,
    env: &EnvHandle,
    sample: &BenchmarkSample,
    test: &TestRecord,
    repeats: u32,
    settings: &RunSettings,
) -> Result<Vec<ExecutionOutcome>, ExecError> {
    let repeats = repeats.max(1);
    let src = test_file_source(sample, &[test]);
    let p = prepare(env, sample, None, &src, &[test], repeats, false, settings)?;
    let run = checked(runner.run_tests(&p.job)?, repeats)?;
    drop(p.dir);
    Ok(run.outcomes)
}

/// Runs every test once against `candidate` spliced in place of the gold
/// solution. The environment itself is never modified.
pub fn run_candidate(
    runner: &dyn Runner,
    env: &EnvHandle,
    sample: &BenchmarkSample,
    candidate_index: usize,
    candidate: &str,
    settings: &RunSettings,
) -> Result<(GenerationRecord, Vec<ExecutionOutcome>), ExecError> {
    let dir_value = dir_of_text(candidate, &sample.dependency_names());
    let original = fs::read_to_string(env.root().join(&sample.module_path))
        .map_err(|e| ExecError::io(format!("reading {}", sample.module_path.display()), e))?;
    let spliced = match splice_candidate(&original, &sample.target, candidate) {
        Ok(s) => s,
        Err(e) => {
            let outcome = ExecutionOutcome {
                stderr: e.to_string(),
                ..ExecutionOutcome::error("SyntaxError")
            };
            let outcomes = vec![outcome; sample.tests.len()];
            let per_test = outcomes.iter().map(outcome_to_test).collect();
            let record = GenerationRecord::new(
                sample.sample_id.clone(),
                candidate_index,
                candidate.to_owned(),
                per_test,
                dir_value,
            );
            return Ok((record, outcomes));
        }
    };
    let mut outcomes = Vec::with_capacity(sample.tests.len());
    for test in &sample.tests {
        let src = test_file_source(sample, &[test]);
        let p = prepare(
            env,
            sample,
            Some(&spliced),
            &src,
            &[test],
            1,
            false,
            settings,
        )?;
        let mut run = checked(runner.run_tests(&p.job)?, 1)?;
        outcomes.push(run.outcomes.remove(0));
    }
    let per_test = outcomes.iter().map(outcome_to_test).collect();
    let record = GenerationRecord::new(
        sample.sample_id.clone(),
        candidate_index,
        candidate.to_owned(),
        per_test,
        dir_value,
    );
    Ok((record, outcomes))
}

/// Line coverage of the target's body by `tests`, run together once.
pub fn measure_coverage(
    runner: &dyn Runner,
    env: &EnvHandle,
    sample: &BenchmarkSample,
    tests: &[&TestRecord],
    settings: &RunSettings,
) -> Result<CoverageStats, ExecError> {
    let src = test_file_source(sample, tests);
    let p = prepare(env, sample, None, &src, tests, 1, true, settings)?;
    let run = checked(runner.run_tests(&p.job)?, 1)?;
    let report = run
        .coverage
        .ok_or_else(|| ExecError::Protocol("no coverage report produced".into()))?;
    let lines = body_lines(&sample.target);
    let executable: BTreeSet<u32> = report
        .executable_lines
        .iter()
        .copied()
        .filter(|l| lines.contains(l))
        .collect();
    let covered: BTreeSet<u32> = report.covered_lines.iter().copied().collect();
    Ok(CoverageStats::from_lines(&executable, &covered))
}

/// A call's value under the gold solution, with the blob read back.
#[derive(Debug, Clone, PartialEq)]
pub struct CapturedValue {
    pub outcome: ExecutionOutcome,
    pub literal: Option<String>,
    pub blob: Option<Vec<u8>>,
}

pub fn capture_call(
    runner: &dyn Runner,
    env: &EnvHandle,
    sample: &BenchmarkSample,
    call: &str,
    settings: &RunSettings,
) -> Result<CapturedValue, ExecError> {
    if !env.is_ready() {
        return Err(ExecError::NotReady);
    }
    let dir = env.scratch()?;
    let job = CaptureJob {
        workdir: dir.path().to_owned(),
        module: sample.module_path.clone(),
        call: call.to_owned(),
        blob_out: PathBuf::from(".depbench_value.pkl"),
        timeout: settings.timeout,
    };
    let Capture {
        outcome,
        literal,
        value_blob,
    } = runner.capture_call(&job)?;
    outcome.check()?;
    let blob = match (&outcome.status, value_blob) {
        (ExecStatus::Pass, Some(path)) => {
            let path = dir.path().join(path);
            Some(
                fs::read(&path)
                    .map_err(|e| ExecError::io(format!("reading {}", path.display()), e))?,
            )
        }
        _ => None,
    };
    Ok(CapturedValue {
        outcome,
        literal,
        blob,
    })
}

impl EnvHandle {
    /// Imports each module once and marks the environment ready if all
    /// succeed.
    pub fn verify(
        &self,
        runner: &dyn Runner,
        modules: &[&Path],
        timeout: Duration,
    ) -> Result<(), ExecError> {
        for module in modules {
            let name = import_name(module);
            let dir = self.scratch()?;
            let src = format!("import {name}\n\n\ndef test_import():\n    pass\n");
            fs::write(dir.path().join(TEST_FILE), src)
                .map_err(|e| ExecError::io("writing test file", e))?;
            let job = TestJob {
                workdir: dir.path().to_owned(),
                module: module.to_path_buf(),
                test_file: PathBuf::from(TEST_FILE),
                repeat: 1,
                timeout,
                coverage_out: None,
            };
            let run = checked(runner.run_tests(&job)?, 1)?;
            let outcome = &run.outcomes[0];
            if outcome.status != ExecStatus::Pass {
                return Err(ExecError::Import {
                    module: name,
                    detail: outcome.log().trim().to_owned(),
                });
            }
        }
        self.mark_ready();
        Ok(())
    }
}
