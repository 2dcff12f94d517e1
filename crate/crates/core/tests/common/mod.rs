#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use depbench::exec::{provision_env, EnvHandle, ProvisionOptions, Runner, ShimRunner};
use depbench::model::BenchmarkSample;
use depbench::sample::{extract_samples, SampleOptions};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn python_available() -> bool {
    Command::new("python3")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

/// Skips the calling test when no interpreter is installed.
#[macro_export]
macro_rules! require_python {
    () => {
        if !$crate::common::python_available() {
            eprintln!("python3 not found, skipping");
            return;
        }
    };
}

pub fn shim() -> ShimRunner {
    ShimRunner::python_script(Path::new("python3"), &fixture("shim/mini_shim.py"))
}

pub fn samples(repo: &str) -> Vec<BenchmarkSample> {
    extract_samples(&fixture(repo), repo, &SampleOptions::default())
        .unwrap()
        .samples
}

pub fn sample(repo: &str, name: &str) -> BenchmarkSample {
    samples(repo)
        .into_iter()
        .find(|s| s.target.qualified_name == name)
        .unwrap_or_else(|| panic!("no sample for {name}"))
}

/// A verified environment for `repo`.
pub fn ready_env(repo: &str, runner: &dyn Runner) -> EnvHandle {
    let env = provision_env(&fixture(repo), &ProvisionOptions::default()).unwrap();
    let modules: Vec<PathBuf> = samples(repo)
        .iter()
        .map(|s| s.module_path.clone())
        .collect();
    let refs: Vec<&Path> = modules.iter().map(PathBuf::as_path).collect();
    env.verify(runner, &refs, Duration::from_secs(30)).unwrap();
    env
}

/// Ground truth behind one synthetic sample.
#[derive(Debug, Clone)]
pub struct Truth {
    pub sample_id: String,
    pub correct: usize,
    /// (hits, |D_s|) per candidate, absent when D_s is empty.
    pub dirs: Vec<Option<(usize, usize)>>,
    pub empty: usize,
}

pub const SYNTH_N: usize = 10;

/// A 20-sample corpus of ten candidates each, with candidate texts that
/// invoke a known number of the sample's dependencies.
pub fn synthetic_corpus() -> (
    std::collections::BTreeMap<String, Vec<depbench::model::GenerationRecord>>,
    Vec<Truth>,
) {
    use depbench::metrics::dir_of_text;
    use depbench::model::{GenerationRecord, TestOutcome};

    let mut by_sample = std::collections::BTreeMap::new();
    let mut truths = Vec::new();
    for i in 0..20usize {
        let sample_id = format!("synth::{i:02}");
        let deps: std::collections::BTreeSet<String> =
            (0..i % 4).map(|d| format!("dep_{d}")).collect();
        let correct = (3 * i) % 11;
        let mut truth = Truth {
            sample_id: sample_id.clone(),
            correct,
            dirs: Vec::new(),
            empty: 0,
        };
        let mut records = Vec::new();
        for j in 0..SYNTH_N {
            let hits = if deps.is_empty() {
                0
            } else {
                (i + j) % (deps.len() + 1)
            };
            let text = if (i + j) % 7 == 0 {
                truth.empty += 1;
                "def f(x):\n    \"\"\"Doc.\"\"\"\n    pass\n".to_owned()
            } else {
                let calls: Vec<String> = (0..hits).map(|d| format!("dep_{d}(x)")).collect();
                let expr = if calls.is_empty() {
                    "x".to_owned()
                } else {
                    calls.join(" + ")
                };
                format!("def f(x):\n    \"\"\"Doc.\"\"\"\n    return {expr}\n")
            };
            let hits = if text.contains("pass") { 0 } else { hits };
            truth
                .dirs
                .push((!deps.is_empty()).then_some((hits, deps.len())));
            let outcome = if j < correct {
                TestOutcome::Pass
            } else {
                TestOutcome::Fail
            };
            let dir_value = dir_of_text(&text, &deps);
            records.push(GenerationRecord::new(
                sample_id.clone(),
                j,
                text,
                vec![outcome; 2],
                dir_value,
            ));
        }
        by_sample.insert(sample_id, records);
        truths.push(truth);
    }
    (by_sample, truths)
}

pub const BROKEN: &str = "    return 'BROKEN'\n";

/// Fails any test run against a module holding a broken candidate.
pub fn marker_runner() -> depbench::exec::FakeRunner {
    use depbench::exec::ExecutionOutcome;
    depbench::exec::FakeRunner::new(|call| {
        if call.module_source.contains("'BROKEN'") {
            ExecutionOutcome {
                stderr: "Traceback (most recent call last):\nAssertionError: wrong value\n".into(),
                ..ExecutionOutcome::assertion_error()
            }
        } else {
            ExecutionOutcome::pass()
        }
    })
}

/// `sample` with one validated test calling its target.
pub fn with_one_test(sample: &BenchmarkSample) -> BenchmarkSample {
    use depbench::model::{TestOrigin, TestRecord, TestStatus};
    let call = format!("assert {}() is not None", sample.target.name());
    let test = TestRecord::raw("init-0", call, TestOrigin::Initial).with_status(TestStatus::ExecOk);
    sample
        .with_tests(vec![test], sample.coverage.clone())
        .unwrap()
}

/// Backend answers for a sample first fixed at `solved_at`, or never.
pub fn repair_script(
    sample: &BenchmarkSample,
    solved_at: Option<u32>,
    max_rounds: u32,
) -> Vec<String> {
    (0..=max_rounds)
        .map(|r| {
            if Some(r) == solved_at {
                sample.solution().to_owned()
            } else {
                BROKEN.to_owned()
            }
        })
        .collect()
}
