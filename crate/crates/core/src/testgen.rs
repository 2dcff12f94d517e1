//! Test generation, correctness control, coverage enhancement and the
//! coverage gate.

use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::Node;

use crate::backend::{Backend, BackendError, GenerationParams};
use crate::dataset::blob_key;
use crate::exec::{
    capture_call, measure_coverage, run_test, EnvHandle, ExecError, ExecStatus, ExecutionOutcome,
    RunSettings, Runner, BLOB_DIR,
};
use crate::model::{
    BenchmarkSample, CoverageStats, InvariantError, TestOrigin, TestRecord, TestStatus,
};
use crate::prompt::templates;
use crate::python::{named_children, node_text, parse_tree};
use crate::text::{dedent, indent};

/// Raw assertions kept from one generation pass.
pub const MAX_INITIAL_TESTS: usize = 20;
pub const DEFAULT_MIN_COVERAGE: f64 = 40.0;
pub const DEFAULT_REPEATS: u32 = 10;

#[derive(Debug, Error)]
pub enum TestGenError {
    #[error("backend failed after {attempts} attempts: {source}")]
    Backend {
        attempts: u32,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

#[derive(Debug, Clone)]
pub struct TestGenConfig {
    pub params: GenerationParams,
    pub repeats: u32,
    pub min_coverage: f64,
    pub backend_attempts: u32,
    pub run: RunSettings,
}

impl Default for TestGenConfig {
    fn default() -> Self {
        Self {
            params: GenerationParams::test_generation(),
            repeats: DEFAULT_REPEATS,
            min_coverage: DEFAULT_MIN_COVERAGE,
            backend_attempts: 3,
            run: RunSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initial,
    Enhancement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestBatch {
    pub sample_id: String,
    pub phase: Phase,
    pub tests: Vec<TestRecord>,
    /// Measured after the batch was validated.
    pub coverage: Option<CoverageStats>,
}

fn complete(
    backend: &dyn Backend,
    prompt: &str,
    cfg: &TestGenConfig,
) -> Result<Vec<String>, TestGenError> {
    let attempts = cfg.backend_attempts.max(1);
    let mut last = None;
    for attempt in 1..=attempts {
        match backend.complete(prompt, &cfg.params) {
            Ok(out) => return Ok(out),
            Err(e @ BackendError::Params(_)) => {
                return Err(TestGenError::Backend {
                    attempts: attempt,
                    source: e,
                })
            }
            Err(e) => {
                log::warn!("test generation attempt {attempt} failed: {e}");
                last = Some(e);
            }
        }
    }
    Err(TestGenError::Backend {
        attempts,
        source: last.expect("at least one attempt"),
    })
}

fn normalized(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Top-level `assert` statements of `text`, in order.
pub fn split_assertions(text: &str) -> Vec<String> {
    let tree = parse_tree(text);
    named_children(tree.root_node())
        .into_iter()
        .filter(|s| s.kind() == "assert_statement" || node_text(*s, text).starts_with("assert"))
        .map(|s| node_text(s, text).trim_end().to_owned())
        .collect()
}

fn dedup(texts: impl IntoIterator<Item = String>, seen: &mut HashSet<String>) -> Vec<String> {
    texts
        .into_iter()
        .filter(|t| seen.insert(normalized(t)))
        .collect()
}

/// Prompts for assertions about the gold solution and keeps the first
/// twenty distinct ones of each completion as raw tests.
pub fn generate_initial_tests(
    sample: &BenchmarkSample,
    backend: &dyn Backend,
    cfg: &TestGenConfig,
) -> Result<TestBatch, TestGenError> {
    let prompt = templates::render(
        templates::TEST_INITIAL,
        &[
            ("function_under_test", sample.solution()),
            ("function_name", sample.target.name()),
        ],
    );
    let mut seen = HashSet::new();
    let mut tests = Vec::new();
    for completion in complete(backend, &prompt, cfg)? {
        let text = format!("assert{completion}");
        let mut asserts = split_assertions(&text);
        asserts.truncate(MAX_INITIAL_TESTS);
        for a in dedup(asserts, &mut seen) {
            let id = format!("{}-{}", TestOrigin::Initial.id_prefix(), tests.len());
            tests.push(TestRecord::raw(id, a, TestOrigin::Initial));
        }
    }
    if tests.is_empty() {
        log::warn!("{}: no assertions in the test completion", sample.sample_id);
    }
    Ok(TestBatch {
        sample_id: sample.sample_id.clone(),
        phase: Phase::Initial,
        tests,
        coverage: None,
    })
}

fn calls_named(node: Node, src: &str, name: &str) -> bool {
    if node.kind() == "call" {
        let callee = node.child_by_field_name("function");
        let hit = callee.is_some_and(|f| match f.kind() {
            "identifier" => node_text(f, src) == name,
            "attribute" => f
                .child_by_field_name("attribute")
                .is_some_and(|a| node_text(a, src) == name),
            _ => false,
        });
        if hit {
            return true;
        }
    }
    named_children(node)
        .into_iter()
        .any(|c| calls_named(c, src, name))
}

/// Keeps tests that parse and call `target_name`.
pub fn syntax_filter(tests: &[TestRecord], target_name: &str) -> Vec<TestRecord> {
    tests
        .iter()
        .filter(|t| {
            let tree = parse_tree(&t.source_text);
            let root = tree.root_node();
            !root.has_error() && calls_named(root, &t.source_text, target_name)
        })
        .map(|t| t.clone().with_status(TestStatus::SyntaxOk))
        .collect()
}

fn diverges(outcomes: &[ExecutionOutcome]) -> bool {
    outcomes
        .windows(2)
        .any(|w| w[0].fingerprint() != w[1].fingerprint())
}

/// Status from repeated runs of one test; `None` means an assertion
/// failure that the fixer may repair.
fn classify(outcomes: &[ExecutionOutcome]) -> Option<TestStatus> {
    if diverges(outcomes) {
        return Some(TestStatus::RejectedFlaky);
    }
    match outcomes.first().map(|o| o.status) {
        Some(ExecStatus::Pass) => Some(TestStatus::ExecOk),
        Some(ExecStatus::AssertionError) => None,
        _ => Some(TestStatus::Rejected),
    }
}

/// Runs each test repeatedly against the gold solution. Passing tests
/// become `exec_ok`, assertion failures go through [`fix_assertion`],
/// anything else or any divergence between runs is rejected. Every test is
/// returned with its new status.
pub fn execution_filter(
    runner: &dyn Runner,
    env: &EnvHandle,
    sample: &BenchmarkSample,
    tests: &[TestRecord],
    cfg: &TestGenConfig,
) -> Result<Vec<TestRecord>, TestGenError> {
    let mut out = Vec::with_capacity(tests.len());
    for test in tests {
        let outcomes = run_test(runner, env, sample, test, cfg.repeats, &cfg.run)?;
        let record = match classify(&outcomes) {
            Some(status) => test.clone().with_status(status),
            None => fix_assertion(runner, env, sample, test, cfg)?,
        };
        log::debug!(
            "{} {} -> {}",
            sample.sample_id,
            record.test_id,
            record.status
        );
        out.push(record);
    }
    Ok(out)
}

/// The call side and the operator of `assert <call> == <expected>`.
fn asserted_call<'t>(stmt: Node<'t>, src: &str, target_name: &str) -> Option<Node<'t>> {
    if stmt.kind() != "assert_statement" || stmt.named_child_count() != 1 {
        return None;
    }
    let cmp = stmt.named_child(0)?;
    if cmp.kind() != "comparison_operator" || cmp.named_child_count() != 2 {
        return None;
    }
    let op = cmp
        .child_by_field_name("operators")
        .or_else(|| cmp.child(1))?;
    if !matches!(node_text(op, src), "==" | "is") {
        return None;
    }
    let (left, right) = (cmp.named_child(0)?, cmp.named_child(1)?);
    match (
        calls_named(left, src, target_name),
        calls_named(right, src, target_name),
    ) {
        (true, false) => Some(left),
        (false, true) => Some(right),
        _ => None,
    }
}

/// Re-derives the expected value of a failing assertion from the gold
/// solution. Simple values are written back as literals, anything else is
/// pickled to a blob the rewritten assertion loads. The fixed test must
/// then pass every repeated run.
pub fn fix_assertion(
    runner: &dyn Runner,
    env: &EnvHandle,
    sample: &BenchmarkSample,
    test: &TestRecord,
    cfg: &TestGenConfig,
) -> Result<TestRecord, TestGenError> {
    let rejected = |why: &str| {
        log::debug!("{}: cannot fix {}: {why}", sample.sample_id, test.test_id);
        Ok(test.clone().with_status(TestStatus::Rejected))
    };
    let src = test.source_text.trim();
    let tree = parse_tree(src);
    let stmts = named_children(tree.root_node());
    let [stmt] = stmts.as_slice() else {
        return rejected("not a single assertion");
    };
    let Some(call) = asserted_call(*stmt, src, sample.target.name()) else {
        return rejected("not an equality on the target's result");
    };
    let call_text = node_text(call, src);
    let value = capture_call(runner, env, sample, call_text, &cfg.run)?;
    if value.outcome.status != ExecStatus::Pass {
        return rejected("the call raises under the gold solution");
    }
    let mut fixed = test.clone();
    fixed.original_text = Some(test.source_text.clone());
    fixed.source_text = match (&value.literal, &value.blob) {
        (Some(lit), _) => format!("assert {call_text} == {lit}"),
        (None, Some(blob)) => {
            let Some(root) = &cfg.run.blob_root else {
                return rejected("value needs a blob but no blob directory is configured");
            };
            let key = blob_key(&sample.sample_id, &test.test_id);
            let path = root.join(&key);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)
                    .map_err(|e| ExecError::Runner(format!("creating blob dir: {e}")))?;
            }
            fs::write(&path, blob).map_err(|e| ExecError::Runner(format!("writing blob: {e}")))?;
            fixed.expected_blob = Some(key.clone());
            let rel = PathBuf::from(BLOB_DIR).join(&key);
            format!(
                "assert {call_text} == __import__('pickle').load(open({:?}, 'rb'))",
                rel.to_string_lossy()
            )
        }
        (None, None) => return rejected("value could not be serialized"),
    };
    let outcomes = run_test(runner, env, sample, &fixed, cfg.repeats, &cfg.run)?;
    let status = match classify(&outcomes) {
        Some(TestStatus::ExecOk) => TestStatus::Fixed,
        Some(TestStatus::RejectedFlaky) => TestStatus::RejectedFlaky,
        _ => TestStatus::Rejected,
    };
    if status != TestStatus::Fixed {
        if let Some(key) = &fixed.expected_blob {
            if let Some(root) = &cfg.run.blob_root {
                let _ = fs::remove_file(root.join(key));
            }
        }
        fixed.expected_blob = None;
    }
    Ok(fixed.with_status(status))
}

/// Test functions as shown to the model in enhancement prompts.
fn render_test_functions(tests: &[TestRecord]) -> String {
    tests
        .iter()
        .enumerate()
        .map(|(i, t)| {
            format!(
                "def test_{i}():\n{}",
                indent(t.source_text.trim_end(), "    ")
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Tests proposed in an enhancement completion: bodies of top-level
/// `test_*` functions and bare top-level assertions.
pub fn split_test_functions(text: &str) -> Vec<String> {
    let tree = parse_tree(text);
    let mut out = Vec::new();
    for stmt in named_children(tree.root_node()) {
        match stmt.kind() {
            "function_definition" => {
                let is_test = stmt
                    .child_by_field_name("name")
                    .is_some_and(|n| node_text(n, text).starts_with("test"));
                if let (true, Some(body)) = (is_test, stmt.child_by_field_name("body")) {
                    // Body text from the start of its line keeps indentation consistent.
                    let line_start = text[..body.start_byte()].rfind('\n').map_or(0, |i| i + 1);
                    out.push(dedent(&text[line_start..body.end_byte()]).trim().to_owned());
                }
            }
            "assert_statement" => out.push(node_text(stmt, text).trim_end().to_owned()),
            _ => {}
        }
    }
    out
}

/// Issues the three enhancement prompts, validating what each yields
/// before the next one sees the grown test set. Returns the new validated
/// tests with coverage over the whole set.
pub fn enhance_coverage(
    runner: &dyn Runner,
    env: &EnvHandle,
    sample: &BenchmarkSample,
    existing: &[TestRecord],
    backend: &dyn Backend,
    cfg: &TestGenConfig,
) -> Result<TestBatch, TestGenError> {
    let origins = [
        TestOrigin::EnhancementPrompt1,
        TestOrigin::EnhancementPrompt2,
        TestOrigin::EnhancementPrompt3,
    ];
    let mut all: Vec<TestRecord> = existing.to_vec();
    let mut seen: HashSet<String> = all.iter().map(|t| normalized(&t.source_text)).collect();
    let mut added = Vec::new();
    for (template, origin) in templates::ENHANCE.iter().zip(origins) {
        let prompt = templates::render(
            template,
            &[
                ("existing_test_functions", &render_test_functions(&all)),
                ("function_under_test", sample.solution()),
            ],
        );
        let mut raw = Vec::new();
        for completion in complete(backend, &prompt, cfg)? {
            for text in dedup(split_test_functions(&completion), &mut seen) {
                let id = format!("{}-{}", origin.id_prefix(), raw.len());
                raw.push(TestRecord::raw(id, text, origin));
            }
        }
        let candidates = syntax_filter(&raw, sample.target.name());
        let validated: Vec<TestRecord> = execution_filter(runner, env, sample, &candidates, cfg)?
            .into_iter()
            .filter(|t| t.status.is_validated())
            .collect();
        all.extend(validated.iter().cloned());
        added.extend(validated);
    }
    let refs: Vec<&TestRecord> = all.iter().collect();
    let coverage = measure_coverage(runner, env, sample, &refs, &cfg.run)?;
    Ok(TestBatch {
        sample_id: sample.sample_id.clone(),
        phase: Phase::Enhancement,
        tests: added,
        coverage: Some(coverage),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecision {
    Keep,
    Drop,
}

/// Drops samples whose validated tests cover less than `threshold` percent
/// of the target's lines.
pub fn gate_sample(sample: &BenchmarkSample, threshold: f64) -> GateDecision {
    gate_coverage(sample.coverage.line_coverage_pct, threshold)
}

pub fn gate_coverage(line_coverage_pct: f64, threshold: f64) -> GateDecision {
    if line_coverage_pct < threshold {
        GateDecision::Drop
    } else {
        GateDecision::Keep
    }
}

/// Everything that happened to one sample's tests.
#[derive(Debug, Clone)]
pub struct HardenReport {
    pub sample: BenchmarkSample,
    pub decision: GateDecision,
    pub initial_coverage: CoverageStats,
    /// Statuses of every test considered, rejected ones included.
    pub considered: Vec<TestRecord>,
}

/// Full pipeline for one sample: initial tests, correctness control,
/// coverage enhancement and the gate.
pub fn harden_sample(
    runner: &dyn Runner,
    env: &EnvHandle,
    sample: &BenchmarkSample,
    backend: &dyn Backend,
    cfg: &TestGenConfig,
) -> Result<HardenReport, TestGenError> {
    let batch = generate_initial_tests(sample, backend, cfg)?;
    let syntax_ok = syntax_filter(&batch.tests, sample.target.name());
    let kept: HashSet<&str> = syntax_ok.iter().map(|t| t.test_id.as_str()).collect();
    let mut considered: Vec<TestRecord> = batch
        .tests
        .iter()
        .filter(|t| !kept.contains(t.test_id.as_str()))
        .map(|t| t.clone().with_status(TestStatus::Rejected))
        .collect();
    let executed = execution_filter(runner, env, sample, &syntax_ok, cfg)?;
    considered.extend(executed.iter().cloned());
    let validated: Vec<TestRecord> = executed
        .into_iter()
        .filter(|t| t.status.is_validated())
        .collect();
    let refs: Vec<&TestRecord> = validated.iter().collect();
    let initial_coverage = measure_coverage(runner, env, sample, &refs, &cfg.run)?;
    let enhanced = enhance_coverage(runner, env, sample, &validated, backend, cfg)?;
    considered.extend(enhanced.tests.iter().cloned());
    let mut tests = validated;
    tests.extend(enhanced.tests);
    let coverage = enhanced
        .coverage
        .unwrap_or_else(|| initial_coverage.clone());
    let sample = sample.with_tests(tests, coverage)?;
    Ok(HardenReport {
        decision: gate_sample(&sample, cfg.min_coverage),
        sample,
        initial_coverage,
        considered,
    })
}
