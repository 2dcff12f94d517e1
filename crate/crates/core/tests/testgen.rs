mod common;

use depbench::backend::ScriptedBackend;
use depbench::exec::{ExecutionOutcome, FakeRunner, RunSettings};
use depbench::model::{CoverageStats, TestOrigin, TestRecord, TestStatus};
use depbench::testgen::{
    enhance_coverage, execution_filter, gate_coverage, gate_sample, generate_initial_tests,
    harden_sample, split_assertions, split_test_functions, syntax_filter, GateDecision,
    TestGenConfig,
};

use common::{ready_env, sample, shim};

fn raw(id: &str, src: &str) -> TestRecord {
    TestRecord::raw(id, src, TestOrigin::Initial)
}

fn config(blobs: &std::path::Path) -> TestGenConfig {
    TestGenConfig {
        run: RunSettings {
            blob_root: Some(blobs.to_owned()),
            ..RunSettings::default()
        },
        ..TestGenConfig::default()
    }
}

#[test]
fn syntax_filter_examples() {
    let tests = [
        raw("a", "assert 1"),
        raw("b", "assert len([1]) == 1"),
        raw("c", "assert double(2) == (4"),
        raw("d", "assert double(2) == 4"),
        raw("e", "assert calc.core.double(2) == 4"),
        raw("f", "assert doubled(2) == 4"),
    ];
    let kept = syntax_filter(&tests, "double");
    let ids: Vec<&str> = kept.iter().map(|t| t.test_id.as_str()).collect();
    assert_eq!(ids, ["d", "e"]);
    assert!(kept.iter().all(|t| t.status == TestStatus::SyntaxOk));
}

#[test]
fn splitting_completions() {
    let asserts = split_assertions("assert f(1) == 2\nx = 3\nassert f(2) == 4\n");
    assert_eq!(asserts, ["assert f(1) == 2", "assert f(2) == 4"]);
    let funcs = split_test_functions(
        "def test_a():\n    x = f(1)\n    assert x == 2\n\ndef helper():\n    pass\n",
    );
    assert_eq!(funcs, ["x = f(1)\nassert x == 2"]);
}

#[test]
fn initial_tests_are_capped_and_deduplicated() {
    let s = sample("calc", "double");
    let body: String = (0..30)
        .map(|i| format!(" double({i}) == {}\nassert ", i * 2))
        .collect();
    let completion = format!("{body} double(0)  ==  0\n");
    let backend = ScriptedBackend::new([completion]);
    let batch = generate_initial_tests(&s, &backend, &TestGenConfig::default()).unwrap();
    assert_eq!(batch.tests.len(), 20);
    assert_eq!(batch.tests[0].source_text, "assert double(0) == 0");
    assert_eq!(batch.tests[19].test_id, "init-19");
    assert!(backend.prompts()[0].contains("def double(x):"));
}

#[test]
fn backend_failure_is_retried_then_reported() {
    let s = sample("calc", "double");
    let backend = ScriptedBackend::new(Vec::<String>::new())
        .then_fail(503)
        .then_fail(503);
    let cfg = TestGenConfig {
        backend_attempts: 2,
        ..TestGenConfig::default()
    };
    let err = generate_initial_tests(&s, &backend, &cfg).unwrap_err();
    assert!(err.to_string().contains("2"), "{err}");
}

#[test]
fn fake_runner_routes_statuses() {
    let runner = FakeRunner::new(|call| {
        let a = call.assertions().join("\n");
        if a.is_empty() || a.contains("== 4") {
            ExecutionOutcome::pass()
        } else if a.contains("flip") {
            if call.run % 2 == 0 {
                ExecutionOutcome::pass()
            } else {
                ExecutionOutcome::assertion_error()
            }
        } else if a.contains("boom") {
            ExecutionOutcome::error("ValueError")
        } else {
            ExecutionOutcome::assertion_error()
        }
    })
    .with_capture(|_, call| {
        if call.contains("'x'") {
            Err("TypeError".into())
        } else {
            Ok((Some("4".into()), vec![]))
        }
    });
    let env = ready_env("calc", &runner);
    let s = sample("calc", "double");
    let blobs = tempfile::tempdir().unwrap();
    let tests = [
        raw("ok", "assert double(2) == 4"),
        raw("flaky", "assert double(2) == flip()"),
        raw("err", "assert double(boom()) == 1"),
        raw("fix", "assert double(2) == 5"),
        raw("raises", "assert double('x') == 5"),
        raw("multi", "x = double(2)\nassert x == 5"),
    ];
    let out = execution_filter(&runner, &env, &s, &tests, &config(blobs.path())).unwrap();
    let statuses: Vec<TestStatus> = out.iter().map(|t| t.status).collect();
    assert_eq!(
        statuses,
        [
            TestStatus::ExecOk,
            TestStatus::RejectedFlaky,
            TestStatus::Rejected,
            TestStatus::Fixed,
            TestStatus::Rejected,
            TestStatus::Rejected,
        ]
    );
    assert_eq!(out[3].source_text, "assert double(2) == 4");
    assert_eq!(
        out[3].original_text.as_deref(),
        Some("assert double(2) == 5")
    );
    assert!(out[3].check().is_ok());
}

#[test]
fn gate_threshold() {
    assert_eq!(gate_coverage(39.99, 40.0), GateDecision::Drop);
    assert_eq!(gate_coverage(40.0, 40.0), GateDecision::Keep);
    let s = sample("calc", "double");
    assert_eq!(gate_sample(&s, 40.0), GateDecision::Drop);
    let full = s
        .with_tests(
            Vec::new(),
            CoverageStats::from_lines(&[1].into(), &[1].into()),
        )
        .unwrap();
    assert_eq!(gate_sample(&full, 40.0), GateDecision::Keep);
}

#[test]
fn shim_fixer_literal_and_blob() {
    require_python!();
    let runner = shim();
    let env = ready_env("calc", &runner);
    let blobs = tempfile::tempdir().unwrap();
    let cfg = config(blobs.path());

    let s = sample("calc", "double");
    let out = execution_filter(
        &runner,
        &env,
        &s,
        &[raw("lit", "assert double(2) == 5")],
        &cfg,
    )
    .unwrap();
    assert_eq!(out[0].status, TestStatus::Fixed);
    assert_eq!(out[0].source_text, "assert double(2) == 4");

    let s = sample("calc", "make_pair");
    let out = execution_filter(
        &runner,
        &env,
        &s,
        &[raw("obj", "assert make_pair(1, 2) == None")],
        &cfg,
    )
    .unwrap();
    assert_eq!(out[0].status, TestStatus::Fixed);
    let key = out[0].expected_blob.clone().unwrap();
    assert!(blobs.path().join(&key).is_file());
    assert!(out[0].source_text.contains("pickle"));
    assert!(out[0].check().is_ok());
}

#[test]
fn shim_rejects_diverging_test() {
    require_python!();
    let runner = shim();
    let env = ready_env("calc", &runner);
    let blobs = tempfile::tempdir().unwrap();
    let s = sample("calc", "ticket");
    let out = execution_filter(
        &runner,
        &env,
        &s,
        &[raw("t", "assert ticket() == 0")],
        &config(blobs.path()),
    )
    .unwrap();
    assert_eq!(out[0].status, TestStatus::RejectedFlaky);
}

#[test]
fn shim_enhancement_raises_coverage() {
    require_python!();
    let runner = shim();
    let env = ready_env("calc", &runner);
    let blobs = tempfile::tempdir().unwrap();
    let cfg = config(blobs.path());
    let s = sample("calc", "double");
    let initial = " double(2) == 4\n";
    let enh1 = "def test_rejects_text():\n    try:\n        double('a')\n        assert False\n    except TypeError:\n        pass\n";
    let backend = ScriptedBackend::new([initial, enh1, "", ""]);
    let report = harden_sample(&runner, &env, &s, &backend, &cfg).unwrap();
    assert!((report.initial_coverage.line_coverage_pct - 200.0 / 3.0).abs() < 1e-9);
    assert_eq!(report.sample.coverage.line_coverage_pct, 100.0);
    assert_eq!(report.sample.tests.len(), 2);
    assert_eq!(
        report.sample.tests[1].origin,
        TestOrigin::EnhancementPrompt1
    );
    assert_eq!(report.decision, GateDecision::Keep);
    let prompts = backend.prompts();
    assert_eq!(prompts.len(), 4);
    // later prompts see the test added by the first enhancement round
    assert!(prompts[2].contains("except TypeError"));

    let backend = ScriptedBackend::new(["", "", ""]);
    let none = enhance_coverage(&runner, &env, &s, &[], &backend, &cfg).unwrap();
    assert!(none.tests.is_empty());
    assert_eq!(none.coverage.unwrap().line_coverage_pct, 0.0);
}
