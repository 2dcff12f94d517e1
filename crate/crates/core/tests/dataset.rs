mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use depbench::dataset::{blob_dir, load_dataset, save_dataset, DatasetError};
use depbench::model::{BenchmarkSample, CoverageStats, TestOrigin, TestRecord, TestStatus};
use proptest::prelude::*;

use common::samples;

fn strutil() -> &'static [BenchmarkSample] {
    static CELL: OnceLock<Vec<BenchmarkSample>> = OnceLock::new();
    CELL.get_or_init(|| samples("strutil"))
}

fn with_tests(s: &BenchmarkSample) -> BenchmarkSample {
    let mut fixed = TestRecord::raw(
        "init-1",
        "assert reverse('ab') == 'ba'",
        TestOrigin::Initial,
    );
    fixed.original_text = Some("assert reverse('ab') == 'ab'".into());
    let tests = vec![
        TestRecord::raw("init-0", "assert reverse('x') == 'x'", TestOrigin::Initial)
            .with_status(TestStatus::ExecOk),
        fixed.with_status(TestStatus::Fixed),
    ];
    let coverage =
        CoverageStats::from_lines(&BTreeSet::from([10, 11, 13]), &BTreeSet::from([10, 13]));
    s.with_tests(tests, coverage).unwrap()
}

#[test]
fn round_trip_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/ds.jsonl");
    let data: Vec<BenchmarkSample> = strutil().iter().map(with_tests).collect();
    save_dataset(&data, &path).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), data);

    save_dataset(&[], &path).unwrap();
    assert!(load_dataset(&path).unwrap().is_empty());
    assert_eq!(blob_dir(&path), dir.path().join("nested/ds.jsonl.blobs"));
}

#[test]
fn records_carry_the_normative_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.jsonl");
    save_dataset(&strutil()[..1], &path).unwrap();
    let line = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    for field in [
        "sample_id",
        "repo",
        "module_path",
        "function_name",
        "signature",
        "docstring",
        "solution",
        "dependencies",
        "prompts",
        "tests",
        "line_coverage_pct",
    ] {
        assert!(v.get(field).is_some(), "missing {field}");
    }
    assert!(v["prompts"]["full"]["base"]["token_count"].is_u64());
}

#[test]
fn unvalidated_test_refuses_to_save() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.jsonl");
    let mut s = strutil()[0].clone();
    s.tests.push(
        TestRecord::raw("init-0", "assert 1", TestOrigin::Initial)
            .with_status(TestStatus::Rejected),
    );
    let err = save_dataset(&[s.clone()], &path).unwrap_err();
    match err {
        DatasetError::Invalid { sample_id, .. } => assert_eq!(sample_id, s.sample_id),
        other => panic!("unexpected {other:?}"),
    }
    assert!(!path.exists());
}

#[test]
fn coverage_out_of_range_is_rejected() {
    let mut s = strutil()[0].clone();
    s.coverage.line_coverage_pct = 150.0;
    assert!(matches!(
        save_dataset(&[s], &tempfile::tempdir().unwrap().path().join("d.jsonl")),
        Err(DatasetError::Invalid { .. })
    ));
}

#[test]
fn truncated_line_reports_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.jsonl");
    save_dataset(&strutil()[..2], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() - 20]).unwrap();
    match load_dataset(&path).unwrap_err() {
        DatasetError::Malformed { line, .. } => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn tampered_token_count_is_inconsistent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.jsonl");
    save_dataset(&strutil()[..1], &path).unwrap();
    let mut v: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(&path).unwrap().trim()).unwrap();
    v["prompts"]["full"]["base"]["token_count"] = 1.into();
    std::fs::write(&path, v.to_string()).unwrap();
    assert!(matches!(
        load_dataset(&path),
        Err(DatasetError::Inconsistent { .. })
    ));
}

#[test]
fn duplicate_dependencies_collapse() {
    let s = strutil()
        .iter()
        .find(|s| s.dependencies.len() >= 2)
        .unwrap();
    let mut deps = s.dependencies.clone();
    deps.push(deps[0].clone());
    let rebuilt = BenchmarkSample::new(
        s.sample_id.clone(),
        s.repo.clone(),
        s.module_path.clone(),
        s.target.clone(),
        s.imports.clone(),
        deps,
        s.prompts.clone(),
        Vec::new(),
        CoverageStats::default(),
    )
    .unwrap();
    assert_eq!(rebuilt.dependencies, s.dependencies);
}

fn arb_test() -> impl Strategy<Value = TestRecord> {
    (
        "[a-z]{1,6}",
        "assert [a-z_]{1,8}\\([0-9]{0,3}\\) == [0-9]{1,4}",
        any::<bool>(),
        prop::option::of("[a-z]{1,8}/[a-z0-9-]{1,6}\\.pkl"),
    )
        .prop_map(|(id, src, fixed, blob)| {
            let mut t = TestRecord::raw(
                format!("init-{id}"),
                src.clone(),
                TestOrigin::EnhancementPrompt2,
            );
            if fixed {
                t.original_text = Some(format!("{src} + 1"));
                t.expected_blob = blob;
                t.with_status(TestStatus::Fixed)
            } else {
                t.with_status(TestStatus::ExecOk)
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn save_load_identity(
        picks in prop::collection::vec((0usize..100, prop::collection::vec(arb_test(), 0..4), prop::collection::btree_set(1u32..60, 0..10), 0u32..5), 0..4),
    ) {
        let pool = strutil();
        let data: Vec<BenchmarkSample> = picks
            .into_iter()
            .map(|(i, tests, exec, uncovered)| {
                let covered: BTreeSet<u32> = exec.iter().copied().skip(uncovered as usize).collect();
                pool[i % pool.len()].with_tests(tests, CoverageStats::from_lines(&exec, &covered)).unwrap()
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        save_dataset(&data, &path).unwrap();
        prop_assert_eq!(load_dataset(&path).unwrap(), data);
    }
}
