mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::process::{Command, Stdio};

use depbench::metrics::{
    aggregate, dir, dir_of_text, empty_rate, pass_at_k, render_table, MetricsError, PassAtKInput,
};
use depbench::model::{GenerationRecord, TestOutcome};
use proptest::prelude::*;

use common::{fixture, sample, synthetic_corpus, SYNTH_N};

fn p(n: usize, c: usize, k: usize) -> f64 {
    pass_at_k(PassAtKInput::new(n, c, k).unwrap()).unwrap()
}

/// Fraction of k-subsets of n candidates (c correct) holding a correct one.
fn enumerate(n: usize, c: usize, k: usize) -> f64 {
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        total += 1;
        // candidates 0..c are the correct ones
        if mask & ((1u32 << c) - 1) != 0 {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

#[test]
fn pass_at_k_matches_enumeration() {
    let start = std::time::Instant::now();
    for n in 1..=12 {
        for c in 0..=n {
            for k in 1..=n {
                let got = p(n, c, k);
                let want = enumerate(n, c, k);
                assert!(
                    (got - want).abs() < 1e-12,
                    "n={n} c={c} k={k}: {got} vs {want}"
                );
            }
        }
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn pass_at_k_examples_and_errors() {
    assert_eq!(p(10, 10, 1), 1.0);
    assert_eq!(p(10, 0, 5), 0.0);
    assert!((p(10, 3, 5) - 11.0 / 12.0).abs() < 1e-12);
    assert_eq!(
        PassAtKInput::new(3, 4, 1),
        Err(MetricsError::PassAtK { n: 3, c: 4, k: 1 })
    );
    assert!(PassAtKInput::new(3, 1, 0).is_err());
    assert!(PassAtKInput::new(3, 1, 4).is_err());
}

proptest! {
    #[test]
    fn pass_at_k_monotone(n in 1usize..40, c in 0usize..40, k in 1usize..40) {
        prop_assume!(c <= n && k <= n);
        let v = p(n, c, k);
        prop_assert!((0.0..=1.0).contains(&v));
        if c < n {
            prop_assert!(p(n, c + 1, k) >= v);
        }
        if k < n {
            prop_assert!(p(n, c, k + 1) >= v);
        }
        prop_assert_eq!(p(n, c, n), if c >= 1 { 1.0 } else { 0.0 });
    }

    #[test]
    fn dir_bounds_and_set_semantics(
        generated in proptest::collection::vec("[a-e]", 0..8),
        deps in proptest::collection::btree_set("[a-e]", 0..5),
        dup in 1usize..4,
    ) {
        let g: BTreeSet<String> = generated.iter().cloned().collect();
        match dir(&g, &deps) {
            None => prop_assert!(deps.is_empty()),
            Some(v) => {
                prop_assert!((0.0..=1.0).contains(&v));
                if deps.is_subset(&g) {
                    prop_assert_eq!(v, 1.0);
                }
            }
        }
        let once = format!("{}\n", generated.join("\n"));
        let repeated = once.repeat(dup);
        prop_assert_eq!(dir_of_text(&once, &deps), dir_of_text(&repeated, &deps));
    }
}

#[test]
fn dir_on_reverse_outputs() {
    let s = sample("strutil", "reverse");
    let ds = s.dependency_names();
    assert_eq!(
        ds,
        BTreeSet::from(["InvalidInputError".to_owned(), "is_string".to_owned()])
    );
    let read = |name: &str| std::fs::read_to_string(fixture("outputs").join(name)).unwrap();
    assert_eq!(dir_of_text(&read("reverse.instruct.py"), &ds), Some(1.0));
    assert_eq!(dir_of_text(&read("reverse.pretrained.py"), &ds), Some(0.0));
    assert_eq!(dir_of_text("x = 1", &BTreeSet::new()), None);
}

fn record(id: &str, text: &str, pass: bool, dir_value: Option<f64>) -> GenerationRecord {
    let o = if pass {
        TestOutcome::Pass
    } else {
        TestOutcome::Fail
    };
    GenerationRecord::new(id.into(), 0, text.into(), vec![o], dir_value)
}

#[test]
fn empty_rate_on_fixture_corpus() {
    let texts: Vec<String> = serde_json::from_str(
        &std::fs::read_to_string(fixture("outputs/empty_corpus.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(texts.len(), 10);
    let records: Vec<_> = texts.iter().map(|t| record("s", t, false, None)).collect();
    assert_eq!(empty_rate(&records), 0.3);
    assert_eq!(empty_rate(&records[..3]), 1.0);
    assert_eq!(empty_rate(&records[3..]), 0.0);
    assert_eq!(empty_rate(&[]), 0.0);
}

#[test]
fn aggregate_small_cases() {
    let one = [("a".to_owned(), vec![record("a", "x", true, None)])].into();
    let s = aggregate(&one, &[1, 5]).unwrap();
    assert_eq!(s.pass_at_k[&1], 1.0);
    assert!(!s.pass_at_k.contains_key(&5));

    let two = [
        ("a".to_owned(), vec![record("a", "x", true, Some(1.0))]),
        ("b".to_owned(), vec![record("b", "x", false, None)]),
    ]
    .into();
    let s = aggregate(&two, &[1]).unwrap();
    assert_eq!(s.mean_dir, Some(1.0));
    assert_eq!(s.samples_with_dir, 1);
    assert_eq!(s.pass_at_k[&1], 0.5);

    let uneven = [
        ("a".to_owned(), vec![record("a", "x", true, None)]),
        ("b".to_owned(), vec![record("b", "x", true, None); 2]),
    ]
    .into();
    assert!(matches!(
        aggregate(&uneven, &[1]),
        Err(MetricsError::HeterogeneousN { .. })
    ));
}

#[test]
fn report_table_columns() {
    let (corpus, _) = synthetic_corpus();
    let s = aggregate(&corpus, &[1, 5]).unwrap();
    let table = render_table(&[("model".into(), s)]);
    let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["run", "pass@1", "pass@5", "DIR", "samples"]);
    assert_eq!(table.lines().count(), 2);
}

/// The synthetic corpus run through a separately written Python script.
#[test]
fn aggregate_matches_script() {
    require_python!();
    let (corpus, truths) = synthetic_corpus();
    let summary = aggregate(&corpus, &[1, 5]).unwrap();
    let input = serde_json::json!({
        "n": SYNTH_N,
        "ks": [1, 5],
        "samples": truths.iter().map(|t| serde_json::json!({
            "correct": t.correct,
            "dirs": t.dirs.iter().map(|d| d.map(|(h, m)| [h, m])).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    let mut child = Command::new("python3")
        .arg(fixture("oracle/aggregate.py"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.to_string().as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let value = |name: &str| {
        let line = text
            .lines()
            .find(|l| l.starts_with(&format!("{name} ")))
            .unwrap();
        f64::from_bits(u64::from_str_radix(line.split(' ').nth(1).unwrap(), 16).unwrap())
    };
    assert_eq!(summary.pass_at_k[&1].to_bits(), value("pass@1").to_bits());
    assert_eq!(summary.pass_at_k[&5].to_bits(), value("pass@5").to_bits());
    assert_eq!(summary.mean_dir.unwrap().to_bits(), value("dir").to_bits());
}
