mod common;

use depbench::backend::ScriptedBackend;
use depbench::debug::{run_debug, solved_rate_by_round, DebugConfig, TerminalStatus};
use depbench::model::TestOutcome;

use common::{marker_runner, ready_env, repair_script, samples, with_one_test};

#[test]
fn solved_at_round_two() {
    let runner = marker_runner();
    let env = ready_env("strutil", &runner);
    let s = with_one_test(
        samples("strutil")
            .iter()
            .find(|s| s.target.name() == "reverse")
            .unwrap(),
    );
    let backend = ScriptedBackend::new(repair_script(&s, Some(2), 3));
    let trace = run_debug(&runner, &env, &s, &backend, &DebugConfig::default()).unwrap();
    assert_eq!(trace.terminal_status, TerminalStatus::Solved);
    assert_eq!(trace.solved_at(), Some(2));
    assert_eq!(trace.rounds.len(), 3);
    assert_eq!(trace.rounds[0].per_test_outcome, [TestOutcome::Fail]);
    assert_eq!(trace.rounds[2].dir_value, Some(1.0));
    assert!(trace.error.is_none());

    let prompts = backend.prompts();
    assert_eq!(prompts.len(), 3);
    assert!(prompts[1].contains("AssertionError: wrong value"));
    assert!(prompts[1].contains("assert reverse() is not None"));
    assert!(prompts[1].contains("'BROKEN'"));
}

#[test]
fn never_fixed_exhausts_all_rounds() {
    let runner = marker_runner();
    let env = ready_env("strutil", &runner);
    let s = with_one_test(&samples("strutil")[0]);
    let backend = ScriptedBackend::new(repair_script(&s, None, 3));
    let trace = run_debug(&runner, &env, &s, &backend, &DebugConfig::default()).unwrap();
    assert_eq!(trace.terminal_status, TerminalStatus::Exhausted);
    assert_eq!(trace.rounds.len(), 4);
    assert_eq!(trace.solved_at(), None);
}

#[test]
fn correct_first_time_stops_at_round_zero() {
    let runner = marker_runner();
    let env = ready_env("strutil", &runner);
    let s = with_one_test(&samples("strutil")[0]);
    let backend = ScriptedBackend::new(repair_script(&s, Some(0), 3));
    let trace = run_debug(&runner, &env, &s, &backend, &DebugConfig::default()).unwrap();
    assert_eq!(trace.rounds.len(), 1);
    assert_eq!(trace.solved_at(), Some(0));
}

#[test]
fn backend_failure_ends_the_trace() {
    let runner = marker_runner();
    let env = ready_env("strutil", &runner);
    let s = with_one_test(&samples("strutil")[0]);
    let backend = ScriptedBackend::new([common::BROKEN]).then_fail(503);
    let trace = run_debug(&runner, &env, &s, &backend, &DebugConfig::default()).unwrap();
    assert_eq!(trace.rounds.len(), 1);
    assert_eq!(trace.terminal_status, TerminalStatus::Exhausted);
    assert!(trace.error.unwrap().contains("503"));
}

#[test]
fn corpus_pass_rate_rises_with_rounds() {
    let runner = marker_runner();
    let env = ready_env("strutil", &runner);
    let corpus: Vec<_> = samples("strutil")
        .iter()
        .take(5)
        .map(with_one_test)
        .collect();
    assert_eq!(corpus.len(), 5);
    let plan = [Some(0), Some(1), Some(2), Some(3), None];
    let traces: Vec<_> = corpus
        .iter()
        .zip(plan)
        .map(|(s, at)| {
            let backend = ScriptedBackend::new(repair_script(s, at, 3));
            run_debug(&runner, &env, s, &backend, &DebugConfig::default()).unwrap()
        })
        .collect();
    let rates = solved_rate_by_round(&traces, 3);
    assert_eq!(rates, [0.2, 0.4, 0.6, 0.8]);
    assert!(rates.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn trace_invariants_under_a_fixed_backend() {
    use depbench::backend::StubBackend;
    let runner = marker_runner();
    let env = ready_env("strutil", &runner);
    let s = with_one_test(&samples("strutil")[1]);
    for max_rounds in 0..4 {
        for answer in [common::BROKEN.to_owned(), s.solution().to_owned()] {
            let cfg = DebugConfig {
                max_rounds,
                ..DebugConfig::default()
            };
            let trace = run_debug(&runner, &env, &s, &StubBackend::always(answer), &cfg).unwrap();
            assert!(trace.rounds.len() as u32 <= 1 + max_rounds);
            let last = trace.rounds.last().unwrap();
            assert_eq!(
                trace.terminal_status == TerminalStatus::Solved,
                last.passed()
            );
            assert!(trace
                .rounds
                .windows(2)
                .all(|w| w[0].per_test_outcome == w[1].per_test_outcome));
        }
    }
}
