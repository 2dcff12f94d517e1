use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use depbench::backend::GenerationParams;
use depbench::config::RunConfig;
use depbench::dataset::{blob_dir, load_dataset, save_dataset};
use depbench::debug::{run_debug, solved_rate_by_round, DebugConfig, DebugTrace};
use depbench::evaluate::evaluate_sample;
use depbench::metrics::{aggregate, render_table, AggregateSummary};
use depbench::model::{BenchmarkSample, ContextLevel, GenerationRecord, PromptFormat};
use depbench::prompt::{build_prompt_within, build_tuning_record, TuningStyle};
use depbench::sample::{extract_samples, SampleOptions};
use depbench::testgen::{harden_sample, GateDecision, TestGenConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::setup::{
    keep_existing, load_config, prepare_execution, read_jsonl, repo_name, write_jsonl, CliBackend,
};
use crate::{
    BuildPromptsArgs, Cli, Command, DebugArgs, EvaluateArgs, ExtractArgs, GenTestsArgs, ReportArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.global.config.as_deref())?;
    let jobs = cli.global.jobs.or(cfg.jobs).unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .context("starting worker pool")?;
    let force = cli.global.force;
    match cli.command {
        Command::Extract(a) => extract(a, &cfg, force),
        Command::BuildPrompts(a) => build_prompts(a, &cfg, force),
        Command::GenTests(a) => gen_tests(a, &cfg, force),
        Command::Evaluate(a) => evaluate(a, &cfg, force),
        Command::Debug(a) => debug(a, &cfg, force),
        Command::Report(a) => report(a, &cfg),
    }
}

fn extract(a: ExtractArgs, cfg: &RunConfig, force: bool) -> Result<()> {
    if keep_existing(&a.out, force) {
        return Ok(());
    }
    let repos = if a.repos.is_empty() {
        cfg.repos.clone()
    } else {
        a.repos
    };
    if repos.is_empty() {
        bail!("no repository given; pass --repo or list repos in the config");
    }
    if a.repo_name.is_some() && repos.len() > 1 {
        bail!("--repo-name needs exactly one --repo");
    }
    let opts = SampleOptions {
        depth: a.depth.unwrap_or(cfg.dependency_depth),
        max_prompt_tokens: a.max_prompt_tokens.or(cfg.max_prompt_tokens),
    };
    let mut samples = Vec::new();
    for root in &repos {
        let name = a.repo_name.clone().unwrap_or_else(|| repo_name(root));
        let found = extract_samples(root, &name, &opts)
            .with_context(|| format!("extracting {}", root.display()))?;
        for skip in &found.skipped {
            log::info!("skipped {skip:?}");
        }
        eprintln!(
            "{name}: {} samples, {} functions skipped",
            found.samples.len(),
            found.skipped.len()
        );
        samples.extend(found.samples);
    }
    save_dataset(&samples, &a.out)?;
    Ok(())
}

#[derive(Serialize)]
struct PromptRow<'a> {
    sample_id: &'a str,
    context_level: ContextLevel,
    format: PromptFormat,
    text: String,
    token_count: usize,
}

#[derive(Serialize)]
struct TuningRow<'a> {
    sample_id: &'a str,
    #[serde(flatten)]
    record: depbench::prompt::TuningRecord,
}

fn or_all<T: Copy>(given: Vec<T>, configured: &[T]) -> Vec<T> {
    if given.is_empty() {
        configured.to_vec()
    } else {
        given
    }
}

fn build_prompts(a: BuildPromptsArgs, cfg: &RunConfig, force: bool) -> Result<()> {
    if keep_existing(&a.out, force) {
        return Ok(());
    }
    let samples = load_dataset(&a.dataset)?;
    if a.tuning {
        let mut rows = Vec::new();
        for s in &samples {
            for style in [
                TuningStyle::Instruct,
                TuningStyle::RawFull,
                TuningStyle::RawSmall,
            ] {
                let record = build_tuning_record(&s.target, &s.imports, &s.dependencies, style)?;
                rows.push(TuningRow {
                    sample_id: &s.sample_id,
                    record,
                });
            }
        }
        return write_jsonl(&a.out, &rows);
    }
    let levels = or_all(a.levels, &cfg.context_levels);
    let formats = or_all(a.formats, &cfg.prompt_formats);
    let budget = a.max_prompt_tokens.or(cfg.max_prompt_tokens);
    let mut rows = Vec::new();
    for s in &samples {
        for &level in &levels {
            for &format in &formats {
                let p = build_prompt_within(s, level, format, budget)?;
                rows.push(PromptRow {
                    sample_id: &s.sample_id,
                    context_level: level,
                    format,
                    text: p.text,
                    token_count: p.token_count,
                });
            }
        }
    }
    write_jsonl(&a.out, &rows)
}

#[derive(Serialize)]
struct HardenRow {
    sample_id: String,
    decision: Option<GateDecision>,
    initial_coverage: Option<f64>,
    final_coverage: Option<f64>,
    validated: usize,
    statuses: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn gen_tests(a: GenTestsArgs, cfg: &RunConfig, force: bool) -> Result<()> {
    if keep_existing(&a.out, force) {
        return Ok(());
    }
    let samples = load_dataset(&a.dataset)?;
    let blobs = blob_dir(&a.out);
    let exec = prepare_execution(&a.exec, cfg, &samples, Some(blobs))?;
    let backend = CliBackend::parse(&a.backend)?;
    let tg = TestGenConfig {
        repeats: a.repeats.unwrap_or(cfg.flaky_repeats),
        min_coverage: a.min_coverage.unwrap_or(cfg.coverage_threshold),
        run: exec.settings.clone(),
        ..TestGenConfig::default()
    };
    let results: Vec<_> = samples
        .par_iter()
        .map(|s| {
            (
                s,
                harden_sample(&exec.runner, exec.env(s), s, &backend, &tg),
            )
        })
        .collect();
    backend.finish()?;
    let mut kept = Vec::new();
    let mut rows = Vec::new();
    let mut failures = 0;
    for (s, result) in results {
        match result {
            Ok(r) => {
                let mut statuses = BTreeMap::new();
                for t in &r.considered {
                    *statuses.entry(t.status.to_string()).or_insert(0) += 1;
                }
                rows.push(HardenRow {
                    sample_id: s.sample_id.clone(),
                    decision: Some(r.decision),
                    initial_coverage: Some(r.initial_coverage.line_coverage_pct),
                    final_coverage: Some(r.sample.coverage.line_coverage_pct),
                    validated: r.sample.tests.len(),
                    statuses,
                    error: None,
                });
                if r.decision == GateDecision::Keep {
                    kept.push(r.sample);
                }
            }
            Err(e) => {
                log::error!("{}: {e}", s.sample_id);
                failures += 1;
                rows.push(HardenRow {
                    sample_id: s.sample_id.clone(),
                    decision: None,
                    initial_coverage: None,
                    final_coverage: None,
                    validated: 0,
                    statuses: BTreeMap::new(),
                    error: Some(e.to_string()),
                });
            }
        }
    }
    save_dataset(&kept, &a.out)?;
    let mut report_path = a.out.clone().into_os_string();
    report_path.push(".report.jsonl");
    write_jsonl(Path::new(&report_path), &rows)?;
    eprintln!(
        "{} of {} samples kept at {}% coverage",
        kept.len(),
        samples.len(),
        tg.min_coverage
    );
    if failures > 0 {
        bail!("{failures} samples failed; see the log");
    }
    Ok(())
}

fn params_for(a: &EvaluateArgs, cfg: &RunConfig) -> GenerationParams {
    if a.greedy {
        return GenerationParams::greedy();
    }
    let mut p = cfg.generation.clone();
    if let Some(n) = a.num_samples {
        p.num_samples = n;
    }
    p
}

fn evaluate(a: EvaluateArgs, cfg: &RunConfig, force: bool) -> Result<()> {
    let samples = load_dataset(&a.dataset)?;
    if samples.iter().any(|s| s.tests.is_empty()) {
        log::warn!("some samples have no tests; every candidate passes them trivially");
    }
    let levels = or_all(a.levels.clone(), &cfg.context_levels);
    let formats = or_all(a.formats.clone(), &cfg.prompt_formats);
    let todo: Vec<(ContextLevel, PromptFormat)> = levels
        .iter()
        .flat_map(|&l| formats.iter().map(move |&f| (l, f)))
        .filter(|(l, f)| !keep_existing(&a.out.join(format!("{l}.{f}.jsonl")), force))
        .collect();
    if todo.is_empty() {
        return Ok(());
    }
    let exec = prepare_execution(&a.exec, cfg, &samples, Some(blob_dir(&a.dataset)))?;
    let backend = CliBackend::parse(&a.backend)?;
    let params = params_for(&a, cfg);
    params.validate()?;
    for (level, format) in todo {
        let records: Result<Vec<Vec<GenerationRecord>>> = samples
            .par_iter()
            .map(|s| {
                evaluate_sample(
                    &exec.runner,
                    exec.env(s),
                    s,
                    &backend,
                    level,
                    format,
                    &params,
                    &exec.settings,
                )
                .with_context(|| format!("{} ({level}, {format})", s.sample_id))
            })
            .collect();
        let records: Vec<GenerationRecord> = records?.into_iter().flatten().collect();
        write_jsonl(&a.out.join(format!("{level}.{format}.jsonl")), &records)?;
        eprintln!("{level}/{format}: {} candidates", records.len());
    }
    backend.finish()
}

fn debug(a: DebugArgs, cfg: &RunConfig, force: bool) -> Result<()> {
    if keep_existing(&a.out, force) {
        return Ok(());
    }
    let samples = load_dataset(&a.dataset)?;
    let exec = prepare_execution(&a.exec, cfg, &samples, Some(blob_dir(&a.dataset)))?;
    let backend = CliBackend::parse(&a.backend)?;
    let dc = DebugConfig {
        max_rounds: a.max_rounds.unwrap_or(cfg.max_debug_rounds),
        run: exec.settings.clone(),
        ..DebugConfig::default()
    };
    let traces: Result<Vec<DebugTrace>> = samples
        .par_iter()
        .map(|s| {
            run_debug(&exec.runner, exec.env(s), s, &backend, &dc)
                .with_context(|| s.sample_id.clone())
        })
        .collect();
    let traces = traces?;
    backend.finish()?;
    write_jsonl(&a.out, &traces)?;
    for (round, rate) in solved_rate_by_round(&traces, dc.max_rounds)
        .iter()
        .enumerate()
    {
        println!("round {round}: pass@1 {:.2}", rate * 100.0);
    }
    Ok(())
}

fn report(a: ReportArgs, cfg: &RunConfig) -> Result<()> {
    let samples = load_dataset(&a.dataset)?;
    let by_id: BTreeMap<&str, &BenchmarkSample> =
        samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    let ks = if a.ks.is_empty() {
        cfg.ks.clone()
    } else {
        a.ks
    };
    let mut files: Vec<_> = std::fs::read_dir(&a.results)
        .with_context(|| format!("reading {}", a.results.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    let mut rows: Vec<(String, AggregateSummary)> = Vec::new();
    for path in files {
        let label = path
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let records: Vec<GenerationRecord> = read_jsonl(&path)?;
        let mut grouped: BTreeMap<String, Vec<GenerationRecord>> = BTreeMap::new();
        for r in records {
            let Some(sample) = by_id.get(r.sample_id.as_str()) else {
                bail!(
                    "{}: sample `{}` is not in the dataset",
                    path.display(),
                    r.sample_id
                );
            };
            r.check(sample.dependency_names().len())
                .with_context(|| format!("{}: record for `{}`", path.display(), r.sample_id))?;
            grouped.entry(r.sample_id.clone()).or_default().push(r);
        }
        let summary = aggregate(&grouped, &ks).with_context(|| path.display().to_string())?;
        rows.push((label, summary));
    }
    print!("{}", render_table(&rows));
    let summary: BTreeMap<&str, &AggregateSummary> =
        rows.iter().map(|(l, s)| (l.as_str(), s)).collect();
    let out = a.results.join("summary.json");
    std::fs::write(&out, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
