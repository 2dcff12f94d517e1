mod commands;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use depbench::model::{ContextLevel, PromptFormat};

/// Dependency-aware evaluation of repository-level code generation.
#[derive(Debug, Parser)]
#[command(name = "depbench", version, arg_required_else_help = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overwrite outputs that already exist.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (default: logical CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn repositories into an untested dataset with all prompt variants.
    Extract(ExtractArgs),
    /// Render prompts (or fine-tuning pairs) for a dataset.
    BuildPrompts(BuildPromptsArgs),
    /// Generate, filter and fix tests, then gate samples by coverage.
    GenTests(GenTestsArgs),
    /// Sample candidates and score them against the tests.
    Evaluate(EvaluateArgs),
    /// Multi-round repair driven by failing tests.
    Debug(DebugArgs),
    /// Summarize evaluation results as pass@k and DIR.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Repository root; repeat for several. Defaults to the config's repos.
    #[arg(long = "repo")]
    repos: Vec<PathBuf>,
    /// Repository name recorded in sample ids (single repo only).
    #[arg(long)]
    repo_name: Option<String>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    max_prompt_tokens: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BuildPromptsArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long = "level")]
    levels: Vec<ContextLevel>,
    #[arg(long = "format")]
    formats: Vec<PromptFormat>,
    #[arg(long)]
    max_prompt_tokens: Option<usize>,
    /// Emit fine-tuning pairs instead of prompts.
    #[arg(long)]
    tuning: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExecArgs {
    /// Repository root as PATH or NAME=PATH; repeat for several.
    #[arg(long = "repo")]
    repos: Vec<String>,
    /// Helper script implementing the execution contract.
    #[arg(long)]
    shim: Option<PathBuf>,
    #[arg(long)]
    python: Option<PathBuf>,
    /// Install third-party requirements into a virtual environment.
    #[arg(long)]
    install: bool,
    /// Per-run timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// stub, stub:FILE, replay:FILE, http or record:FILE (http with a transcript).
    #[arg(long, default_value = "http")]
    backend: String,
}

#[derive(Debug, Args)]
struct GenTestsArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    exec: ExecArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long)]
    min_coverage: Option<f64>,
    #[arg(long)]
    repeats: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    exec: ExecArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long = "level")]
    levels: Vec<ContextLevel>,
    #[arg(long = "format")]
    formats: Vec<PromptFormat>,
    #[arg(long)]
    num_samples: Option<usize>,
    /// Greedy decoding, one candidate per prompt.
    #[arg(long)]
    greedy: bool,
    /// Results directory, one file per level and format.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DebugArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    exec: ExecArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long)]
    max_rounds: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    dataset: PathBuf,
    results: PathBuf,
    #[arg(long, value_delimiter = ',')]
    ks: Vec<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
