//! Shared plumbing: configuration, backends and execution environments.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use depbench::backend::{
    Backend, BackendError, GenerationParams, HttpBackend, HttpConfig, RecordingBackend,
    ReplayBackend, StubBackend,
};
use depbench::config::RunConfig;
use depbench::exec::{
    provision_env, EnvHandle, InstallMode, ProvisionOptions, RunSettings, ShimRunner,
};
use depbench::model::BenchmarkSample;

use crate::{BackendArgs, ExecArgs};

pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

/// A backend chosen on the command line. Recording backends write their
/// transcript in [`CliBackend::finish`].
pub enum CliBackend {
    Plain(Box<dyn Backend>),
    Recording(Box<RecordingBackend<HttpBackend>>, PathBuf),
}

impl Backend for CliBackend {
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<String>, BackendError> {
        match self {
            Self::Plain(b) => b.complete(prompt, params),
            Self::Recording(b, _) => b.complete(prompt, params),
        }
    }
}

impl CliBackend {
    pub fn parse(args: &BackendArgs) -> Result<Self> {
        let spec = args.backend.as_str();
        let (kind, arg) = match spec.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (spec, None),
        };
        Ok(match (kind, arg) {
            ("stub", None) => Self::Plain(Box::new(StubBackend::always("    pass\n"))),
            ("stub", Some(file)) => {
                let text = std::fs::read_to_string(file).with_context(|| format!("reading {file}"))?;
                Self::Plain(Box::new(StubBackend::always(text)))
            }
            ("replay", Some(file)) => Self::Plain(Box::new(ReplayBackend::open(Path::new(file))?)),
            ("http", None) => Self::Plain(Box::new(HttpBackend::new(HttpConfig::from_env()?)?)),
            ("record", Some(file)) => Self::Recording(
                Box::new(RecordingBackend::new(HttpBackend::new(HttpConfig::from_env()?)?)),
                PathBuf::from(file),
            ),
            _ => bail!("unknown backend `{spec}` (expected stub, stub:FILE, replay:FILE, http or record:FILE)"),
        })
    }

    pub fn finish(&self) -> Result<()> {
        if let Self::Recording(b, path) = self {
            b.save(path)?;
        }
        Ok(())
    }
}

/// Runner, ready environments per repository name, and run settings.
pub struct Execution {
    pub runner: ShimRunner,
    pub envs: BTreeMap<String, EnvHandle>,
    pub settings: RunSettings,
}

impl Execution {
    pub fn env(&self, sample: &BenchmarkSample) -> &EnvHandle {
        &self.envs[&sample.repo]
    }
}

fn repo_roots(args: &ExecArgs, cfg: &RunConfig) -> BTreeMap<String, PathBuf> {
    let named = |spec: &str| match spec.split_once('=') {
        Some((name, path)) => (name.to_owned(), PathBuf::from(path)),
        None => (repo_name(Path::new(spec)), PathBuf::from(spec)),
    };
    let mut roots: BTreeMap<String, PathBuf> = cfg
        .repos
        .iter()
        .map(|p| (repo_name(p), p.clone()))
        .collect();
    roots.extend(args.repos.iter().map(|s| named(s)));
    roots
}

pub fn repo_name(path: &Path) -> String {
    let path = path.canonicalize().unwrap_or_else(|_| path.to_owned());
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "repo".to_owned())
}

/// Provisions and verifies one environment per repository used by
/// `samples`.
pub fn prepare_execution(
    args: &ExecArgs,
    cfg: &RunConfig,
    samples: &[BenchmarkSample],
    blob_root: Option<PathBuf>,
) -> Result<Execution> {
    let mut python = args.python.clone().unwrap_or_else(|| cfg.python.clone());
    // Runs happen inside scratch directories, so relative paths must be resolved now.
    if python.components().count() > 1 {
        python = absolute(&python)?;
    }
    let Some(shim) = args.shim.clone().or_else(|| cfg.shim.clone()) else {
        bail!("no execution helper configured; pass --shim or set `shim` in the config");
    };
    let shim = absolute(&shim)?;
    let runner = ShimRunner::python_script(&python, &shim);
    let timeout = Duration::from_secs_f64(args.timeout.unwrap_or(cfg.timeout_secs));
    let roots = repo_roots(args, cfg);
    let opts = ProvisionOptions {
        python,
        install: if args.install {
            InstallMode::Venv
        } else {
            InstallMode::Skip
        },
    };
    let mut modules: BTreeMap<&str, BTreeSet<&Path>> = BTreeMap::new();
    for s in samples {
        modules.entry(&s.repo).or_default().insert(&s.module_path);
    }
    let mut envs = BTreeMap::new();
    for (repo, mods) in modules {
        let Some(root) = roots.get(repo) else {
            bail!("no root for repository `{repo}`; pass --repo {repo}=PATH");
        };
        let env = provision_env(root, &opts).with_context(|| format!("provisioning {repo}"))?;
        if !env.degraded.is_empty() {
            log::warn!("{repo}: could not install {}", env.degraded.join(", "));
        }
        let mods: Vec<&Path> = mods.into_iter().collect();
        env.verify(&runner, &mods, timeout)
            .with_context(|| format!("verifying {repo}"))?;
        log::info!("{repo}: environment ready ({})", env.interpreter);
        envs.insert(repo.to_owned(), env);
    }
    Ok(Execution {
        runner,
        envs,
        settings: RunSettings { timeout, blob_root },
    })
}

fn absolute(path: &Path) -> Result<PathBuf> {
    path.canonicalize()
        .with_context(|| format!("resolving {}", path.display()))
}

/// True when `path` exists and may be kept as is.
pub fn keep_existing(path: &Path, force: bool) -> bool {
    if path.exists() && !force {
        eprintln!(
            "{} exists, skipping (use --force to overwrite)",
            path.display()
        );
        return true;
    }
    false
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1))
        })
        .collect()
}
