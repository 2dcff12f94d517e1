use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicBool, Ordering};

use tempfile::TempDir;
use walkdir::WalkDir;

use super::stdlib::is_stdlib;
use super::ExecError;
use crate::deps::build_repo_graph;
use crate::model::ModuleRef;

const SKIP_DIRS: &[&str] = &[
    ".git",
    "__pycache__",
    ".venv",
    "venv",
    ".tox",
    ".mypy_cache",
];

/// Import names whose distribution is published under another name.
const DISTRIBUTION_NAMES: &[(&str, &str)] = &[
    ("PIL", "Pillow"),
    ("bs4", "beautifulsoup4"),
    ("cv2", "opencv-python"),
    ("dateutil", "python-dateutil"),
    ("dotenv", "python-dotenv"),
    ("git", "GitPython"),
    ("jwt", "PyJWT"),
    ("sklearn", "scikit-learn"),
    ("skimage", "scikit-image"),
    ("yaml", "PyYAML"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InstallMode {
    /// Use the interpreter as is.
    #[default]
    Skip,
    /// Create a virtual environment inside the workspace and install the
    /// detected requirements into it.
    Venv,
}

#[derive(Debug, Clone)]
pub struct ProvisionOptions {
    pub python: PathBuf,
    pub install: InstallMode,
}

impl Default for ProvisionOptions {
    fn default() -> Self {
        Self {
            python: PathBuf::from("python3"),
            install: InstallMode::Skip,
        }
    }
}

/// A private copy of one repository plus the interpreter that runs it.
#[derive(Debug)]
pub struct EnvHandle {
    dir: TempDir,
    pub python: PathBuf,
    pub interpreter: String,
    pub manifest: Vec<String>,
    /// Requirements that failed to install.
    pub degraded: Vec<String>,
    ready: AtomicBool,
}

impl EnvHandle {
    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn is_ready(&self) -> bool {
        self.ready.load(Ordering::Acquire)
    }

    pub(crate) fn mark_ready(&self) {
        self.ready.store(true, Ordering::Release);
    }

    /// Fresh copy of the workspace for a single run.
    pub(crate) fn scratch(&self) -> Result<TempDir, ExecError> {
        let dir = tempfile::Builder::new()
            .prefix("depbench-run-")
            .tempdir()
            .map_err(|e| ExecError::io("creating run directory", e))?;
        copy_tree(self.root(), dir.path())?;
        Ok(dir)
    }
}

/// Copies the repository into a private workspace and records (and
/// optionally installs) its third-party requirements. The environment is
/// marked ready once [`EnvHandle::verify`] imports the target modules.
pub fn provision_env(repo_root: &Path, opts: &ProvisionOptions) -> Result<EnvHandle, ExecError> {
    if !repo_root.is_dir() {
        return Err(ExecError::io(
            format!("reading {}", repo_root.display()),
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let dir = tempfile::Builder::new()
        .prefix("depbench-env-")
        .tempdir()
        .map_err(|e| ExecError::io("creating environment", e))?;
    copy_tree(repo_root, dir.path())?;
    let manifest = requirements(repo_root)?;
    let mut python = opts.python.clone();
    let mut degraded = Vec::new();
    if opts.install == InstallMode::Venv {
        let venv = dir.path().join(".venv");
        run_quiet(
            Command::new(&opts.python)
                .args(["-m", "venv", "--system-site-packages"])
                .arg(&venv),
        )
        .map_err(|detail| ExecError::Runner(format!("creating virtual environment: {detail}")))?;
        python = venv.join("bin").join("python");
        for package in &manifest {
            let installed =
                run_quiet(Command::new(&python).args(["-m", "pip", "install", "--quiet", package]));
            if let Err(detail) = installed {
                log::warn!("could not install {package}: {detail}");
                degraded.push(package.clone());
            }
        }
    }
    let interpreter = Command::new(&python)
        .arg("--version")
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| {
            let text = if o.stdout.is_empty() {
                o.stderr
            } else {
                o.stdout
            };
            String::from_utf8_lossy(&text).trim().to_owned()
        })
        .unwrap_or_else(|| "unavailable".to_owned());
    Ok(EnvHandle {
        dir,
        python,
        interpreter,
        manifest,
        degraded,
        ready: AtomicBool::new(false),
    })
}

fn run_quiet(cmd: &mut Command) -> Result<(), String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).trim().to_owned())
    }
}

/// Third-party distributions imported anywhere in the repository.
pub fn requirements(repo_root: &Path) -> Result<Vec<String>, ExecError> {
    let snapshot = build_repo_graph(repo_root).map_err(|e| ExecError::Runner(e.to_string()))?;
    let local: BTreeSet<&str> = snapshot
        .modules()
        .iter()
        .map(|m| m.id.as_str().split('.').next().unwrap_or_default())
        .collect();
    let mut out = BTreeSet::new();
    for edge in snapshot.import_edges() {
        let ModuleRef::External(name) = &edge.imported else {
            continue;
        };
        let top = name.split('.').next().unwrap_or_default();
        if top.is_empty() || is_stdlib(top) || local.contains(top) {
            continue;
        }
        let dist = DISTRIBUTION_NAMES
            .iter()
            .find(|(import, _)| *import == top)
            .map_or(top, |(_, dist)| dist);
        out.insert(dist.to_owned());
    }
    Ok(out.into_iter().collect())
}

fn copy_tree(from: &Path, to: &Path) -> Result<(), ExecError> {
    let walker = WalkDir::new(from).into_iter().filter_entry(|e| {
        !(e.file_type().is_dir() && SKIP_DIRS.contains(&e.file_name().to_string_lossy().as_ref()))
    });
    for entry in walker {
        let entry = entry.map_err(|e| ExecError::Runner(format!("copying repository: {e}")))?;
        let rel = entry
            .path()
            .strip_prefix(from)
            .expect("walk stays under root");
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dest)
                .map_err(|e| ExecError::io(format!("creating {}", dest.display()), e))?;
        } else if entry.file_type().is_file() {
            fs::copy(entry.path(), &dest)
                .map_err(|e| ExecError::io(format!("copying {}", rel.display()), e))?;
        }
    }
    Ok(())
}
