use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use walkdir::WalkDir;

use super::imports::{
    bindings_for, import_statements, ImportForm, ImportMap, ImportStmt, Resolver,
};
use super::DepError;
use crate::model::{ImportEdge, ModuleId, ModuleRef, RepositorySnapshot, SourceModule};
use crate::python::{parse_named, ParsedModule};

const SKIPPED_DIRS: &[&str] = &["__pycache__", "node_modules", "site-packages", "venv"];

/// Parsed repository plus per-module import maps.
pub struct RepoGraph {
    snapshot: RepositorySnapshot,
    parsed: HashMap<ModuleId, ParsedModule>,
    import_maps: HashMap<ModuleId, ImportMap>,
    statements: HashMap<ModuleId, Vec<ImportStmt>>,
}

pub fn build_repo_graph(root: &Path) -> Result<RepositorySnapshot, DepError> {
    RepoGraph::build(root).map(RepoGraph::into_snapshot)
}

/// Dotted module id for a repository-relative `.py` path; `__init__.py`
/// stands for its package.
pub fn module_id_for(rel: &Path) -> ModuleId {
    let mut parts: Vec<String> = rel
        .with_extension("")
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    if parts.len() > 1 && parts.last().is_some_and(|p| p == "__init__") {
        parts.pop();
    }
    ModuleId::new(parts.join("."))
}

fn discover(root: &Path) -> Result<Vec<PathBuf>, DepError> {
    if !root.is_dir() {
        return Err(DepError::NotADirectory(root.to_path_buf()));
    }
    let mut files = Vec::new();
    let walker = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            let name = e.file_name().to_string_lossy();
            e.depth() == 0
                || !(e.file_type().is_dir()
                    && (name.starts_with('.') || SKIPPED_DIRS.contains(&name.as_ref())))
        });
    for entry in walker {
        let entry = entry.map_err(|e| DepError::Walk(e.to_string()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "py") {
            files.push(
                entry
                    .path()
                    .strip_prefix(root)
                    .unwrap_or(entry.path())
                    .to_path_buf(),
            );
        }
    }
    Ok(files)
}

impl RepoGraph {
    /// Parses every Python file below `root` in parallel, then resolves
    /// imports. Unreadable files become parse-failed modules.
    pub fn build(root: &Path) -> Result<Self, DepError> {
        let files = discover(root)?;
        let loaded: Vec<(SourceModule, Option<ParsedModule>)> = files
            .par_iter()
            .map(|rel| {
                let id = module_id_for(rel);
                match std::fs::read(root.join(rel)) {
                    Ok(bytes) => {
                        let source = String::from_utf8_lossy(&bytes).into_owned();
                        let parsed = parse_named(id.clone(), &source);
                        let module = source_module(&parsed, rel.clone());
                        (module, Some(parsed))
                    }
                    Err(e) => {
                        log::warn!("cannot read {}: {e}", rel.display());
                        (SourceModule::unreadable(id, rel.clone()), None)
                    }
                }
            })
            .collect();

        let mut modules = Vec::with_capacity(loaded.len());
        let mut parsed = HashMap::new();
        for (module, tree) in loaded {
            if let Some(tree) = tree {
                parsed.insert(module.id.clone(), tree);
            }
            modules.push(module);
        }
        let bare = RepositorySnapshot::new(root.to_path_buf(), modules, Vec::new())?;
        Self::assemble(bare, parsed)
    }

    /// Rebuilds the analysis state for an existing snapshot.
    pub fn from_snapshot(snapshot: &RepositorySnapshot) -> Result<Self, DepError> {
        let parsed = snapshot
            .modules()
            .par_iter()
            .filter(|m| !m.source.is_empty() || !m.parse_failed)
            .map(|m| (m.id.clone(), parse_named(m.id.clone(), &m.source)))
            .collect();
        let bare = RepositorySnapshot::new(
            snapshot.root().to_path_buf(),
            snapshot.modules().to_vec(),
            Vec::new(),
        )?;
        Self::assemble(bare, parsed)
    }

    fn assemble(
        bare: RepositorySnapshot,
        parsed: HashMap<ModuleId, ParsedModule>,
    ) -> Result<Self, DepError> {
        let resolver = Resolver::new(&bare);
        let mut edges = Vec::new();
        let mut import_maps = HashMap::new();
        let mut statements = HashMap::new();
        for module in bare.modules() {
            let stmts = import_statements(&module.source);
            for stmt in &stmts {
                edges.extend(edges_for(&resolver, module, stmt));
            }
            let map = ImportMap {
                module_id: module.id.clone(),
                bindings: bindings_for(&resolver, module, &stmts),
            };
            import_maps.insert(module.id.clone(), map);
            statements.insert(module.id.clone(), stmts);
        }
        let snapshot =
            RepositorySnapshot::new(bare.root().to_path_buf(), bare.modules().to_vec(), edges)?;
        Ok(Self {
            snapshot,
            parsed,
            import_maps,
            statements,
        })
    }

    pub fn snapshot(&self) -> &RepositorySnapshot {
        &self.snapshot
    }

    pub fn into_snapshot(self) -> RepositorySnapshot {
        self.snapshot
    }

    pub fn parsed(&self, id: &ModuleId) -> Option<&ParsedModule> {
        self.parsed.get(id)
    }

    pub fn import_map(&self, id: &ModuleId) -> Option<&ImportMap> {
        self.import_maps.get(id)
    }

    pub(crate) fn import_stmts(&self, id: &ModuleId) -> &[ImportStmt] {
        self.statements.get(id).map_or(&[], Vec::as_slice)
    }

    pub(crate) fn resolver(&self) -> Resolver<'_> {
        Resolver::new(&self.snapshot)
    }
}

fn source_module(parsed: &ParsedModule, path: PathBuf) -> SourceModule {
    SourceModule::new(
        parsed.module_id.clone(),
        path.clone(),
        parsed.source().to_owned(),
        parsed.top_level_definitions(),
        parsed.import_statements(),
        !parsed.is_clean(),
    )
    .unwrap_or_else(|e| {
        log::warn!("{}: {e}", path.display());
        SourceModule::unreadable(parsed.module_id.clone(), path)
    })
}

fn edges_for(resolver: &Resolver, module: &SourceModule, stmt: &ImportStmt) -> Vec<ImportEdge> {
    let edge = |imported, names| ImportEdge {
        importer: module.id.clone(),
        imported,
        names,
    };
    match &stmt.form {
        ImportForm::Module { path, .. } => {
            vec![edge(resolver.module_ref(module, 0, path), Vec::new())]
        }
        ImportForm::Wildcard { level, path } => {
            let target = resolver.module_ref(module, *level, path);
            let names = match &target {
                ModuleRef::Internal(id) => resolver
                    .module(id)
                    .map(super::imports::public_definitions)
                    .unwrap_or_default()
                    .into_iter()
                    .map(|(n, _)| n)
                    .collect(),
                ModuleRef::External(_) => vec!["*".to_owned()],
            };
            vec![edge(target, names)]
        }
        ImportForm::From { level, path, names } => {
            let target = resolver.module_ref(module, *level, path);
            if matches!(target, ModuleRef::Internal(_)) {
                let names = names.iter().map(|(n, _)| n.clone()).collect();
                return vec![edge(target, names)];
            }
            // `from pkg import sub` where pkg has no `__init__.py`
            let subs: Vec<ImportEdge> = names
                .iter()
                .filter_map(|(n, _)| {
                    let sub = if path.is_empty() {
                        n.clone()
                    } else {
                        format!("{path}.{n}")
                    };
                    match resolver.module_ref(module, *level, &sub) {
                        r @ ModuleRef::Internal(_) => Some(edge(r, Vec::new())),
                        ModuleRef::External(_) => None,
                    }
                })
                .collect();
            if subs.is_empty() {
                vec![edge(target, names.iter().map(|(n, _)| n.clone()).collect())]
            } else {
                subs
            }
        }
    }
}
