use std::collections::BTreeMap;

use tree_sitter::Node;

use crate::exec::stdlib::is_stdlib;
use crate::model::{DefinitionKind, ModuleId, ModuleRef, RepositorySnapshot, SourceModule};
use crate::python::{is_import, module_statements, named_children, node_text, parse_tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KindHint {
    Module,
    Function,
    Class,
    Variable,
    Unknown,
}

impl From<DefinitionKind> for KindHint {
    fn from(kind: DefinitionKind) -> Self {
        match kind {
            DefinitionKind::Function => Self::Function,
            DefinitionKind::Class => Self::Class,
            DefinitionKind::Variable => Self::Variable,
        }
    }
}

/// What one local name refers to after an import.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ImportBinding {
    /// Module the name comes from; for module bindings, the module itself.
    pub origin: ModuleRef,
    /// Name inside `origin`, or the dotted module path for module bindings.
    pub original_name: String,
    pub kind_hint: KindHint,
    /// Index of the binding statement among the module's import statements.
    pub statement_index: usize,
    /// Byte offset of the statement, used to order against definitions.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ImportMap {
    pub module_id: ModuleId,
    pub bindings: BTreeMap<String, ImportBinding>,
}

impl ImportMap {
    pub fn get(&self, name: &str) -> Option<&ImportBinding> {
        self.bindings.get(name)
    }
}

/// One parsed import statement, before it is turned into bindings.
#[derive(Debug, Clone)]
pub(crate) struct ImportStmt {
    pub index: usize,
    pub position: usize,
    pub form: ImportForm,
}

#[derive(Debug, Clone)]
pub(crate) enum ImportForm {
    /// `import a.b.c` or `import a.b as x`; `alias` is `None` without `as`.
    Module { path: String, alias: Option<String> },
    /// `from <level dots><path> import name [as alias], ...`
    From {
        level: usize,
        path: String,
        names: Vec<(String, Option<String>)>,
    },
    /// `from <level dots><path> import *`
    Wildcard { level: usize, path: String },
}

pub(crate) fn import_statements(source: &str) -> Vec<ImportStmt> {
    let tree = parse_tree(source);
    let stmts: Vec<Node> = module_statements(tree.root_node(), source)
        .filter(|s| is_import(*s))
        .collect();
    stmts
        .into_iter()
        .enumerate()
        .flat_map(|(index, node)| parse_import(node, source, index))
        .collect()
}

/// Turns an import node into statement records. A single `import a, b`
/// statement yields one record per module.
pub(crate) fn parse_import(node: Node, source: &str, index: usize) -> Vec<ImportStmt> {
    let position = node.start_byte();
    let stmt = |form| ImportStmt {
        index,
        position,
        form,
    };
    match node.kind() {
        "import_statement" => named_children(node)
            .into_iter()
            .filter_map(|n| match n.kind() {
                "dotted_name" => Some(ImportForm::Module {
                    path: node_text(n, source).to_owned(),
                    alias: None,
                }),
                "aliased_import" => Some(ImportForm::Module {
                    path: field_text(n, "name", source)?,
                    alias: field_text(n, "alias", source),
                }),
                _ => None,
            })
            .map(stmt)
            .collect(),
        "import_from_statement" => {
            let Some(module) = node.child_by_field_name("module_name") else {
                return Vec::new();
            };
            let (level, path) = module_target(module, source);
            let mut names = Vec::new();
            let mut wildcard = false;
            for child in named_children(node) {
                if child.id() == module.id() {
                    continue;
                }
                match child.kind() {
                    "wildcard_import" => wildcard = true,
                    "dotted_name" => names.push((node_text(child, source).to_owned(), None)),
                    "aliased_import" => {
                        if let Some(name) = field_text(child, "name", source) {
                            names.push((name, field_text(child, "alias", source)));
                        }
                    }
                    _ => {}
                }
            }
            if wildcard {
                vec![stmt(ImportForm::Wildcard { level, path })]
            } else {
                vec![stmt(ImportForm::From { level, path, names })]
            }
        }
        _ => Vec::new(),
    }
}

fn field_text(node: Node, field: &str, source: &str) -> Option<String> {
    node.child_by_field_name(field)
        .map(|n| node_text(n, source).to_owned())
}

fn module_target(module: Node, source: &str) -> (usize, String) {
    if module.kind() == "relative_import" {
        let mut level = 0;
        let mut path = String::new();
        for child in named_children(module) {
            match child.kind() {
                "import_prefix" => {
                    level = node_text(child, source)
                        .chars()
                        .filter(|c| *c == '.')
                        .count()
                }
                "dotted_name" => path = node_text(child, source).to_owned(),
                _ => {}
            }
        }
        (level, path)
    } else {
        (0, node_text(module, source).to_owned())
    }
}

/// Resolves module paths inside one snapshot.
pub(crate) struct Resolver<'a> {
    snapshot: &'a RepositorySnapshot,
    root_name: Option<String>,
}

impl<'a> Resolver<'a> {
    pub fn new(snapshot: &'a RepositorySnapshot) -> Self {
        let root_name = snapshot
            .root()
            .file_name()
            .map(|n| n.to_string_lossy().into_owned());
        Self {
            snapshot,
            root_name,
        }
    }

    /// Maps an absolute dotted path to a module of the repository. Tries
    /// the exact id, then the id without the repository directory name as
    /// prefix, then a unique suffix match (not for standard library names).
    pub fn absolute(&self, path: &str) -> Option<ModuleId> {
        if path.is_empty() {
            return None;
        }
        let exact = ModuleId::new(path);
        if self.snapshot.contains(&exact) {
            return Some(exact);
        }
        if let Some(root) = &self.root_name {
            if let Some(rest) = path
                .strip_prefix(root.as_str())
                .and_then(|r| r.strip_prefix('.'))
            {
                let id = ModuleId::new(rest);
                if self.snapshot.contains(&id) {
                    return Some(id);
                }
            }
        }
        if is_stdlib(path) {
            return None;
        }
        let suffix = format!(".{path}");
        let mut matches = self
            .snapshot
            .modules()
            .iter()
            .filter(|m| m.id.as_str().ends_with(&suffix));
        match (matches.next(), matches.next()) {
            (Some(only), None) => Some(only.id.clone()),
            _ => None,
        }
    }

    /// Dotted package that relative imports in `module` start from.
    fn package_of(&self, module: &SourceModule) -> Vec<String> {
        let mut parts: Vec<String> = module.id.as_str().split('.').map(str::to_owned).collect();
        if !module.is_package() {
            parts.pop();
        }
        parts.retain(|p| !p.is_empty());
        parts
    }

    /// Absolute dotted path of a (possibly relative) import target, or
    /// `None` when the relative import climbs above the repository root.
    pub fn absolute_path(
        &self,
        importer: &SourceModule,
        level: usize,
        path: &str,
    ) -> Option<String> {
        if level == 0 {
            return Some(path.to_owned());
        }
        let mut base = self.package_of(importer);
        for _ in 1..level {
            base.pop()?;
        }
        if !path.is_empty() {
            base.extend(path.split('.').map(str::to_owned));
        }
        if base.is_empty() {
            return None;
        }
        Some(base.join("."))
    }

    pub fn module_ref(&self, importer: &SourceModule, level: usize, path: &str) -> ModuleRef {
        match self.absolute_path(importer, level, path) {
            Some(abs) => match self.absolute(&abs) {
                Some(id) => ModuleRef::Internal(id),
                None => ModuleRef::External(abs),
            },
            None => ModuleRef::External(format!("{}{path}", ".".repeat(level))),
        }
    }

    pub fn module(&self, id: &ModuleId) -> Option<&'a SourceModule> {
        self.snapshot.module(id)
    }
}

/// Public top-level definitions of a module, as a wildcard import sees them.
pub(crate) fn public_definitions(module: &SourceModule) -> Vec<(String, KindHint)> {
    let mut seen = std::collections::HashSet::new();
    module
        .top_level_definitions
        .iter()
        .filter(|d| !d.name.starts_with('_'))
        .filter(|d| seen.insert(d.name.clone()))
        .map(|d| {
            let kind = module.definition(&d.name).map_or(d.kind, |last| last.kind);
            (d.name.clone(), kind.into())
        })
        .collect()
}

/// Expands parsed statements into bindings, last binding winning.
pub(crate) fn bindings_for(
    resolver: &Resolver,
    module: &SourceModule,
    stmts: &[ImportStmt],
) -> BTreeMap<String, ImportBinding> {
    let mut bindings = BTreeMap::new();
    for stmt in stmts {
        for (local, binding) in stmt_bindings(resolver, module, stmt) {
            bindings.insert(local, binding);
        }
    }
    bindings
}

pub(crate) fn stmt_bindings(
    resolver: &Resolver,
    module: &SourceModule,
    stmt: &ImportStmt,
) -> Vec<(String, ImportBinding)> {
    let binding = |origin: ModuleRef, original_name: String, kind_hint| ImportBinding {
        origin,
        original_name,
        kind_hint,
        statement_index: stmt.index,
        position: stmt.position,
    };
    match &stmt.form {
        ImportForm::Module { path, alias } => {
            // `import a.b` binds `a`; `import a.b as x` binds `x` to `a.b`
            let bound_path = match alias {
                Some(_) => path.clone(),
                None => path.split('.').next().unwrap_or(path).to_owned(),
            };
            let local = alias.clone().unwrap_or_else(|| bound_path.clone());
            let origin = resolver.module_ref(module, 0, &bound_path);
            vec![(local, binding(origin, bound_path, KindHint::Module))]
        }
        ImportForm::From { level, path, names } => {
            let origin = resolver.module_ref(module, *level, path);
            names
                .iter()
                .map(|(name, alias)| {
                    let local = alias.clone().unwrap_or_else(|| name.clone());
                    let b = match &origin {
                        ModuleRef::Internal(id) => {
                            let def = resolver.module(id).and_then(|m| m.definition(name));
                            match def {
                                Some(d) => binding(origin.clone(), name.clone(), d.kind.into()),
                                None => submodule_or_name(
                                    resolver, module, *level, path, name, &origin, &binding,
                                ),
                            }
                        }
                        ModuleRef::External(_) => submodule_or_name(
                            resolver, module, *level, path, name, &origin, &binding,
                        ),
                    };
                    (local, b)
                })
                .collect()
        }
        ImportForm::Wildcard { level, path } => match resolver.module_ref(module, *level, path) {
            ModuleRef::Internal(id) => resolver
                .module(&id)
                .map(public_definitions)
                .unwrap_or_default()
                .into_iter()
                .map(|(name, kind)| {
                    (
                        name.clone(),
                        binding(ModuleRef::Internal(id.clone()), name, kind),
                    )
                })
                .collect(),
            ModuleRef::External(_) => Vec::new(),
        },
    }
}

/// `from pkg import name` where `name` is not defined by `pkg`: either a
/// submodule of the package or a name `pkg` itself imports.
fn submodule_or_name(
    resolver: &Resolver,
    module: &SourceModule,
    level: usize,
    path: &str,
    name: &str,
    origin: &ModuleRef,
    binding: &dyn Fn(ModuleRef, String, KindHint) -> ImportBinding,
) -> ImportBinding {
    let sub_path = if path.is_empty() {
        name.to_owned()
    } else {
        format!("{path}.{name}")
    };
    if let ModuleRef::Internal(sub) = resolver.module_ref(module, level, &sub_path) {
        return binding(
            ModuleRef::Internal(sub.clone()),
            sub.to_string(),
            KindHint::Module,
        );
    }
    binding(origin.clone(), name.to_owned(), KindHint::Unknown)
}

/// Bindings introduced by the import statements of `module`.
pub fn resolve_imports(module: &SourceModule, graph: &RepositorySnapshot) -> ImportMap {
    let resolver = Resolver::new(graph);
    let stmts = import_statements(&module.source);
    ImportMap {
        module_id: module.id.clone(),
        bindings: bindings_for(&resolver, module, &stmts),
    }
}
