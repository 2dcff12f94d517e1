use std::collections::{BTreeMap, HashMap, HashSet};

use tree_sitter::Node;

use super::builtins::is_builtin;
use super::graph::RepoGraph;
use super::imports::{
    parse_import, stmt_bindings, ImportBinding, ImportForm, ImportStmt, KindHint,
};
use super::DepError;
use crate::model::{
    DefinitionKind, DependencyRecord, FunctionRecord, Locality, ModuleId, ModuleRef, Span,
    MAX_DEPENDENCY_DEPTH,
};
use crate::python::{docstring_node, named_children, node_text, unwrap_decorated, ParsedModule};
use crate::text::strip_continuation_indent;

/// A free name read inside an analyzed scope.
#[derive(Debug, Clone)]
pub(crate) struct Reference {
    pub name: String,
    /// Attribute members following the name, `a.b.c` gives `[b, c]`.
    pub chain: Vec<String>,
    pub annotation: bool,
    /// Set when the name is bound by an import inside the scope itself.
    pub via: Option<ImportStmt>,
}

#[derive(Default)]
struct Frame {
    params: HashSet<String>,
    bound: HashMap<String, Option<ImportStmt>>,
    globals: HashSet<String>,
}

/// Single pass over a scope in evaluation order. A name counts as local
/// once a binding for it has been seen; everything else is a reference.
struct ScopeWalker<'s> {
    src: &'s str,
    frames: Vec<Frame>,
    refs: Vec<Reference>,
    annotation: bool,
}

impl<'s> ScopeWalker<'s> {
    fn new(src: &'s str) -> Self {
        Self {
            src,
            frames: vec![Frame::default()],
            refs: Vec::new(),
            annotation: false,
        }
    }

    fn text(&self, node: Node) -> &'s str {
        node_text(node, self.src)
    }

    fn use_name(&mut self, name: &str, chain: Vec<String>) {
        let mut via = None;
        for frame in self.frames.iter().rev() {
            if frame.globals.contains(name) {
                break;
            }
            if frame.params.contains(name) {
                return;
            }
            if let Some(binding) = frame.bound.get(name) {
                match binding {
                    Some(stmt) => {
                        via = Some(stmt.clone());
                        break;
                    }
                    None => return,
                }
            }
        }
        self.refs.push(Reference {
            name: name.to_owned(),
            chain,
            annotation: self.annotation,
            via,
        });
    }

    fn bind(&mut self, name: &str, import: Option<ImportStmt>) {
        let frame = self.frames.last_mut().expect("walker always has a frame");
        if frame.globals.contains(name) {
            // rebinding a declared global writes the module-level name
            self.use_name(name, Vec::new());
            return;
        }
        frame.bound.entry(name.to_owned()).or_insert(import);
    }

    fn bind_target(&mut self, node: Node) {
        match node.kind() {
            "identifier" => {
                let name = self.text(node);
                self.bind(name, None);
            }
            "pattern_list"
            | "tuple_pattern"
            | "list_pattern"
            | "tuple"
            | "list"
            | "parenthesized_expression"
            | "list_splat_pattern"
            | "list_splat"
            | "as_pattern_target" => {
                for child in named_children(node) {
                    self.bind_target(child);
                }
            }
            _ => self.visit(node),
        }
    }

    fn visit_children(&mut self, node: Node) {
        for child in named_children(node) {
            self.visit(child);
        }
    }

    fn visit_field(&mut self, node: Node, field: &str) {
        if let Some(child) = node.child_by_field_name(field) {
            self.visit(child);
        }
    }

    fn visit_annotation(&mut self, node: Option<Node>) {
        if let Some(node) = node {
            let saved = std::mem::replace(&mut self.annotation, true);
            self.visit(node);
            self.annotation = saved;
        }
    }

    fn visit(&mut self, node: Node) {
        match node.kind() {
            "identifier" => {
                let name = self.text(node);
                self.use_name(name, Vec::new());
            }
            "comment" => {}
            "attribute" => {
                let mut chain = Vec::new();
                let mut cur = node;
                while cur.kind() == "attribute" {
                    if let Some(attr) = cur.child_by_field_name("attribute") {
                        chain.push(self.text(attr).to_owned());
                    }
                    match cur.child_by_field_name("object") {
                        Some(obj) => cur = obj,
                        None => return,
                    }
                }
                chain.reverse();
                if cur.kind() == "identifier" {
                    let name = self.text(cur);
                    self.use_name(name, chain);
                } else {
                    self.visit(cur);
                }
            }
            "keyword_argument" => self.visit_field(node, "value"),
            "type" => {
                let saved = std::mem::replace(&mut self.annotation, true);
                self.visit_children(node);
                self.annotation = saved;
            }
            "assignment" => {
                self.visit_field(node, "right");
                self.visit_annotation(node.child_by_field_name("type"));
                if let Some(left) = node.child_by_field_name("left") {
                    self.bind_target(left);
                }
            }
            "augmented_assignment" => {
                self.visit_field(node, "right");
                if let Some(left) = node.child_by_field_name("left") {
                    self.visit(left);
                    self.bind_target(left);
                }
            }
            "for_statement" => {
                self.visit_field(node, "right");
                if let Some(left) = node.child_by_field_name("left") {
                    self.bind_target(left);
                }
                self.visit_field(node, "body");
                self.visit_field(node, "alternative");
            }
            "as_pattern" => {
                let alias = node.child_by_field_name("alias");
                for child in named_children(node) {
                    if alias.is_some_and(|a| a.id() == child.id()) {
                        self.bind_target(child);
                    } else {
                        self.visit(child);
                    }
                }
            }
            "named_expression" => {
                self.visit_field(node, "value");
                if let Some(name) = node.child_by_field_name("name") {
                    self.bind_target(name);
                }
            }
            "global_statement" => {
                for child in named_children(node) {
                    let name = self.text(child).to_owned();
                    self.frames.last_mut().expect("frame").globals.insert(name);
                }
            }
            "nonlocal_statement" => {
                for child in named_children(node) {
                    let name = self.text(child);
                    self.bind(name, None);
                }
            }
            "import_statement" | "import_from_statement" => {
                for stmt in parse_import(node, self.src, 0) {
                    for local in locals_of(&stmt) {
                        self.bind(&local, Some(stmt.clone()));
                    }
                }
            }
            "lambda" => {
                let params = node.child_by_field_name("parameters");
                let names = params.map(|p| self.parameters(p)).unwrap_or_default();
                self.frames.push(Frame {
                    params: names,
                    ..Frame::default()
                });
                self.visit_field(node, "body");
                self.frames.pop();
            }
            "list_comprehension"
            | "set_comprehension"
            | "dictionary_comprehension"
            | "generator_expression" => {
                let mut frame = Frame::default();
                let mut targets = Vec::new();
                for clause in named_children(node) {
                    if clause.kind() == "for_in_clause" {
                        if let Some(left) = clause.child_by_field_name("left") {
                            let mut names = Vec::new();
                            crate::python::pattern_names(left, self.src, &mut names);
                            targets.extend(names);
                        }
                    }
                }
                for t in targets {
                    frame.bound.insert(t, None);
                }
                self.frames.push(frame);
                for clause in named_children(node) {
                    if clause.kind() == "for_in_clause" {
                        self.visit_field(clause, "right");
                    } else {
                        self.visit(clause);
                    }
                }
                self.frames.pop();
            }
            "decorated_definition" => {
                for child in named_children(node) {
                    if child.kind() == "decorator" {
                        self.visit_children(child);
                    }
                }
                self.visit_field(node, "definition");
            }
            "function_definition" => {
                let params = node.child_by_field_name("parameters");
                let names = params.map(|p| self.parameters(p)).unwrap_or_default();
                self.visit_annotation(node.child_by_field_name("return_type"));
                if let Some(name) = node.child_by_field_name("name") {
                    let name = self.text(name);
                    self.bind(name, None);
                }
                self.frames.push(Frame {
                    params: names,
                    ..Frame::default()
                });
                self.visit_field(node, "body");
                self.frames.pop();
            }
            "class_definition" => {
                self.visit_field(node, "superclasses");
                if let Some(name) = node.child_by_field_name("name") {
                    let name = self.text(name);
                    self.bind(name, None);
                }
                self.frames.push(Frame::default());
                self.visit_field(node, "body");
                self.frames.pop();
            }
            _ => self.visit_children(node),
        }
    }

    /// Parameter names of a def or lambda. Defaults and annotations are
    /// evaluated in the enclosing scope and visited here.
    fn parameters(&mut self, params: Node) -> HashSet<String> {
        let mut names = HashSet::new();
        for p in named_children(params) {
            match p.kind() {
                "identifier" => {
                    names.insert(self.text(p).to_owned());
                }
                "list_splat_pattern" | "dictionary_splat_pattern" => {
                    if let Some(id) = p.named_child(0) {
                        names.insert(self.text(id).to_owned());
                    }
                }
                "typed_parameter" => {
                    if let Some(first) = p.named_child(0) {
                        let id = if first.kind() == "identifier" {
                            Some(first)
                        } else {
                            first.named_child(0)
                        };
                        if let Some(id) = id {
                            names.insert(self.text(id).to_owned());
                        }
                    }
                    self.visit_annotation(p.child_by_field_name("type"));
                }
                "default_parameter" | "typed_default_parameter" => {
                    if let Some(name) = p.child_by_field_name("name") {
                        names.insert(self.text(name).to_owned());
                    }
                    self.visit_annotation(p.child_by_field_name("type"));
                    self.visit_field(p, "value");
                }
                _ => {}
            }
        }
        names
    }
}

fn locals_of(stmt: &ImportStmt) -> Vec<String> {
    match &stmt.form {
        ImportForm::Module { path, alias } => {
            vec![alias
                .clone()
                .unwrap_or_else(|| path.split('.').next().unwrap_or(path).to_owned())]
        }
        ImportForm::From { names, .. } => names
            .iter()
            .map(|(n, a)| a.clone().unwrap_or_else(|| n.clone()))
            .collect(),
        ImportForm::Wildcard { .. } => Vec::new(),
    }
}

/// References made by a function body: parameters are excluded, the
/// header (decorators, defaults, annotations) is not part of the scope.
pub(crate) fn function_body_refs(def: Node, src: &str) -> Vec<Reference> {
    let mut walker = ScopeWalker::new(src);
    let params = def
        .child_by_field_name("parameters")
        .map(|p| ScopeWalker::new(src).parameters(p))
        .unwrap_or_default();
    walker.frames[0].params = params;
    if let Some(body) = def.child_by_field_name("body") {
        let doc = docstring_node(body).map(|d| d.id());
        for stmt in named_children(body) {
            if Some(stmt.id()) != doc {
                walker.visit(stmt);
            }
        }
    }
    walker.refs
}

/// References made by a whole top-level statement (class or assignment).
fn statement_refs(node: Node, src: &str) -> Vec<Reference> {
    let mut walker = ScopeWalker::new(src);
    walker.visit(node);
    walker.refs
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Resolved {
    Definition {
        module: ModuleId,
        name: String,
        kind: DefinitionKind,
    },
    Module {
        path: String,
        id: Option<ModuleId>,
    },
    Unresolved,
}

/// Definition reached while walking the graph, with where it was found.
#[derive(Debug, Clone)]
struct Found {
    module: ModuleId,
    def_name: String,
    kind: DefinitionKind,
    /// Name as written at the reference site.
    name: String,
}

impl RepoGraph {
    /// Dependencies of `target` up to `max_depth` levels, ordered by depth,
    /// then by the import statement that brings in their module (in-file
    /// definitions after imports), then by declaration order.
    pub fn extract_dependencies(
        &self,
        target: &FunctionRecord,
        max_depth: u32,
    ) -> Result<Vec<DependencyRecord>, DepError> {
        if !(1..=MAX_DEPENDENCY_DEPTH).contains(&max_depth) {
            return Err(DepError::Depth(max_depth));
        }
        let not_found =
            || DepError::TargetNotFound(format!("{}.{}", target.module_id, target.qualified_name));
        let parsed = self.parsed(&target.module_id).ok_or_else(not_found)?;
        let outer = node_at(parsed, &target.span).ok_or_else(not_found)?;
        let def = unwrap_decorated(outer);
        if def.kind() != "function_definition" {
            return Err(not_found());
        }

        let target_key = target.class_name().unwrap_or(target.name()).to_owned();
        let mut seen: HashSet<(ModuleId, String)> = HashSet::new();
        seen.insert((target.module_id.clone(), target_key));

        let mut records: Vec<(DependencyRecord, (usize, String, usize))> = Vec::new();
        let ranks = self.origin_ranks(&target.module_id);
        let mut frontier = vec![(
            target.module_id.clone(),
            function_body_refs(def, parsed.source()),
        )];

        for depth in 1..=max_depth {
            let mut next = Vec::new();
            for (module, refs) in frontier {
                for found in self.resolve_refs(&module, &refs) {
                    if !seen.insert((found.module.clone(), found.def_name.clone())) {
                        continue;
                    }
                    let Some((record, start, node_refs)) = self.record_for(&found, target, depth)
                    else {
                        continue;
                    };
                    let rank = ranks.get(&found.module).copied().unwrap_or(
                        if found.module == target.module_id {
                            usize::MAX - 1
                        } else {
                            usize::MAX
                        },
                    );
                    records.push((record, (rank, found.module.to_string(), start)));
                    if depth < max_depth {
                        next.push((found.module.clone(), node_refs));
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }

        records.sort_by(|(a, ka), (b, kb)| a.depth.cmp(&b.depth).then_with(|| ka.cmp(kb)));
        Ok(records.into_iter().map(|(r, _)| r).collect())
    }

    /// Import statement index through which each internal module is first
    /// brought into `module`; the module itself ranks after all imports.
    fn origin_ranks(&self, module: &ModuleId) -> HashMap<ModuleId, usize> {
        let mut ranks = HashMap::new();
        let Some(source_module) = self.snapshot().module(module) else {
            return ranks;
        };
        let resolver = self.resolver();
        let stmts = self.import_stmts(module);
        for stmt in stmts {
            let mut origins = Vec::new();
            for (_, b) in stmt_bindings(&resolver, source_module, stmt) {
                if let ModuleRef::Internal(id) = &b.origin {
                    origins.push(id.clone());
                    if let Resolved::Definition { module, .. } =
                        self.resolve_binding(&b, &mut HashSet::new())
                    {
                        origins.push(module);
                    }
                }
            }
            for id in origins {
                ranks.entry(id).or_insert(stmt.index);
            }
        }
        let last = stmts.iter().map(|s| s.index + 1).max().unwrap_or(0);
        ranks.insert(module.clone(), last);
        ranks
    }

    fn resolve_refs(&self, module: &ModuleId, refs: &[Reference]) -> Vec<Found> {
        // a name used only in annotations is a typing object
        let mut non_annotation: HashSet<&str> = HashSet::new();
        for r in refs {
            if !r.annotation {
                non_annotation.insert(&r.name);
            }
        }
        let mut out = Vec::new();
        for r in refs {
            if !non_annotation.contains(r.name.as_str()) {
                continue;
            }
            let root = match &r.via {
                Some(stmt) => self.resolve_local_import(module, &r.name, stmt),
                None => {
                    let scope = self.module_scope(module, &r.name);
                    if matches!(scope, Resolved::Unresolved) && is_builtin(&r.name) {
                        continue;
                    }
                    scope
                }
            };
            let (resolved, name) = self.follow_chain(root, &r.name, &r.chain);
            if let Resolved::Definition {
                module,
                name: def_name,
                kind,
            } = resolved
            {
                out.push(Found {
                    module,
                    def_name,
                    kind,
                    name,
                });
            }
        }
        out
    }

    /// Walks `a.b.c` through module bindings until a definition is reached.
    fn follow_chain(
        &self,
        mut resolved: Resolved,
        name: &str,
        chain: &[String],
    ) -> (Resolved, String) {
        let mut name = name.to_owned();
        for member in chain {
            let Resolved::Module { path, id } = &resolved else {
                break;
            };
            let inside = id
                .as_ref()
                .map(|id| self.name_in_module(id, member, &mut HashSet::new()))
                .unwrap_or(Resolved::Unresolved);
            resolved = match inside {
                Resolved::Unresolved => {
                    let sub = format!("{path}.{member}");
                    match self.resolver().absolute(&sub) {
                        Some(id) => Resolved::Module {
                            path: sub,
                            id: Some(id),
                        },
                        None => Resolved::Unresolved,
                    }
                }
                other => other,
            };
            name = member.clone();
        }
        (resolved, name)
    }

    fn resolve_local_import(&self, module: &ModuleId, local: &str, stmt: &ImportStmt) -> Resolved {
        let Some(source_module) = self.snapshot().module(module) else {
            return Resolved::Unresolved;
        };
        stmt_bindings(&self.resolver(), source_module, stmt)
            .into_iter()
            .find(|(name, _)| name == local)
            .map(|(_, b)| self.resolve_binding(&b, &mut HashSet::new()))
            .unwrap_or(Resolved::Unresolved)
    }

    /// Resolves a module-level name of `module`.
    fn module_scope(&self, module: &ModuleId, name: &str) -> Resolved {
        self.name_in_module(module, name, &mut HashSet::new())
    }

    fn name_in_module(
        &self,
        module: &ModuleId,
        name: &str,
        visited: &mut HashSet<(ModuleId, String)>,
    ) -> Resolved {
        if !visited.insert((module.clone(), name.to_owned())) {
            return Resolved::Unresolved;
        }
        let Some(m) = self.snapshot().module(module) else {
            return Resolved::Unresolved;
        };
        let def = m.definition(name);
        let imported = self.import_map(module).and_then(|map| map.get(name));
        match (def, imported) {
            (Some(d), Some(b)) if b.position > d.span.start_byte => {
                self.resolve_binding(b, visited)
            }
            (Some(d), _) => Resolved::Definition {
                module: module.clone(),
                name: d.name.clone(),
                kind: d.kind,
            },
            (None, Some(b)) => self.resolve_binding(b, visited),
            (None, None) => Resolved::Unresolved,
        }
    }

    fn resolve_binding(
        &self,
        b: &ImportBinding,
        visited: &mut HashSet<(ModuleId, String)>,
    ) -> Resolved {
        match (&b.origin, b.kind_hint) {
            (ModuleRef::Internal(id), KindHint::Module) => Resolved::Module {
                path: b.original_name.clone(),
                id: Some(id.clone()),
            },
            (ModuleRef::External(path), KindHint::Module) => Resolved::Module {
                path: path.clone(),
                id: None,
            },
            (ModuleRef::Internal(id), _) => self.name_in_module(id, &b.original_name, visited),
            (ModuleRef::External(_), _) => Resolved::Unresolved,
        }
    }

    /// Builds the record for a definition and collects the references its
    /// own body makes, for the next depth level.
    fn record_for(
        &self,
        found: &Found,
        target: &FunctionRecord,
        depth: u32,
    ) -> Option<(DependencyRecord, usize, Vec<Reference>)> {
        let module = self.snapshot().module(&found.module)?;
        let parsed = self.parsed(&found.module)?;
        let def = module
            .top_level_definitions
            .iter()
            .rev()
            .find(|d| d.name == found.def_name && d.kind == found.kind)?;
        let node = node_at(parsed, &def.span)?;
        let column = node.start_position().column;
        let src = parsed.source();
        let text = |a: usize, b: usize| strip_continuation_indent(&src[a..b], column);
        let inner = unwrap_decorated(node);

        let (signature, docstring, refs) = match found.kind {
            DefinitionKind::Function | DefinitionKind::Class => {
                let body = inner.child_by_field_name("body");
                let header_end = body
                    .and_then(|b| b.prev_sibling())
                    .map_or(inner.end_byte(), |c| c.end_byte());
                let doc = body
                    .and_then(docstring_node)
                    .map(|d| text(d.start_byte(), d.end_byte()));
                let refs = if found.kind == DefinitionKind::Function {
                    function_body_refs(inner, src)
                } else {
                    statement_refs(inner, src)
                };
                (text(inner.start_byte(), header_end), doc, refs)
            }
            DefinitionKind::Variable => (
                text(node.start_byte(), node.end_byte()),
                None,
                statement_refs(node, src),
            ),
        };
        let locality = if found.module == target.module_id {
            Locality::InFile
        } else {
            Locality::CrossFile
        };
        let record = DependencyRecord {
            name: found.name.clone(),
            kind: found.kind,
            origin: found.module.clone(),
            locality,
            definition_text: text(node.start_byte(), node.end_byte()),
            signature,
            docstring,
            depth,
        };
        Some((record, def.span.start_byte, refs))
    }
}

/// The syntax node whose byte range is exactly `span`.
pub(crate) fn node_at<'t>(parsed: &'t ParsedModule, span: &Span) -> Option<Node<'t>> {
    let mut node = parsed
        .root()
        .descendant_for_byte_range(span.start_byte, span.end_byte)?;
    loop {
        if node.start_byte() == span.start_byte && node.end_byte() == span.end_byte {
            // the outermost node with this range is the statement
            while let Some(parent) = node.parent() {
                if parent.start_byte() == span.start_byte
                    && parent.end_byte() == span.end_byte
                    && parent.kind() != "module"
                {
                    node = parent;
                } else {
                    break;
                }
            }
            return Some(node);
        }
        node = node.parent()?;
    }
}

/// Names grouped by module; handy for tests and reports.
pub fn names_by_origin(records: &[DependencyRecord]) -> BTreeMap<ModuleId, Vec<String>> {
    let mut out: BTreeMap<ModuleId, Vec<String>> = BTreeMap::new();
    for r in records {
        out.entry(r.origin.clone())
            .or_default()
            .push(r.name.clone());
    }
    out
}
