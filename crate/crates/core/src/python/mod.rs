//! Python source analysis on top of tree-sitter.

mod functions;
mod identifiers;
mod tokens;

use std::cell::RefCell;

use tree_sitter::{Node, Parser, Tree};

use crate::model::{Definition, DefinitionKind, ModuleId, Span};

pub use functions::{extract_functions, Extraction, SkipReason, SkippedFunction};
pub use identifiers::{collect_identifiers, is_keyword, IdentifierSet};
pub use tokens::{count_tokens, detect_empty_body};

pub(crate) use identifiers::harvest_identifiers;

thread_local! {
    static PARSER: RefCell<Parser> = RefCell::new({
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .expect("bundled Python grammar is ABI compatible");
        parser
    });
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

/// A parsed source file. Parsing never fails; problems are reported in
/// `parse_errors`.
#[derive(Debug, Clone)]
pub struct ParsedModule {
    pub module_id: ModuleId,
    source: String,
    tree: Tree,
    pub parse_errors: Vec<ParseError>,
}

pub fn parse_module(source: &str) -> ParsedModule {
    parse_named(ModuleId::new(""), source)
}

pub fn parse_named(module_id: ModuleId, source: &str) -> ParsedModule {
    let tree = parse_tree(source);
    let mut parse_errors = Vec::new();
    collect_errors(tree.root_node(), &mut parse_errors);
    ParsedModule {
        module_id,
        source: source.to_owned(),
        tree,
        parse_errors,
    }
}

pub(crate) fn parse_tree(source: &str) -> Tree {
    PARSER.with(|p| {
        p.borrow_mut()
            .parse(source, None)
            .expect("parser has a language and no timeout")
    })
}

fn collect_errors(node: Node, out: &mut Vec<ParseError>) {
    if !node.has_error() {
        return;
    }
    if node.is_missing() {
        out.push(ParseError {
            span: span_of(node),
            message: format!("missing `{}`", node.kind()),
        });
        return;
    }
    if node.is_error() {
        out.push(ParseError {
            span: span_of(node),
            message: "syntax error".into(),
        });
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_errors(child, out);
    }
}

impl ParsedModule {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn root(&self) -> Node<'_> {
        self.tree.root_node()
    }

    pub fn is_clean(&self) -> bool {
        self.parse_errors.is_empty()
    }

    pub fn text(&self, node: Node) -> &str {
        node_text(node, &self.source)
    }

    /// Top-level bindings in file order. Definitions nested in top-level
    /// `if`/`try` blocks count, except those under the `__main__` guard.
    /// When a name is rebound with the same kind, the last binding is kept.
    pub fn top_level_definitions(&self) -> Vec<Definition> {
        let mut defs: Vec<Definition> = Vec::new();
        for stmt in module_statements(self.root(), &self.source) {
            let found = match stmt.kind() {
                "function_definition" | "class_definition" | "decorated_definition" => {
                    let def = unwrap_decorated(stmt);
                    let kind = if def.kind() == "class_definition" {
                        DefinitionKind::Class
                    } else {
                        DefinitionKind::Function
                    };
                    def.child_by_field_name("name")
                        .map(|n| vec![(self.text(n).to_owned(), kind)])
                        .unwrap_or_default()
                }
                "expression_statement" => assigned_names(stmt, &self.source)
                    .into_iter()
                    .map(|n| (n, DefinitionKind::Variable))
                    .collect(),
                _ => Vec::new(),
            };
            for (name, kind) in found {
                defs.retain(|d| !(d.name == name && d.kind == kind));
                defs.push(Definition {
                    name,
                    kind,
                    span: span_of(stmt),
                });
            }
        }
        defs.sort_by_key(|d| d.span.start_byte);
        defs
    }

    /// Raw text of module-level import statements in file order.
    pub fn import_statements(&self) -> Vec<String> {
        module_statements(self.root(), &self.source)
            .filter(|s| is_import(*s))
            .map(|s| self.text(s).to_owned())
            .collect()
    }
}

pub(crate) fn is_import(node: Node) -> bool {
    matches!(
        node.kind(),
        "import_statement" | "import_from_statement" | "future_import_statement"
    )
}

pub(crate) fn node_text<'s>(node: Node, source: &'s str) -> &'s str {
    &source[node.start_byte()..node.end_byte()]
}

pub(crate) fn span_of(node: Node) -> Span {
    Span {
        start_byte: node.start_byte(),
        end_byte: node.end_byte(),
        start_line: node.start_position().row as u32 + 1,
        end_line: node.end_position().row as u32 + 1,
    }
}

pub(crate) fn unwrap_decorated(node: Node) -> Node {
    if node.kind() == "decorated_definition" {
        node.child_by_field_name("definition").unwrap_or(node)
    } else {
        node
    }
}

pub(crate) fn named_children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

/// Statements executed at module import time, flattening top-level
/// conditional and `try` blocks but skipping the `__main__` guard.
pub(crate) fn module_statements<'t>(
    root: Node<'t>,
    source: &'t str,
) -> impl Iterator<Item = Node<'t>> + 't {
    let mut out = Vec::new();
    flatten_statements(root, source, &mut out);
    out.into_iter()
}

fn flatten_statements<'t>(container: Node<'t>, source: &str, out: &mut Vec<Node<'t>>) {
    for stmt in named_children(container) {
        match stmt.kind() {
            "if_statement" if is_main_guard(stmt, source) => {}
            "if_statement" | "try_statement" => {
                for block in block_parts(stmt) {
                    flatten_statements(block, source, out);
                }
            }
            _ => out.push(stmt),
        }
    }
}

/// Blocks of a compound statement, including its `elif`/`else`/`except`/
/// `finally` clauses.
pub(crate) fn block_parts(stmt: Node) -> Vec<Node> {
    let mut blocks = Vec::new();
    for part in named_children(stmt) {
        match part.kind() {
            "block" => blocks.push(part),
            "elif_clause" | "else_clause" | "except_clause" | "finally_clause" => {
                blocks.extend(block_parts(part))
            }
            _ => {}
        }
    }
    blocks
}

/// `if __name__ == "__main__":`, in either operand order.
pub(crate) fn is_main_guard(node: Node, source: &str) -> bool {
    let Some(cond) = node.child_by_field_name("condition") else {
        return false;
    };
    if cond.kind() != "comparison_operator" {
        return false;
    }
    let parts = named_children(cond);
    let has_name = parts
        .iter()
        .any(|n| n.kind() == "identifier" && node_text(*n, source) == "__name__");
    let has_main = parts
        .iter()
        .any(|n| n.kind() == "string" && string_value(*n, source).as_deref() == Some("__main__"));
    has_name && has_main
}

/// Contents of a plain string literal without interpolation.
pub(crate) fn string_value(node: Node, source: &str) -> Option<String> {
    let mut value = String::new();
    for child in named_children(node) {
        match child.kind() {
            "string_start" | "string_end" => {}
            "string_content" => value.push_str(node_text(child, source)),
            _ => return None,
        }
    }
    Some(value)
}

/// Names bound by an assignment statement at the left-hand side.
pub(crate) fn assigned_names(stmt: Node, source: &str) -> Vec<String> {
    let mut names = Vec::new();
    for child in named_children(stmt) {
        let mut node = child;
        // chained `a = b = 1` nests assignments on the right
        while node.kind() == "assignment" {
            if let Some(left) = node.child_by_field_name("left") {
                pattern_names(left, source, &mut names);
            }
            match node.child_by_field_name("right") {
                Some(right) => node = right,
                None => break,
            }
        }
    }
    names
}

pub(crate) fn pattern_names(node: Node, source: &str, out: &mut Vec<String>) {
    match node.kind() {
        "identifier" => out.push(node_text(node, source).to_owned()),
        "pattern_list"
        | "tuple_pattern"
        | "list_pattern"
        | "list_splat_pattern"
        | "parenthesized_expression" => {
            for child in named_children(node) {
                pattern_names(child, source, out);
            }
        }
        _ => {}
    }
}

/// The docstring expression statement of a function or class body.
pub(crate) fn docstring_node(body: Node) -> Option<Node> {
    let first = named_children(body)
        .into_iter()
        .find(|n| n.kind() != "comment")?;
    if first.kind() != "expression_statement" {
        return None;
    }
    let expr = first.named_child(0)?;
    (first.named_child_count() == 1 && matches!(expr.kind(), "string" | "concatenated_string"))
        .then_some(first)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_assignment() {
        let m = parse_module("x = 1");
        assert!(m.parse_errors.is_empty());
        let defs = m.top_level_definitions();
        assert_eq!(defs.len(), 1);
        assert_eq!(defs[0].name, "x");
        assert_eq!(defs[0].kind, DefinitionKind::Variable);
    }

    #[test]
    fn broken_header_reports_errors() {
        assert!(!parse_module("def f(:").parse_errors.is_empty());
    }

    #[test]
    fn main_guard_and_conditionals() {
        let src = "\
try:
    import ujson as json
except ImportError:
    import json

if True:
    A = 1
else:
    A = 2

if __name__ == '__main__':
    B = 3
";
        let m = parse_module(src);
        let names: Vec<_> = m
            .top_level_definitions()
            .into_iter()
            .map(|d| d.name)
            .collect();
        assert_eq!(names, ["A"]);
        assert_eq!(
            m.import_statements(),
            ["import ujson as json", "import json"]
        );
    }

    #[test]
    fn rebinding_keeps_last() {
        let m = parse_module("X = 1\ndef X(): pass\nX = 2\na, (b, c) = 1, (2, 3)\nd = e = 0\n");
        let defs = m.top_level_definitions();
        let x_var = defs
            .iter()
            .find(|d| d.name == "X" && d.kind == DefinitionKind::Variable)
            .unwrap();
        assert_eq!(x_var.span.start_line, 3);
        let names: Vec<_> = defs.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, ["X", "X", "a", "b", "c", "d", "e"]);
    }
}
