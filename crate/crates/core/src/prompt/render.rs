use tree_sitter::Node;

use crate::model::{ContextLevel, DefinitionKind, DependencyRecord};
use crate::python::{docstring_node, named_children, parse_tree, unwrap_decorated};

/// Definition text reduced to the given level. Variables never change.
pub fn render_definition(dep: &DependencyRecord, level: ContextLevel) -> String {
    if dep.kind == DefinitionKind::Variable || level == ContextLevel::Full {
        return dep.definition_text.trim_end().to_owned();
    }
    strip_bodies(&dep.definition_text, level)
}

/// Removes function bodies (medium) and docstrings too (small) from a
/// top-level definition.
pub fn strip_bodies(text: &str, level: ContextLevel) -> String {
    let tree = parse_tree(text);
    let mut cuts = Vec::new();
    for stmt in named_children(tree.root_node()) {
        collect_cuts(unwrap_decorated(stmt), level, &mut cuts);
    }
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    cuts.sort_unstable();
    for (a, b) in cuts {
        let (a, b) = widen_to_lines(text, a, b);
        if a < pos {
            continue;
        }
        out.push_str(&text[pos..a]);
        pos = b;
    }
    out.push_str(&text[pos..]);
    let lines: Vec<&str> = out.lines().map(str::trim_end).collect();
    lines.join("\n").trim_end().to_owned()
}

fn collect_cuts(def: Node, level: ContextLevel, cuts: &mut Vec<(usize, usize)>) {
    let Some(body) = def.child_by_field_name("body") else {
        return;
    };
    let doc = docstring_node(body);
    match def.kind() {
        "function_definition" => {
            let keep_doc = level == ContextLevel::Medium && doc.is_some();
            let stmts: Vec<Node> = named_children(body)
                .into_iter()
                .filter(|s| !(keep_doc && doc.is_some_and(|d| d.id() == s.id())))
                .collect();
            if let (Some(first), Some(last)) = (stmts.first(), stmts.last()) {
                cuts.push((first.start_byte(), last.end_byte()));
            }
        }
        "class_definition" => {
            for stmt in named_children(body) {
                let inner = unwrap_decorated(stmt);
                let is_doc = doc.is_some_and(|d| d.id() == stmt.id());
                if matches!(inner.kind(), "function_definition" | "class_definition") {
                    collect_cuts(inner, level, cuts);
                } else if !(is_doc && level == ContextLevel::Medium) {
                    cuts.push((stmt.start_byte(), stmt.end_byte()));
                }
            }
        }
        _ => {}
    }
}

/// Extends a cut to whole lines when only whitespace surrounds it.
fn widen_to_lines(text: &str, a: usize, b: usize) -> (usize, usize) {
    let line_start = text[..a].rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[b..].find('\n').map_or(text.len(), |i| b + i + 1);
    let before_blank = text[line_start..a].trim().is_empty();
    let after_blank = text[b..line_end].trim().is_empty();
    if before_blank && after_blank {
        (line_start, line_end)
    } else {
        (a, b)
    }
}
