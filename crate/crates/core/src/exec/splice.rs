use thiserror::Error;
use tree_sitter::Node;

use crate::model::FunctionRecord;
use crate::python::{named_children, node_text, parse_tree, unwrap_decorated};
use crate::text::{dedent, indent};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpliceError {
    #[error("candidate does not define `{0}`")]
    MissingFunction(String),
    #[error("candidate has syntax errors")]
    Syntax,
    #[error("module no longer parses after splicing")]
    Module,
    #[error("target span {0}..{1} is outside the module")]
    Span(usize, usize),
}

/// Top-level definition of `name` in `code`, decorators included.
fn find_def<'t>(root: Node<'t>, code: &str, name: &str) -> Option<Node<'t>> {
    named_children(root).into_iter().find(|stmt| {
        let def = unwrap_decorated(*stmt);
        def.kind() == "function_definition"
            && def
                .child_by_field_name("name")
                .is_some_and(|n| node_text(n, code) == name)
    })
}

/// Builds a complete function from a model completion.
///
/// A completion that defines the target itself is used as is (only that
/// definition is kept). Otherwise it is read as the continuation of the
/// target's prompt and cut at the first line that leaves the function.
pub fn assemble_candidate(target: &FunctionRecord, completion: &str) -> String {
    let code = dedent(completion);
    let tree = parse_tree(&code);
    if let Some(def) = find_def(tree.root_node(), &code, target.name()) {
        if !def.has_error() {
            return node_text(def, &code).to_owned() + "\n";
        }
    }
    let mut body = String::new();
    for line in completion.trim_start_matches('\n').split_inclusive('\n') {
        if !line.trim().is_empty() && !line.starts_with([' ', '\t']) {
            break;
        }
        body.push_str(line);
    }
    let body = body.trim_end();
    if body.is_empty() {
        format!("{}\n", target.prompt)
    } else {
        format!("{}\n{body}\n", target.prompt)
    }
}

/// Replaces the target's definition in `module_source` with `candidate`,
/// re-indented to the target's column.
pub fn splice_candidate(
    module_source: &str,
    target: &FunctionRecord,
    candidate: &str,
) -> Result<String, SpliceError> {
    let code = dedent(candidate);
    let tree = parse_tree(&code);
    let def = find_def(tree.root_node(), &code, target.name())
        .ok_or_else(|| SpliceError::MissingFunction(target.name().to_owned()))?;
    if def.has_error() {
        return Err(SpliceError::Syntax);
    }
    let text = node_text(def, &code);
    let (start, end) = (target.span.start_byte, target.span.end_byte);
    if start > end || end > module_source.len() {
        return Err(SpliceError::Span(start, end));
    }
    let prefix = " ".repeat(target.indent);
    let placed = indent(text, &prefix);
    let placed = placed.strip_prefix(&prefix).unwrap_or(&placed);
    let spliced = format!(
        "{}{}{}",
        &module_source[..start],
        placed,
        &module_source[end..]
    );
    if parse_tree(&spliced).root_node().has_error() {
        return Err(SpliceError::Module);
    }
    Ok(spliced)
}
