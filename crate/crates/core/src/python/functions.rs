use std::collections::BTreeSet;
use std::fmt;

use tree_sitter::Node;

use super::{
    block_parts, docstring_node, harvest_identifiers, is_main_guard, named_children, span_of,
    unwrap_decorated, ParsedModule,
};
use crate::model::FunctionRecord;
use crate::text::strip_continuation_indent;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    NoDocstring,
    EntryPoint,
    NoVerifiableOutput,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NoDocstring => "no docstring",
            Self::EntryPoint => "entry point",
            Self::NoVerifiableOutput => "no verifiable output",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFunction {
    pub qualified_name: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub functions: Vec<FunctionRecord>,
    pub skipped: Vec<SkippedFunction>,
}

/// Selects benchmark targets among top-level functions and class methods.
pub fn extract_functions(module: &ParsedModule) -> Extraction {
    let mut out = Extraction::default();
    visit_container(module, module.root(), None, false, &mut out);
    out
}

fn visit_container(
    module: &ParsedModule,
    container: Node,
    class: Option<&str>,
    in_guard: bool,
    out: &mut Extraction,
) {
    for stmt in named_children(container) {
        let def = unwrap_decorated(stmt);
        match def.kind() {
            "function_definition" => consider(module, stmt, def, class, in_guard, out),
            "class_definition" if class.is_none() => {
                let name = def
                    .child_by_field_name("name")
                    .map(|n| module.text(n).to_owned())
                    .unwrap_or_default();
                if let Some(body) = def.child_by_field_name("body") {
                    visit_container(module, body, Some(&name), in_guard, out);
                }
            }
            "if_statement" | "try_statement" if class.is_none() => {
                let guard = in_guard || is_main_guard(def, module.source());
                for part in block_parts(def) {
                    visit_container(module, part, None, guard, out);
                }
            }
            _ => {}
        }
    }
}

fn consider(
    module: &ParsedModule,
    outer: Node,
    def: Node,
    class: Option<&str>,
    in_guard: bool,
    out: &mut Extraction,
) {
    let Some(name_node) = def.child_by_field_name("name") else {
        return;
    };
    let name = module.text(name_node);
    let qualified_name = match class {
        Some(c) => format!("{c}.{name}"),
        None => name.to_owned(),
    };
    let body = def.child_by_field_name("body");
    let docstring = body.and_then(docstring_node);
    let reason = if in_guard || name == "main" {
        Some(SkipReason::EntryPoint)
    } else if docstring.is_none() {
        Some(SkipReason::NoDocstring)
    } else if !body.is_some_and(returns_value) {
        Some(SkipReason::NoVerifiableOutput)
    } else {
        None
    };
    match reason {
        Some(reason) => out.skipped.push(SkippedFunction {
            qualified_name,
            reason,
        }),
        None => out
            .functions
            .push(function_record(module, outer, def, qualified_name)),
    }
}

/// Any `return <value>` reachable without entering a nested scope.
fn returns_value(node: Node) -> bool {
    named_children(node)
        .into_iter()
        .any(|child| match child.kind() {
            "function_definition" | "class_definition" | "lambda" | "decorated_definition" => false,
            "return_statement" => child.named_child(0).is_some_and(|v| v.kind() != "none"),
            _ => returns_value(child),
        })
}

/// Builds the record for a function node. `outer` is the decorated
/// definition when decorators are present.
pub(crate) fn function_record(
    module: &ParsedModule,
    outer: Node,
    def: Node,
    qualified_name: String,
) -> FunctionRecord {
    let src = module.source();
    let indent = outer.start_position().column;
    let start = outer.start_byte();
    let body = def.child_by_field_name("body");
    let header_end = body
        .and_then(|b| b.prev_sibling())
        .map_or(def.end_byte(), |colon| colon.end_byte());
    let doc = body.and_then(docstring_node);
    let prompt_end = doc.map_or(header_end, |d| d.end_byte());

    let dedent = |a: usize, b: usize| strip_continuation_indent(&src[a..b], indent);
    let source = dedent(start, def.end_byte());
    let prompt = dedent(start, prompt_end);
    let signature = dedent(def.start_byte(), header_end);
    let docstring = doc.map(|d| dedent(d.start_byte(), d.end_byte()));
    let rest = &source[prompt.len().min(source.len())..];
    let body_text = rest.strip_prefix('\n').unwrap_or(rest).to_owned();

    let mut identifiers = BTreeSet::new();
    if let Some(body) = body {
        for stmt in named_children(body) {
            if doc.is_some_and(|d| d.id() == stmt.id()) {
                continue;
            }
            harvest_identifiers(stmt, src, &mut identifiers);
        }
    }

    FunctionRecord {
        qualified_name,
        signature,
        docstring,
        body: body_text,
        prompt,
        source,
        module_id: module.module_id.clone(),
        span: span_of(outer),
        indent,
        identifiers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::python::parse_module;

    const SRC: &str = r#"
import os

def documented(a, b=2):
    """Add things."""
    # comment
    return a + b

def undocumented(x):
    return x

def printer(x):
    """Only prints."""
    print(x)
    return

def nested_only(x):
    """Value returned by inner scope only."""
    def inner():
        return x
    f = lambda: x
    inner()

class Greeter:
    """Greets."""

    @staticmethod
    def hello(name):
        """Say hello."""
        if name:
            return 'hi ' + name
        return None

def main():
    """Entry."""
    return 0

if __name__ == "__main__":
    def helper():
        """Script only."""
        return 1
"#;

    fn names(e: &Extraction) -> Vec<&str> {
        e.functions
            .iter()
            .map(|f| f.qualified_name.as_str())
            .collect()
    }

    fn reason(e: &Extraction, name: &str) -> Option<SkipReason> {
        e.skipped
            .iter()
            .find(|s| s.qualified_name == name)
            .map(|s| s.reason)
    }

    #[test]
    fn selection_rules() {
        let e = extract_functions(&parse_module(SRC));
        assert_eq!(names(&e), ["documented", "Greeter.hello"]);
        assert_eq!(reason(&e, "undocumented"), Some(SkipReason::NoDocstring));
        assert_eq!(reason(&e, "printer"), Some(SkipReason::NoVerifiableOutput));
        assert_eq!(
            reason(&e, "nested_only"),
            Some(SkipReason::NoVerifiableOutput)
        );
        assert_eq!(reason(&e, "main"), Some(SkipReason::EntryPoint));
        assert_eq!(reason(&e, "helper"), Some(SkipReason::EntryPoint));
    }

    #[test]
    fn record_fields() {
        let e = extract_functions(&parse_module(SRC));
        let f = &e.functions[0];
        assert_eq!(f.signature, "def documented(a, b=2):");
        assert_eq!(f.docstring.as_deref(), Some("\"\"\"Add things.\"\"\""));
        assert_eq!(
            f.prompt,
            "def documented(a, b=2):\n    \"\"\"Add things.\"\"\""
        );
        assert_eq!(f.body, "    # comment\n    return a + b");
        assert_eq!(f.span.start_line, 4);
        assert!(f.identifiers.contains("a") && f.identifiers.contains("b"));
        assert!(!f.identifiers.contains("comment"));
    }

    #[test]
    fn method_is_dedented() {
        let e = extract_functions(&parse_module(SRC));
        let m = &e.functions[1];
        assert_eq!(m.indent, 4);
        assert!(m
            .source
            .starts_with("@staticmethod\ndef hello(name):\n    \"\"\"Say hello.\"\"\""));
        assert_eq!(m.call_signature(), "hello(name)");
    }
}
