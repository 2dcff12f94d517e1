use tree_sitter::Node;

use super::{docstring_node, named_children, parse_tree, unwrap_decorated};
use crate::text::dedent;

/// Number of lexical tokens the grammar produces for `text`: every leaf of
/// the syntax tree with non-zero width, comments included.
pub fn count_tokens(text: &str) -> usize {
    if text.is_empty() {
        return 0;
    }
    let tree = parse_tree(text);
    let mut cursor = tree.walk();
    let mut count = 0;
    let mut stack = vec![tree.root_node()];
    while let Some(node) = stack.pop() {
        if node.child_count() == 0 {
            if node.end_byte() > node.start_byte() {
                count += 1;
            }
        } else {
            stack.extend(node.children(&mut cursor));
        }
    }
    count
}

/// True when the first function in `function_text` does nothing beyond its
/// docstring: only `pass`, `...`, bare `return` or `return None` remain.
/// Text that does not parse is never considered empty.
pub fn detect_empty_body(function_text: &str) -> bool {
    let code = dedent(function_text);
    let tree = parse_tree(&code);
    let root = tree.root_node();
    if root.has_error() {
        return false;
    }
    let Some(def) = first_function(root) else {
        return false;
    };
    let Some(body) = def.child_by_field_name("body") else {
        return false;
    };
    let doc = docstring_node(body).map(|d| d.id());
    named_children(body)
        .into_iter()
        .filter(|s| s.kind() != "comment" && Some(s.id()) != doc)
        .all(is_noop)
}

fn first_function(node: Node) -> Option<Node> {
    for child in named_children(node) {
        let def = unwrap_decorated(child);
        if def.kind() == "function_definition" {
            return Some(def);
        }
        if let Some(found) = first_function(child) {
            return Some(found);
        }
    }
    None
}

fn is_noop(stmt: Node) -> bool {
    match stmt.kind() {
        "pass_statement" => true,
        "return_statement" => match stmt.named_child(0) {
            None => true,
            Some(v) => v.kind() == "none",
        },
        "expression_statement" => {
            stmt.named_child_count() == 1
                && stmt.named_child(0).is_some_and(|e| e.kind() == "ellipsis")
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_counts() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("x = 1"), 3);
        assert_eq!(count_tokens("f(a, b)  # note"), 7);
    }

    #[test]
    fn empty_bodies() {
        assert!(detect_empty_body(
            "def f(x):\n    \"\"\"Doc.\"\"\"\n    pass\n"
        ));
        assert!(detect_empty_body("def f(x):\n    \"\"\"Doc.\"\"\"\n"));
        assert!(detect_empty_body("def f(x):\n    ...\n"));
        assert!(detect_empty_body(
            "def f(x):\n    # todo\n    return None\n"
        ));
        assert!(detect_empty_body("    def m(self):\n        return\n"));
        assert!(!detect_empty_body("def f(x):\n    return x[::-1]\n"));
        assert!(!detect_empty_body(
            "def f(x):\n    \"\"\"Doc.\"\"\"\n    print(x)\n"
        ));
    }

    #[test]
    fn conservative_on_bad_input() {
        assert!(!detect_empty_body("def f(:\n    pass"));
        assert!(!detect_empty_body("x = 1\n"));
    }
}
