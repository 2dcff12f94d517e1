use std::collections::BTreeSet;

use tree_sitter::Node;

use super::{node_text, parse_tree};

pub type IdentifierSet = BTreeSet<String>;

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

/// Identifiers referenced in `code`. Strings and comments never contribute.
/// Code that does not parse cleanly is scanned lexically instead.
pub fn collect_identifiers(code: &str) -> IdentifierSet {
    let tree = parse_tree(code);
    let root = tree.root_node();
    if root.has_error() {
        return lexical_identifiers(code);
    }
    let mut out = IdentifierSet::new();
    harvest_identifiers(root, code, &mut out);
    out
}

/// Every `identifier` node below `node`, including names inside f-string
/// interpolations, attribute members and keyword-argument names.
pub(crate) fn harvest_identifiers(node: Node, source: &str, out: &mut IdentifierSet) {
    let mut cursor = node.walk();
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        if n.kind() == "identifier" {
            let text = node_text(n, source);
            if !is_keyword(text) {
                out.insert(text.to_owned());
            }
            continue;
        }
        if n.kind() == "comment" {
            continue;
        }
        stack.extend(n.named_children(&mut cursor));
    }
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

fn is_string_prefix(word: &str) -> bool {
    word.len() <= 2
        && word
            .chars()
            .all(|c| matches!(c.to_ascii_lowercase(), 'r' | 'b' | 'u' | 'f'))
}

/// Token scan used for text that does not parse. Skips comments, string
/// literals (with prefixes and triple quotes) and numeric literals.
fn lexical_identifiers(code: &str) -> IdentifierSet {
    let chars: Vec<char> = code.chars().collect();
    let mut out = IdentifierSet::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '\'' || c == '"' {
            i = skip_string(&chars, i);
        } else if c.is_ascii_digit() {
            while i < chars.len() && (is_ident_continue(chars[i]) || chars[i] == '.') {
                i += 1;
            }
        } else if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_continue(chars[i]) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let quoted = chars.get(i).is_some_and(|q| *q == '\'' || *q == '"');
            if quoted && is_string_prefix(&word) {
                i = skip_string(&chars, i);
            } else if !is_keyword(&word) {
                out.insert(word);
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Returns the index just past the string literal opening at `i`.
fn skip_string(chars: &[char], mut i: usize) -> usize {
    let quote = chars[i];
    let triple = chars.get(i + 1) == Some(&quote) && chars.get(i + 2) == Some(&quote);
    i += if triple { 3 } else { 1 };
    while i < chars.len() {
        let c = chars[i];
        if c == '\\' {
            i += 2;
            continue;
        }
        if triple {
            if c == quote && chars.get(i + 1) == Some(&quote) && chars.get(i + 2) == Some(&quote) {
                return i + 3;
            }
        } else if c == quote {
            return i + 1;
        } else if c == '\n' {
            return i;
        }
        i += 1;
    }
    chars.len()
}
