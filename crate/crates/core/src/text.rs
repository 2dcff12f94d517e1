//! Small indentation helpers used when moving Python snippets around.

/// Removes the longest common leading whitespace from all non-blank lines.
pub fn dedent(text: &str) -> String {
    let common = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(leading_ws)
        .min()
        .unwrap_or(0);
    if common == 0 {
        return text.to_owned();
    }
    map_lines(text, |line| {
        if line.trim().is_empty() {
            line.trim_start_matches([' ', '\t'])
        } else {
            &line[common..]
        }
    })
}

/// Strips up to `n` leading spaces or tabs from every line except the first.
pub fn strip_continuation_indent(text: &str, n: usize) -> String {
    if n == 0 {
        return text.to_owned();
    }
    let mut first = true;
    map_lines(text, |line| {
        if std::mem::take(&mut first) {
            return line;
        }
        let ws = leading_ws(line).min(n);
        &line[ws..]
    })
}

/// Prefixes every non-blank line with `prefix`.
pub fn indent(text: &str, prefix: &str) -> String {
    let mut out = String::with_capacity(text.len() + prefix.len() * 8);
    for line in text.split_inclusive('\n') {
        if !line.trim().is_empty() {
            out.push_str(prefix);
        }
        out.push_str(line);
    }
    out
}

/// Trims trailing whitespace on each line and at the end of the text.
pub fn normalize_trailing_ws(text: &str) -> String {
    let lines: Vec<&str> = text.lines().map(str::trim_end).collect();
    lines.join("\n").trim_end().to_owned()
}

fn leading_ws(line: &str) -> usize {
    line.len() - line.trim_start_matches([' ', '\t']).len()
}

fn map_lines<'a>(text: &'a str, mut f: impl FnMut(&'a str) -> &'a str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        let (body, nl) = match line.strip_suffix('\n') {
            Some(b) => (b, "\n"),
            None => (line, ""),
        };
        out.push_str(f(body));
        out.push_str(nl);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedent_common_prefix() {
        assert_eq!(dedent("    a\n      b\n\n    c\n"), "a\n  b\n\nc\n");
        assert_eq!(dedent("a\n  b"), "a\n  b");
    }

    #[test]
    fn continuation_only() {
        assert_eq!(
            strip_continuation_indent("def f():\n        x\n  y", 4),
            "def f():\n    x\ny"
        );
    }

    #[test]
    fn indent_skips_blank() {
        assert_eq!(indent("a\n\nb\n", "    "), "    a\n\n    b\n");
    }

    #[test]
    fn trailing_ws() {
        assert_eq!(normalize_trailing_ws("a  \nb\t\n\n"), "a\nb");
    }
}
