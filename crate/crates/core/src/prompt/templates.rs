//! Versioned prompt templates. Placeholders are `{name}`; anything else in
//! braces is left alone.

pub const TEMPLATE_VERSION: &str = "1";

pub const INSTRUCT_V1: &str = include_str!("../../templates/instruct_v1.txt");
pub const INSTRUCT_V2: &str = include_str!("../../templates/instruct_v2.txt");
pub const DEBUG: &str = include_str!("../../templates/debug.txt");
pub const TEST_INITIAL: &str = include_str!("../../templates/test_initial.txt");
pub const ENHANCE: [&str; 3] = [
    include_str!("../../templates/enhance_1.txt"),
    include_str!("../../templates/enhance_2.txt"),
    include_str!("../../templates/enhance_3.txt"),
];

/// Substitutes placeholders in one pass, so inserted text is never
/// expanded again.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let value = after.find('}').and_then(|close| {
            let key = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| (*v, close))
        });
        match value {
            Some((v, close)) => {
                out.push_str(v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pass() {
        let out = render("{a} and {b} {c}", &[("a", "{b}"), ("b", "x")]);
        assert_eq!(out, "{b} and x {c}");
    }

    #[test]
    fn dict_literals_survive() {
        assert_eq!(render("d = {'k': {v}}", &[("v", "1")]), "d = {'k': 1}");
    }
}
