use std::path::Path;

use depbench::deps::RepoGraph;
use depbench::model::{ContextLevel, DependencyRecord, FunctionRecord, ModuleId, PromptFormat};
use depbench::prompt::{
    build_all_prompts, build_base_prompt, build_debug_prompt_at, build_instruct_prompt,
    build_prompt_within, build_tuning_record, render_context, ContextParts, PromptError,
    TuningStyle,
};
use depbench::python::extract_functions;
use depbench::text::normalize_trailing_ws;

const STRUTIL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/strutil");
const EXPECTED: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/prompts");

struct Case {
    imports: Vec<String>,
    deps: Vec<DependencyRecord>,
    target: FunctionRecord,
}

impl Case {
    fn parts(&self) -> ContextParts<'_> {
        ContextParts {
            imports: &self.imports,
            dependencies: &self.deps,
            target: &self.target,
        }
    }
}

fn camel_case() -> Case {
    let graph = RepoGraph::build(Path::new(STRUTIL)).unwrap();
    let id = ModuleId::new("string_utils.manipulation");
    let target = extract_functions(graph.parsed(&id).unwrap())
        .functions
        .into_iter()
        .find(|f| f.qualified_name == "camel_case_to_snake")
        .unwrap();
    let deps = graph.extract_dependencies(&target, 1).unwrap();
    let imports = graph
        .snapshot()
        .module(&id)
        .unwrap()
        .import_statements
        .clone();
    Case {
        imports,
        deps,
        target,
    }
}

fn expected(name: &str) -> String {
    let path = Path::new(EXPECTED).join(format!("camel_case_to_snake.{name}.txt"));
    normalize_trailing_ws(&std::fs::read_to_string(path).unwrap())
}

#[test]
fn base_prompts_match_reference_text() {
    let case = camel_case();
    for (level, name) in [
        (ContextLevel::Full, "full.base"),
        (ContextLevel::Medium, "medium.base"),
        (ContextLevel::Small, "small.base"),
    ] {
        let got = build_base_prompt(case.parts(), level);
        assert_eq!(normalize_trailing_ws(&got.text), expected(name), "{name}");
    }
}

#[test]
fn instruct_prompts_match_reference_text() {
    let case = camel_case();
    let v1 = build_instruct_prompt(case.parts(), ContextLevel::Small, 1).unwrap();
    assert_eq!(v1.format, PromptFormat::InstructV1);
    assert_eq!(
        normalize_trailing_ws(&v1.text),
        expected("small.instruct_v1")
    );
    let v2 = build_instruct_prompt(case.parts(), ContextLevel::Small, 2).unwrap();
    assert_eq!(
        normalize_trailing_ws(&v2.text),
        expected("small.instruct_v2")
    );
    assert_eq!(
        build_instruct_prompt(case.parts(), ContextLevel::Small, 3),
        Err(PromptError::Variant(3))
    );
}

#[test]
fn token_counts_shrink_with_context() {
    let case = camel_case();
    let all = build_all_prompts(case.parts(), None).unwrap();
    assert_eq!(all.len(), 9);
    for format in PromptFormat::ALL {
        let t = |level| all[&(level, format)].token_count;
        assert!(t(ContextLevel::Small) < t(ContextLevel::Medium), "{format}");
        assert!(t(ContextLevel::Medium) < t(ContextLevel::Full), "{format}");
    }
}

#[test]
fn every_prompt_ends_with_the_target_header() {
    let case = camel_case();
    for ((level, format), spec) in build_all_prompts(case.parts(), None).unwrap() {
        let text = normalize_trailing_ws(&spec.text);
        assert!(
            text.ends_with(&normalize_trailing_ws(&case.target.prompt)),
            "{level}/{format}"
        );
        assert!(
            !text.contains(&case.target.body.trim()[..20]),
            "{level}/{format} leaks the body"
        );
    }
}

#[test]
fn budget_drops_trailing_dependencies() {
    let case = camel_case();
    let full = build_base_prompt(case.parts(), ContextLevel::Full);
    let budget = full.token_count - 1;
    let cut = build_prompt_within(
        case.parts(),
        ContextLevel::Full,
        PromptFormat::Base,
        Some(budget),
    )
    .unwrap();
    assert!(cut.token_count <= budget);
    // Dependencies go in reverse import order, the in-file variable first.
    assert!(!cut.text.contains("CAMEL_CASE_REPLACE_RE ="));
    assert!(cut.text.contains("def is_camel_case"));
    let tighter = build_prompt_within(
        case.parts(),
        ContextLevel::Full,
        PromptFormat::Base,
        Some(cut.token_count - 1),
    )
    .unwrap();
    assert!(!tighter.text.contains("def is_camel_case"));
    assert!(tighter.text.contains("def is_string"));

    // Nothing fits: everything dropped, target kept.
    let tiny = build_prompt_within(
        case.parts(),
        ContextLevel::Full,
        PromptFormat::Base,
        Some(1),
    )
    .unwrap();
    assert!(tiny.text.contains("def camel_case_to_snake"));
    assert!(!tiny.text.contains("def is_string"));
}

#[test]
fn context_without_dependencies() {
    let case = camel_case();
    let empty = ContextParts {
        imports: &[],
        dependencies: &[],
        target: &case.target,
    };
    assert_eq!(render_context(empty, ContextLevel::Full), "");
    assert_eq!(
        build_base_prompt(empty, ContextLevel::Small).text,
        case.target.prompt
    );
}

#[test]
fn tuning_records() {
    let case = camel_case();
    let raw = build_tuning_record(
        &case.target,
        &case.imports,
        &case.deps,
        TuningStyle::RawSmall,
    )
    .unwrap();
    assert_eq!(
        raw.prompt,
        build_base_prompt(case.parts(), ContextLevel::Small).text
    );
    assert_eq!(raw.completion, case.target.body);
    let instruct = build_tuning_record(
        &case.target,
        &case.imports,
        &case.deps,
        TuningStyle::Instruct,
    )
    .unwrap();
    assert!(instruct.prompt.starts_with("### Instruction:"));

    let mut bare = case.target.clone();
    bare.docstring = None;
    assert!(matches!(
        build_tuning_record(&bare, &case.imports, &case.deps, TuningStyle::Instruct),
        Err(PromptError::MissingDocstring(_))
    ));
}

#[test]
fn debug_prompt_sections() {
    let case = camel_case();
    let sample = depbench::model::BenchmarkSample::new(
        "s".into(),
        "strutil".into(),
        "string_utils/manipulation.py".into(),
        case.target.clone(),
        case.imports.clone(),
        case.deps.clone(),
        Default::default(),
        Vec::new(),
        Default::default(),
    )
    .unwrap();
    let p = build_debug_prompt_at(
        &sample,
        ContextLevel::Full,
        "def camel_case_to_snake(input_string, separator='_'):\n    return 1",
        "assert camel_case_to_snake('aB') == 'a_b'",
        "AssertionError",
    )
    .unwrap();
    let text = &p.text;
    let order = [
        "CAMEL_CASE_REPLACE_RE = ",
        "# Here is the current solution.\ndef camel_case_to_snake(input_string, separator='_'):\n    return 1",
        "# When executing the below test case.\nassert camel_case_to_snake('aB') == 'a_b'",
        "please correct them.\nAssertionError",
        "# Please provide the modified code for me to review and provide feedback.\ndef camel_case_to_snake",
    ];
    let mut pos = 0;
    for piece in order {
        let at = text[pos..]
            .find(piece)
            .unwrap_or_else(|| panic!("missing {piece:?}"));
        pos += at + piece.len();
    }
    assert_eq!(
        build_debug_prompt_at(&sample, ContextLevel::Full, "x", "y", "  "),
        Err(PromptError::EmptyErrorLog)
    );
}

#[test]
fn ordering_holds_on_every_fixture_sample() {
    use depbench::model::DefinitionKind;
    use depbench::sample::{extract_samples, SampleOptions};
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mut checked = 0;
    for repo in ["strutil", "aliases", "single", "calc"] {
        let samples = extract_samples(&fixtures.join(repo), repo, &SampleOptions::default())
            .unwrap()
            .samples;
        for s in &samples {
            let with_body = |d: &&depbench::model::DependencyRecord| {
                matches!(d.kind, DefinitionKind::Function | DefinitionKind::Class)
            };
            let has_body = s.dependencies.iter().any(|d| with_body(&d));
            // a dependency without a docstring renders the same at medium and small
            let has_doc = s
                .dependencies
                .iter()
                .filter(with_body)
                .any(|d| d.docstring.is_some());
            for format in PromptFormat::ALL {
                let tokens = |level| s.prompt(level, format).unwrap().token_count;
                let (small, medium, full) = (
                    tokens(ContextLevel::Small),
                    tokens(ContextLevel::Medium),
                    tokens(ContextLevel::Full),
                );
                assert!(
                    small <= medium && medium <= full,
                    "{} {format:?}",
                    s.sample_id
                );
                if has_body {
                    assert!(medium < full, "{} {format:?}", s.sample_id);
                }
                if has_doc {
                    assert!(small < medium, "{} {format:?}", s.sample_id);
                }
            }
            let body = s.target.body.trim();
            if !body.is_empty() {
                for level in ContextLevel::ALL {
                    assert!(!s
                        .prompt(level, PromptFormat::Base)
                        .unwrap()
                        .text
                        .contains(body));
                }
            }
            checked += 1;
        }
    }
    assert!(checked >= 10, "only {checked} samples");
}
