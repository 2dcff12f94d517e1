use std::path::Path;
use std::time::Instant;

use depbench::deps::{
    build_repo_graph, extract_dependencies, resolve_imports, KindHint, RepoGraph,
};
use depbench::model::{DefinitionKind, FunctionRecord, Locality, ModuleId, ModuleRef};
use depbench::python::{collect_identifiers, extract_functions};

const STRUTIL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/strutil");
const ALIASES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/aliases");
const SINGLE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/single");

fn target(graph: &RepoGraph, module: &str, name: &str) -> FunctionRecord {
    let parsed = graph.parsed(&ModuleId::new(module)).expect("module parsed");
    extract_functions(parsed)
        .functions
        .into_iter()
        .find(|f| f.qualified_name == name)
        .unwrap_or_else(|| panic!("{name} not extracted"))
}

fn names(graph: &RepoGraph, module: &str, func: &str, depth: u32) -> Vec<String> {
    let t = target(graph, module, func);
    graph
        .extract_dependencies(&t, depth)
        .unwrap()
        .into_iter()
        .map(|d| d.name)
        .collect()
}

#[test]
fn strutil_graph_shape() {
    let snapshot = build_repo_graph(Path::new(STRUTIL)).unwrap();
    let mut ids: Vec<_> = snapshot
        .modules()
        .iter()
        .map(|m| m.id.to_string())
        .collect();
    ids.sort();
    assert_eq!(
        ids,
        [
            "string_utils._regex",
            "string_utils.errors",
            "string_utils.manipulation",
            "string_utils.validation"
        ]
    );
    let edge = snapshot
        .import_edges()
        .iter()
        .find(|e| {
            e.importer.as_str() == "string_utils.manipulation"
                && e.imported == ModuleRef::Internal("string_utils.errors".into())
        })
        .expect("manipulation imports errors");
    assert_eq!(edge.names, ["InvalidInputError"]);
}

#[test]
fn manipulation_definitions() {
    let snapshot = build_repo_graph(Path::new(STRUTIL)).unwrap();
    let m = snapshot
        .module(&"string_utils.manipulation".into())
        .unwrap();
    let camel = m.definition("camel_case_to_snake").unwrap();
    assert_eq!(camel.kind, DefinitionKind::Function);
    let re = m.definition("CAMEL_CASE_REPLACE_RE").unwrap();
    assert_eq!(re.kind, DefinitionKind::Variable);
    assert!(m.definition("cli_helper").is_none());
    assert_eq!(m.import_statements.len(), 9);
}

#[test]
fn wildcard_binds_public_names() {
    let snapshot = build_repo_graph(Path::new(STRUTIL)).unwrap();
    let m = snapshot
        .module(&"string_utils.manipulation".into())
        .unwrap();
    let map = resolve_imports(m, &snapshot);
    for name in [
        "NUMBER_RE",
        "CAMEL_CASE_TEST_RE",
        "SNAKE_CASE_TEST_RE",
        "SPACES_RE",
    ] {
        let b = map.get(name).unwrap_or_else(|| panic!("{name} missing"));
        assert_eq!(b.origin, ModuleRef::Internal("string_utils._regex".into()));
        assert_eq!(b.kind_hint, KindHint::Variable);
    }
    assert!(map.get("_PRIVATE_RE").is_none());
    let is_string = map.get("is_string").unwrap();
    assert_eq!(
        is_string.origin,
        ModuleRef::Internal("string_utils.validation".into())
    );
    assert_eq!(is_string.original_name, "is_string");
    assert_eq!(is_string.kind_hint, KindHint::Function);
    assert!(matches!(
        map.get("uuid4").unwrap().origin,
        ModuleRef::External(_)
    ));
}

#[test]
fn camel_case_to_snake_dependencies() {
    let graph = RepoGraph::build(Path::new(STRUTIL)).unwrap();
    let t = target(&graph, "string_utils.manipulation", "camel_case_to_snake");
    let deps = graph.extract_dependencies(&t, 1).unwrap();
    let summary: Vec<_> = deps
        .iter()
        .map(|d| (d.name.as_str(), d.origin.as_str(), d.locality, d.kind))
        .collect();
    assert_eq!(
        summary,
        [
            (
                "InvalidInputError",
                "string_utils.errors",
                Locality::CrossFile,
                DefinitionKind::Class
            ),
            (
                "is_string",
                "string_utils.validation",
                Locality::CrossFile,
                DefinitionKind::Function
            ),
            (
                "is_camel_case",
                "string_utils.validation",
                Locality::CrossFile,
                DefinitionKind::Function
            ),
            (
                "CAMEL_CASE_REPLACE_RE",
                "string_utils.manipulation",
                Locality::InFile,
                DefinitionKind::Variable
            ),
        ]
    );
    assert!(deps.iter().all(|d| d.depth == 1));
    let is_camel = &deps[2];
    assert_eq!(
        is_camel.signature,
        "def is_camel_case(input_string: Any) -> bool:"
    );
    assert!(is_camel
        .docstring
        .as_deref()
        .unwrap()
        .contains("Checks if a string is formatted as camel case."));
    assert!(is_camel
        .definition_text
        .ends_with("CAMEL_CASE_TEST_RE.match(input_string) is not None"));
    assert_eq!(
        deps[3].definition_text,
        "CAMEL_CASE_REPLACE_RE = re.compile(r'([a-z]|[A-Z]+)(?=[A-Z])')"
    );
}

#[test]
fn depth_two_adds_transitive_names() {
    let graph = RepoGraph::build(Path::new(STRUTIL)).unwrap();
    let d1 = names(
        &graph,
        "string_utils.manipulation",
        "camel_case_to_snake",
        1,
    );
    let d2 = names(
        &graph,
        "string_utils.manipulation",
        "camel_case_to_snake",
        2,
    );
    assert_eq!(&d2[..4], &d1[..]);
    assert_eq!(&d2[4..], ["CAMEL_CASE_TEST_RE", "is_full_string"]);
    let t = target(&graph, "string_utils.manipulation", "camel_case_to_snake");
    let deep = graph.extract_dependencies(&t, 100).unwrap();
    assert_eq!(deep.len(), 6);
    assert_eq!(
        deep.iter()
            .find(|d| d.name == "is_full_string")
            .unwrap()
            .depth,
        2
    );
}

#[test]
fn reverse_dependencies() {
    let graph = RepoGraph::build(Path::new(STRUTIL)).unwrap();
    assert_eq!(
        names(&graph, "string_utils.manipulation", "reverse", 1),
        ["InvalidInputError", "is_string"]
    );
}

#[test]
fn depth_bounds_and_missing_target() {
    let graph = RepoGraph::build(Path::new(STRUTIL)).unwrap();
    let t = target(&graph, "string_utils.manipulation", "reverse");
    assert!(graph.extract_dependencies(&t, 0).is_err());
    assert!(graph.extract_dependencies(&t, 101).is_err());
    let mut stray = t.clone();
    stray.module_id = "nowhere".into();
    assert!(graph.extract_dependencies(&stray, 1).is_err());
}

#[test]
fn snapshot_wrapper_matches_graph() {
    let graph = RepoGraph::build(Path::new(STRUTIL)).unwrap();
    let t = target(&graph, "string_utils.manipulation", "camel_case_to_snake");
    let direct = graph.extract_dependencies(&t, 2).unwrap();
    let wrapped = extract_dependencies(&t, graph.snapshot(), 2).unwrap();
    assert_eq!(direct, wrapped);
}

#[test]
fn alias_and_wildcard_resolution() {
    let graph = RepoGraph::build(Path::new(ALIASES)).unwrap();
    let deps = {
        let t = target(&graph, "pkg.sub.tools", "combine");
        graph.extract_dependencies(&t, 1).unwrap()
    };
    let got: Vec<_> = deps
        .iter()
        .map(|d| (d.name.as_str(), d.origin.as_str()))
        .collect();
    assert_eq!(
        got,
        [
            ("FACTOR", "pkg.helpers"),
            ("scale", "pkg.helpers"),
            ("shift", "pkg.helpers"),
            ("Point", "pkg.helpers"),
        ]
    );
    assert!(deps[2].definition_text.starts_with("def offset(value):"));
    assert_eq!(
        names(&graph, "pkg.sub.tools", "combine", 2)[4..],
        ["_HIDDEN"]
    );
}

#[test]
fn scope_exclusions() {
    let graph = RepoGraph::build(Path::new(ALIASES)).unwrap();
    assert!(names(&graph, "pkg.sub.tools", "annotated", 1).is_empty());
    assert!(names(&graph, "pkg.sub.tools", "recursive", 1).is_empty());
    assert_eq!(names(&graph, "pkg.sub.tools", "shadowing", 1), ["offset"]);
}

#[test]
fn import_map_aliases_and_externals() {
    let snapshot = build_repo_graph(Path::new(ALIASES)).unwrap();
    let tools = snapshot.module(&"pkg.sub.tools".into()).unwrap();
    let map = resolve_imports(tools, &snapshot);
    let osp = map.get("osp").unwrap();
    assert_eq!(osp.kind_hint, KindHint::Module);
    assert_eq!(osp.original_name, "os.path");
    assert_eq!(osp.origin, ModuleRef::External("os.path".into()));
    let h = map.get("h").unwrap();
    assert_eq!(h.origin, ModuleRef::Internal("pkg.helpers".into()));
    assert_eq!(h.kind_hint, KindHint::Module);
    let shift = map.get("shift").unwrap();
    assert_eq!(shift.original_name, "offset");
    assert!(map.get("offset").is_some(), "wildcard also binds offset");
    assert!(matches!(
        map.get("nothing").unwrap().origin,
        ModuleRef::External(_)
    ));
}

#[test]
fn single_file_repo() {
    let snapshot = build_repo_graph(Path::new(SINGLE)).unwrap();
    assert_eq!(snapshot.modules().len(), 1);
    assert!(snapshot
        .import_edges()
        .iter()
        .all(|e| matches!(e.imported, ModuleRef::External(_))));
}

#[test]
fn missing_root_is_an_error() {
    assert!(build_repo_graph(Path::new("/definitely/not/here")).is_err());
}

#[test]
fn unreadable_file_becomes_failed_module() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ok.py"), "X = 1\n").unwrap();
    std::fs::write(dir.path().join("bad.py"), [0xff, 0xfe, b'(', b'\n']).unwrap();
    let snapshot = build_repo_graph(dir.path()).unwrap();
    let bad = snapshot.module(&"bad".into()).unwrap();
    assert!(bad.parse_failed);
    assert!(!snapshot.module(&"ok".into()).unwrap().parse_failed);
}

/// Every module-level function with a docstring: parameters never leak
/// into dependencies, depth-1 names appear in the body, deeper extraction
/// only adds names and locality follows the origin module.
#[test]
fn extraction_properties_hold_on_fixtures() {
    for root in [STRUTIL, ALIASES, SINGLE] {
        let graph = RepoGraph::build(Path::new(root)).unwrap();
        for module in graph.snapshot().modules() {
            let Some(parsed) = graph.parsed(&module.id) else {
                continue;
            };
            for f in extract_functions(parsed).functions {
                let params: Vec<String> = f
                    .call_signature()
                    .split(['(', ',', ')', '=', ':', '*'])
                    .map(|s| s.trim().to_owned())
                    .collect();
                let mut previous: Vec<String> = Vec::new();
                for depth in 1..=3 {
                    let deps = graph.extract_dependencies(&f, depth).unwrap();
                    let names: Vec<String> = deps.iter().map(|d| d.name.clone()).collect();
                    for d in &deps {
                        if d.depth == 1 {
                            assert!(
                                !params.contains(&d.name),
                                "{} leaks param {}",
                                f.qualified_name,
                                d.name
                            );
                            assert!(
                                collect_identifiers(&f.body).contains(&d.name)
                                    || f.identifiers.contains(&d.name)
                            );
                        }
                        let cross = d.origin != f.module_id;
                        assert_eq!(cross, d.locality == Locality::CrossFile);
                    }
                    assert!(previous.iter().all(|n| names.contains(n)));
                    previous = names;
                }
            }
        }
    }
}

#[test]
fn extraction_is_fast() {
    let start = Instant::now();
    let graph = RepoGraph::build(Path::new(STRUTIL)).unwrap();
    let t = target(&graph, "string_utils.manipulation", "camel_case_to_snake");
    graph.extract_dependencies(&t, 1).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
}
