//! Core domain types shared by every pipeline stage.
//!
//! Everything here is plain data: immutable once constructed and safe to
//! share across threads. Constructors that carry invariants return
//! [`InvariantError`] instead of building an inconsistent value.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on transitive dependency depth.
pub const MAX_DEPENDENCY_DEPTH: u32 = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error("duplicate module id `{0}`")]
    DuplicateModule(ModuleId),
    #[error("import edge from `{importer}` refers to unknown module `{imported}`")]
    DanglingEdge {
        importer: ModuleId,
        imported: ModuleId,
    },
    #[error("duplicate {kind} definition `{name}` in module `{module}`")]
    DuplicateDefinition {
        module: ModuleId,
        name: String,
        kind: DefinitionKind,
    },
    #[error("span {start}..{end} of `{name}` is outside the file ({len} bytes)")]
    SpanOutOfBounds {
        name: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("dependency `{name}` has depth {depth}, expected 1..={max}")]
    DepthOutOfRange { name: String, depth: u32, max: u32 },
    #[error("test `{test_id}` has status {status}, only validated tests may be stored")]
    UnvalidatedTest { test_id: String, status: TestStatus },
    #[error("fixed test `{0}` carries neither an expected blob nor a rewritten assertion")]
    FixedWithoutEvidence(String),
    #[error("line coverage {0} is outside [0, 100]")]
    CoverageOutOfRange(f64),
    #[error("line coverage {pct} disagrees with {covered}/{total} covered lines")]
    CoverageMismatch {
        pct: f64,
        covered: usize,
        total: u32,
    },
    #[error("covered line {line} is not among the {total} executable lines")]
    CoveredLineOutsideTotal { line: u32, total: u32 },
    #[error("passed_all is {passed_all} but per-test outcomes say otherwise")]
    PassedAllMismatch { passed_all: bool },
    #[error("DIR value {0} is outside [0, 1]")]
    DirOutOfRange(f64),
    #[error("DIR must be absent exactly when the dependency set is empty")]
    DirPresence,
}

/// Dotted module identifier, e.g. `string_utils.manipulation`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModuleId(String);

impl ModuleId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Last dotted component.
    pub fn leaf(&self) -> &str {
        self.0.rsplit('.').next().unwrap_or(&self.0)
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ModuleId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Byte range plus the 1-based inclusive line range it covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start_byte: usize,
    pub end_byte: usize,
    pub start_line: u32,
    pub end_line: u32,
}

impl Span {
    pub fn contains_line(&self, line: u32) -> bool {
        (self.start_line..=self.end_line).contains(&line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefinitionKind {
    Function,
    Class,
    Variable,
}

impl fmt::Display for DefinitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Function => "function",
            Self::Class => "class",
            Self::Variable => "variable",
        })
    }
}

/// A top-level binding introduced by a `def`, `class` or assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Definition {
    pub name: String,
    pub kind: DefinitionKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceModule {
    pub id: ModuleId,
    /// Repository-relative path of the file.
    pub path: PathBuf,
    pub source: String,
    pub top_level_definitions: Vec<Definition>,
    /// Raw text of every module-level import statement, in file order.
    pub import_statements: Vec<String>,
    /// Set when the file could not be read or parsed cleanly.
    pub parse_failed: bool,
}

impl SourceModule {
    pub fn new(
        id: ModuleId,
        path: PathBuf,
        source: String,
        top_level_definitions: Vec<Definition>,
        import_statements: Vec<String>,
        parse_failed: bool,
    ) -> Result<Self, InvariantError> {
        let mut seen = HashSet::new();
        for def in &top_level_definitions {
            if !seen.insert((def.kind, def.name.as_str())) {
                return Err(InvariantError::DuplicateDefinition {
                    module: id,
                    name: def.name.clone(),
                    kind: def.kind,
                });
            }
            if def.span.start_byte > def.span.end_byte || def.span.end_byte > source.len() {
                return Err(InvariantError::SpanOutOfBounds {
                    name: def.name.clone(),
                    start: def.span.start_byte,
                    end: def.span.end_byte,
                    len: source.len(),
                });
            }
        }
        Ok(Self {
            id,
            path,
            source,
            top_level_definitions,
            import_statements,
            parse_failed,
        })
    }

    /// Placeholder for a file that could not be read.
    pub fn unreadable(id: ModuleId, path: PathBuf) -> Self {
        Self {
            id,
            path,
            source: String::new(),
            top_level_definitions: Vec::new(),
            import_statements: Vec::new(),
            parse_failed: true,
        }
    }

    /// Finds a top-level definition by name. When a name is bound both as a
    /// function and a variable the later binding in the file wins.
    pub fn definition(&self, name: &str) -> Option<&Definition> {
        self.top_level_definitions
            .iter()
            .filter(|d| d.name == name)
            .max_by_key(|d| d.span.start_byte)
    }

    pub fn text(&self, span: &Span) -> &str {
        &self.source[span.start_byte..span.end_byte]
    }

    /// `true` for `__init__.py` modules, which act as their own package.
    pub fn is_package(&self) -> bool {
        self.path.file_stem().is_some_and(|s| s == "__init__")
    }
}

/// Where an import edge points.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleRef {
    Internal(ModuleId),
    External(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportEdge {
    pub importer: ModuleId,
    pub imported: ModuleRef,
    pub names: Vec<String>,
}

/// Parsed module graph of one analyzed repository.
#[derive(Debug, Clone)]
pub struct RepositorySnapshot {
    root: PathBuf,
    modules: Vec<SourceModule>,
    import_edges: Vec<ImportEdge>,
    index: HashMap<ModuleId, usize>,
}

impl RepositorySnapshot {
    pub fn new(
        root: PathBuf,
        modules: Vec<SourceModule>,
        import_edges: Vec<ImportEdge>,
    ) -> Result<Self, InvariantError> {
        let mut index = HashMap::with_capacity(modules.len());
        for (i, module) in modules.iter().enumerate() {
            if index.insert(module.id.clone(), i).is_some() {
                return Err(InvariantError::DuplicateModule(module.id.clone()));
            }
        }
        for edge in &import_edges {
            for end in [&ModuleRef::Internal(edge.importer.clone()), &edge.imported] {
                if let ModuleRef::Internal(id) = end {
                    if !index.contains_key(id) {
                        return Err(InvariantError::DanglingEdge {
                            importer: edge.importer.clone(),
                            imported: id.clone(),
                        });
                    }
                }
            }
        }
        Ok(Self {
            root,
            modules,
            import_edges,
            index,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn modules(&self) -> &[SourceModule] {
        &self.modules
    }

    pub fn import_edges(&self) -> &[ImportEdge] {
        &self.import_edges
    }

    pub fn module(&self, id: &ModuleId) -> Option<&SourceModule> {
        self.index.get(id).map(|&i| &self.modules[i])
    }

    pub fn contains(&self, id: &ModuleId) -> bool {
        self.index.contains_key(id)
    }

    pub fn module_by_path(&self, path: &Path) -> Option<&SourceModule> {
        self.modules.iter().find(|m| m.path == path)
    }
}

/// A function selected as a generation target.
///
/// Text fields are stored dedented so that the `def` (or its first
/// decorator) starts at column 0; `indent` records the original column so
/// candidates can be spliced back in place.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub qualified_name: String,
    /// Header as written, e.g. `def reverse(input_string: str) -> str:`.
    pub signature: String,
    /// Docstring literal including its quotes.
    pub docstring: Option<String>,
    /// Statements following the docstring.
    pub body: String,
    /// Decorators, header and docstring: what a prompt shows of the target.
    pub prompt: String,
    /// Complete definition text.
    pub source: String,
    pub module_id: ModuleId,
    pub span: Span,
    pub indent: usize,
    pub identifiers: BTreeSet<String>,
}

impl FunctionRecord {
    /// Simple (unqualified) name.
    pub fn name(&self) -> &str {
        self.qualified_name
            .rsplit('.')
            .next()
            .unwrap_or(&self.qualified_name)
    }

    /// Enclosing class for methods.
    pub fn class_name(&self) -> Option<&str> {
        self.qualified_name.rsplit_once('.').map(|(class, _)| class)
    }

    /// Header without `def`/`async def` and the trailing colon:
    /// `camel_case_to_snake(input_string, separator='_')`.
    pub fn call_signature(&self) -> String {
        let header = self.signature.trim();
        let header = header
            .strip_prefix("async")
            .map(str::trim_start)
            .unwrap_or(header);
        let header = header
            .strip_prefix("def")
            .map(str::trim_start)
            .unwrap_or(header);
        header
            .strip_suffix(':')
            .unwrap_or(header)
            .trim_end()
            .to_owned()
    }

    /// Docstring literal with the common indentation of its continuation
    /// lines removed.
    pub fn dedented_docstring(&self) -> Option<String> {
        self.docstring.as_deref().map(dedent_continuation)
    }
}

/// Removes the shared leading whitespace from every line after the first.
pub fn dedent_continuation(text: &str) -> String {
    let mut lines = text.lines();
    let Some(first) = lines.next() else {
        return String::new();
    };
    let rest: Vec<&str> = lines.collect();
    let common = rest
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out = first.to_owned();
    for line in rest {
        out.push('\n');
        if line.trim().is_empty() {
            continue;
        }
        out.push_str(&line[common..]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locality {
    InFile,
    CrossFile,
}

/// One resolved dependency of a target function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyRecord {
    pub name: String,
    pub kind: DefinitionKind,
    pub origin: ModuleId,
    pub locality: Locality,
    pub definition_text: String,
    pub signature: String,
    pub docstring: Option<String>,
    /// 1 for names referenced directly by the target.
    pub depth: u32,
}

impl DependencyRecord {
    pub fn check(&self) -> Result<(), InvariantError> {
        if self.depth == 0 || self.depth > MAX_DEPENDENCY_DEPTH {
            return Err(InvariantError::DepthOutOfRange {
                name: self.name.clone(),
                depth: self.depth,
                max: MAX_DEPENDENCY_DEPTH,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextLevel {
    Full,
    Medium,
    Small,
}

impl ContextLevel {
    pub const ALL: [ContextLevel; 3] = [Self::Full, Self::Medium, Self::Small];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Medium => "medium",
            Self::Small => "small",
        }
    }
}

impl fmt::Display for ContextLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ContextLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "medium" => Ok(Self::Medium),
            "small" => Ok(Self::Small),
            other => Err(format!("unknown context level `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptFormat {
    Base,
    InstructV1,
    InstructV2,
}

impl PromptFormat {
    pub const ALL: [PromptFormat; 3] = [Self::Base, Self::InstructV1, Self::InstructV2];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Base => "base",
            Self::InstructV1 => "instruct_v1",
            Self::InstructV2 => "instruct_v2",
        }
    }
}

impl fmt::Display for PromptFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PromptFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(Self::Base),
            "instruct_v1" => Ok(Self::InstructV1),
            "instruct_v2" => Ok(Self::InstructV2),
            other => Err(format!("unknown prompt format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub context_level: ContextLevel,
    pub format: PromptFormat,
    pub text: String,
    pub token_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Raw,
    SyntaxOk,
    ExecOk,
    Fixed,
    RejectedFlaky,
    Rejected,
}

impl TestStatus {
    pub fn is_validated(self) -> bool {
        matches!(self, Self::ExecOk | Self::Fixed)
    }
}

impl fmt::Display for TestStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Raw => "raw",
            Self::SyntaxOk => "syntax_ok",
            Self::ExecOk => "exec_ok",
            Self::Fixed => "fixed",
            Self::RejectedFlaky => "rejected_flaky",
            Self::Rejected => "rejected",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOrigin {
    Initial,
    EnhancementPrompt1,
    EnhancementPrompt2,
    EnhancementPrompt3,
}

impl TestOrigin {
    pub fn id_prefix(self) -> &'static str {
        match self {
            Self::Initial => "init",
            Self::EnhancementPrompt1 => "enh1",
            Self::EnhancementPrompt2 => "enh2",
            Self::EnhancementPrompt3 => "enh3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test_id: String,
    pub source_text: String,
    pub status: TestStatus,
    /// Sibling blob file holding the serialized expected value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_blob: Option<String>,
    /// Assertion text before the fixer rewrote it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_text: Option<String>,
    pub origin: TestOrigin,
}

impl TestRecord {
    pub fn raw(
        test_id: impl Into<String>,
        source_text: impl Into<String>,
        origin: TestOrigin,
    ) -> Self {
        Self {
            test_id: test_id.into(),
            source_text: source_text.into(),
            status: TestStatus::Raw,
            expected_blob: None,
            original_text: None,
            origin,
        }
    }

    pub fn with_status(mut self, status: TestStatus) -> Self {
        self.status = status;
        self
    }

    pub fn check(&self) -> Result<(), InvariantError> {
        if self.status == TestStatus::Fixed {
            let rewritten = self
                .original_text
                .as_ref()
                .is_some_and(|orig| *orig != self.source_text);
            if self.expected_blob.is_none() && !rewritten {
                return Err(InvariantError::FixedWithoutEvidence(self.test_id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub line_coverage_pct: f64,
    pub covered_lines: BTreeSet<u32>,
    pub total_executable_lines: u32,
}

impl Default for CoverageStats {
    fn default() -> Self {
        Self {
            line_coverage_pct: 0.0,
            covered_lines: BTreeSet::new(),
            total_executable_lines: 0,
        }
    }
}

impl CoverageStats {
    /// Coverage of `covered` out of `executable` lines; covered lines that
    /// are not executable are ignored.
    pub fn from_lines(executable: &BTreeSet<u32>, covered: &BTreeSet<u32>) -> Self {
        let covered_lines: BTreeSet<u32> = covered.intersection(executable).copied().collect();
        let total = executable.len() as u32;
        let line_coverage_pct = if total == 0 {
            0.0
        } else {
            100.0 * covered_lines.len() as f64 / f64::from(total)
        };
        Self {
            line_coverage_pct,
            covered_lines,
            total_executable_lines: total,
        }
    }

    pub fn check(&self) -> Result<(), InvariantError> {
        let pct = self.line_coverage_pct;
        if !(0.0..=100.0).contains(&pct) || pct.is_nan() {
            return Err(InvariantError::CoverageOutOfRange(pct));
        }
        let covered = self.covered_lines.len();
        if covered > self.total_executable_lines as usize {
            return Err(InvariantError::CoverageMismatch {
                pct,
                covered,
                total: self.total_executable_lines,
            });
        }
        if self.total_executable_lines > 0 {
            let expected = 100.0 * covered as f64 / f64::from(self.total_executable_lines);
            if (expected - pct).abs() > 1e-9 {
                return Err(InvariantError::CoverageMismatch {
                    pct,
                    covered,
                    total: self.total_executable_lines,
                });
            }
        }
        Ok(())
    }
}

/// A complete benchmark problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSample {
    pub sample_id: String,
    pub repo: String,
    pub module_path: PathBuf,
    pub target: FunctionRecord,
    /// Module-level import statements of the target's file.
    pub imports: Vec<String>,
    pub dependencies: Vec<DependencyRecord>,
    pub prompts: BTreeMap<(ContextLevel, PromptFormat), PromptSpec>,
    pub tests: Vec<TestRecord>,
    pub coverage: CoverageStats,
}

impl BenchmarkSample {
    /// Builds a sample, collapsing dependencies that share a name (first
    /// occurrence wins) and checking every stored invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sample_id: String,
        repo: String,
        module_path: PathBuf,
        target: FunctionRecord,
        imports: Vec<String>,
        dependencies: Vec<DependencyRecord>,
        prompts: BTreeMap<(ContextLevel, PromptFormat), PromptSpec>,
        tests: Vec<TestRecord>,
        coverage: CoverageStats,
    ) -> Result<Self, InvariantError> {
        let sample = Self {
            sample_id,
            repo,
            module_path,
            target,
            imports,
            dependencies: dedup_dependencies(dependencies),
            prompts,
            tests,
            coverage,
        };
        sample.check()?;
        Ok(sample)
    }

    pub fn check(&self) -> Result<(), InvariantError> {
        for dep in &self.dependencies {
            dep.check()?;
        }
        for test in &self.tests {
            if !test.status.is_validated() {
                return Err(InvariantError::UnvalidatedTest {
                    test_id: test.test_id.clone(),
                    status: test.status,
                });
            }
            test.check()?;
        }
        self.coverage.check()
    }

    /// D_s: the deduplicated dependency names.
    pub fn dependency_names(&self) -> BTreeSet<String> {
        self.dependencies.iter().map(|d| d.name.clone()).collect()
    }

    pub fn solution(&self) -> &str {
        &self.target.source
    }

    pub fn prompt(&self, level: ContextLevel, format: PromptFormat) -> Option<&PromptSpec> {
        self.prompts.get(&(level, format))
    }

    /// Returns a copy carrying a new validated test set and its coverage.
    pub fn with_tests(
        &self,
        tests: Vec<TestRecord>,
        coverage: CoverageStats,
    ) -> Result<Self, InvariantError> {
        let sample = Self {
            tests,
            coverage,
            ..self.clone()
        };
        sample.check()?;
        Ok(sample)
    }
}

fn dedup_dependencies(deps: Vec<DependencyRecord>) -> Vec<DependencyRecord> {
    let mut seen = HashSet::new();
    deps.into_iter()
        .filter(|d| seen.insert(d.name.clone()))
        .collect()
}

/// Result of running one test against one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOutcome {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub sample_id: String,
    pub candidate_index: usize,
    /// The complete candidate function as executed.
    pub generated_text: String,
    pub per_test_outcome: Vec<TestOutcome>,
    pub passed_all: bool,
    pub dir_value: Option<f64>,
}

impl GenerationRecord {
    pub fn new(
        sample_id: String,
        candidate_index: usize,
        generated_text: String,
        per_test_outcome: Vec<TestOutcome>,
        dir_value: Option<f64>,
    ) -> Self {
        let passed_all = per_test_outcome.iter().all(|o| *o == TestOutcome::Pass);
        Self {
            sample_id,
            candidate_index,
            generated_text,
            per_test_outcome,
            passed_all,
            dir_value,
        }
    }

    /// `dependency_count` is |D_s| of the sample the record belongs to.
    pub fn check(&self, dependency_count: usize) -> Result<(), InvariantError> {
        let all_pass = self
            .per_test_outcome
            .iter()
            .all(|o| *o == TestOutcome::Pass);
        if all_pass != self.passed_all {
            return Err(InvariantError::PassedAllMismatch {
                passed_all: self.passed_all,
            });
        }
        match self.dir_value {
            Some(v) if !(0.0..=1.0).contains(&v) => Err(InvariantError::DirOutOfRange(v)),
            Some(_) if dependency_count == 0 => Err(InvariantError::DirPresence),
            None if dependency_count > 0 => Err(InvariantError::DirPresence),
            _ => Ok(()),
        }
    }
}
