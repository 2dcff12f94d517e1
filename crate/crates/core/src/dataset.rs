//! Line-delimited dataset files, one benchmark sample per line.
//!
//! Expected-value blobs live in a sibling directory (`<dataset>.blobs/`)
//! keyed by sample and test id; records only carry the relative path.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    BenchmarkSample, ContextLevel, CoverageStats, DefinitionKind, DependencyRecord, FunctionRecord,
    InvariantError, Locality, ModuleId, PromptFormat, PromptSpec, TestOrigin, TestRecord,
    TestStatus,
};
use crate::python::count_tokens;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sample `{sample_id}` violates the schema: {source}")]
    Invalid {
        sample_id: String,
        #[source]
        source: InvariantError,
    },
    #[error("sample `{sample_id}`: {message}")]
    Inconsistent { sample_id: String, message: String },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl DatasetError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DependencyRow {
    name: String,
    kind: DefinitionKind,
    origin: ModuleId,
    locality: Locality,
    definition_text: String,
    depth: u32,
    signature: String,
    docstring: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PromptRow {
    text: String,
    token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TestRow {
    test_id: String,
    source_text: String,
    status: TestStatus,
    origin: TestOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expected_blob: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    original_text: Option<String>,
}

/// On-disk shape of one sample. The leading fields are the stable schema;
/// `target`, `imports` and the coverage line sets make the round trip
/// lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Record {
    sample_id: String,
    repo: String,
    module_path: PathBuf,
    function_name: String,
    signature: String,
    docstring: Option<String>,
    solution: String,
    dependencies: Vec<DependencyRow>,
    prompts: BTreeMap<ContextLevel, BTreeMap<PromptFormat, PromptRow>>,
    tests: Vec<TestRow>,
    line_coverage_pct: f64,
    covered_lines: Vec<u32>,
    total_executable_lines: u32,
    imports: Vec<String>,
    target: FunctionRecord,
}

impl From<&BenchmarkSample> for Record {
    fn from(s: &BenchmarkSample) -> Self {
        let mut prompts: BTreeMap<ContextLevel, BTreeMap<PromptFormat, PromptRow>> =
            BTreeMap::new();
        for ((level, format), p) in &s.prompts {
            prompts.entry(*level).or_default().insert(
                *format,
                PromptRow {
                    text: p.text.clone(),
                    token_count: p.token_count,
                },
            );
        }
        Record {
            sample_id: s.sample_id.clone(),
            repo: s.repo.clone(),
            module_path: s.module_path.clone(),
            function_name: s.target.qualified_name.clone(),
            signature: s.target.signature.clone(),
            docstring: s.target.docstring.clone(),
            solution: s.solution().to_owned(),
            dependencies: s
                .dependencies
                .iter()
                .map(|d| DependencyRow {
                    name: d.name.clone(),
                    kind: d.kind,
                    origin: d.origin.clone(),
                    locality: d.locality,
                    definition_text: d.definition_text.clone(),
                    depth: d.depth,
                    signature: d.signature.clone(),
                    docstring: d.docstring.clone(),
                })
                .collect(),
            prompts,
            tests: s
                .tests
                .iter()
                .map(|t| TestRow {
                    test_id: t.test_id.clone(),
                    source_text: t.source_text.clone(),
                    status: t.status,
                    origin: t.origin,
                    expected_blob: t.expected_blob.clone(),
                    original_text: t.original_text.clone(),
                })
                .collect(),
            line_coverage_pct: s.coverage.line_coverage_pct,
            covered_lines: s.coverage.covered_lines.iter().copied().collect(),
            total_executable_lines: s.coverage.total_executable_lines,
            imports: s.imports.clone(),
            target: s.target.clone(),
        }
    }
}

impl Record {
    fn into_sample(self) -> Result<BenchmarkSample, DatasetError> {
        let id = self.sample_id.clone();
        let inconsistent = |message: String| DatasetError::Inconsistent {
            sample_id: id.clone(),
            message,
        };
        if self.function_name != self.target.qualified_name
            || self.signature != self.target.signature
            || self.docstring != self.target.docstring
            || self.solution != self.target.source
        {
            return Err(inconsistent(
                "target fields disagree with the embedded function".into(),
            ));
        }
        let mut prompts = BTreeMap::new();
        for (level, by_format) in self.prompts {
            for (format, row) in by_format {
                let counted = count_tokens(&row.text);
                if counted != row.token_count {
                    return Err(inconsistent(format!(
                        "{level}/{format} prompt claims {} tokens, text has {counted}",
                        row.token_count
                    )));
                }
                prompts.insert(
                    (level, format),
                    PromptSpec {
                        context_level: level,
                        format,
                        text: row.text,
                        token_count: row.token_count,
                    },
                );
            }
        }
        let dependencies = self
            .dependencies
            .into_iter()
            .map(|d| DependencyRecord {
                name: d.name,
                kind: d.kind,
                origin: d.origin,
                locality: d.locality,
                definition_text: d.definition_text,
                signature: d.signature,
                docstring: d.docstring,
                depth: d.depth,
            })
            .collect();
        let tests = self
            .tests
            .into_iter()
            .map(|t| TestRecord {
                test_id: t.test_id,
                source_text: t.source_text,
                status: t.status,
                expected_blob: t.expected_blob,
                original_text: t.original_text,
                origin: t.origin,
            })
            .collect();
        let coverage = CoverageStats {
            line_coverage_pct: self.line_coverage_pct,
            covered_lines: self.covered_lines.into_iter().collect(),
            total_executable_lines: self.total_executable_lines,
        };
        BenchmarkSample::new(
            self.sample_id,
            self.repo,
            self.module_path,
            self.target,
            self.imports,
            dependencies,
            prompts,
            tests,
            coverage,
        )
        .map_err(|source| DatasetError::Invalid {
            sample_id: id,
            source,
        })
    }
}

/// Writes one record per line. Nothing is written if any sample is invalid.
pub fn save_dataset(samples: &[BenchmarkSample], destination: &Path) -> Result<(), DatasetError> {
    let mut lines = Vec::with_capacity(samples.len());
    for sample in samples {
        sample.check().map_err(|source| DatasetError::Invalid {
            sample_id: sample.sample_id.clone(),
            source,
        })?;
        let line = serde_json::to_string(&Record::from(sample)).expect("records always serialize");
        lines.push(line);
    }
    if let Some(dir) = destination.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    }
    let file = File::create(destination).map_err(|e| DatasetError::io(destination, e))?;
    let mut out = BufWriter::new(file);
    for line in lines {
        writeln!(out, "{line}").map_err(|e| DatasetError::io(destination, e))?;
    }
    out.flush().map_err(|e| DatasetError::io(destination, e))
}

pub fn load_dataset(source: &Path) -> Result<Vec<BenchmarkSample>, DatasetError> {
    let file = File::open(source).map_err(|e| DatasetError::io(source, e))?;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
            path: source.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        samples.push(record.into_sample()?);
    }
    Ok(samples)
}

/// Directory holding the expected-value blobs of a dataset file.
pub fn blob_dir(dataset: &Path) -> PathBuf {
    let mut name = dataset.file_name().unwrap_or_default().to_owned();
    name.push(".blobs");
    dataset.with_file_name(name)
}

/// Relative blob path for one test, safe to use as a file name.
pub fn blob_key(sample_id: &str, test_id: &str) -> String {
    format!("{}/{}.pkl", sanitize(sample_id), sanitize(test_id))
}

pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect()
}
