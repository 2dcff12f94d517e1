//! Context rendering and prompt assembly.

mod render;
pub mod templates;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    BenchmarkSample, ContextLevel, DefinitionKind, DependencyRecord, FunctionRecord, PromptFormat,
    PromptSpec,
};
use crate::python::count_tokens;

pub use render::{render_definition, strip_bodies};

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("instruct prompt variant {0} does not exist, expected 1 or 2")]
    Variant(u8),
    #[error("`{0}` has no docstring")]
    MissingDocstring(String),
    #[error("debug prompt needs a non-empty error log")]
    EmptyErrorLog,
}

/// Everything a prompt is rendered from.
#[derive(Debug, Clone, Copy)]
pub struct ContextParts<'a> {
    pub imports: &'a [String],
    pub dependencies: &'a [DependencyRecord],
    pub target: &'a FunctionRecord,
}

impl<'a> From<&'a BenchmarkSample> for ContextParts<'a> {
    fn from(sample: &'a BenchmarkSample) -> Self {
        Self {
            imports: &sample.imports,
            dependencies: &sample.dependencies,
            target: &sample.target,
        }
    }
}

impl<'a> ContextParts<'a> {
    /// Drops dependency blocks from the end until `fits` accepts the result
    /// or none are left.
    fn truncated(self, fits: impl Fn(ContextParts) -> bool) -> ContextParts<'a> {
        let mut parts = self;
        while !fits(parts) && !parts.dependencies.is_empty() {
            parts.dependencies = &parts.dependencies[..parts.dependencies.len() - 1];
        }
        parts
    }
}

/// Import statements, then variable dependencies, then each function or
/// class dependency, separated by blank lines.
pub fn render_context<'a>(parts: impl Into<ContextParts<'a>>, level: ContextLevel) -> String {
    let parts = parts.into();
    let mut blocks = Vec::new();
    if !parts.imports.is_empty() {
        blocks.push(parts.imports.join("\n"));
    }
    let variables: Vec<String> = parts
        .dependencies
        .iter()
        .filter(|d| d.kind == DefinitionKind::Variable)
        .map(|d| render_definition(d, level))
        .collect();
    if !variables.is_empty() {
        blocks.push(variables.join("\n"));
    }
    blocks.extend(
        parts
            .dependencies
            .iter()
            .filter(|d| d.kind != DefinitionKind::Variable)
            .map(|d| render_definition(d, level)),
    );
    if blocks.is_empty() {
        return String::new();
    }
    let mut ctx = blocks.join("\n\n");
    ctx.push('\n');
    ctx
}

fn spec(level: ContextLevel, format: PromptFormat, text: String) -> PromptSpec {
    PromptSpec {
        context_level: level,
        format,
        token_count: count_tokens(&text),
        text,
    }
}

fn base_text(parts: ContextParts, level: ContextLevel) -> String {
    let ctx = render_context(parts, level);
    if ctx.is_empty() {
        parts.target.prompt.clone()
    } else {
        format!("{ctx}\n{}", parts.target.prompt)
    }
}

fn docstring(target: &FunctionRecord) -> Result<String, PromptError> {
    target
        .dedented_docstring()
        .ok_or_else(|| PromptError::MissingDocstring(target.qualified_name.clone()))
}

pub fn build_base_prompt<'a>(
    parts: impl Into<ContextParts<'a>>,
    level: ContextLevel,
) -> PromptSpec {
    spec(level, PromptFormat::Base, base_text(parts.into(), level))
}

pub fn build_instruct_prompt<'a>(
    parts: impl Into<ContextParts<'a>>,
    level: ContextLevel,
    variant: u8,
) -> Result<PromptSpec, PromptError> {
    let parts = parts.into();
    let doc = docstring(parts.target)?;
    let sig = parts.target.call_signature();
    let (format, text) = match variant {
        1 => (
            PromptFormat::InstructV1,
            templates::render(
                templates::INSTRUCT_V1,
                &[
                    ("target_function_signature", &sig),
                    ("target_function_docstring", &doc),
                    ("BasePrompt", &base_text(parts, level)),
                ],
            ),
        ),
        2 => (
            PromptFormat::InstructV2,
            templates::render(
                templates::INSTRUCT_V2,
                &[
                    ("dependency_context", &render_context(parts, level)),
                    ("target_function_name", parts.target.name()),
                    ("target_function_signature", &sig),
                    ("target_function_docstring", &doc),
                    ("target_function_prompt", &parts.target.prompt),
                ],
            ),
        ),
        other => return Err(PromptError::Variant(other)),
    };
    Ok(spec(level, format, text))
}

pub fn build_prompt<'a>(
    parts: impl Into<ContextParts<'a>>,
    level: ContextLevel,
    format: PromptFormat,
) -> Result<PromptSpec, PromptError> {
    let parts = parts.into();
    match format {
        PromptFormat::Base => Ok(build_base_prompt(parts, level)),
        PromptFormat::InstructV1 => build_instruct_prompt(parts, level, 1),
        PromptFormat::InstructV2 => build_instruct_prompt(parts, level, 2),
    }
}

/// Like [`build_prompt`], but drops trailing dependency blocks while the
/// prompt exceeds `max_tokens`. The target header is never cut.
pub fn build_prompt_within<'a>(
    parts: impl Into<ContextParts<'a>>,
    level: ContextLevel,
    format: PromptFormat,
    max_tokens: Option<usize>,
) -> Result<PromptSpec, PromptError> {
    let parts = parts.into();
    let Some(budget) = max_tokens else {
        return build_prompt(parts, level, format);
    };
    let fits =
        |p: ContextParts| build_prompt(p, level, format).is_ok_and(|s| s.token_count <= budget);
    let trimmed = parts.truncated(fits);
    let out = build_prompt(trimmed, level, format)?;
    if out.token_count > budget {
        log::warn!(
            "prompt for `{}` needs {} tokens, over the budget of {budget}",
            parts.target.qualified_name,
            out.token_count
        );
    }
    Ok(out)
}

/// All nine level and format combinations.
pub fn build_all_prompts<'a>(
    parts: impl Into<ContextParts<'a>>,
    max_tokens: Option<usize>,
) -> Result<BTreeMap<(ContextLevel, PromptFormat), PromptSpec>, PromptError> {
    let parts = parts.into();
    let mut out = BTreeMap::new();
    for level in ContextLevel::ALL {
        for format in PromptFormat::ALL {
            out.insert(
                (level, format),
                build_prompt_within(parts, level, format, max_tokens)?,
            );
        }
    }
    Ok(out)
}

pub fn build_debug_prompt(
    sample: &BenchmarkSample,
    failed_candidate: &str,
    failed_test: &str,
    error_log: &str,
) -> Result<PromptSpec, PromptError> {
    build_debug_prompt_at(
        sample,
        ContextLevel::Full,
        failed_candidate,
        failed_test,
        error_log,
    )
}

pub fn build_debug_prompt_at(
    sample: &BenchmarkSample,
    level: ContextLevel,
    failed_candidate: &str,
    failed_test: &str,
    error_log: &str,
) -> Result<PromptSpec, PromptError> {
    if error_log.trim().is_empty() {
        return Err(PromptError::EmptyErrorLog);
    }
    let target = &sample.target;
    let text = templates::render(
        templates::DEBUG,
        &[
            ("dependency_context", &render_context(sample, level)),
            ("target_function_name", target.name()),
            ("target_function_signature", &target.call_signature()),
            ("target_function_docstring", &docstring(target)?),
            ("error_solution", failed_candidate),
            ("failed_test_case", failed_test),
            ("error_log", error_log),
            ("target_function_prompt", &target.prompt),
        ],
    );
    Ok(spec(level, PromptFormat::InstructV2, text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningStyle {
    Instruct,
    RawFull,
    RawSmall,
}

/// One supervised fine-tuning pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub style: TuningStyle,
    pub prompt: String,
    pub completion: String,
}

pub fn build_tuning_record(
    target: &FunctionRecord,
    imports: &[String],
    deps: &[DependencyRecord],
    style: TuningStyle,
) -> Result<TuningRecord, PromptError> {
    let parts = ContextParts {
        imports,
        dependencies: deps,
        target,
    };
    let prompt = match style {
        TuningStyle::Instruct => build_instruct_prompt(parts, ContextLevel::Full, 2)?.text,
        TuningStyle::RawFull => build_base_prompt(parts, ContextLevel::Full).text,
        TuningStyle::RawSmall => build_base_prompt(parts, ContextLevel::Small).text,
    };
    Ok(TuningRecord {
        style,
        prompt,
        completion: target.body.clone(),
    })
}
