use std::fmt;

use regex::Regex;
use serde_json::Value as Json;
use thiserror::Error;

use crate::constraints::{parse_constraints, ConstraintSet};
use crate::ingest::{parse_event_chain, ComponentDesc, EventChainDescription, IngestError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    EventChain,
    InstanceModel,
    Code,
    Constraints,
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArtifactKind::EventChain => "event chain",
            ArtifactKind::InstanceModel => "instance model",
            ArtifactKind::Code => "code",
            ArtifactKind::Constraints => "constraints",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeArtifact {
    pub class_name: String,
    pub source: String,
    /// Parameters of `execute` without `self`, in order.
    pub params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    EventChain(EventChainDescription),
    /// JSON text of an instance model; conformance is checked when loaded.
    InstanceModel(String),
    Code(CodeArtifact),
    Constraints { text: String, set: ConstraintSet },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentResult {
    pub raw: String,
    pub artifact: Artifact,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("no {0} artifact found")]
    NoArtifact(ArtifactKind),
    #[error("{count} candidate {kind} blocks; expected exactly one")]
    Ambiguous { kind: ArtifactKind, count: usize },
    #[error("{kind} artifact invalid at {path}: {message}")]
    SchemaInvalid {
        kind: ArtifactKind,
        path: String,
        message: String,
    },
    #[error("class `{0}` has no execute method")]
    NoExecuteMethod(String),
    #[error("code defines no class")]
    NoClass,
    #[error("class is `{found}`, component is `{expected}`")]
    ClassName { expected: String, found: String },
    #[error("execute({found}) does not match declared inputs ({expected})")]
    Signature { expected: String, found: String },
}

struct Block<'a> {
    lang: &'a str,
    body: String,
}

fn fenced_blocks(text: &str) -> Vec<Block<'_>> {
    let mut out = Vec::new();
    let mut open: Option<(&str, Vec<&str>)> = None;
    for line in text.lines() {
        let t = line.trim_start();
        match &mut open {
            None => {
                if let Some(info) = t.strip_prefix("```") {
                    let lang = info.split_whitespace().next().unwrap_or("");
                    open = Some((lang, Vec::new()));
                }
            }
            Some((lang, lines)) => {
                if t.trim_end() == "```" {
                    let mut body = lines.join("\n");
                    body.push('\n');
                    out.push(Block { lang, body });
                    open = None;
                } else {
                    lines.push(line);
                }
            }
        }
    }
    out
}

/// Blocks tagged with one of `tags`; untagged blocks only when none is tagged.
fn pick_block(text: &str, kind: ArtifactKind, tags: &[&str]) -> Result<Option<String>, ExtractError> {
    let blocks = fenced_blocks(text);
    let tagged: Vec<_> = blocks
        .iter()
        .filter(|b| tags.iter().any(|t| b.lang.eq_ignore_ascii_case(t)))
        .collect();
    let candidates = if tagged.is_empty() {
        blocks.iter().filter(|b| b.lang.is_empty()).collect()
    } else {
        tagged
    };
    match candidates.len() {
        0 => Ok(None),
        1 => Ok(Some(candidates[0].body.clone())),
        count => Err(ExtractError::Ambiguous { kind, count }),
    }
}

/// Outermost balanced `[...]` / `{...}` spans that parse as JSON.
fn bracket_spans(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'[' && bytes[i] != b'{' {
            i += 1;
            continue;
        }
        let mut depth = 0usize;
        let mut in_str = false;
        let mut j = i;
        let mut end = None;
        while j < bytes.len() {
            let b = bytes[j];
            if in_str {
                if b == b'\\' {
                    j += 1;
                } else if b == b'"' {
                    in_str = false;
                }
            } else {
                match b {
                    b'"' => in_str = true,
                    b'[' | b'{' => depth += 1,
                    b']' | b'}' => {
                        depth -= 1;
                        if depth == 0 {
                            end = Some(j);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            j += 1;
        }
        match end {
            Some(e) if serde_json::from_str::<Json>(&text[i..=e]).is_ok() => {
                out.push(&text[i..=e]);
                i = e + 1;
            }
            _ => i += 1,
        }
    }
    out
}

fn json_candidate(kind: ArtifactKind, response: &str, diagnostics: &mut Vec<String>) -> Result<String, ExtractError> {
    if let Some(body) = pick_block(response, kind, &["json"])? {
        return Ok(body);
    }
    let spans = bracket_spans(response);
    match spans.len() {
        0 => Err(ExtractError::NoArtifact(kind)),
        1 => {
            diagnostics.push("no fenced block; used bracket scan".into());
            Ok(spans[0].to_string())
        }
        count => Err(ExtractError::Ambiguous { kind, count }),
    }
}

fn schema(kind: ArtifactKind, path: impl Into<String>, message: impl Into<String>) -> ExtractError {
    ExtractError::SchemaInvalid {
        kind,
        path: path.into(),
        message: message.into(),
    }
}

pub fn extract_artifact(kind: ArtifactKind, response: &str) -> Result<AgentResult, ExtractError> {
    let mut diagnostics = Vec::new();
    let artifact = match kind {
        ArtifactKind::EventChain => {
            let text = json_candidate(kind, response, &mut diagnostics)?;
            let desc = parse_event_chain(&text).map_err(|e| match e {
                IngestError::Schema { path, message } => schema(kind, path, message),
                IngestError::Parse { line, column, message } => schema(kind, format!("{line}:{column}"), message),
                other => schema(kind, "$", other.to_string()),
            })?;
            Artifact::EventChain(desc)
        }
        ArtifactKind::InstanceModel => {
            let text = json_candidate(kind, response, &mut diagnostics)?;
            let v: Json = serde_json::from_str(&text).map_err(|e| schema(kind, "$", e.to_string()))?;
            if !v.get("objects").is_some_and(Json::is_array) {
                return Err(schema(kind, "objects", "missing `objects` array"));
            }
            Artifact::InstanceModel(text)
        }
        ArtifactKind::Code => {
            let source = pick_block(response, kind, &["python", "py", "python3"])?
                .ok_or(ExtractError::NoArtifact(kind))?;
            Artifact::Code(analyze_code(source)?)
        }
        ArtifactKind::Constraints => {
            let text = match pick_block(response, kind, &["ocl"])? {
                Some(t) => t,
                None => response.trim().to_string() + "\n",
            };
            if text.trim().is_empty() {
                return Err(ExtractError::NoArtifact(kind));
            }
            let set = parse_constraints(&text).map_err(|e| schema(kind, e.pos.to_string(), e.message))?;
            Artifact::Constraints { text, set }
        }
    };
    Ok(AgentResult {
        raw: response.to_string(),
        artifact,
        diagnostics,
    })
}

fn analyze_code(source: String) -> Result<CodeArtifact, ExtractError> {
    let class_re = Regex::new(r"(?m)^class\s+([A-Za-z_]\w*)").expect("valid regex");
    let exec_re = Regex::new(r"(?m)^[ \t]+def\s+execute\s*\(").expect("valid regex");
    let class = class_re.captures(&source).ok_or(ExtractError::NoClass)?;
    let class_name = class[1].to_string();
    let class_start = class.get(0).expect("whole match").start();
    let next_class = class_re
        .find_at(&source, class.get(0).expect("whole match").end())
        .map_or(source.len(), |m| m.start());
    let body = &source[class_start..next_class];
    let m = exec_re
        .find(body)
        .ok_or_else(|| ExtractError::NoExecuteMethod(class_name.clone()))?;
    let args_start = m.end();
    let mut depth = 1;
    let mut end = None;
    for (i, c) in body[args_start..].char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => {
                depth -= 1;
                if depth == 0 {
                    end = Some(args_start + i);
                    break;
                }
            }
            _ => {}
        }
    }
    let end = end.ok_or_else(|| ExtractError::NoExecuteMethod(class_name.clone()))?;
    let params = split_params(&body[args_start..end]);
    Ok(CodeArtifact {
        class_name,
        source,
        params,
    })
}

fn split_params(args: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for c in args.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    parts.push(cur);
    parts
        .iter()
        .map(|p| {
            let p = p.split([':', '=']).next().unwrap_or("").trim();
            p.to_string()
        })
        .filter(|p| !p.is_empty() && p != "self")
        .collect()
}

/// Class name equals the component name and `execute` takes exactly the
/// declared input names.
pub fn check_signature(code: &CodeArtifact, component: &ComponentDesc) -> Result<(), ExtractError> {
    if code.class_name != component.name {
        return Err(ExtractError::ClassName {
            expected: component.name.clone(),
            found: code.class_name.clone(),
        });
    }
    let mut expected: Vec<&str> = component.input_names();
    let mut found: Vec<&str> = code.params.iter().map(String::as_str).collect();
    expected.sort_unstable();
    found.sort_unstable();
    if expected != found {
        return Err(ExtractError::Signature {
            expected: component.input_names().join(", "),
            found: code.params.join(", "),
        });
    }
    Ok(())
}
