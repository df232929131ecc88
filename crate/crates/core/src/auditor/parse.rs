//! Recovers the `{"audit": [...]}` block from a raw completion.
//!
//! Completions usually carry two triple-quoted analysis steps before the
//! JSON, which may or may not sit in a code fence. Extraction tries, in
//! order: the whole text, the last fenced block that parses, then the first
//! JSON value found by scanning outside triple-quoted regions. Each attempt
//! also gets a lenient retry that drops `#` comments and trailing commas.

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use super::{AuditFinding, FindingSource};
use crate::talkback::Transcript;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("no JSON audit block found in completion")]
    NoJsonFound,
    #[error("audit block does not match the schema: {0}")]
    SchemaMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParseDiagnostic {
    /// Entry `position` of the audit array was skipped.
    EntrySchemaMismatch { position: usize, reason: String },
    /// Entry kept, but its index does not exist in the transcript.
    IndexOutOfRange { position: usize, index: usize, transcript_len: usize },
    /// Entry had no issue but carried explanation or suggestion text, which was dropped.
    NoIssueNormalized { position: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedAudit {
    pub findings: Vec<AuditFinding>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl ParsedAudit {
    pub fn out_of_range(&self) -> impl Iterator<Item = usize> + '_ {
        self.diagnostics.iter().filter_map(|d| match d {
            ParseDiagnostic::IndexOutOfRange { index, .. } => Some(*index),
            _ => None,
        })
    }
}

/// Serializes findings in the audit schema the prompt asks for.
pub fn serialize_audit(findings: &[AuditFinding]) -> String {
    let audit: Vec<Value> = findings
        .iter()
        .map(|f| {
            json!({
                "index": f.index,
                "transcript": f.transcript,
                "issue": f.issue,
                "explanation": f.explanation,
                "suggestion": f.suggestion,
            })
        })
        .collect();
    serde_json::to_string_pretty(&json!({ "audit": audit })).expect("audit serialization cannot fail")
}

pub fn parse_audit(completion: &str, transcript: &Transcript) -> Result<ParsedAudit, ParseError> {
    let audit = extract_audit_array(completion)?;
    let mut parsed = ParsedAudit::default();
    for (position, item) in audit.iter().enumerate() {
        match entry_from_value(item) {
            Err(reason) => parsed
                .diagnostics
                .push(ParseDiagnostic::EntrySchemaMismatch { position, reason }),
            Ok((finding, normalized)) => {
                if normalized {
                    parsed.diagnostics.push(ParseDiagnostic::NoIssueNormalized { position });
                }
                if finding.index >= transcript.len() {
                    parsed.diagnostics.push(ParseDiagnostic::IndexOutOfRange {
                        position,
                        index: finding.index,
                        transcript_len: transcript.len(),
                    });
                }
                parsed.findings.push(finding);
            }
        }
    }
    Ok(parsed)
}

fn entry_from_value(item: &Value) -> Result<(AuditFinding, bool), String> {
    let obj = item.as_object().ok_or("entry is not an object")?;
    let index = match obj.get("index") {
        Some(Value::Number(n)) => n
            .as_u64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64))
            .ok_or_else(|| format!("index {n} is not a non-negative integer"))?,
        Some(Value::String(s)) => s
            .trim()
            .parse::<u64>()
            .map_err(|_| format!("index \"{s}\" is not a non-negative integer"))?,
        Some(other) => return Err(format!("index has unexpected type: {other}")),
        None => return Err("missing index".into()),
    };
    let index = usize::try_from(index).map_err(|_| "index too large".to_string())?;
    let transcript = match obj.get("transcript") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err("transcript is not a string".into()),
        None => return Err("missing transcript".into()),
    };
    let text = |key: &str| -> Result<String, String> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(String::new()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(format!("{key} is not a string")),
        }
    };
    let issue = text("issue")?;
    let mut explanation = text("explanation")?;
    let mut suggestion = text("suggestion")?;
    let mut normalized = false;
    if issue.trim().is_empty() && !(explanation.is_empty() && suggestion.is_empty()) {
        explanation.clear();
        suggestion.clear();
        normalized = true;
    }
    Ok((
        AuditFinding {
            index,
            transcript,
            issue,
            explanation,
            suggestion,
            source: FindingSource::Llm,
        },
        normalized,
    ))
}

fn extract_audit_array(completion: &str) -> Result<Vec<Value>, ParseError> {
    let mut schema_error = None;
    let mut consider = |value: Value| -> Option<Vec<Value>> {
        match audit_of(value) {
            Ok(items) => Some(items),
            Err(e) => {
                schema_error.get_or_insert(e);
                None
            }
        }
    };

    if let Some(v) = parse_json(completion.trim()) {
        if let Some(items) = consider(v) {
            return Ok(items);
        }
    }

    let outside_quotes = blank_triple_quoted(completion);
    for block in fenced_blocks(&outside_quotes).into_iter().rev() {
        if let Some(v) = parse_json(block.trim()) {
            if let Some(items) = consider(v) {
                return Ok(items);
            }
        }
    }

    // Values nested inside a rejected value are not candidates.
    let mut resume = 0;
    for (offset, c) in outside_quotes.char_indices() {
        if offset < resume || (c != '{' && c != '[') {
            continue;
        }
        if let Some((v, len)) = first_value_at(&outside_quotes[offset..]) {
            if let Some(items) = consider(v) {
                return Ok(items);
            }
            resume = offset + len;
        }
    }

    Err(schema_error.map_or(ParseError::NoJsonFound, ParseError::SchemaMismatch))
}

/// Accepts `{"audit": [...]}` or a bare array of entries.
fn audit_of(value: Value) -> Result<Vec<Value>, String> {
    match value {
        Value::Array(items) if items.iter().all(Value::is_object) => Ok(items),
        Value::Object(mut map) => match map.remove("audit") {
            Some(Value::Array(items)) => Ok(items),
            Some(other) => Err(format!("`audit` is not an array: {other}")),
            None => Err(missing_audit_key(&map)),
        },
        other => Err(format!("expected an object with `audit`, got {other}")),
    }
}

fn missing_audit_key(map: &Map<String, Value>) -> String {
    let keys: Vec<_> = map.keys().map(String::as_str).collect();
    format!("object has no `audit` key (keys: {})", keys.join(", "))
}

fn parse_json(text: &str) -> Option<Value> {
    serde_json::from_str(text)
        .ok()
        .or_else(|| serde_json::from_str(&lenient(text)).ok())
}

/// First JSON value at the start of `text` and the number of bytes it spans.
/// A value only readable after the lenient cleanup is reported as spanning
/// one byte, since its extent in the original text is unknown.
fn first_value_at(text: &str) -> Option<(Value, usize)> {
    let mut strict = serde_json::Deserializer::from_str(text).into_iter::<Value>();
    if let Some(Ok(v)) = strict.next() {
        return Some((v, strict.byte_offset()));
    }
    let cleaned = lenient(text);
    match serde_json::Deserializer::from_str(&cleaned).into_iter::<Value>().next() {
        Some(Ok(v)) => Some((v, 1)),
        _ => None,
    }
}

/// Drops `#` line comments and trailing commas outside string literals.
fn lenient(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if in_string {
            out.push(c);
            if c == '\\' && i + 1 < chars.len() {
                out.push(chars[i + 1]);
                i += 1;
            } else if c == '"' {
                in_string = false;
            }
        } else if c == '"' {
            in_string = true;
            out.push(c);
        } else if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if !matches!(next, Some('}') | Some(']')) {
                out.push(c);
            }
        } else {
            out.push(c);
        }
        i += 1;
    }
    out
}

/// Replaces the contents of `"""`-delimited regions with spaces so their
/// prose cannot be mistaken for JSON. Byte offsets are preserved.
fn blank_triple_quoted(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("\"\"\"") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 3..];
        match after.find("\"\"\"") {
            Some(end) => {
                out.push_str("   ");
                out.extend(after[..end].chars().map(|c| if c == '\n' { '\n' } else { ' ' }));
                out.push_str("   ");
                rest = &after[end + 3..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Contents of ``` fenced blocks, without the opening info string.
fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map_or(after.len(), |n| n + 1);
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                blocks.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => break,
        }
    }
    blocks
}
