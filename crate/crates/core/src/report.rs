//! The unified per-screen report: transcript entries with their rule and
//! LLM findings, a self-checking summary, and JSON/HTML renderings.
//!
//! `report.json` is versioned by `report_version`; the browser viewer reads
//! exactly this shape.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::auditor::{AuditFinding, FindingSource, PromptVariant};
use crate::capture::ScreenCapture;
use crate::eval::ErrorCategory;
use crate::geometry::BoundingBox;
use crate::rules::{RuleFinding, RuleId};
use crate::talkback::Transcript;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("transcript is for `{transcript}` but the capture is `{capture}`")]
    CrossScreenMix { transcript: String, capture: String },
    #[error("malformed report: {0}")]
    Malformed(String),
    #[error("unsupported report_version {found} (expected {REPORT_VERSION})")]
    UnsupportedVersion { found: Value },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportEntry {
    pub index: usize,
    pub transcript: String,
    pub node_id: String,
    pub bounds: BoundingBox,
    pub findings: Vec<AuditFinding>,
    /// Keyword-derived guess at the error category of the entry's findings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_hint: Option<ErrorCategory>,
}

/// A rule finding on a node the traversal never reached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffTranscriptFinding {
    pub node_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundingBox>,
    pub rule_id: RuleId,
    pub issue: String,
    pub explanation: String,
    pub suggestion: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub total_entries: usize,
    pub flagged_entries: usize,
    pub total_findings: usize,
    pub llm_findings: usize,
    pub rule_findings: usize,
    pub off_transcript_findings: usize,
    /// Flagged entries per category hint.
    pub by_category: BTreeMap<ErrorCategory, usize>,
    /// Flagged entries without a category hint.
    pub uncategorized: usize,
}

impl Summary {
    pub fn recount(entries: &[ReportEntry], off_transcript: &[OffTranscriptFinding]) -> Self {
        let mut s = Summary {
            total_entries: entries.len(),
            off_transcript_findings: off_transcript.len(),
            ..Summary::default()
        };
        for entry in entries.iter().filter(|e| !e.findings.is_empty()) {
            s.flagged_entries += 1;
            s.total_findings += entry.findings.len();
            for f in &entry.findings {
                match f.source {
                    FindingSource::Llm => s.llm_findings += 1,
                    FindingSource::Rule => s.rule_findings += 1,
                }
            }
            match entry.category_hint {
                Some(c) => *s.by_category.entry(c).or_default() += 1,
                None => s.uncategorized += 1,
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_variant: Option<PromptVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub rules: bool,
    /// RFC 3339 creation time.
    pub generated_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub report_version: u32,
    pub app_name: String,
    pub screen_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot: Option<String>,
    pub viewport: BoundingBox,
    pub entries: Vec<ReportEntry>,
    pub off_transcript: Vec<OffTranscriptFinding>,
    pub summary: Summary,
    pub provenance: Provenance,
}

impl Report {
    pub fn is_consistent(&self) -> bool {
        self.summary == Summary::recount(&self.entries, &self.off_transcript)
            && self.entries.iter().enumerate().all(|(i, e)| e.index == i)
    }

    pub fn findings(&self) -> impl Iterator<Item = &AuditFinding> {
        self.entries.iter().flat_map(|e| &e.findings)
    }
}

const CATEGORY_KEYWORDS: &[(ErrorCategory, &[&str])] = &[
    (
        ErrorCategory::MissingLabel,
        &[
            "unlabeled",
            "unlabelled",
            "missing label",
            "no label",
            "not have a label",
            "lacks a label",
            "without a label",
            "no content description",
            "missing content description",
            "not described",
            "no text alternative",
        ],
    ),
    (ErrorCategory::Heading, &["heading", "title"]),
    (
        ErrorCategory::Functionality,
        &[
            "not focusable",
            "unfocusable",
            "cannot be activated",
            "can't be activated",
            "not announced",
            "state",
            "keyboard",
            "activation",
            "actionable",
        ],
    ),
    (
        ErrorCategory::StructureGrouping,
        &[
            "group",
            "grouped",
            "grouping",
            "order",
            "redundant",
            "repeat",
            "repeated",
            "duplicate",
            "duplicated",
            "sequence",
            "related",
            "share this location",
            "inconsistent",
        ],
    ),
    (
        ErrorCategory::LabelQuality,
        &[
            "label",
            "description",
            "unclear",
            "confusing",
            "identifier",
            "uninformative",
            "descriptive",
            "meaningless",
            "purpose",
        ],
    ),
];

/// Whole-word (or plural) occurrence of `phrase` in lowercase `text`.
fn mentions(text: &str, phrase: &str) -> bool {
    let boundary = |c: Option<char>| c.is_none_or(|c| !c.is_alphanumeric());
    text.match_indices(phrase).any(|(at, _)| {
        let before = text[..at].chars().next_back();
        let mut after = text[at + phrase.len()..].chars();
        let next = after.next();
        boundary(before) && (boundary(next) || (next == Some('s') && boundary(after.next())))
    })
}

fn categorize(text: &str) -> Option<ErrorCategory> {
    let text = text.to_lowercase();
    CATEGORY_KEYWORDS
        .iter()
        .find(|(_, words)| words.iter().any(|w| mentions(&text, w)))
        .map(|(c, _)| *c)
}

/// Heuristic category for a set of findings: the issue texts are tried
/// first, then the explanations.
pub fn category_hint(findings: &[AuditFinding]) -> Option<ErrorCategory> {
    findings
        .iter()
        .find_map(|f| categorize(&f.issue))
        .or_else(|| findings.iter().find_map(|f| categorize(&f.explanation)))
}

fn same_issue(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

/// Merges rule and LLM findings onto transcript entries. No-issue rows are
/// dropped; a rule finding whose issue text equals an LLM finding on the
/// same entry is dropped in favour of the LLM copy.
pub fn build_report(
    transcript: &Transcript,
    rule_findings: &[RuleFinding],
    llm_findings: &[AuditFinding],
    capture: &ScreenCapture,
    provenance: Provenance,
) -> Result<Report, ReportError> {
    if transcript.screen_id != capture.screen_id {
        return Err(ReportError::CrossScreenMix {
            transcript: transcript.screen_id.clone(),
            capture: capture.screen_id.clone(),
        });
    }
    let mut entries: Vec<ReportEntry> = transcript
        .entries
        .iter()
        .map(|e| ReportEntry {
            index: e.index,
            transcript: e.transcript.clone(),
            node_id: e.node_id.clone(),
            bounds: e.bounds,
            findings: Vec::new(),
            category_hint: None,
        })
        .collect();

    for f in llm_findings.iter().filter(|f| !f.is_no_issue()) {
        match entries.get_mut(f.index) {
            Some(entry) => entry.findings.push(AuditFinding {
                source: FindingSource::Llm,
                ..f.clone()
            }),
            None => log::warn!(
                "{}: dropping finding for entry {} (transcript has {} entries)",
                transcript.screen_id,
                f.index,
                transcript.len()
            ),
        }
    }

    let mut off_transcript = Vec::new();
    for r in rule_findings {
        let Some(entry) = entries.iter_mut().find(|e| e.node_id == r.node_id) else {
            off_transcript.push(OffTranscriptFinding {
                node_id: r.node_id.clone(),
                bounds: capture.find_node(&r.node_id).map(|n| n.bounds),
                rule_id: r.rule_id,
                issue: r.message.clone(),
                explanation: r.explanation().to_owned(),
                suggestion: r.suggestion().to_owned(),
            });
            continue;
        };
        let duplicate = entry
            .findings
            .iter()
            .any(|f| f.source == FindingSource::Llm && same_issue(&f.issue, &r.message));
        if !duplicate {
            entry.findings.push(AuditFinding {
                index: entry.index,
                transcript: entry.transcript.clone(),
                issue: r.message.clone(),
                explanation: r.explanation().to_owned(),
                suggestion: r.suggestion().to_owned(),
                source: FindingSource::Rule,
            });
        }
    }

    for entry in &mut entries {
        entry.category_hint = category_hint(&entry.findings);
    }
    let summary = Summary::recount(&entries, &off_transcript);
    Ok(Report {
        report_version: REPORT_VERSION,
        app_name: capture.app_name.clone(),
        screen_id: capture.screen_id.clone(),
        screenshot: capture.screenshot_path.clone(),
        viewport: capture.viewport(),
        entries,
        off_transcript,
        summary,
        provenance,
    })
}

pub fn emit_json(report: &Report) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    out.push('\n');
    out
}

pub fn parse_report(raw: &[u8]) -> Result<Report, ReportError> {
    let value: Value = serde_json::from_slice(raw).map_err(|e| ReportError::Malformed(e.to_string()))?;
    match value.get("report_version") {
        Some(v) if v.as_u64() == Some(u64::from(REPORT_VERSION)) => {}
        Some(v) => return Err(ReportError::UnsupportedVersion { found: v.clone() }),
        None => return Err(ReportError::Malformed("missing report_version".into())),
    }
    serde_json::from_value(value).map_err(|e| ReportError::Malformed(e.to_string()))
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:system-ui,sans-serif;margin:2rem;max-width:60rem;color:#1a1a1a}
.layout{display:flex;gap:2rem;align-items:flex-start;flex-wrap:wrap}
.screen{position:relative;width:360px;border:1px solid #888;background:#f4f4f4}
.screen img{position:absolute;inset:0;width:100%;height:100%}
.box{position:absolute;border:3px solid #c00;box-sizing:border-box}
.box:focus,.box:hover{outline:3px solid #06c;background:rgba(0,102,204,.15)}
ol.entries{flex:1;min-width:20rem;padding-left:0;list-style:none}
ol.entries li{border-bottom:1px solid #ddd;padding:.4rem 0}
.idx{display:inline-block;min-width:2rem;font-weight:bold}
.count{color:#c00;margin-left:.5rem}
.finding{margin:.5rem 0 .5rem 2rem}
.finding h3{font-size:1rem;margin:.2rem 0}
.source{color:#555;font-size:.85rem}
";

fn pct(value: u32, extent: u32) -> String {
    format!("{:.4}%", f64::from(value) * 100.0 / f64::from(extent.max(1)))
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("1 {word}")
    } else {
        format!("{n} {word}s")
    }
}

/// Self-contained static HTML. Output depends only on the report contents
/// and carries no timestamp.
pub fn emit_html(report: &Report) -> String {
    let title = format!("Accessibility report: {} / {}", report.app_name, report.screen_id);
    let mut h = String::new();
    let _ = write!(
        h,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>\n{STYLE}</style>\n</head>\n<body>\n<h1>{}</h1>\n",
        escape(&title),
        escape(&title)
    );
    let s = &report.summary;
    if s.total_findings == 0 {
        let _ = writeln!(h, "<p>Zero issues found in {}.</p>", plural(s.total_entries, "transcript entry").replace("entrys", "entries"));
    } else {
        let _ = writeln!(
            h,
            "<p>{} found on {} of {} transcript entries.</p>",
            plural(s.total_findings, "issue"),
            s.flagged_entries,
            s.total_entries
        );
    }

    let vp = report.viewport;
    let (vw, vh) = (vp.width(), vp.height());
    h.push_str("<div class=\"layout\">\n");
    let _ = writeln!(
        h,
        "<div class=\"screen\" style=\"aspect-ratio:{} / {}\">",
        vw.max(1),
        vh.max(1)
    );
    if let Some(shot) = &report.screenshot {
        let _ = writeln!(
            h,
            "<img src=\"{}\" alt=\"Screenshot of {}\">",
            escape(shot),
            escape(&report.screen_id)
        );
    }
    for e in report.entries.iter().filter(|e| !e.findings.is_empty()) {
        let b = e.bounds;
        let _ = writeln!(
            h,
            "<a class=\"box\" href=\"#entry-{i}\" aria-label=\"Entry {i}: {label}\" style=\"left:{};top:{};width:{};height:{}\"></a>",
            pct(b.left.saturating_sub(vp.left), vw),
            pct(b.top.saturating_sub(vp.top), vh),
            pct(b.width(), vw),
            pct(b.height(), vh),
            i = e.index,
            label = escape(&e.findings[0].issue),
        );
    }
    h.push_str("</div>\n<ol class=\"entries\">\n");
    for e in &report.entries {
        let _ = write!(h, "<li id=\"entry-{}\">", e.index);
        if e.findings.is_empty() {
            let _ = writeln!(h, "<span class=\"idx\">{}</span>{}</li>", e.index, escape(&e.transcript));
            continue;
        }
        let _ = writeln!(
            h,
            "<details>\n<summary><span class=\"idx\">{}</span>{}<span class=\"count\">{}</span></summary>",
            e.index,
            escape(&e.transcript),
            plural(e.findings.len(), "issue")
        );
        for f in &e.findings {
            let _ = writeln!(h, "<div class=\"finding\">\n<h3>{}</h3>", escape(&f.issue));
            if !f.explanation.is_empty() {
                let _ = writeln!(h, "<p>{}</p>", escape(&f.explanation));
            }
            if !f.suggestion.is_empty() {
                let _ = writeln!(h, "<p><strong>Suggestion:</strong> {}</p>", escape(&f.suggestion));
            }
            let source = match f.source {
                FindingSource::Llm => "LLM auditor",
                FindingSource::Rule => "rule checker",
            };
            let _ = writeln!(h, "<p class=\"source\">Source: {source}</p>\n</div>");
        }
        h.push_str("</details></li>\n");
    }
    h.push_str("</ol>\n</div>\n");

    if !report.off_transcript.is_empty() {
        h.push_str("<h2>Elements not reached by the screen reader</h2>\n<ul>\n");
        for f in &report.off_transcript {
            let _ = writeln!(
                h,
                "<li><code>{}</code>: {} <strong>Suggestion:</strong> {}</li>",
                escape(&f.node_id),
                escape(&f.issue),
                escape(&f.suggestion)
            );
        }
        h.push_str("</ul>\n");
    }

    let p = &report.provenance;
    let mut parts = Vec::new();
    if let Some(v) = p.prompt_variant {
        parts.push(format!("prompt variant {v}"));
    }
    if let Some(provider) = &p.provider {
        parts.push(format!("provider {provider}"));
    }
    if let Some(model) = &p.model {
        parts.push(format!("model {model}"));
    }
    parts.push(format!("rule checker {}", if p.rules { "on" } else { "off" }));
    let _ = writeln!(h, "<footer><p>Generated with {}.</p></footer>", escape(&parts.join(", ")));
    h.push_str("</body>\n</html>\n");
    h
}
