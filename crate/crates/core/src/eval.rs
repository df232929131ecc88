//! Error taxonomy, ground-truth labels, and scoring of audit findings
//! against adjudicated verdicts.
//!
//! Scoring works on candidate pairs. A finding on an element labelled with
//! an error is a tp candidate, which a verdict confirms (tp) or rejects
//! (fp + fn). A finding on a no-error element is an fp candidate, unless a
//! verdict marks it consistent, which makes it a tn. Unflagged elements are
//! fn or tn without a verdict.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auditor::AuditFinding;
use crate::talkback::Transcript;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("malformed {what}: {message}")]
    Malformed { what: &'static str, message: String },
    #[error("label {position} on `{screen_id}` must reference exactly one of node_id or entry_index")]
    AmbiguousReference { screen_id: String, position: usize },
    #[error("label on `{screen_id}` cites {criterion}, which is not a criterion of {category}")]
    CriterionMismatch {
        screen_id: String,
        category: ErrorCategory,
        criterion: String,
    },
    #[error("label on `{screen_id}` references entry {index}, but the transcript has {len} entries")]
    UnknownEntry { screen_id: String, index: usize, len: usize },
    #[error("findings for `{findings}` were matched against labels for `{labels}`")]
    CrossScreenMix { findings: String, labels: String },
    #[error("no verdict for {tool} on `{screen_id}`/{node_id}")]
    MissingVerdict {
        screen_id: String,
        node_id: String,
        tool: String,
    },
    #[error("conflicting verdicts for {tool} on `{screen_id}`/{node_id}")]
    ConflictingVerdict {
        screen_id: String,
        node_id: String,
        tool: String,
    },
    #[error("consistency needs at least two runs, got {0}")]
    FewerThanTwoRuns(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    MissingLabel,
    LabelQuality,
    StructureGrouping,
    Heading,
    Functionality,
    NoError,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 6] = [
        ErrorCategory::MissingLabel,
        ErrorCategory::LabelQuality,
        ErrorCategory::StructureGrouping,
        ErrorCategory::Heading,
        ErrorCategory::Functionality,
        ErrorCategory::NoError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::MissingLabel => "missing_label",
            ErrorCategory::LabelQuality => "label_quality",
            ErrorCategory::StructureGrouping => "structure_grouping",
            ErrorCategory::Heading => "heading",
            ErrorCategory::Functionality => "functionality",
            ErrorCategory::NoError => "no_error",
        }
    }

    /// Short column label used in breakdown tables.
    pub fn abbreviation(self) -> &'static str {
        match self {
            ErrorCategory::MissingLabel => "ML",
            ErrorCategory::LabelQuality => "LQ",
            ErrorCategory::StructureGrouping => "SG",
            ErrorCategory::Heading => "Head",
            ErrorCategory::Functionality => "Func",
            ErrorCategory::NoError => "NE",
        }
    }

    pub fn is_error(self) -> bool {
        self != ErrorCategory::NoError
    }

    /// WCAG 2.1 success criteria that define the category.
    pub fn wcag_criteria(self) -> &'static [&'static str] {
        match self {
            ErrorCategory::MissingLabel => &["1.1.1"],
            ErrorCategory::LabelQuality => &["2.4.4", "2.4.6", "4.1.2"],
            ErrorCategory::StructureGrouping => &["1.3.1", "1.3.2", "2.4.3", "3.2.3"],
            ErrorCategory::Heading => &["2.4.2", "2.4.10"],
            ErrorCategory::Functionality => &["2.1.1", "3.2.1", "3.2.2", "4.1.3"],
            ErrorCategory::NoError => &[],
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ErrorCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown error category `{s}`"))
    }
}

/// One expert label. Exactly one of `node_id` and `entry_index` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthLabel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_index: Option<usize>,
    pub category: ErrorCategory,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub wcag: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenLabels {
    pub screen_id: String,
    pub labels: Vec<GroundTruthLabel>,
}

impl ScreenLabels {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (position, label) in self.labels.iter().enumerate() {
            if label.node_id.is_some() == label.entry_index.is_some() {
                return Err(EvalError::AmbiguousReference {
                    screen_id: self.screen_id.clone(),
                    position,
                });
            }
            if label.category.is_error() {
                let allowed = label.category.wcag_criteria();
                if let Some(bad) = label.wcag.iter().find(|c| !allowed.contains(&c.as_str())) {
                    return Err(EvalError::CriterionMismatch {
                        screen_id: self.screen_id.clone(),
                        category: label.category,
                        criterion: bad.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn parse_ground_truth(raw: &[u8]) -> Result<ScreenLabels, EvalError> {
    let labels: ScreenLabels = serde_json::from_slice(raw).map_err(|e| EvalError::Malformed {
        what: "ground-truth file",
        message: e.to_string(),
    })?;
    labels.validate()?;
    Ok(labels)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruthCorpus {
    pub screens: Vec<ScreenLabels>,
}

impl GroundTruthCorpus {
    pub fn labels(&self) -> impl Iterator<Item = &GroundTruthLabel> {
        self.screens.iter().flat_map(|s| &s.labels)
    }

    /// Label rows per category; every category appears, possibly with 0.
    pub fn category_counts(&self) -> BTreeMap<ErrorCategory, usize> {
        let mut counts: BTreeMap<_, _> = ErrorCategory::ALL.into_iter().map(|c| (c, 0)).collect();
        for label in self.labels() {
            *counts.entry(label.category).or_default() += 1;
        }
        counts
    }

    pub fn total(&self) -> usize {
        self.labels().count()
    }

    pub fn screen(&self, screen_id: &str) -> Option<&ScreenLabels> {
        self.screens.iter().find(|s| s.screen_id == screen_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

/// One row of a verdict file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adjudication {
    pub screen_id: String,
    pub node_id: String,
    pub tool: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerdictSet {
    verdicts: HashMap<(String, String, String), Verdict>,
}

impl VerdictSet {
    pub fn from_adjudications(rows: impl IntoIterator<Item = Adjudication>) -> Result<Self, EvalError> {
        let mut verdicts = HashMap::new();
        for row in rows {
            let key = (row.screen_id, row.node_id, row.tool);
            if let Some(previous) = verdicts.insert(key.clone(), row.verdict) {
                if previous != row.verdict {
                    let (screen_id, node_id, tool) = key;
                    return Err(EvalError::ConflictingVerdict { screen_id, node_id, tool });
                }
            }
        }
        Ok(VerdictSet { verdicts })
    }

    pub fn parse(raw: &[u8]) -> Result<Self, EvalError> {
        let rows: Vec<Adjudication> = serde_json::from_slice(raw).map_err(|e| EvalError::Malformed {
            what: "verdict file",
            message: e.to_string(),
        })?;
        Self::from_adjudications(rows)
    }

    pub fn get(&self, screen_id: &str, node_id: &str, tool: &str) -> Option<Verdict> {
        self.verdicts
            .get(&(screen_id.to_owned(), node_id.to_owned(), tool.to_owned()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.verdicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verdicts.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    TpCandidate,
    FpCandidate,
    FalseNegative,
    TrueNegative,
}

/// One element (or, in per-error mode, one error label) to be scored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Candidate {
    pub screen_id: String,
    pub node_id: String,
    pub category: ErrorCategory,
    pub kind: MatchKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Granularity {
    #[default]
    PerElement,
    /// One candidate per error label; all labels of an element share its verdict.
    PerError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    pub candidates: Vec<Candidate>,
    /// Flagged nodes that carry no ground-truth label; they are not scored.
    pub unlabeled: Vec<String>,
}

/// Pairs audit findings with labels by element. Finding indices resolve to
/// nodes through the transcript; no-issue rows and indices outside the
/// transcript flag nothing.
pub fn match_findings(
    findings: &[AuditFinding],
    labels: &ScreenLabels,
    transcript: &Transcript,
    granularity: Granularity,
) -> Result<MatchResult, EvalError> {
    if labels.screen_id != transcript.screen_id {
        return Err(EvalError::CrossScreenMix {
            findings: transcript.screen_id.clone(),
            labels: labels.screen_id.clone(),
        });
    }
    let flagged: BTreeSet<String> = findings
        .iter()
        .filter(|f| !f.is_no_issue())
        .filter_map(|f| transcript.entry(f.index))
        .map(|e| e.node_id.clone())
        .collect();
    match_flagged(&flagged, labels, Some(transcript), granularity)
}

/// Pairs a set of flagged node ids with labels. `transcript` is needed only
/// when labels reference entries by index.
pub fn match_flagged(
    flagged: &BTreeSet<String>,
    labels: &ScreenLabels,
    transcript: Option<&Transcript>,
    granularity: Granularity,
) -> Result<MatchResult, EvalError> {
    let mut by_node: BTreeMap<String, Vec<ErrorCategory>> = BTreeMap::new();
    for label in &labels.labels {
        let node_id = match (&label.node_id, label.entry_index) {
            (Some(id), _) => id.clone(),
            (None, Some(index)) => {
                let len = transcript.map_or(0, Transcript::len);
                transcript
                    .and_then(|t| t.entry(index))
                    .map(|e| e.node_id.clone())
                    .ok_or_else(|| EvalError::UnknownEntry {
                        screen_id: labels.screen_id.clone(),
                        index,
                        len,
                    })?
            }
            (None, None) => {
                return Err(EvalError::AmbiguousReference {
                    screen_id: labels.screen_id.clone(),
                    position: 0,
                })
            }
        };
        by_node.entry(node_id).or_default().push(label.category);
    }

    let mut result = MatchResult::default();
    for (node_id, categories) in &by_node {
        let hit = flagged.contains(node_id);
        let errors: Vec<ErrorCategory> = categories.iter().copied().filter(|c| c.is_error()).collect();
        let push = |result: &mut MatchResult, category, kind| {
            result.candidates.push(Candidate {
                screen_id: labels.screen_id.clone(),
                node_id: node_id.clone(),
                category,
                kind,
            })
        };
        if errors.is_empty() {
            let kind = if hit { MatchKind::FpCandidate } else { MatchKind::TrueNegative };
            push(&mut result, ErrorCategory::NoError, kind);
            continue;
        }
        let kind = if hit { MatchKind::TpCandidate } else { MatchKind::FalseNegative };
        match granularity {
            Granularity::PerElement => push(&mut result, errors[0], kind),
            Granularity::PerError => {
                for category in errors {
                    push(&mut result, category, kind);
                }
            }
        }
    }
    result.unlabeled = flagged.iter().filter(|n| !by_node.contains_key(*n)).cloned().collect();
    result.candidates.sort();
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjudicator<'a> {
    Verdicts { set: &'a VerdictSet, tool: &'a str },
    /// Offline upper bound: every tp candidate counts as consistent and
    /// every fp candidate as an error.
    StrictAuto,
}

impl Adjudicator<'_> {
    fn verdict(&self, candidate: &Candidate) -> Result<Option<Verdict>, EvalError> {
        let Adjudicator::Verdicts { set, tool } = self else {
            return Ok(match candidate.kind {
                MatchKind::TpCandidate => Some(Verdict::Consistent),
                _ => None,
            });
        };
        let verdict = set.get(&candidate.screen_id, &candidate.node_id, tool);
        if verdict.is_none() && candidate.kind == MatchKind::TpCandidate {
            return Err(EvalError::MissingVerdict {
                screen_id: candidate.screen_id.clone(),
                node_id: candidate.node_id.clone(),
                tool: (*tool).to_owned(),
            });
        }
        Ok(verdict)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

/// Figure-style stacked counts for one category: `correct` holds true
/// positives for error categories and true negatives for no_error;
/// `misclassified` is the classification-error count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryBreakdown {
    pub total: usize,
    pub correct: usize,
    pub misclassified: usize,
}

impl CategoryBreakdown {
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationMetrics {
    pub counts: Counts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub per_category_accuracy: BTreeMap<ErrorCategory, f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn f1_score(precision: f64, recall: f64) -> Option<f64> {
    let sum = precision + recall;
    (sum > 0.0).then(|| 2.0 * precision * recall / sum)
}

fn resolve(candidate: &Candidate, adjudicator: &Adjudicator<'_>) -> Result<(Counts, bool), EvalError> {
    let verdict = adjudicator.verdict(candidate)?;
    let mut c = Counts::default();
    let correct = match (candidate.kind, verdict) {
        (MatchKind::TpCandidate, Some(Verdict::Consistent)) => {
            c.tp = 1;
            true
        }
        (MatchKind::TpCandidate, _) => {
            c.fp = 1;
            c.fn_ = 1;
            false
        }
        (MatchKind::FpCandidate, Some(Verdict::Consistent)) => {
            c.tn = 1;
            true
        }
        (MatchKind::FpCandidate, _) => {
            c.fp = 1;
            false
        }
        (MatchKind::FalseNegative, _) => {
            c.fn_ = 1;
            false
        }
        (MatchKind::TrueNegative, _) => {
            c.tn = 1;
            true
        }
    };
    Ok((c, correct))
}

pub fn category_breakdown(
    candidates: &[Candidate],
    adjudicator: &Adjudicator<'_>,
) -> Result<BTreeMap<ErrorCategory, CategoryBreakdown>, EvalError> {
    let mut out: BTreeMap<ErrorCategory, CategoryBreakdown> = BTreeMap::new();
    for candidate in candidates {
        let (_, correct) = resolve(candidate, adjudicator)?;
        let row = out.entry(candidate.category).or_default();
        row.total += 1;
        if correct {
            row.correct += 1;
        } else {
            row.misclassified += 1;
        }
    }
    Ok(out)
}

pub fn score(candidates: &[Candidate], adjudicator: &Adjudicator<'_>) -> Result<EvaluationMetrics, EvalError> {
    let mut counts = Counts::default();
    for candidate in candidates {
        let (c, _) = resolve(candidate, adjudicator)?;
        counts.tp += c.tp;
        counts.fp += c.fp;
        counts.fn_ += c.fn_;
        counts.tn += c.tn;
    }
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    let f1 = precision.zip(recall).and_then(|(p, r)| f1_score(p, r));
    let per_category_accuracy = category_breakdown(candidates, adjudicator)?
        .into_iter()
        .filter_map(|(cat, row)| row.accuracy().map(|a| (cat, a)))
        .collect();
    Ok(EvaluationMetrics {
        counts,
        precision,
        recall,
        f1,
        per_category_accuracy,
    })
}

/// Precision and recall averaged over several configurations, with F1
/// taken from the averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: Option<f64>,
}

pub fn average_metrics(rows: &[(f64, f64)]) -> Option<AveragedMetrics> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let precision = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let recall = rows.iter().map(|r| r.1).sum::<f64>() / n;
    Some(AveragedMetrics {
        precision,
        recall,
        f1: f1_score(precision, recall),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
}

fn spread(values: &[f64]) -> Option<Spread> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(Spread { mean, sd: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub runs: Vec<EvaluationMetrics>,
    /// Absent when fewer than two runs have a defined value.
    pub precision: Option<Spread>,
    pub recall: Option<Spread>,
    pub f1: Option<f64>,
}

pub fn consistency_report(runs: Vec<EvaluationMetrics>) -> Result<ConsistencyReport, EvalError> {
    if runs.len() < 2 {
        return Err(EvalError::FewerThanTwoRuns(runs.len()));
    }
    let precisions: Vec<f64> = runs.iter().filter_map(|m| m.precision).collect();
    let recalls: Vec<f64> = runs.iter().filter_map(|m| m.recall).collect();
    let precision = spread(&precisions);
    let recall = spread(&recalls);
    let f1 = precision.zip(recall).and_then(|(p, r)| f1_score(p.mean, r.mean));
    Ok(ConsistencyReport {
        runs,
        precision,
        recall,
        f1,
    })
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.3}"))
}

/// Plain-text table of precision, recall and F1 per named configuration.
pub fn format_metrics_table(rows: &[(String, EvaluationMetrics)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}  {:>9}  {:>6}  {:>5}\n", "Config", "Precision", "Recall", "F1");
    for (name, m) in rows {
        out.push_str(&format!(
            "{:<width$}  {:>9}  {:>6}  {:>5}\n",
            name,
            fmt_metric(m.precision),
            fmt_metric(m.recall),
            fmt_metric(m.f1)
        ));
    }
    out
}

/// Plain-text table of per-category stacked counts.
pub fn format_breakdown_table(breakdown: &BTreeMap<ErrorCategory, CategoryBreakdown>) -> String {
    let mut out = format!("{:<5} {:>5} {:>7} {:>3} {:>8}\n", "Cat", "Total", "Correct", "X", "Accuracy");
    for (cat, row) in breakdown {
        out.push_str(&format!(
            "{:<5} {:>5} {:>7} {:>3} {:>8}\n",
            cat.abbreviation(),
            row.total,
            row.correct,
            row.misclassified,
            row.accuracy().map_or_else(|| "n/a".to_owned(), |a| format!("{:.1}%", a * 100.0))
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auditor::FindingSource;
    use crate::geometry::BoundingBox;
    use crate::talkback::TranscriptEntry;

    fn label(node: &str, category: ErrorCategory) -> GroundTruthLabel {
        GroundTruthLabel {
            node_id: Some(node.into()),
            entry_index: None,
            category,
            description: String::new(),
            wcag: vec![],
        }
    }

    fn transcript(nodes: &[&str]) -> Transcript {
        Transcript {
            app_name: "App".into(),
            screen_id: "s1".into(),
            entries: nodes
                .iter()
                .enumerate()
                .map(|(i, n)| TranscriptEntry {
                    index: i,
                    transcript: format!("entry {i}"),
                    node_id: (*n).into(),
                    bounds: BoundingBox::new(0, 0, 1, 1),
                })
                .collect(),
        }
    }

    fn finding(index: usize, issue: &str) -> AuditFinding {
        AuditFinding {
            index,
            transcript: String::new(),
            issue: issue.into(),
            explanation: String::new(),
            suggestion: String::new(),
            source: FindingSource::Llm,
        }
    }

    fn candidate(node: &str, category: ErrorCategory, kind: MatchKind) -> Candidate {
        Candidate {
            screen_id: "s1".into(),
            node_id: node.into(),
            category,
            kind,
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn taxonomy_is_closed_and_named() {
        assert_eq!(ErrorCategory::ALL.len(), 6);
        for c in ErrorCategory::ALL {
            assert_eq!(c.as_str().parse::<ErrorCategory>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.as_str()));
        }
        assert_eq!(ErrorCategory::MissingLabel.wcag_criteria(), ["1.1.1"]);
        assert!(ErrorCategory::NoError.wcag_criteria().is_empty());
    }

    #[test]
    fn match_kinds() {
        let labels = ScreenLabels {
            screen_id: "s1".into(),
            labels: vec![
                label("a", ErrorCategory::MissingLabel),
                label("b", ErrorCategory::NoError),
                label("c", ErrorCategory::LabelQuality),
                label("d", ErrorCategory::NoError),
            ],
        };
        let t = transcript(&["a", "b", "c", "d", "e"]);
        let findings = [
            finding(0, "No label"),
            finding(0, "Also no label"),
            finding(1, "Unclear"),
            finding(3, ""),
            finding(4, "Unlabelled node"),
            finding(99, "Out of range"),
        ];
        let m = match_findings(&findings, &labels, &t, Granularity::PerElement).unwrap();
        assert_eq!(
            m.candidates,
            [
                candidate("a", ErrorCategory::MissingLabel, MatchKind::TpCandidate),
                candidate("b", ErrorCategory::NoError, MatchKind::FpCandidate),
                candidate("c", ErrorCategory::LabelQuality, MatchKind::FalseNegative),
                candidate("d", ErrorCategory::NoError, MatchKind::TrueNegative),
            ]
        );
        assert_eq!(m.unlabeled, ["e"]);
    }

    #[test]
    fn entry_index_labels_resolve_through_transcript() {
        let labels = ScreenLabels {
            screen_id: "s1".into(),
            labels: vec![GroundTruthLabel {
                node_id: None,
                entry_index: Some(1),
                category: ErrorCategory::Heading,
                description: "Title not a heading".into(),
                wcag: vec!["2.4.10".into()],
            }],
        };
        let m = match_findings(&[finding(1, "x")], &labels, &transcript(&["a", "b"]), Granularity::PerElement).unwrap();
        assert_eq!(m.candidates, [candidate("b", ErrorCategory::Heading, MatchKind::TpCandidate)]);
        assert!(matches!(
            match_findings(&[], &labels, &transcript(&["a"]), Granularity::PerElement),
            Err(EvalError::UnknownEntry { index: 1, len: 1, .. })
        ));
    }

    #[test]
    fn cross_screen_mix_is_rejected() {
        let labels = ScreenLabels {
            screen_id: "other".into(),
            labels: vec![],
        };
        assert!(matches!(
            match_findings(&[], &labels, &transcript(&["a"]), Granularity::PerElement),
            Err(EvalError::CrossScreenMix { .. })
        ));
    }

    #[test]
    fn per_error_mode_splits_multi_error_elements() {
        let labels = ScreenLabels {
            screen_id: "s1".into(),
            labels: vec![
                label("a", ErrorCategory::MissingLabel),
                label("a", ErrorCategory::StructureGrouping),
            ],
        };
        let flagged = BTreeSet::from(["a".to_string()]);
        let per_element = match_flagged(&flagged, &labels, None, Granularity::PerElement).unwrap();
        let per_error = match_flagged(&flagged, &labels, None, Granularity::PerError).unwrap();
        assert_eq!(per_element.candidates.len(), 1);
        assert_eq!(per_error.candidates.len(), 2);
        let verdicts = VerdictSet::from_adjudications([Adjudication {
            screen_id: "s1".into(),
            node_id: "a".into(),
            tool: "t".into(),
            verdict: Verdict::Consistent,
        }])
        .unwrap();
        let adj = Adjudicator::Verdicts { set: &verdicts, tool: "t" };
        assert_eq!(score(&per_error.candidates, &adj).unwrap().counts.tp, 2);
    }

    #[test]
    fn trivial_formula() {
        let c = [
            candidate("a", ErrorCategory::MissingLabel, MatchKind::TpCandidate),
            candidate("b", ErrorCategory::MissingLabel, MatchKind::TpCandidate),
            candidate("c", ErrorCategory::NoError, MatchKind::FpCandidate),
            candidate("d", ErrorCategory::Heading, MatchKind::FalseNegative),
        ];
        let m = score(&c, &Adjudicator::StrictAuto).unwrap();
        assert_eq!(m.counts, Counts { tp: 2, fp: 1, fn_: 1, tn: 0 });
        for v in [m.precision, m.recall, m.f1] {
            assert!(close(v.unwrap(), 2.0 / 3.0, 1e-12));
        }
    }

    #[test]
    fn verdicts_drive_tp_and_fp_candidates() {
        let c = [
            candidate("a", ErrorCategory::MissingLabel, MatchKind::TpCandidate),
            candidate("b", ErrorCategory::LabelQuality, MatchKind::TpCandidate),
            candidate("c", ErrorCategory::NoError, MatchKind::FpCandidate),
            candidate("d", ErrorCategory::NoError, MatchKind::FpCandidate),
        ];
        let rows = [("a", Verdict::Consistent), ("b", Verdict::Inconsistent), ("c", Verdict::Consistent)];
        let set = VerdictSet::from_adjudications(rows.iter().map(|(n, v)| Adjudication {
            screen_id: "s1".into(),
            node_id: (*n).into(),
            tool: "gc".into(),
            verdict: *v,
        }))
        .unwrap();
        let m = score(&c, &Adjudicator::Verdicts { set: &set, tool: "gc" }).unwrap();
        assert_eq!(m.counts, Counts { tp: 1, fp: 2, fn_: 1, tn: 1 });
        assert_eq!(m.per_category_accuracy[&ErrorCategory::LabelQuality], 0.0);
        assert_eq!(m.per_category_accuracy[&ErrorCategory::NoError], 0.5);

        let err = score(&c, &Adjudicator::Verdicts { set: &set, tool: "other" }).unwrap_err();
        assert!(matches!(err, EvalError::MissingVerdict { .. }));
    }

    #[test]
    fn conflicting_verdicts_are_rejected() {
        let row = |v| Adjudication {
            screen_id: "s".into(),
            node_id: "n".into(),
            tool: "t".into(),
            verdict: v,
        };
        assert!(VerdictSet::from_adjudications([row(Verdict::Consistent), row(Verdict::Consistent)]).is_ok());
        assert!(matches!(
            VerdictSet::from_adjudications([row(Verdict::Consistent), row(Verdict::Inconsistent)]),
            Err(EvalError::ConflictingVerdict { .. })
        ));
    }

    #[test]
    fn undefined_ratios_are_absent() {
        let m = score(
            &[candidate("a", ErrorCategory::NoError, MatchKind::TrueNegative)],
            &Adjudicator::StrictAuto,
        )
        .unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (None, None, None));
        assert_eq!(score(&[], &Adjudicator::StrictAuto).unwrap().per_category_accuracy.len(), 0);
        assert_eq!(f1_score(0.0, 0.0), None);
    }

    #[test]
    fn single_inconsistent_missing_label() {
        let c = [candidate("a", ErrorCategory::MissingLabel, MatchKind::FalseNegative)];
        let b = category_breakdown(&c, &Adjudicator::StrictAuto).unwrap();
        assert_eq!(b[&ErrorCategory::MissingLabel], CategoryBreakdown { total: 1, correct: 0, misclassified: 1 });
        assert_eq!(b[&ErrorCategory::MissingLabel].accuracy(), Some(0.0));
    }

    #[test]
    fn table5_rows_reproduce_f1() {
        // Inputs are themselves rounded to 3 places, so the recomputed F1
        // can drift past half a unit in the last place (GC gives .70347).
        for (p, r, f1) in [(0.797, 0.577, 0.669), (0.708, 0.699, 0.704)] {
            assert!(close(f1_score(p, r).unwrap(), f1, 0.0015));
        }
    }

    #[test]
    fn prompt_average_reproduces_scaffold_row() {
        let table5 = [(0.797, 0.577), (0.696, 0.589), (0.667, 0.650), (0.708, 0.699), (0.698, 0.595)];
        let avg = average_metrics(&table5).unwrap();
        assert!(close(avg.precision, 0.713, 0.0005));
        assert!(close(avg.recall, 0.622, 0.0005));
        assert!(close(avg.f1.unwrap(), 0.664, 0.0005));
        assert!(average_metrics(&[]).is_none());
    }

    fn metrics_with(p: f64, r: f64) -> EvaluationMetrics {
        EvaluationMetrics {
            counts: Counts::default(),
            precision: Some(p),
            recall: Some(r),
            f1: f1_score(p, r),
            per_category_accuracy: BTreeMap::new(),
        }
    }

    #[test]
    fn consistency_spread() {
        let report = consistency_report(vec![metrics_with(0.6, 0.5), metrics_with(0.8, 0.5)]).unwrap();
        let p = report.precision.unwrap();
        assert!(close(p.mean, 0.7, 1e-12));
        assert!(close(p.sd, 0.02f64.sqrt(), 1e-12));
        assert!(close(p.sd, 0.1414, 0.00005));
        assert_eq!(report.recall.unwrap().sd, 0.0);

        let same = consistency_report(vec![metrics_with(0.7, 0.6); 5]).unwrap();
        assert_eq!(same.precision.unwrap().sd, 0.0);
        assert!(matches!(
            consistency_report(vec![metrics_with(0.7, 0.6)]),
            Err(EvalError::FewerThanTwoRuns(1))
        ));
    }

    #[test]
    fn consistency_overall_f1_from_means() {
        let f1 = f1_score(0.723, 0.692).unwrap();
        assert!(close(f1, 0.707, 0.0005));
    }

    #[test]
    fn ground_truth_file_validation() {
        let ok = br#"{"screen_id": "s", "labels": [
            {"node_id": "a", "category": "missing_label", "description": "No label", "wcag": ["1.1.1"]},
            {"entry_index": 3, "category": "no_error"}
        ]}"#;
        assert_eq!(parse_ground_truth(ok).unwrap().labels.len(), 2);
        let both = br#"{"screen_id": "s", "labels": [{"node_id": "a", "entry_index": 1, "category": "heading"}]}"#;
        assert!(matches!(parse_ground_truth(both), Err(EvalError::AmbiguousReference { .. })));
        let wrong = br#"{"screen_id": "s", "labels": [{"node_id": "a", "category": "heading", "wcag": ["1.1.1"]}]}"#;
        assert!(matches!(parse_ground_truth(wrong), Err(EvalError::CriterionMismatch { .. })));
        assert!(matches!(
            parse_ground_truth(br#"{"screen_id": "s", "labels": [{"node_id": "a", "category": "typo"}]}"#),
            Err(EvalError::Malformed { .. })
        ));
    }

    #[test]
    fn tables_render() {
        let table = format_metrics_table(&[("Base".into(), metrics_with(0.797, 0.577))]);
        assert!(table.contains("Base"));
        assert!(table.contains("0.797"));
        let mut b = BTreeMap::new();
        b.insert(ErrorCategory::MissingLabel, CategoryBreakdown { total: 39, correct: 36, misclassified: 3 });
        assert!(format_breakdown_table(&b).contains("92.3%"));
    }
}
