//! Screen-reader accessibility auditing for mobile UI captures.
//!
//! A [`ScreenCapture`] is turned into a TalkBack-style [`Transcript`], which
//! is checked by deterministic rules and by an LLM auditor. Findings from
//! both are merged into a report and scored against labelled ground truth.

pub mod auditor;
pub mod capture;
pub mod eval;
pub mod geometry;
pub mod report;
pub mod rules;
pub mod talkback;

pub use auditor::{audit_screen, AuditError, AuditFinding, AuditOutcome, FindingSource, PromptVariant};
pub use capture::{
    parse_capture, serialize_capture, validate_corpus, CaptureError, ChangeEvent, ChangeKind, CollectionInfo,
    CollectionKind, Role, ScreenCapture, StateFlag, ValidationDiagnostic, ViewNode,
};
pub use eval::{ErrorCategory, EvaluationMetrics, GroundTruthCorpus, GroundTruthLabel};
pub use geometry::{iou, BoundingBox};
pub use report::{build_report, emit_html, emit_json, parse_report, Report, ReportEntry};
pub use rules::{check_all, RuleConfig, RuleFinding, RuleId};
pub use talkback::{associate, compose_announcement, synthesize, Association, Transcript, TranscriptEntry};
