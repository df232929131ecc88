//! LLM auditing: prompt assembly, provider calls and completion parsing.

mod parse;
mod prompt;
mod provider;

pub use parse::{parse_audit, serialize_audit, ParseDiagnostic, ParseError, ParsedAudit};
pub use prompt::{
    assemble_prompt, render_transcript_section, PromptError, PromptLibrary, PromptSection, PromptSpec,
    PromptVariant, SectionName, UnknownVariant,
};
pub use provider::{
    CompletionProvider, CompletionRequest, HttpProvider, HttpReply, MockProvider, ProviderConfig, ProviderError,
    ProviderPresets, ReqwestTransport, Transport, TransportError, DEFAULT_API_KEY_ENV,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::ScreenCapture;
use crate::talkback::{synthesize, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FindingSource {
    Rule,
    #[default]
    Llm,
}

/// One row of an audit. A row whose `issue` is empty records that the
/// entry was reviewed and found acceptable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFinding {
    pub index: usize,
    pub transcript: String,
    pub issue: String,
    pub explanation: String,
    pub suggestion: String,
    #[serde(default)]
    pub source: FindingSource,
}

impl AuditFinding {
    pub fn is_no_issue(&self) -> bool {
        self.issue.trim().is_empty()
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("could not parse completion for `{screen_id}`: {source}")]
    Parse { screen_id: String, source: ParseError },
}

#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub transcript: Transcript,
    pub prompt: PromptSpec,
    pub completion: String,
    pub findings: Vec<AuditFinding>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

pub fn submit(prompt: &PromptSpec, screen_id: &str, provider: &dyn CompletionProvider) -> Result<String, ProviderError> {
    let text = prompt.render();
    provider.complete(&CompletionRequest {
        screen_id,
        prompt: &text,
    })
}

/// Runs synthesis, prompting and parsing for one screen. An empty
/// transcript fails before the provider is contacted.
pub fn audit_screen(
    capture: &ScreenCapture,
    variant: PromptVariant,
    library: &PromptLibrary,
    provider: &dyn CompletionProvider,
    cap: usize,
) -> Result<AuditOutcome, AuditError> {
    let transcript = synthesize(capture, cap);
    let prompt = library.assemble(variant, &transcript)?;
    let completion = submit(&prompt, &capture.screen_id, provider)?;
    let parsed = parse_audit(&completion, &transcript).map_err(|source| AuditError::Parse {
        screen_id: capture.screen_id.clone(),
        source,
    })?;
    log::debug!(
        "{}: {} findings, {} diagnostics",
        capture.screen_id,
        parsed.findings.len(),
        parsed.diagnostics.len()
    );
    Ok(AuditOutcome {
        transcript,
        prompt,
        completion,
        findings: parsed.findings,
        diagnostics: parsed.diagnostics,
    })
}
