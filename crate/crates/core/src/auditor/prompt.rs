//! Prompt variants built from static sections plus the dynamic transcript block.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::talkback::Transcript;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("transcript for `{screen_id}` has no entries")]
    EmptyTranscript { screen_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    Base,
    General,
    Contextual,
    GeneralContextual,
    WcagContextual,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 5] = [
        PromptVariant::Base,
        PromptVariant::General,
        PromptVariant::Contextual,
        PromptVariant::GeneralContextual,
        PromptVariant::WcagContextual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Base => "base",
            PromptVariant::General => "general",
            PromptVariant::Contextual => "contextual",
            PromptVariant::GeneralContextual => "general_contextual",
            PromptVariant::WcagContextual => "wcag_contextual",
        }
    }

    fn guidelines(self) -> Option<Guidelines> {
        match self {
            PromptVariant::Base | PromptVariant::Contextual => None,
            PromptVariant::General | PromptVariant::GeneralContextual => Some(Guidelines::General),
            PromptVariant::WcagContextual => Some(Guidelines::Wcag),
        }
    }

    fn is_contextual(self) -> bool {
        !matches!(self, PromptVariant::Base | PromptVariant::General)
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown prompt variant `{0}` (expected base, general, contextual, general_contextual or wcag_contextual)")]
pub struct UnknownVariant(String);

impl FromStr for PromptVariant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownVariant(s.to_owned()))
    }
}

#[derive(Clone, Copy)]
enum Guidelines {
    General,
    Wcag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionName {
    Introduction,
    Accessibility,
    Instruction,
    Transcript,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSection {
    pub name: SectionName,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub variant: PromptVariant,
    pub sections: Vec<PromptSection>,
}

impl PromptSpec {
    pub fn section(&self, name: SectionName) -> Option<&str> {
        self.sections.iter().find(|s| s.name == name).map(|s| s.text.as_str())
    }

    /// Full prompt text: sections in order, separated by a blank line.
    pub fn render(&self) -> String {
        self.sections
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// The static prompt texts. [`PromptLibrary::builtin`] ships with the crate;
/// [`PromptLibrary::from_dir`] loads edited copies with the same file names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptLibrary {
    pub introduction: String,
    pub accessibility_general: String,
    pub accessibility_wcag: String,
    pub instruction_basic: String,
    pub instruction_contextual: String,
}

const FILES: [&str; 5] = [
    "introduction.txt",
    "accessibility_general.txt",
    "accessibility_wcag.txt",
    "instruction_basic.txt",
    "instruction_contextual.txt",
];

impl PromptLibrary {
    pub fn builtin() -> Self {
        PromptLibrary {
            introduction: clean(include_str!("../../prompts/introduction.txt")),
            accessibility_general: clean(include_str!("../../prompts/accessibility_general.txt")),
            accessibility_wcag: clean(include_str!("../../prompts/accessibility_wcag.txt")),
            instruction_basic: clean(include_str!("../../prompts/instruction_basic.txt")),
            instruction_contextual: clean(include_str!("../../prompts/instruction_contextual.txt")),
        }
    }

    pub fn from_dir(dir: &Path) -> io::Result<Self> {
        let read = |name: &str| fs::read_to_string(dir.join(name)).map(|s| clean(&s));
        Ok(PromptLibrary {
            introduction: read(FILES[0])?,
            accessibility_general: read(FILES[1])?,
            accessibility_wcag: read(FILES[2])?,
            instruction_basic: read(FILES[3])?,
            instruction_contextual: read(FILES[4])?,
        })
    }

    pub fn assemble(&self, variant: PromptVariant, transcript: &Transcript) -> Result<PromptSpec, PromptError> {
        if transcript.is_empty() {
            return Err(PromptError::EmptyTranscript {
                screen_id: transcript.screen_id.clone(),
            });
        }
        let mut sections = vec![PromptSection {
            name: SectionName::Introduction,
            text: self.introduction.clone(),
        }];
        if let Some(guidelines) = variant.guidelines() {
            let text = match guidelines {
                Guidelines::General => &self.accessibility_general,
                Guidelines::Wcag => &self.accessibility_wcag,
            };
            sections.push(PromptSection {
                name: SectionName::Accessibility,
                text: text.clone(),
            });
        }
        sections.push(PromptSection {
            name: SectionName::Instruction,
            text: if variant.is_contextual() {
                self.instruction_contextual.clone()
            } else {
                self.instruction_basic.clone()
            },
        });
        sections.push(PromptSection {
            name: SectionName::Transcript,
            text: render_transcript_section(transcript),
        });
        Ok(PromptSpec { variant, sections })
    }
}

fn clean(s: &str) -> String {
    s.trim_end().replace("\r\n", "\n")
}

/// Assembles `variant` over the built-in prompt texts.
pub fn assemble_prompt(variant: PromptVariant, transcript: &Transcript) -> Result<PromptSpec, PromptError> {
    PromptLibrary::builtin().assemble(variant, transcript)
}

/// Renders the dynamic block:
///
/// ```text
/// app: "Shop",
/// transcripts: [
///     { index: 6, transcript: "Image Search. Button. Double-tap to activate"},
///     { index: 7, transcript: "Appliances"}
/// ]
/// ```
pub fn render_transcript_section(transcript: &Transcript) -> String {
    let quote = |s: &str| serde_json::to_string(s).expect("string serialization cannot fail");
    let rows: Vec<String> = transcript
        .entries
        .iter()
        .map(|e| format!("    {{ index: {}, transcript: {}}}", e.index, quote(&e.transcript)))
        .collect();
    format!(
        "app: {},\ntranscripts: [\n{}\n]",
        quote(&transcript.app_name),
        rows.join(",\n")
    )
}
