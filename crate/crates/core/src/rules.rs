//! Rule-based baseline checks over the view hierarchy, in the style of
//! Android's Accessibility Scanner.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::capture::{Role, ScreenCapture, ViewNode};
use crate::geometry::iou;
use crate::talkback::DEFAULT_IOU_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleId {
    MissingLabel,
    DuplicateDescription,
    OverlappingClickables,
    UninformativeLabel,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::MissingLabel => "missing-label",
            RuleId::DuplicateDescription => "duplicate-description",
            RuleId::OverlappingClickables => "overlapping-clickables",
            RuleId::UninformativeLabel => "uninformative-label",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleFinding {
    pub rule_id: RuleId,
    pub node_id: String,
    pub message: String,
}

impl RuleFinding {
    fn new(rule_id: RuleId, node: &ViewNode, message: impl Into<String>) -> Self {
        RuleFinding {
            rule_id,
            node_id: node.node_id.clone(),
            message: message.into(),
        }
    }

    /// Longer explanation shown alongside the message in reports.
    pub fn explanation(&self) -> &'static str {
        match self.rule_id {
            RuleId::MissingLabel => {
                "Image and button elements need a content description so screen readers can announce them."
            }
            RuleId::DuplicateDescription => {
                "Screen reader users cannot tell apart elements announced with the same description."
            }
            RuleId::OverlappingClickables => {
                "Several clickable elements occupy the same screen area, so focus lands on duplicates."
            }
            RuleId::UninformativeLabel => {
                "The label does not describe the element's content or purpose."
            }
        }
    }

    pub fn suggestion(&self) -> &'static str {
        match self.rule_id {
            RuleId::MissingLabel => "Add a content description that states the element's purpose.",
            RuleId::DuplicateDescription => {
                "Make each description unique by including what distinguishes the item."
            }
            RuleId::OverlappingClickables => {
                "Merge the overlapping clickable elements or make only one of them clickable."
            }
            RuleId::UninformativeLabel => "Replace the label with a short description of the action or content.",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleConfig {
    /// Clickable pairs whose IoU exceeds this are reported as overlapping.
    pub overlap_threshold: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            overlap_threshold: DEFAULT_IOU_THRESHOLD,
        }
    }
}

fn all_nodes(capture: &ScreenCapture) -> impl Iterator<Item = &ViewNode> {
    let mut seen = BTreeSet::new();
    capture
        .trees()
        .flat_map(ViewNode::preorder)
        .filter(move |n| seen.insert(n.node_id.as_str()))
}

fn exposed(node: &ViewNode) -> bool {
    node.is_focusable_by_screen_reader || node.is_clickable || node.is_long_clickable
}

pub fn check_missing_label(capture: &ScreenCapture) -> Vec<RuleFinding> {
    let mut out: Vec<_> = all_nodes(capture)
        .filter(|n| matches!(n.class_role, Role::Image | Role::Button))
        .filter(|n| exposed(n) && n.own_label().is_none())
        .map(|n| {
            RuleFinding::new(
                RuleId::MissingLabel,
                n,
                "This item may not have a label readable by screen readers.",
            )
        })
        .collect();
    out.sort();
    out
}

pub fn check_duplicate_description(capture: &ScreenCapture) -> Vec<RuleFinding> {
    let mut groups: BTreeMap<&str, Vec<&ViewNode>> = BTreeMap::new();
    for node in all_nodes(capture).filter(|n| n.is_focusable_by_screen_reader) {
        if let Some(label) = node.own_label() {
            groups.entry(label).or_default().push(node);
        }
    }
    let mut out: Vec<_> = groups
        .into_iter()
        .filter(|(_, nodes)| nodes.len() > 1)
        .flat_map(|(label, nodes)| {
            nodes.into_iter().map(move |n| {
                RuleFinding::new(
                    RuleId::DuplicateDescription,
                    n,
                    format!("Multiple items have the same description \"{label}\"."),
                )
            })
        })
        .collect();
    out.sort();
    out
}

pub fn check_overlapping_clickables(capture: &ScreenCapture, config: &RuleConfig) -> Vec<RuleFinding> {
    let clickables: Vec<&ViewNode> = all_nodes(capture).filter(|n| n.is_clickable).collect();
    let mut flagged = BTreeSet::new();
    for (i, a) in clickables.iter().enumerate() {
        for b in &clickables[i + 1..] {
            if iou(&a.bounds, &b.bounds) > config.overlap_threshold {
                flagged.insert(a.node_id.as_str());
                flagged.insert(b.node_id.as_str());
            }
        }
    }
    flagged
        .into_iter()
        .map(|id| RuleFinding {
            rule_id: RuleId::OverlappingClickables,
            node_id: id.to_owned(),
            message: "Multiple clickable items share this location on the screen.".into(),
        })
        .collect()
}

const GENERIC_LABELS: &[&str] = &[
    "button", "image", "icon", "img", "picture", "photo", "graphic", "label", "unlabeled", "untitled",
    "click", "click here", "tap", "tap here", "link", "item",
];

const RESOURCE_SUFFIXES: &[&str] = &[".xml", ".png", ".jpg", ".jpeg", ".webp", ".svg", ".gif"];

fn looks_like_identifier(label: &str) -> bool {
    let lower = label.to_ascii_lowercase();
    if RESOURCE_SUFFIXES.iter().any(|s| lower.ends_with(s)) {
        return true;
    }
    if lower.contains('/') && !lower.contains(' ') {
        return true;
    }
    // snake_case identifiers such as `btn_submit` or `ic_launcher`
    lower.contains('_')
        && !lower.contains(' ')
        && lower.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

pub fn check_uninformative_label(capture: &ScreenCapture) -> Vec<RuleFinding> {
    let mut out: Vec<_> = all_nodes(capture)
        .filter(|n| n.is_focusable_by_screen_reader && n.class_role != Role::Text)
        .filter_map(|n| {
            let label = n.own_label()?;
            let generic = GENERIC_LABELS.contains(&label.to_lowercase().as_str());
            (generic || looks_like_identifier(label)).then(|| {
                RuleFinding::new(
                    RuleId::UninformativeLabel,
                    n,
                    format!("The label \"{label}\" may not describe this item."),
                )
            })
        })
        .collect();
    out.sort();
    out
}

/// Runs every rule; output is sorted by rule then node id.
pub fn check_all(capture: &ScreenCapture, config: &RuleConfig) -> Vec<RuleFinding> {
    let mut out = check_missing_label(capture);
    out.extend(check_duplicate_description(capture));
    out.extend(check_overlapping_clickables(capture, config));
    out.extend(check_uninformative_label(capture));
    out.sort();
    out
}
