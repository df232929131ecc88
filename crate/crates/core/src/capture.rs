//! Capture file model: one serialized screen snapshot with its view hierarchy.
//!
//! A capture is a JSON document with a mandatory `format_version: 1` field,
//! the app and screen identifiers, an optional screenshot reference, the root
//! [`ViewNode`] and an ordered list of [`ChangeEvent`]s recorded while the
//! screen was traversed.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoundingBox;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum CaptureError {
    #[error("malformed capture at line {line}, column {column}: {message}")]
    MalformedSyntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at `{field}`: {reason}")]
    SchemaViolation { field: String, reason: String },
    #[error("duplicate node_id `{node_id}`")]
    DuplicateNodeId { node_id: String },
}

impl CaptureError {
    fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CaptureError::SchemaViolation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Button,
    Image,
    Text,
    Tab,
    Checkbox,
    EditField,
    Heading,
    ListItem,
    Container,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateFlag {
    Selected,
    Checked,
    Disabled,
    FocusedByDefault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollectionKind {
    Tab,
    List,
    Grid,
}

/// Position of an item inside a tab bar, list or grid. `position` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionInfo {
    pub position: u32,
    pub total: u32,
    pub kind: CollectionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewNode {
    pub node_id: String,
    pub class_role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_id: Option<String>,
    pub bounds: BoundingBox,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub state: BTreeSet<StateFlag>,
    #[serde(default)]
    pub is_clickable: bool,
    #[serde(default)]
    pub is_long_clickable: bool,
    #[serde(default)]
    pub is_focusable_by_screen_reader: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collection_info: Option<CollectionInfo>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ViewNode>,
}

impl ViewNode {
    /// Minimal node with the given id, role and bounds; everything else empty.
    pub fn new(node_id: impl Into<String>, class_role: Role, bounds: BoundingBox) -> Self {
        ViewNode {
            node_id: node_id.into(),
            class_role,
            text: None,
            content_description: None,
            resource_id: None,
            bounds,
            state: BTreeSet::new(),
            is_clickable: false,
            is_long_clickable: false,
            is_focusable_by_screen_reader: false,
            collection_info: None,
            children: Vec::new(),
        }
    }

    /// Developer-supplied label: content description, else text. Blank strings
    /// count as absent.
    pub fn own_label(&self) -> Option<&str> {
        non_blank(self.content_description.as_deref()).or_else(|| non_blank(self.text.as_deref()))
    }

    pub fn has_state(&self, flag: StateFlag) -> bool {
        self.state.contains(&flag)
    }

    pub fn is_pure_container(&self) -> bool {
        !self.children.is_empty() && self.own_label().is_none()
    }

    /// Pre-order walk over this node and all descendants.
    pub fn preorder(&self) -> Preorder<'_> {
        Preorder { stack: vec![self] }
    }

    pub fn find(&self, node_id: &str) -> Option<&ViewNode> {
        self.preorder().find(|n| n.node_id == node_id)
    }
}

pub(crate) fn non_blank(s: Option<&str>) -> Option<&str> {
    s.map(str::trim).filter(|s| !s.is_empty())
}

pub struct Preorder<'a> {
    stack: Vec<&'a ViewNode>,
}

impl<'a> Iterator for Preorder<'a> {
    type Item = &'a ViewNode;

    fn next(&mut self) -> Option<&'a ViewNode> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChangeKind {
    Scrolled,
    ContentChanged,
}

/// A scroll or content change observed during traversal.
///
/// The event fires once `after_entry_index + 1` announcements have been
/// emitted; traversal then continues over the unvisited part of
/// `replacement_root`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeEvent {
    pub kind: ChangeKind,
    pub after_entry_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_root: Option<ViewNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScreenCapture {
    pub app_name: String,
    pub screen_id: String,
    pub screenshot_path: Option<String>,
    pub root: ViewNode,
    pub capture_events: Vec<ChangeEvent>,
}

impl ScreenCapture {
    /// The initial tree followed by every replacement tree, in event order.
    pub fn trees(&self) -> impl Iterator<Item = &ViewNode> {
        std::iter::once(&self.root).chain(
            self.capture_events
                .iter()
                .filter_map(|e| e.replacement_root.as_ref()),
        )
    }

    /// First node with this id in any tree.
    pub fn find_node(&self, node_id: &str) -> Option<&ViewNode> {
        self.trees().find_map(|t| t.find(node_id))
    }

    pub fn viewport(&self) -> BoundingBox {
        self.root.bounds
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaptureDocument {
    format_version: u32,
    app_name: String,
    screen_id: String,
    #[serde(default)]
    screenshot: Option<String>,
    root: ViewNode,
    #[serde(default)]
    events: Vec<ChangeEvent>,
}

/// Parses and validates a capture document.
pub fn parse_capture(raw: &[u8]) -> Result<ScreenCapture, CaptureError> {
    let value: serde_json::Value = serde_json::from_slice(raw).map_err(|e| {
        if e.is_data() {
            CaptureError::schema("<document>", e.to_string())
        } else {
            CaptureError::MalformedSyntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            }
        }
    })?;

    match value.get("format_version") {
        None => return Err(CaptureError::schema("format_version", "missing")),
        Some(v) if v.as_u64() == Some(u64::from(FORMAT_VERSION)) => {}
        Some(v) => {
            return Err(CaptureError::schema(
                "format_version",
                format!("unsupported version {v}, expected {FORMAT_VERSION}"),
            ))
        }
    }

    let doc: CaptureDocument = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CaptureError::schema(path, e.into_inner().to_string())
    })?;

    let capture = ScreenCapture {
        app_name: doc.app_name,
        screen_id: doc.screen_id,
        screenshot_path: doc.screenshot,
        root: doc.root,
        capture_events: doc.events,
    };
    check_invariants(&capture)?;
    Ok(capture)
}

fn check_invariants(capture: &ScreenCapture) -> Result<(), CaptureError> {
    if capture.screen_id.trim().is_empty() {
        return Err(CaptureError::schema("screen_id", "must not be empty"));
    }
    for tree in capture.trees() {
        let mut seen = HashSet::new();
        for node in tree.preorder() {
            if node.node_id.is_empty() {
                return Err(CaptureError::schema("node_id", "must not be empty"));
            }
            if !seen.insert(node.node_id.as_str()) {
                return Err(CaptureError::DuplicateNodeId {
                    node_id: node.node_id.clone(),
                });
            }
            if !node.bounds.is_well_formed() {
                return Err(CaptureError::schema(
                    format!("{}.bounds", node.node_id),
                    "left must not exceed right and top must not exceed bottom",
                ));
            }
            if let Some(info) = node.collection_info {
                if info.position < 1 || info.position > info.total {
                    return Err(CaptureError::schema(
                        format!("{}.collection_info.position", node.node_id),
                        format!("{} is outside [1, {}]", info.position, info.total),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Serializes a capture to its canonical pretty-printed document.
pub fn serialize_capture(capture: &ScreenCapture) -> String {
    let doc = CaptureDocument {
        format_version: FORMAT_VERSION,
        app_name: capture.app_name.clone(),
        screen_id: capture.screen_id.clone(),
        screenshot: capture.screenshot_path.clone(),
        root: capture.root.clone(),
        events: capture.capture_events.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("capture serialization cannot fail")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ValidationDiagnostic {
    DuplicateScreenId { screen_id: String, occurrences: usize },
    /// A descendant extends past its tree's root bounds. The capture stays usable.
    ClippedBounds { screen_id: String, node_id: String },
    /// The initial tree has no screen-reader-focusable node.
    EmptyTree { screen_id: String },
    /// Clickable but not focusable: reachable by touch, silent to a screen reader.
    UnfocusableActionable { screen_id: String, node_id: String },
}

impl fmt::Display for ValidationDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateScreenId {
                screen_id,
                occurrences,
            } => write!(f, "screen_id `{screen_id}` appears {occurrences} times"),
            Self::ClippedBounds { screen_id, node_id } => {
                write!(f, "{screen_id}: node `{node_id}` extends outside the root bounds")
            }
            Self::EmptyTree { screen_id } => {
                write!(f, "{screen_id}: no screen-reader-focusable elements")
            }
            Self::UnfocusableActionable { screen_id, node_id } => write!(
                f,
                "{screen_id}: node `{node_id}` is clickable but not focusable by a screen reader"
            ),
        }
    }
}

/// Corpus-level checks that do not make a capture unusable.
pub fn validate_corpus(captures: &[ScreenCapture]) -> Vec<ValidationDiagnostic> {
    let mut diagnostics = Vec::new();

    let mut by_id: BTreeMap<&str, usize> = BTreeMap::new();
    for c in captures {
        *by_id.entry(c.screen_id.as_str()).or_default() += 1;
    }
    for (screen_id, occurrences) in by_id {
        if occurrences > 1 {
            diagnostics.push(ValidationDiagnostic::DuplicateScreenId {
                screen_id: screen_id.to_owned(),
                occurrences,
            });
        }
    }

    for c in captures {
        if !c.root.preorder().any(|n| n.is_focusable_by_screen_reader) {
            diagnostics.push(ValidationDiagnostic::EmptyTree {
                screen_id: c.screen_id.clone(),
            });
        }
        let mut reported = HashSet::new();
        for tree in c.trees() {
            for node in tree.preorder().skip(1) {
                if !tree.bounds.contains(&node.bounds) && reported.insert(("clip", &node.node_id)) {
                    diagnostics.push(ValidationDiagnostic::ClippedBounds {
                        screen_id: c.screen_id.clone(),
                        node_id: node.node_id.clone(),
                    });
                }
            }
            for node in tree.preorder() {
                if node.is_clickable
                    && !node.is_focusable_by_screen_reader
                    && reported.insert(("unfocusable", &node.node_id))
                {
                    diagnostics.push(ValidationDiagnostic::UnfocusableActionable {
                        screen_id: c.screen_id.clone(),
                        node_id: node.node_id.clone(),
                    });
                }
            }
        }
    }
    diagnostics
}
