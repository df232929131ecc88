//! Offline TalkBack simulation: focus order, announcement text, traversal
//! with a cap, and mapping recorded announcements back onto view nodes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{non_blank, Role, ScreenCapture, StateFlag, ViewNode};
use crate::geometry::{iou, BoundingBox};

/// Default number of elements traversed per screen.
pub const DEFAULT_TRAVERSAL_CAP: usize = 40;

/// Default IoU needed to associate an announcement with a node.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

pub const HINT_ACTIVATE: &str = "Double-tap to activate";
pub const HINT_LONG_PRESS: &str = "Double-tap and hold to long press";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnnounceError {
    #[error("node `{node_id}` has nothing to announce")]
    NotAnnounceable { node_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub index: usize,
    pub transcript: String,
    pub node_id: String,
    pub bounds: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    #[serde(rename = "app")]
    pub app_name: String,
    pub screen_id: String,
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, index: usize) -> Option<&TranscriptEntry> {
        self.entries.get(index)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serialization cannot fail")
    }
}

/// Icon resource stems TalkBack voices as a glyph rather than a file name.
const GLYPH_LABELS: &[(&str, &str)] = &[
    ("ic_add", "+"),
    ("ic_plus", "+"),
    ("ic_action_add", "+"),
    ("ic_add_circle", "+"),
    ("ic_input_add", "+"),
];

fn auto_label(resource_id: &str) -> &str {
    let file = resource_id.rsplit('/').next().unwrap_or(resource_id);
    let stem = file.split('.').next().unwrap_or(file);
    GLYPH_LABELS
        .iter()
        .find(|(s, _)| *s == stem)
        .map_or(resource_id, |(_, glyph)| glyph)
}

/// Text of non-focusable descendants, which a focusable parent speaks for them.
fn grouped_label(node: &ViewNode) -> Option<String> {
    fn collect<'a>(node: &'a ViewNode, out: &mut Vec<&'a str>) {
        for child in &node.children {
            if child.is_focusable_by_screen_reader {
                continue;
            }
            if let Some(label) = child.own_label() {
                out.push(label);
            }
            collect(child, out);
        }
    }
    let mut parts = Vec::new();
    collect(node, &mut parts);
    (!parts.is_empty()).then(|| parts.join(", "))
}

fn resolve_label(node: &ViewNode) -> Option<String> {
    node.own_label()
        .map(str::to_owned)
        .or_else(|| grouped_label(node))
        .or_else(|| non_blank(node.resource_id.as_deref()).map(|r| auto_label(r).to_owned()))
}

fn state_words(node: &ViewNode) -> Vec<&'static str> {
    let mut words = Vec::new();
    if node.has_state(StateFlag::Selected) {
        words.push("Selected");
    }
    if node.has_state(StateFlag::Checked) {
        words.push("Checked");
    } else if node.class_role == Role::Checkbox {
        words.push("Not checked");
    }
    if node.has_state(StateFlag::Disabled) {
        words.push("Disabled");
    }
    words
}

fn role_phrase(node: &ViewNode) -> Option<String> {
    let name = match node.class_role {
        Role::Button => Some("Button"),
        Role::Tab => Some("Tab"),
        Role::Checkbox => Some("Checkbox"),
        Role::EditField => Some("Edit box"),
        Role::Heading => Some("Heading"),
        Role::Image | Role::Text | Role::ListItem | Role::Container | Role::Other => None,
    };
    match (name, node.collection_info) {
        (name, Some(info)) => Some(format!(
            "{} {} of {}",
            name.unwrap_or("Item"),
            info.position,
            info.total
        )),
        (Some(name), None) => Some(name.to_owned()),
        (None, None) => None,
    }
}

fn usage_hints(node: &ViewNode) -> Vec<&'static str> {
    let mut hints = Vec::new();
    if node.has_state(StateFlag::Disabled) {
        return hints;
    }
    if node.is_clickable {
        hints.push(HINT_ACTIVATE);
    }
    if node.is_long_clickable {
        hints.push(HINT_LONG_PRESS);
    }
    hints
}

/// Composes what TalkBack speaks when `node` gains focus, in the order
/// state, label, role (with collection position), usage hint.
pub fn compose_announcement(node: &ViewNode) -> Result<String, AnnounceError> {
    let states = state_words(node).join(", ");
    let label = resolve_label(node);
    let head = match (states.is_empty(), label) {
        (true, None) => {
            return Err(AnnounceError::NotAnnounceable {
                node_id: node.node_id.clone(),
            })
        }
        (true, Some(label)) => label,
        (false, None) => states,
        (false, Some(label)) => format!("{states}, {label}"),
    };

    let mut segments = vec![head];
    segments.extend(role_phrase(node));
    segments.extend(usage_hints(node).into_iter().map(str::to_owned));

    let last = segments.len() - 1;
    let mut out = String::new();
    for (i, segment) in segments.iter().enumerate() {
        out.push_str(segment);
        if i < last {
            if !segment.ends_with(['.', '!', '?']) {
                out.push('.');
            }
            out.push(' ');
        }
    }
    Ok(out)
}

fn visible_order(tree: &ViewNode, promote_default: bool) -> Vec<&ViewNode> {
    reading_order(tree, promote_default)
        .into_iter()
        .filter(|n| n.bounds.is_visible_in(&tree.bounds))
        .collect()
}

fn reading_order(tree: &ViewNode, promote_default: bool) -> Vec<&ViewNode> {
    let mut nodes: Vec<(usize, &ViewNode)> = tree
        .preorder()
        .enumerate()
        .filter(|(_, n)| n.is_focusable_by_screen_reader && compose_announcement(n).is_ok())
        .collect();
    nodes.sort_by_key(|(pre, n)| (n.bounds.top, n.bounds.left, *pre));
    let mut ordered: Vec<&ViewNode> = nodes.into_iter().map(|(_, n)| n).collect();
    if promote_default {
        if let Some(pos) = ordered
            .iter()
            .position(|n| n.has_state(StateFlag::FocusedByDefault))
        {
            let first = ordered.remove(pos);
            ordered.insert(0, first);
        }
    }
    ordered
}

/// Screen-reader focus order of the capture's initial tree: the
/// default-focus node first, then reading order (top edge, left edge,
/// pre-order position). Nodes with nothing to announce are skipped.
pub fn focus_order(capture: &ScreenCapture) -> Vec<&ViewNode> {
    reading_order(&capture.root, true)
}

/// Walks the screen as a swipe-right traversal would, stopping after `cap`
/// announcements or at the end of the on-screen content.
pub fn synthesize(capture: &ScreenCapture, cap: usize) -> Transcript {
    let mut events: Vec<_> = capture.capture_events.iter().collect();
    events.sort_by_key(|e| e.after_entry_index);
    let mut pending = events.into_iter().peekable();

    let mut queue = visible_order(&capture.root, true);
    let mut pos = 0;
    let mut visited: HashSet<&str> = HashSet::new();
    let mut entries: Vec<TranscriptEntry> = Vec::new();

    while entries.len() < cap {
        while let Some(event) = pending.peek() {
            let due = entries.len() > event.after_entry_index as usize || pos >= queue.len();
            if !due {
                break;
            }
            if let Some(tree) = &event.replacement_root {
                queue = visible_order(tree, false);
                pos = 0;
            }
            pending.next();
        }
        let Some(node) = queue.get(pos) else { break };
        pos += 1;
        if !visited.insert(node.node_id.as_str()) {
            continue;
        }
        let transcript = compose_announcement(node).expect("focus order holds announceable nodes");
        entries.push(TranscriptEntry {
            index: entries.len(),
            transcript,
            node_id: node.node_id.clone(),
            bounds: node.bounds,
        });
    }

    Transcript {
        app_name: capture.app_name.clone(),
        screen_id: capture.screen_id.clone(),
        entries,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Association {
    pub index: usize,
    /// `None` when no node reaches the IoU threshold.
    pub node_id: Option<String>,
    pub iou: f64,
}

/// Maps every transcript entry to the node whose bounds best overlap it.
///
/// Ties go to focusable nodes, then to the earlier node in pre-order.
pub fn associate(transcript: &Transcript, capture: &ScreenCapture, threshold: f64) -> Vec<Association> {
    let nodes: Vec<&ViewNode> = capture.trees().flat_map(ViewNode::preorder).collect();
    transcript
        .entries
        .iter()
        .map(|entry| {
            let mut best: Option<(&ViewNode, f64)> = None;
            for node in &nodes {
                let score = iou(&entry.bounds, &node.bounds);
                let better = match best {
                    None => score > 0.0,
                    Some((held, held_score)) => {
                        score > held_score
                            || (score == held_score
                                && node.is_focusable_by_screen_reader
                                && !held.is_focusable_by_screen_reader)
                    }
                };
                if better {
                    best = Some((node, score));
                }
            }
            match best {
                Some((node, score)) if score >= threshold => Association {
                    index: entry.index,
                    node_id: Some(node.node_id.clone()),
                    iou: score,
                },
                Some((_, score)) => Association {
                    index: entry.index,
                    node_id: None,
                    iou: score,
                },
                None => Association {
                    index: entry.index,
                    node_id: None,
                    iou: 0.0,
                },
            }
        })
        .collect()
}
