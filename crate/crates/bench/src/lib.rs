use talkaudit_core::auditor::{serialize_audit, AuditFinding, FindingSource};
use talkaudit_core::eval::{Candidate, ErrorCategory, MatchKind};
use talkaudit_core::{BoundingBox, Role, ScreenCapture, ViewNode};

/// A screen of `rows` list rows, each holding a labelled icon button and a caption.
pub fn synthetic_screen(rows: u32) -> ScreenCapture {
    let mut root = ViewNode::new("root", Role::Container, BoundingBox::new(0, 0, 1080, 120 * rows.max(16)));
    for i in 0..rows {
        let top = 120 * i;
        let mut row = ViewNode::new(format!("row-{i}"), Role::ListItem, BoundingBox::new(0, top, 1080, top + 110));
        let mut button = ViewNode::new(format!("btn-{i}"), Role::Button, BoundingBox::new(940, top + 10, 1060, top + 100));
        button.is_clickable = true;
        button.is_focusable_by_screen_reader = true;
        if i % 7 != 0 {
            button.content_description = Some(format!("Open item {}", i % 11));
        }
        let mut caption = ViewNode::new(format!("cap-{i}"), Role::Text, BoundingBox::new(20, top + 10, 900, top + 100));
        caption.text = Some(format!("Item {i}"));
        caption.is_focusable_by_screen_reader = true;
        row.children = vec![caption, button];
        root.children.push(row);
    }
    ScreenCapture {
        app_name: "Bench".into(),
        screen_id: format!("bench-{rows}"),
        screenshot_path: None,
        root,
        capture_events: vec![],
    }
}

/// A completion wrapped in reasoning text and a fenced block, with `n` findings.
pub fn synthetic_completion(n: usize) -> String {
    let findings: Vec<AuditFinding> = (0..n)
        .map(|i| AuditFinding {
            index: i,
            transcript: format!("Item {i}. Button. Double-tap to activate"),
            issue: if i % 3 == 0 { String::new() } else { "Ambiguous label".into() },
            explanation: if i % 3 == 0 { String::new() } else { "Several buttons share this label.".into() },
            suggestion: if i % 3 == 0 { String::new() } else { "Name the target item.".into() },
            source: FindingSource::Llm,
        })
        .collect();
    format!(
        "\"\"\"\nStep 1 - A list of {n} items {{each with a button}}.\n\"\"\"\n```json\n{}\n```\n",
        serialize_audit(&findings)
    )
}

pub fn synthetic_candidates(n: usize) -> Vec<Candidate> {
    let kinds = [MatchKind::TpCandidate, MatchKind::FpCandidate, MatchKind::FalseNegative, MatchKind::TrueNegative];
    (0..n)
        .map(|i| Candidate {
            screen_id: format!("s{}", i % 14),
            node_id: format!("n{i}"),
            category: ErrorCategory::ALL[i % ErrorCategory::ALL.len()],
            kind: kinds[i % kinds.len()],
        })
        .collect()
}
