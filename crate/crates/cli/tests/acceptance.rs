//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! printed.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use similar::{ChangeTag, TextDiff};
use talkaudit_core::auditor::{
    assemble_prompt, parse_audit, serialize_audit, AuditFinding, FindingSource, PromptVariant, SectionName,
};
use talkaudit_core::eval::{
    category_breakdown, f1_score, match_flagged, Adjudicator, ErrorCategory, GroundTruthLabel, Granularity,
    ScreenLabels,
};
use talkaudit_core::report::parse_report;
use talkaudit_core::talkback::compose_announcement;
use talkaudit_core::{
    check_all, parse_capture, synthesize, BoundingBox, Role, RuleConfig, RuleId, ScreenCapture, Transcript,
    ViewNode,
};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture_capture(screen_id: &str) -> Result<ScreenCapture, String> {
    let path = workspace().join(format!("fixtures/captures/{screen_id}.json"));
    let raw = fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_capture(&raw).map_err(|e| format!("{}: {e}", path.display()))
}

const SCREENS: [&str; 3] = ["food-delivery-home", "amazon-music-library", "transit-trip-planner"];

fn f1_identity() -> Outcome {
    let start = Instant::now();
    // (precision, recall, expected f1)
    let rows: [(&str, f64, f64, f64); 18] = [
        ("prompt-variant average", 0.713, 0.622, 0.664),
        ("Accessibility Scanner", 0.729, 0.313, 0.438),
        ("Axe", 0.812, 0.171, 0.283),
        ("Base", 0.797, 0.577, 0.669),
        ("General", 0.696, 0.589, 0.638),
        ("Contextual", 0.667, 0.650, 0.658),
        ("General_Contextual", 0.708, 0.699, 0.704),
        ("WCAG_Contextual", 0.698, 0.595, 0.642),
        ("GPT-4o base", 0.797, 0.577, 0.669),
        ("o1 base", 0.606, 0.577, 0.591),
        ("Claude base", 0.714, 0.337, 0.458),
        ("Gemini base", 0.582, 0.607, 0.595),
        ("Llama base", 0.686, 0.429, 0.528),
        ("GPT-4o GC", 0.723, 0.692, 0.707),
        ("o1 GC", 0.675, 0.679, 0.677),
        ("Claude GC", 0.724, 0.337, 0.460),
        ("Gemini GC", 0.617, 0.693, 0.653),
        ("Llama GC", 0.644, 0.380, 0.478),
    ];
    for (name, p, r, expected) in rows {
        let f1 = f1_score(p, r).ok_or_else(|| format!("{name}: F1 undefined"))?;
        ensure((f1 - expected).abs() <= 0.0015, || format!("{name}: got {f1:.4}, table {expected}"))?;
    }
    ensure(start.elapsed() < Duration::from_secs(1), || "took over 1 s".into())
}

fn announcement_format() -> Outcome {
    let food = fixture_capture("food-delivery-home")?;
    let tab = food.find_node("tab-home").ok_or("tab-home missing")?;
    let got = compose_announcement(tab).map_err(|e| e.to_string())?;
    ensure(got == "Selected, Home. Tab 1 of 4. Double-tap to activate", || format!("tab: {got:?}"))?;

    let music = fixture_capture("amazon-music-library")?;
    let icon = music.find_node("more-options").ok_or("more-options missing")?;
    let got = compose_announcement(icon).map_err(|e| e.to_string())?;
    ensure(got == "res/drawable/ic_action_more.xml", || format!("icon: {got:?}"))?;

    let promo = food.find_node("promo").ok_or("promo missing")?;
    let got = compose_announcement(promo).map_err(|e| e.to_string())?;
    ensure(got == "$0 Delivery Fee on $15+", || format!("static text: {got:?}"))
}

fn flat_capture(n: usize) -> ScreenCapture {
    let mut root = ViewNode::new("root", Role::Container, BoundingBox::new(0, 0, 1080, 20_000));
    for i in 0..n as u32 {
        let mut b = ViewNode::new(format!("b{i}"), Role::Button, BoundingBox::new(0, 100 * i, 1080, 100 * i + 90));
        b.text = Some(format!("Item {i}"));
        b.is_clickable = true;
        b.is_focusable_by_screen_reader = true;
        root.children.push(b);
    }
    ScreenCapture {
        app_name: "Gen".into(),
        screen_id: format!("flat-{n}"),
        screenshot_path: None,
        root,
        capture_events: vec![],
    }
}

fn random_capture() -> impl Strategy<Value = ScreenCapture> {
    let node = (0u32..1080, 0u32..2000, any::<bool>(), any::<bool>(), proptest::option::of("[a-z]{1,8}"));
    prop::collection::vec(prop::collection::vec(node, 0..8), 0..30).prop_map(|groups| {
        let mut root = ViewNode::new("root", Role::Container, BoundingBox::new(0, 0, 1080, 1920));
        let mut id = 0;
        for group in groups {
            let mut parent = ViewNode::new(format!("g{id}"), Role::Container, BoundingBox::new(0, 0, 1080, 1920));
            id += 1;
            for (x, y, focus, click, text) in group {
                let mut n = ViewNode::new(format!("n{id}"), Role::Button, BoundingBox::new(x, y, x + 50, y + 50));
                id += 1;
                n.text = text;
                n.is_focusable_by_screen_reader = focus;
                n.is_clickable = click;
                parent.children.push(n);
            }
            root.children.push(parent);
        }
        ScreenCapture {
            app_name: "Gen".into(),
            screen_id: "random".into(),
            screenshot_path: None,
            root,
            capture_events: vec![],
        }
    })
}

fn traversal_cap() -> Outcome {
    let hundred = synthesize(&flat_capture(100), 40).len();
    ensure(hundred == 40, || format!("100 nodes gave {hundred} entries"))?;
    let three = synthesize(&flat_capture(3), 40).len();
    ensure(three == 3, || format!("3 nodes gave {three} entries"))?;
    let mut runner = TestRunner::new(Config {
        cases: 200,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&(random_capture(), 0usize..50), |(c, cap)| {
            prop_assert!(synthesize(&c, cap).len() <= cap);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn prompt_fidelity() -> Outcome {
    let reference_path = workspace().join("crates/core/tests/data/general_contextual_reference.txt");
    let reference = fs::read_to_string(&reference_path).map_err(|e| e.to_string())?;
    let transcript = synthesize(&fixture_capture("food-delivery-home")?, 40);
    let gc = assemble_prompt(PromptVariant::GeneralContextual, &transcript)
        .map_err(|e| e.to_string())?
        .render();
    ensure(gc.contains(reference.trim_end()), || "reference text not found verbatim".into())?;

    let mut block = format!("app: \"{}\",\ntranscripts: [\n", transcript.app_name);
    let rows: Vec<String> = transcript
        .entries
        .iter()
        .map(|e| format!("    {{ index: {}, transcript: {}}}", e.index, serde_json::to_string(&e.transcript).unwrap()))
        .collect();
    block.push_str(&rows.join(",\n"));
    block.push_str("\n]");
    ensure(gc.ends_with(&block), || "prompt does not end with the transcript block".into())?;

    let base = assemble_prompt(PromptVariant::Base, &transcript).map_err(|e| e.to_string())?;
    let general = assemble_prompt(PromptVariant::General, &transcript).map_err(|e| e.to_string())?;
    let accessibility: BTreeSet<&str> = general
        .section(SectionName::Accessibility)
        .ok_or("general has no accessibility section")?
        .lines()
        .chain([""])
        .collect();
    let base_text = base.render();
    let general_text = general.render();
    let diff = TextDiff::from_lines(&base_text, &general_text);
    for change in diff.iter_all_changes() {
        let line = change.value().trim_end_matches('\n');
        match change.tag() {
            ChangeTag::Delete => return Err(format!("base line missing from general: {line:?}")),
            ChangeTag::Insert if !accessibility.contains(line) => {
                return Err(format!("general adds a line outside the accessibility section: {line:?}"))
            }
            _ => {}
        }
    }
    let inserted = diff.iter_all_changes().filter(|c| c.tag() == ChangeTag::Insert).count();
    let expected = general.section(SectionName::Accessibility).unwrap().lines().count() + 1;
    ensure(inserted == expected, || format!("{inserted} inserted lines, expected {expected}"))
}

fn finding_strategy() -> impl Strategy<Value = AuditFinding> {
    (0usize..40, "\\PC{0,30}", "\\PC{0,30}", "\\PC{0,30}", "\\PC{0,30}").prop_map(|(index, t, issue, e, s)| {
        let empty = issue.trim().is_empty();
        AuditFinding {
            index,
            transcript: t,
            explanation: if empty { String::new() } else { e },
            suggestion: if empty { String::new() } else { s },
            issue,
            source: FindingSource::Llm,
        }
    })
}

fn parser_robustness() -> Outcome {
    let transcript = synthesize(&fixture_capture("amazon-music-library")?, 40);
    let body = r#"{"audit": [
  {"index": 1, "transcript": "res/drawable/ic_action_more.xml", "issue": "Using internal identifiers as labels", "explanation": "The drawable path is read aloud.", "suggestion": "Add a content description."},
  {"index": 3, "transcript": "Liked Songs. Item 1 of 3. Double-tap to activate", "issue": "", "explanation": "", "suggestion": ""}
]}"#;
    let forms = [
        body.to_owned(),
        format!("```json\n{body}\n```"),
        format!("\"\"\"\nStep 1 - A music library screen {{with lists}}.\n\"\"\"\n\"\"\"\nStep 2 - [1] reads a path.\n\"\"\"\n```json\n{body}\n```\n"),
    ];
    let parsed: Vec<_> = forms
        .iter()
        .map(|f| parse_audit(f, &transcript).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    ensure(parsed[0].findings.len() == 2, || "bare JSON lost findings".into())?;
    ensure(parsed.iter().all(|p| p.findings == parsed[0].findings), || "forms disagree".into())?;

    let out_of_range = r#"{"audit": [{"index": 42, "transcript": "x", "issue": "i", "explanation": "e", "suggestion": "s"}]}"#;
    let p = parse_audit(out_of_range, &transcript).map_err(|e| e.to_string())?;
    ensure(p.out_of_range().eq([42]), || "index 42 not flagged".into())?;

    let long = Transcript {
        entries: (0..40)
            .map(|i| talkaudit_core::TranscriptEntry {
                index: i,
                transcript: String::new(),
                node_id: format!("n{i}"),
                bounds: BoundingBox::new(0, 0, 1, 1),
            })
            .collect(),
        ..transcript
    };
    let mut runner = TestRunner::new(Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&prop::collection::vec(finding_strategy(), 0..6), |findings| {
            let parsed = parse_audit(&serialize_audit(&findings), &long).unwrap();
            prop_assert_eq!(parsed.findings, findings);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn offline_end_to_end() -> Outcome {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = workspace();
    let captures: Vec<PathBuf> = SCREENS
        .iter()
        .map(|s| root.join(format!("fixtures/captures/{s}.json")))
        .collect();
    let start = Instant::now();
    // Any HTTP attempt would be routed to a closed local port and fail.
    let status = Command::new(env!("CARGO_BIN_EXE_talkaudit"))
        .arg("audit")
        .args(&captures)
        .args(["--prompt-variant", "general_contextual", "--provider", "mock"])
        .arg("--mock-dir")
        .arg(root.join("fixtures/mock"))
        .arg("--out")
        .arg(out.path())
        .env("HTTP_PROXY", "http://127.0.0.1:9")
        .env("HTTPS_PROXY", "http://127.0.0.1:9")
        .env("ALL_PROXY", "http://127.0.0.1:9")
        .env_remove("TALKAUDIT_API_KEY")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;

    for screen in SCREENS {
        let path = out.path().join(screen).join("report.json");
        let raw = fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let report = parse_report(&raw).map_err(|e| e.to_string())?;
        ensure(report.provenance.provider.as_deref() == Some("mock"), || "provider is not the mock".into())?;
        ensure(report.is_consistent(), || format!("{screen}: summary does not recount"))?;
        ensure(out.path().join(screen).join("report.html").is_file(), || format!("{screen}: no report.html"))?;

        let transcript = synthesize(&fixture_capture(screen)?, 40);
        let canned = fs::read_to_string(root.join(format!("fixtures/mock/{screen}.txt"))).map_err(|e| e.to_string())?;
        let mut expected: Vec<AuditFinding> = parse_audit(&canned, &transcript)
            .map_err(|e| e.to_string())?
            .findings
            .into_iter()
            .filter(|f| !f.is_no_issue())
            .collect();
        expected.sort_by_key(|f| f.index);
        let got: Vec<AuditFinding> = report
            .findings()
            .filter(|f| f.source == FindingSource::Llm)
            .cloned()
            .collect();
        ensure(got == expected, || format!("{screen}: report findings differ from the canned completion"))?;
    }
    Ok(())
}

fn rule_checker_oracle() -> Outcome {
    let mut root = ViewNode::new("root", Role::Container, BoundingBox::new(0, 0, 1080, 2400));
    let mut add = |id: &str, role: Role, label: Option<&str>, b: BoundingBox| {
        let mut n = ViewNode::new(id, role, b);
        n.content_description = label.map(str::to_owned);
        n.is_clickable = role == Role::Button;
        n.is_focusable_by_screen_reader = true;
        root.children.push(n);
    };
    let row = |i: u32| BoundingBox::new(0, 110 * i, 500, 110 * i + 100);
    for i in 0..4 {
        add(&format!("unlabeled-{i}"), Role::Button, None, row(i));
    }
    add("dup-a", Role::Button, Some("Settings"), row(4));
    add("dup-b", Role::Button, Some("Settings"), row(5));
    add("overlap-a", Role::Button, Some("Share"), BoundingBox::new(600, 0, 700, 100));
    add("overlap-b", Role::Button, Some("Share options"), BoundingBox::new(620, 0, 720, 100));
    let distinct = [
        "Home", "Search", "Library", "Profile", "Notifications", "Messages", "Cart", "Orders", "Help", "Sign out",
    ];
    for (i, label) in distinct.iter().enumerate() {
        add(&format!("plain-{i}"), Role::Button, Some(label), row(6 + i as u32));
    }
    add("caption", Role::Text, Some("Welcome back"), BoundingBox::new(600, 300, 1000, 360));
    add("banner", Role::Image, Some("Summer sale banner"), BoundingBox::new(600, 400, 1000, 600));
    let capture = ScreenCapture {
        app_name: "Synthetic".into(),
        screen_id: "plants".into(),
        screenshot_path: None,
        root,
        capture_events: vec![],
    };
    let elements = capture.root.children.len();
    ensure(elements == 20, || format!("screen has {elements} elements"))?;

    let mut plants: BTreeSet<(RuleId, String)> = (0..4)
        .map(|i| (RuleId::MissingLabel, format!("unlabeled-{i}")))
        .collect();
    plants.extend(["dup-a", "dup-b"].map(|n| (RuleId::DuplicateDescription, n.to_owned())));
    plants.extend(["overlap-a", "overlap-b"].map(|n| (RuleId::OverlappingClickables, n.to_owned())));

    let found: BTreeSet<(RuleId, String)> = check_all(&capture, &RuleConfig::default())
        .into_iter()
        .map(|f| (f.rule_id, f.node_id))
        .collect();
    let tp = found.intersection(&plants).count() as f64;
    let precision = tp / found.len().max(1) as f64;
    let recall = tp / plants.len() as f64;
    ensure(precision == 1.0 && recall == 1.0, || {
        format!("precision {precision}, recall {recall}; extra {:?}", found.difference(&plants).collect::<Vec<_>>())
    })
}

fn dataset_bookkeeping() -> Outcome {
    let counts = [
        (ErrorCategory::MissingLabel, 39),
        (ErrorCategory::LabelQuality, 42),
        (ErrorCategory::StructureGrouping, 54),
        (ErrorCategory::Heading, 16),
        (ErrorCategory::Functionality, 12),
        (ErrorCategory::NoError, 143),
    ];
    let mut labels: Vec<GroundTruthLabel> = counts
        .iter()
        .flat_map(|(category, n)| (0..*n).map(move |_| *category))
        .enumerate()
        .map(|(i, category)| GroundTruthLabel {
            node_id: Some(format!("n{i}")),
            entry_index: None,
            category,
            description: String::new(),
            wcag: category.wcag_criteria().iter().take(1).map(|c| (*c).to_owned()).collect(),
        })
        .collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let per_screen = labels.len().div_ceil(14);
    let mut screens = Vec::new();
    let mut k = 0;
    while !labels.is_empty() {
        let rest = labels.split_off(per_screen.min(labels.len()));
        let screen = ScreenLabels {
            screen_id: format!("screen-{k:02}"),
            labels,
        };
        fs::write(dir.path().join(format!("screen-{k:02}.json")), serde_json::to_vec(&screen).unwrap())
            .map_err(|e| e.to_string())?;
        screens.push(screen);
        labels = rest;
        k += 1;
    }

    let output = Command::new(env!("CARGO_BIN_EXE_talkaudit"))
        .args(["dataset", "--json"])
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    ensure(output.status.success(), || String::from_utf8_lossy(&output.stderr).into_owned())?;
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).map_err(|e| e.to_string())?;
    ensure(doc["total"] == 306, || format!("total {}", doc["total"]))?;
    for (category, n) in counts {
        ensure(doc["counts"][category.as_str()] == n, || format!("{category}: {}", doc["counts"][category.as_str()]))?;
    }

    let mut denominators = std::collections::BTreeMap::new();
    for screen in &screens {
        let matched = match_flagged(&BTreeSet::new(), screen, None, Granularity::PerElement).map_err(|e| e.to_string())?;
        for (category, row) in category_breakdown(&matched.candidates, &Adjudicator::StrictAuto).map_err(|e| e.to_string())? {
            *denominators.entry(category).or_insert(0) += row.total;
        }
    }
    for (category, n) in counts {
        let got = denominators.get(&category).copied().unwrap_or(0);
        ensure(got == n, || format!("{category} denominator {got}, expected {n}"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("F1 identity", f1_identity),
        ("announcement format", announcement_format),
        ("traversal cap", traversal_cap),
        ("prompt fidelity", prompt_fidelity),
        ("parser robustness", parser_robustness),
        ("offline end-to-end", offline_end_to_end),
        ("rule-checker oracle", rule_checker_oracle),
        ("dataset bookkeeping", dataset_bookkeeping),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(()) => println!("PASS [{}] {name}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL [{}] {name}: {reason}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
