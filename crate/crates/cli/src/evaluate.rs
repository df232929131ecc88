use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use talkaudit_core::auditor::FindingSource;
use talkaudit_core::eval::{
    category_breakdown, consistency_report, format_breakdown_table, format_metrics_table, match_flagged,
    parse_ground_truth, score, Adjudicator, CategoryBreakdown, ErrorCategory, EvaluationMetrics, Granularity,
    GroundTruthCorpus, VerdictSet,
};
use talkaudit_core::report::{parse_report, Report};
use talkaudit_core::talkback::{Transcript, TranscriptEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceFilter {
    All,
    Llm,
    Rule,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Directory (or file) of ground-truth label files
    #[arg(long)]
    ground_truth: PathBuf,

    /// report.json files, or directories searched recursively for them
    #[arg(long, required = true, num_args = 1..)]
    reports: Vec<PathBuf>,

    /// Verdict file: a JSON list of {screen_id, node_id, tool, verdict}
    #[arg(long, requires = "tool", conflicts_with = "strict_auto")]
    verdicts: Option<PathBuf>,

    /// Tool name to look up in the verdict file
    #[arg(long)]
    tool: Option<String>,

    /// Count every finding on a labelled error as correct (upper bound, no verdicts needed)
    #[arg(long)]
    strict_auto: bool,

    /// Score each error label separately instead of each element
    #[arg(long)]
    per_error: bool,

    /// Which findings count as flags
    #[arg(long, value_enum, default_value_t = SourceFilter::All)]
    source: SourceFilter,

    /// Name shown in the metrics table
    #[arg(long, default_value = "run")]
    name: String,

    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
pub struct ConsistencyArgs {
    /// Output files of `evaluate --json`, one per run
    #[arg(required = true)]
    runs: Vec<PathBuf>,

    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
pub struct DatasetArgs {
    /// Directory (or file) of ground-truth label files
    ground_truth: PathBuf,

    #[arg(long)]
    json: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationOutput {
    pub metrics: EvaluationMetrics,
    pub breakdown: BTreeMap<ErrorCategory, CategoryBreakdown>,
    /// Flagged nodes without a ground-truth label, as `screen_id/node_id`.
    pub unlabeled: Vec<String>,
}

fn json_files(path: &Path, name: Option<&str>, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_file() {
        out.push(path.to_owned());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            json_files(&p, name, out)?;
        } else if match name {
            Some(name) => p.file_name().is_some_and(|f| f == name),
            None => p.extension().is_some_and(|e| e == "json"),
        } {
            out.push(p);
        }
    }
    Ok(())
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruthCorpus> {
    let mut files = Vec::new();
    json_files(path, None, &mut files)?;
    let mut corpus = GroundTruthCorpus::default();
    for file in files {
        let raw = fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
        let screen = parse_ground_truth(&raw).with_context(|| format!("parsing {}", file.display()))?;
        if corpus.screen(&screen.screen_id).is_some() {
            bail!("screen `{}` is labelled twice ({})", screen.screen_id, file.display());
        }
        corpus.screens.push(screen);
    }
    Ok(corpus)
}

fn load_reports(paths: &[PathBuf]) -> Result<BTreeMap<String, Report>> {
    let mut files = Vec::new();
    for p in paths {
        json_files(p, Some("report.json"), &mut files)?;
    }
    let mut reports = BTreeMap::new();
    for file in files {
        let raw = fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
        let report = parse_report(&raw).with_context(|| format!("parsing {}", file.display()))?;
        if let Some(previous) = reports.insert(report.screen_id.clone(), report) {
            bail!("two reports for screen `{}`", previous.screen_id);
        }
    }
    Ok(reports)
}

fn transcript_of(report: &Report) -> Transcript {
    Transcript {
        app_name: report.app_name.clone(),
        screen_id: report.screen_id.clone(),
        entries: report
            .entries
            .iter()
            .map(|e| TranscriptEntry {
                index: e.index,
                transcript: e.transcript.clone(),
                node_id: e.node_id.clone(),
                bounds: e.bounds,
            })
            .collect(),
    }
}

fn flagged_nodes(report: &Report, source: SourceFilter) -> BTreeSet<String> {
    let wanted = |s: FindingSource| match source {
        SourceFilter::All => true,
        SourceFilter::Llm => s == FindingSource::Llm,
        SourceFilter::Rule => s == FindingSource::Rule,
    };
    let mut flagged: BTreeSet<String> = report
        .entries
        .iter()
        .filter(|e| e.findings.iter().any(|f| wanted(f.source)))
        .map(|e| e.node_id.clone())
        .collect();
    if source != SourceFilter::Llm {
        flagged.extend(report.off_transcript.iter().map(|f| f.node_id.clone()));
    }
    flagged
}

pub fn run_evaluation(args: &EvaluateArgs) -> Result<EvaluationOutput> {
    let corpus = load_ground_truth(&args.ground_truth)?;
    let reports = load_reports(&args.reports)?;
    let granularity = if args.per_error {
        Granularity::PerError
    } else {
        Granularity::PerElement
    };

    let mut candidates = Vec::new();
    let mut unlabeled = Vec::new();
    for labels in &corpus.screens {
        let Some(report) = reports.get(&labels.screen_id) else {
            bail!("no report for labelled screen `{}`", labels.screen_id);
        };
        let transcript = transcript_of(report);
        let matched = match_flagged(&flagged_nodes(report, args.source), labels, Some(&transcript), granularity)?;
        candidates.extend(matched.candidates);
        unlabeled.extend(matched.unlabeled.into_iter().map(|n| format!("{}/{n}", labels.screen_id)));
    }
    for screen_id in reports.keys().filter(|s| corpus.screen(s).is_none()) {
        log::warn!("report for `{screen_id}` has no ground truth; not scored");
    }

    let verdicts;
    let adjudicator = match (&args.verdicts, &args.tool) {
        (Some(path), Some(tool)) => {
            let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            verdicts = VerdictSet::parse(&raw).with_context(|| format!("parsing {}", path.display()))?;
            Adjudicator::Verdicts { set: &verdicts, tool }
        }
        _ if args.strict_auto => Adjudicator::StrictAuto,
        _ => bail!("pass --verdicts with --tool, or --strict-auto"),
    };
    Ok(EvaluationOutput {
        metrics: score(&candidates, &adjudicator)?,
        breakdown: category_breakdown(&candidates, &adjudicator)?,
        unlabeled,
    })
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let out = run_evaluation(&args)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(());
    }
    let c = out.metrics.counts;
    print!("{}", format_metrics_table(&[(args.name.clone(), out.metrics.clone())]));
    println!("tp {}  fp {}  fn {}  tn {}\n", c.tp, c.fp, c.fn_, c.tn);
    print!("{}", format_breakdown_table(&out.breakdown));
    if !out.unlabeled.is_empty() {
        println!("\nflagged but unlabelled: {}", out.unlabeled.join(", "));
    }
    Ok(())
}

pub fn consistency(args: ConsistencyArgs) -> Result<()> {
    let mut runs = Vec::new();
    for path in &args.runs {
        let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let out: EvaluationOutput =
            serde_json::from_slice(&raw).with_context(|| format!("parsing {}", path.display()))?;
        runs.push(out.metrics);
    }
    let report = consistency_report(runs)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    let fmt = |s: Option<talkaudit_core::eval::Spread>| {
        s.map_or_else(|| "n/a".to_owned(), |s| format!("{:.3} (SD={:.3})", s.mean, s.sd))
    };
    println!("runs:      {}", report.runs.len());
    println!("precision: {}", fmt(report.precision));
    println!("recall:    {}", fmt(report.recall));
    println!("f1:        {}", report.f1.map_or_else(|| "n/a".to_owned(), |f| format!("{f:.3}")));
    Ok(())
}

pub fn dataset(args: DatasetArgs) -> Result<()> {
    let corpus = load_ground_truth(&args.ground_truth)?;
    let counts = corpus.category_counts();
    if args.json {
        let doc = serde_json::json!({
            "screens": corpus.screens.len(),
            "counts": counts,
            "total": corpus.total(),
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }
    for (category, n) in &counts {
        println!("{:<20} {:>5}", category.as_str(), n);
    }
    println!("{:<20} {:>5}", "total", corpus.total());
    Ok(())
}
