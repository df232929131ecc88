use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{bail, Context, Result};
use chrono::{SecondsFormat, Utc};
use clap::Args;
use talkaudit_core::auditor::{
    audit_screen, AuditError, CompletionProvider, HttpProvider, MockProvider, PromptError, PromptLibrary,
    PromptVariant, ProviderPresets,
};
use talkaudit_core::report::{build_report, emit_html, emit_json, Provenance, Report};
use talkaudit_core::rules::{check_all, RuleConfig};
use talkaudit_core::talkback::{synthesize, DEFAULT_IOU_THRESHOLD, DEFAULT_TRAVERSAL_CAP};

use crate::{load_capture, load_prompts};

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[arg(required = true)]
    captures: Vec<PathBuf>,

    #[arg(long, default_value = "general_contextual")]
    prompt_variant: PromptVariant,

    /// `mock`, or the name of a provider preset
    #[arg(long, default_value = "mock")]
    provider: String,

    /// Directory of canned completions named `<screen_id>.txt` (mock provider)
    #[arg(long)]
    mock_dir: Option<PathBuf>,

    /// TOML file of provider presets replacing the built-in ones
    #[arg(long)]
    presets: Option<PathBuf>,

    /// Directory with replacement prompt text files
    #[arg(long)]
    prompts_dir: Option<PathBuf>,

    #[arg(long, default_value_t = DEFAULT_TRAVERSAL_CAP)]
    cap: usize,

    /// Skip the rule-based checks
    #[arg(long)]
    no_rules: bool,

    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    overlap_threshold: f64,

    /// Screens audited concurrently
    #[arg(long, default_value_t = 4)]
    jobs: usize,

    /// Also write the prompt and raw completion next to each report
    #[arg(long)]
    save_raw: bool,

    /// Output directory; with several captures each screen gets a subdirectory
    #[arg(long)]
    out: PathBuf,
}

fn provider(args: &AuditArgs) -> Result<Box<dyn CompletionProvider>> {
    if args.provider == "mock" {
        let Some(dir) = &args.mock_dir else {
            bail!("--provider mock needs --mock-dir");
        };
        let mock = MockProvider::from_dir(dir).with_context(|| format!("loading mock completions from {}", dir.display()))?;
        return Ok(Box::new(mock));
    }
    let presets = match &args.presets {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ProviderPresets::from_toml(&text)?
        }
        None => ProviderPresets::builtin(),
    };
    let Some(config) = presets.get(&args.provider) else {
        bail!("unknown provider `{}`", args.provider);
    };
    Ok(Box::new(HttpProvider::from_env(config.clone())?))
}

struct Audited {
    report: Report,
    prompt: Option<String>,
    completion: Option<String>,
}

fn audit_one(
    path: &Path,
    args: &AuditArgs,
    library: &PromptLibrary,
    provider: &dyn CompletionProvider,
    generated_at: &str,
) -> Result<Audited> {
    let capture = load_capture(path)?;
    let rules = if args.no_rules {
        Vec::new()
    } else {
        check_all(
            &capture,
            &RuleConfig {
                overlap_threshold: args.overlap_threshold,
            },
        )
    };
    let (transcript, findings, prompt, completion) =
        match audit_screen(&capture, args.prompt_variant, library, provider, args.cap) {
            Ok(outcome) => {
                for d in &outcome.diagnostics {
                    log::warn!("{}: {}", capture.screen_id, serde_json::to_string(d)?);
                }
                (
                    outcome.transcript,
                    outcome.findings,
                    Some(outcome.prompt.render()),
                    Some(outcome.completion),
                )
            }
            Err(AuditError::Prompt(PromptError::EmptyTranscript { .. })) => {
                log::warn!("{}: nothing to announce, skipping the LLM audit", capture.screen_id);
                (synthesize(&capture, args.cap), Vec::new(), None, None)
            }
            Err(e) => return Err(e).with_context(|| format!("auditing {}", path.display())),
        };
    let provenance = Provenance {
        prompt_variant: Some(args.prompt_variant),
        provider: Some(provider.name().to_owned()),
        model: Some(provider.model().to_owned()),
        rules: !args.no_rules,
        generated_at: generated_at.to_owned(),
    };
    let report = build_report(&transcript, &rules, &findings, &capture, provenance)?;
    Ok(Audited {
        report,
        prompt,
        completion,
    })
}

fn write_outputs(dir: &Path, audited: &Audited, save_raw: bool) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("report.json"), emit_json(&audited.report))?;
    fs::write(dir.join("report.html"), emit_html(&audited.report))?;
    if save_raw {
        if let Some(prompt) = &audited.prompt {
            fs::write(dir.join("prompt.txt"), prompt)?;
        }
        if let Some(completion) = &audited.completion {
            fs::write(dir.join("completion.txt"), completion)?;
        }
    }
    Ok(())
}

pub fn run(args: AuditArgs) -> Result<ExitCode> {
    let provider = provider(&args)?;
    let library = load_prompts(args.prompts_dir.as_deref())?;
    let generated_at = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);

    let mut results = Vec::with_capacity(args.captures.len());
    for chunk in args.captures.chunks(args.jobs.max(1)) {
        let batch: Vec<Result<Audited>> = thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|path| s.spawn(|| audit_one(path, &args, &library, provider.as_ref(), &generated_at)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("audit thread panicked"))
                .collect()
        });
        results.extend(batch);
    }

    let single = args.captures.len() == 1;
    let mut failed = false;
    for (path, result) in args.captures.iter().zip(results) {
        let audited = match result {
            Ok(a) => a,
            Err(e) => {
                eprintln!("error: {e:#}");
                failed = true;
                continue;
            }
        };
        let report = &audited.report;
        let dir = if single {
            args.out.clone()
        } else {
            args.out.join(&report.screen_id)
        };
        write_outputs(&dir, &audited, args.save_raw)
            .with_context(|| format!("writing report for {}", path.display()))?;
        let s = &report.summary;
        println!(
            "{}: {} finding(s) on {} of {} entries -> {}",
            report.screen_id,
            s.total_findings,
            s.flagged_entries,
            s.total_entries,
            dir.join("report.json").display()
        );
    }
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}
