use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use talkaudit_core::auditor::{PromptLibrary, PromptVariant};
use talkaudit_core::rules::{check_all, RuleConfig};
use talkaudit_core::talkback::{synthesize, DEFAULT_IOU_THRESHOLD, DEFAULT_TRAVERSAL_CAP};
use talkaudit_core::{parse_capture, validate_corpus, ScreenCapture};

mod audit;
mod evaluate;

#[derive(Parser, Debug)]
#[command(name = "talkaudit", version, about = "Audit mobile screens for screen-reader accessibility")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse captures and report corpus diagnostics
    Validate {
        #[arg(required = true)]
        captures: Vec<PathBuf>,
    },
    /// Print the simulated TalkBack transcript of a capture
    Transcript {
        capture: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRAVERSAL_CAP)]
        cap: usize,
        /// Emit JSON instead of one line per entry
        #[arg(long)]
        json: bool,
    },
    /// Run the rule-based checks on a capture
    Check {
        capture: PathBuf,
        /// IoU above which two clickable elements count as overlapping
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        overlap_threshold: f64,
        #[arg(long)]
        json: bool,
    },
    /// Print the prompt that would be sent for a capture
    Prompt {
        capture: PathBuf,
        #[arg(long, default_value = "general_contextual")]
        prompt_variant: PromptVariant,
        #[arg(long, default_value_t = DEFAULT_TRAVERSAL_CAP)]
        cap: usize,
        /// Directory with replacement prompt text files
        #[arg(long)]
        prompts_dir: Option<PathBuf>,
    },
    /// Audit captures and write report.json and report.html
    Audit(audit::AuditArgs),
    /// Score audit reports against ground-truth labels
    Evaluate(evaluate::EvaluateArgs),
    /// Mean and spread of precision and recall over repeated runs
    Consistency(evaluate::ConsistencyArgs),
    /// Count ground-truth labels per error category
    Dataset(evaluate::DatasetArgs),
}

pub(crate) fn load_capture(path: &Path) -> Result<ScreenCapture> {
    let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_capture(&raw).with_context(|| format!("parsing {}", path.display()))
}

pub(crate) fn load_prompts(dir: Option<&Path>) -> Result<PromptLibrary> {
    match dir {
        Some(dir) => PromptLibrary::from_dir(dir).with_context(|| format!("loading prompts from {}", dir.display())),
        None => Ok(PromptLibrary::builtin()),
    }
}

fn validate(paths: &[PathBuf]) -> Result<ExitCode> {
    let mut captures = Vec::new();
    let mut failed = false;
    for path in paths {
        match load_capture(path) {
            Ok(c) => captures.push(c),
            Err(e) => {
                eprintln!("error: {e:#}");
                failed = true;
            }
        }
    }
    let diagnostics = validate_corpus(&captures);
    for d in &diagnostics {
        println!("{d}");
    }
    println!(
        "{} capture(s) parsed, {} failed, {} diagnostic(s)",
        captures.len(),
        paths.len() - captures.len(),
        diagnostics.len()
    );
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { captures } => return validate(&captures),
        Command::Transcript { capture, cap, json } => {
            let transcript = synthesize(&load_capture(&capture)?, cap);
            if json {
                println!("{}", transcript.to_json());
            } else {
                for e in &transcript.entries {
                    println!("{:>3}  {}", e.index, e.transcript);
                }
            }
        }
        Command::Check {
            capture,
            overlap_threshold,
            json,
        } => {
            let findings = check_all(&load_capture(&capture)?, &RuleConfig { overlap_threshold });
            if json {
                println!("{}", serde_json::to_string_pretty(&findings)?);
            } else {
                for f in &findings {
                    println!("{:<24} {:<24} {}", f.rule_id, f.node_id, f.message);
                }
            }
        }
        Command::Prompt {
            capture,
            prompt_variant,
            cap,
            prompts_dir,
        } => {
            let library = load_prompts(prompts_dir.as_deref())?;
            let transcript = synthesize(&load_capture(&capture)?, cap);
            println!("{}", library.assemble(prompt_variant, &transcript)?.render());
        }
        Command::Audit(args) => return audit::run(args),
        Command::Evaluate(args) => evaluate::evaluate(args)?,
        Command::Consistency(args) => evaluate::consistency(args)?,
        Command::Dataset(args) => evaluate::dataset(args)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
