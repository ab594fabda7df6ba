//! Batch front end: `ideation <subcommand> [--flags]`.

pub mod config;
pub mod synth;

mod commands;

use std::ffi::OsString;

use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ideation",
    version,
    about = "Suicide-risk text classification toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic four-class corpus with word vectors
    Synth(Overrides),
    /// Clean, tokenize, and deduplicate posts into documents.jsonl
    Preprocess(Overrides),
    /// Derive post-level weak labels from user-level labels
    Annotate(Overrides),
    /// Most frequent uni-, bi-, and trigrams per class
    ReportNgrams(Overrides),
    /// Split, train, and save a model with its training history
    Train(Overrides),
    /// Score a model on a labeled posts file
    Evaluate(Overrides),
    /// Label posts and summarize each user by their highest risk
    Predict(Overrides),
    /// Compare the SVM baseline and the four network variants
    Ablate(Overrides),
}

impl Command {
    fn parts(&self) -> (&'static str, &Overrides) {
        match self {
            Command::Synth(o) => ("synth", o),
            Command::Preprocess(o) => ("preprocess", o),
            Command::Annotate(o) => ("annotate", o),
            Command::ReportNgrams(o) => ("report-ngrams", o),
            Command::Train(o) => ("train", o),
            Command::Evaluate(o) => ("evaluate", o),
            Command::Predict(o) => ("predict", o),
            Command::Ablate(o) => ("ablate", o),
        }
    }
}

pub fn execute(cfg: &RunConfig) -> ideation_core::Result<()> {
    match cfg.command.as_str() {
        "synth" => commands::synth(cfg),
        "preprocess" => commands::preprocess(cfg),
        "annotate" => commands::annotate_cmd(cfg),
        "report-ngrams" => commands::report_ngrams(cfg),
        "train" => commands::train(cfg),
        "evaluate" => commands::evaluate_cmd(cfg),
        "predict" => commands::predict(cfg),
        "ablate" => commands::ablate(cfg),
        other => Err(ideation_core::Error::InvalidArgument(format!(
            "unknown command `{other}`"
        ))),
    }
}

/// Parses `args` (program name first) and runs the subcommand, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    let (name, overrides) = cli.command.parts();
    let result = overrides.resolve(name).and_then(|cfg| execute(&cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
