mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rxndp_core::harness::{AblationMode, Aggregation, BoxSource, ReportFormat};
use rxndp_core::{CorpusFormat, MatchKind, PromptKind, Strategy};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Corpus(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Config(_) => 2,
            CliError::Corpus(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rxndp", version, about = "Reaction diagram parsing: runs, evaluation and reports")]
struct Cli {
    /// TOML file with [style], [blob], [noise], [synth], [decode] and [http] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Corpus JSON; image paths are resolved against its directory.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "rxncaption")]
    format: CorpusFormat,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, default_value = "bivp")]
    strategy: Strategy,
    /// blob | file:PATH | http:URL
    #[arg(long, default_value = "blob")]
    detector: String,
    /// oracle | replay:PATH | http
    #[arg(long, default_value = "oracle")]
    backend: String,
    #[arg(long, default_value = "1")]
    workers: usize,
    /// Save every backend exchange as a replay transcript.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus: images, corpus.json and manifest.json.
    Generate {
        #[arg(long, default_value = "42")]
        seed: u64,
        #[arg(long, default_value = "100")]
        per_layout: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect molecule boxes, save them and score them against the corpus.
    Detect {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "blob")]
        detector: String,
        /// Detections JSON to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render visual prompts (numbered boxes) for every diagram.
    Annotate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "detected")]
        boxes: BoxSource,
        #[arg(long, default_value = "blob")]
        detector: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the parsing pipeline and append predictions to OUT/predictions.ndjson.
    Parse {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "detected")]
        boxes: BoxSource,
    },
    /// Score a predictions store.
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        predictions: PathBuf,
        /// Only records with this configuration hash.
        #[arg(long)]
        config_hash: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "soft,hybrid")]
        mode: Vec<MatchKind>,
        #[arg(long, default_value = "micro")]
        aggregation: Aggregation,
        /// Run label stored with the results.
        #[arg(long)]
        label: Option<String>,
        /// Directory for results.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Progressive-ideal study: full, gt-boxes, gt-extraction.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "full,gt-boxes,gt-extraction")]
        mode: Vec<AblationMode>,
    },
    /// Ask the four diagram-understanding questions about every diagram.
    Vqa {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "oracle")]
        backend: String,
        #[arg(long, default_value = "1")]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transcribe cropped molecule and text regions with the OCR prompt.
    Ocr {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "oracle")]
        backend: String,
        #[arg(long, default_value = "1")]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render results.json files as markdown, CSV and SVG.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "markdown,csv,svg")]
        format: Vec<ReportFormat>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prompt templates.
    Prompt {
        #[command(subcommand)]
        action: PromptAction,
    },
}

#[derive(Debug, Subcommand)]
enum PromptAction {
    /// Print a template verbatim.
    Show { kind: PromptKind },
    /// List template kinds with their SHA-256.
    List,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
