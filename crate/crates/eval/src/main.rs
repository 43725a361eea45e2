use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use stepflow_core::eval::{summarize, tone_report_table, CountMode, DraftPair, QuestionAnnotation, ToneItem};
use stepflow_core::provider::mock::MockScript;
use stepflow_core::provider::{Embedder, Gateway, ProviderConfig};
use stepflow_eval::{
    diff_rows, diversity_rows, eqf_counts, load_graphs, metrics, read_jsonl, readability_rows, session_stats,
    to_csv, to_json, tone_scores, EvalError, Format, ReportRow,
};

#[derive(Parser)]
#[command(name = "stepflow-eval", version, about = "Revision, readability and question metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// JSONL input.
    #[arg(long)]
    input: PathBuf,
    /// Output file; `.csv` writes CSV, anything else JSON. Stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Span,
    PerWord,
}

impl From<Mode> for CountMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Span => CountMode::Span,
            Mode::PerWord => CountMode::PerWord,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Word-level revision effort per draft pair.
    Diff {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value = "span")]
        mode: Mode,
    },
    /// Readability of both sides of each draft pair.
    Readability {
        #[command(flatten)]
        io: Io,
    },
    /// Embedding distance between the two sides of each pair.
    Diversity {
        #[command(flatten)]
        io: Io,
        /// Provider config (JSON) with an embeddings endpoint; hashed
        /// bag-of-words embeddings otherwise.
        #[arg(long)]
        provider: Option<PathBuf>,
    },
    /// Effective question fraction over annotated questions.
    Eqf {
        #[command(flatten)]
        io: Io,
    },
    /// Tone classification report from gold/predicted labels.
    Tone {
        #[command(flatten)]
        io: Io,
    },
    /// Question statistics over session documents or graphs.
    Questions {
        #[command(flatten)]
        io: Io,
    },
    /// Corpus means over draft pairs.
    Report {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value = "span")]
        mode: Mode,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stepflow-eval: {e}");
            ExitCode::FAILURE
        }
    }
}

fn emit_rows<T: Serialize>(rows: &[T], out: Option<&Path>) -> Result<(), EvalError> {
    let text = match out.map(Format::of) {
        Some(Format::Csv) => to_csv(rows)?,
        _ => to_json(rows),
    };
    write_out(&text, out)
}

fn emit_value<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), EvalError> {
    let text = match out.map(Format::of) {
        Some(Format::Csv) => to_csv(std::slice::from_ref(value))?,
        _ => to_json(value),
    };
    write_out(&text, out)
}

fn write_out(text: &str, out: Option<&Path>) -> Result<(), EvalError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| EvalError::Output(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn embedder(provider: Option<&Path>) -> Result<Arc<dyn Embedder>, EvalError> {
    let gateway = match provider {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| EvalError::Input { path: path.display().to_string(), message: e.to_string() })?;
            let config: ProviderConfig = serde_json::from_str(&text)
                .map_err(|e| EvalError::Input { path: path.display().to_string(), message: e.to_string() })?;
            Gateway::from_config(&config.with_env()).map_err(|e| EvalError::Invalid(e.to_string()))?
        }
        None => Gateway::mock(MockScript::default()),
    };
    Ok(gateway.embedder())
}

fn run(cli: Cli) -> Result<(), EvalError> {
    match cli.command {
        Command::Diff { io, mode } => {
            let pairs: Vec<DraftPair> = read_jsonl(&io.input)?;
            emit_rows(&diff_rows(&metrics(&pairs, mode.into(), None)?), io.out.as_deref())
        }
        Command::Readability { io } => {
            let pairs: Vec<DraftPair> = read_jsonl(&io.input)?;
            emit_rows(&readability_rows(&metrics(&pairs, CountMode::Span, None)?), io.out.as_deref())
        }
        Command::Diversity { io, provider } => {
            let pairs: Vec<DraftPair> = read_jsonl(&io.input)?;
            let embedder = embedder(provider.as_deref())?;
            emit_rows(&diversity_rows(&metrics(&pairs, CountMode::Span, Some(embedder.as_ref()))?), io.out.as_deref())
        }
        Command::Eqf { io } => {
            let annotations: Vec<QuestionAnnotation> = read_jsonl(&io.input)?;
            emit_value(&eqf_counts(&annotations)?, io.out.as_deref())
        }
        Command::Tone { io } => {
            let items: Vec<ToneItem> = read_jsonl(&io.input)?;
            let scores = tone_scores(&items)?;
            match io.out.as_deref() {
                Some(path) if Format::of(path) == Format::Csv => {
                    eprint!("{}", tone_report_table(&scores));
                    emit_rows(&scores.per_class, Some(path))
                }
                Some(path) => {
                    eprint!("{}", tone_report_table(&scores));
                    emit_value(&scores, Some(path))
                }
                None => write_out(&tone_report_table(&scores), None),
            }
        }
        Command::Questions { io } => {
            let graphs = load_graphs(&io.input)?;
            emit_value(&session_stats(&graphs)?, io.out.as_deref())
        }
        Command::Report { io, mode } => {
            let pairs: Vec<DraftPair> = read_jsonl(&io.input)?;
            let report = summarize(&metrics(&pairs, mode.into(), None)?)?;
            match io.out.as_deref() {
                Some(path) if Format::of(path) == Format::Csv => emit_value(&ReportRow::from(&report), Some(path)),
                out => emit_value(&report, out),
            }
        }
    }
}
