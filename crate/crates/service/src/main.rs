use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use stepflow_service::{replay, server, ServiceConfig, SessionHost};

#[derive(Parser)]
#[command(name = "stepflow", version, about = "Voice-first writing sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP/WebSocket API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the bind address from the config.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Run a scripted session headlessly and write its artifacts.
    Replay {
        script: PathBuf,
        /// Output directory; defaults to `<script stem>.out` next to the script.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_env_filter(tracing_subscriber::EnvFilter::from_default_env()).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve { config, bind } => serve(config, bind),
        Command::Replay { script, out } => run_replay(script, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stepflow: {e}");
            ExitCode::FAILURE
        }
    }
}

fn serve(config: Option<PathBuf>, bind: Option<String>) -> Result<(), Box<dyn std::error::Error>> {
    let mut config = match config {
        Some(path) => ServiceConfig::load(&path)?,
        None => ServiceConfig::default(),
    };
    if let Some(bind) = bind {
        config.bind = bind;
    }
    let host = Arc::new(SessionHost::from_config(config)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(server::serve(host))?;
    Ok(())
}

fn run_replay(script: PathBuf, out: Option<PathBuf>) -> Result<(), Box<dyn std::error::Error>> {
    let output = replay::run_file(&script)?;
    let dir = out.unwrap_or_else(|| script.with_extension("out"));
    output.write_to(&dir)?;
    let failed = output.steps.iter().filter(|s| s.error.is_some()).count();
    println!(
        "session {} phase {:?}: {} questions, {} events, {} step errors; artifacts in {}",
        output.session.id,
        output.session.phase(),
        output.session.graph.turns.len(),
        output.events.len(),
        failed,
        dir.display()
    );
    Ok(())
}
