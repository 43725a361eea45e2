//! Headless session replay from a JSONL script.
//!
//! Line types (field `type`):
//! `config` (service config fields, plus `task_kind` / `original_text`),
//! `mock` (a mock provider line), `start`, `transcript`, `editor`
//! (`text`, optional `final`) and `advance_ms` (`ms`). The session starts
//! at the first line that needs it. Time only moves on `advance_ms`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use stepflow_core::eval::DraftPair;
use stepflow_core::provider::mock::{MockProvider, MockScript};
use stepflow_core::provider::{Gateway, PromptLibrary, ProviderError};
use stepflow_core::qa::TaskKind;
use uuid::Uuid;

use crate::clock::ManualClock;
use crate::config::ServiceConfig;
use crate::events::ServerEvent;
use crate::host::{GatewayFactory, HostError, IdSource, SessionHost, SharedSession};
use crate::session::{Effect, Session, TranscriptOutcome};

pub const TOOL_TAG: &str = "stepflow";

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error(transparent)]
    Host(#[from] HostError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Step {
    Start {
        #[serde(default)]
        task_kind: Option<TaskKind>,
        #[serde(default)]
        original_text: Option<String>,
    },
    Transcript {
        text: String,
    },
    Editor {
        text: String,
        #[serde(default, rename = "final")]
        finalize: bool,
    },
    AdvanceMs {
        ms: u64,
    },
}

/// Step outcome recorded in the replay log.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StepRecord {
    pub line: usize,
    pub outcome: Option<TranscriptOutcome>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct ReplayOutput {
    pub session: Session,
    pub events: Vec<ServerEvent>,
    pub steps: Vec<StepRecord>,
    pub draft_pair: Option<DraftPair>,
}

impl ReplayOutput {
    pub fn provenance_jsonl(&self) -> String {
        self.session.draft.as_ref().map(|d| d.provenance_jsonl()).unwrap_or_default()
    }

    pub fn events_jsonl(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("event serializes") + "\n").collect()
    }

    /// Writes `session.json`, `events.jsonl`, `draft_pair.jsonl` and
    /// `provenance.jsonl` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("session.json"), serde_json::to_vec_pretty(&self.session)?)?;
        std::fs::write(dir.join("events.jsonl"), self.events_jsonl())?;
        let pair = self
            .draft_pair
            .as_ref()
            .map(|p| serde_json::to_string(p).expect("pair serializes") + "\n")
            .unwrap_or_default();
        std::fs::write(dir.join("draft_pair.jsonl"), pair)?;
        std::fs::write(dir.join("provenance.jsonl"), self.provenance_jsonl())?;
        Ok(())
    }
}

fn script_error(line: usize, message: impl std::fmt::Display) -> ReplayError {
    ReplayError::Script { line, message: message.to_string() }
}

struct Pending {
    config: Map<String, Value>,
    mock_lines: Vec<String>,
    task_kind: TaskKind,
    original_text: Option<String>,
}

/// Runs `script`; relative paths in config lines resolve against `base`.
pub fn run(script: &str, base: &Path) -> Result<ReplayOutput, ReplayError> {
    let clock = ManualClock::new(0);
    let mut pending = Pending { config: Map::new(), mock_lines: Vec::new(), task_kind: TaskKind::Write, original_text: None };
    let mut session: Option<(SessionHost, SharedSession)> = None;
    let mut events = Vec::new();
    let mut steps = Vec::new();
    let seed: [u8; 32] = Sha256::digest(script.as_bytes()).into();

    for (n, raw) in script.lines().enumerate() {
        let line = n + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut value: Map<String, Value> = serde_json::from_str(raw).map_err(|e| script_error(line, e))?;
        let kind = value.get("type").and_then(Value::as_str).unwrap_or_default().to_owned();
        match kind.as_str() {
            "config" | "mock" if session.is_some() => {
                return Err(script_error(line, format!("`{kind}` after the session started")));
            }
            "config" => {
                value.remove("type");
                if let Some(t) = value.remove("task_kind") {
                    pending.task_kind = serde_json::from_value(t).map_err(|e| script_error(line, e))?;
                }
                if let Some(t) = value.remove("original_text") {
                    pending.original_text = serde_json::from_value(t).map_err(|e| script_error(line, e))?;
                }
                pending.config.extend(value);
                continue;
            }
            "mock" => {
                value.remove("type");
                pending.mock_lines.push(Value::Object(value).to_string());
                continue;
            }
            _ => {}
        }
        let step: Step = serde_json::from_value(Value::Object(value)).map_err(|e| script_error(line, e))?;
        if let Step::AdvanceMs { ms } = step {
            clock.advance(ms);
            continue;
        }
        if session.is_none() || matches!(step, Step::Start { .. }) {
            if session.is_some() {
                return Err(script_error(line, "session already started"));
            }
            if let Step::Start { task_kind, original_text } = &step {
                pending.task_kind = task_kind.unwrap_or(pending.task_kind);
                if original_text.is_some() {
                    pending.original_text = original_text.clone();
                }
            }
            let host = build_host(&pending, base, &clock, &seed).map_err(|e| match e {
                ReplayError::Script { message, .. } => script_error(line, message),
                other => other,
            })?;
            let shared = host.create_session(pending.task_kind, pending.original_text.as_deref())?;
            events.extend(shared.lock().take_events());
            session = Some((host, shared));
            if matches!(step, Step::Start { .. }) {
                continue;
            }
        }
        let (_, shared) = session.as_ref().expect("session started");
        let mut live = shared.lock();
        let record = match step {
            Step::Transcript { text } => match live.handle_transcript(&text) {
                Ok(outcome) => StepRecord { line, outcome: Some(outcome), error: None },
                Err(e) => StepRecord { line, outcome: None, error: Some(e.to_string()) },
            },
            Step::Editor { text, finalize } => match live.save_editor(&text, finalize) {
                Ok(Effect::Rejected { reason }) => StepRecord { line, outcome: None, error: Some(reason) },
                Ok(_) => StepRecord { line, outcome: None, error: None },
                Err(e) => StepRecord { line, outcome: None, error: Some(e.to_string()) },
            },
            Step::Start { .. } | Step::AdvanceMs { .. } => unreachable!("handled above"),
        };
        events.extend(live.take_events());
        steps.push(record);
    }

    let (_, shared) = session.ok_or_else(|| script_error(0, "script never starts a session"))?;
    let state = shared.lock().state.clone();
    let draft_pair = state.draft.as_ref().map(|d| DraftPair {
        original: d.text.clone(),
        revised: state.editor_text.clone().unwrap_or_else(|| d.text.clone()),
        task: state.task_kind(),
        tool_tag: TOOL_TAG.into(),
    });
    Ok(ReplayOutput { session: state, events, steps, draft_pair })
}

fn build_host(pending: &Pending, base: &Path, clock: &ManualClock, seed: &[u8; 32]) -> Result<SessionHost, ReplayError> {
    let mut config: ServiceConfig =
        serde_json::from_value(Value::Object(pending.config.clone())).map_err(|e| script_error(0, e))?;
    config.resolve_paths(base);
    config.validate().map_err(|e| script_error(0, e))?;

    let inline = MockScript::parse(&pending.mock_lines.join("\n")).map_err(|e| script_error(0, e))?;
    let factory: GatewayFactory = if pending.mock_lines.is_empty() {
        let provider = config.provider.clone();
        Arc::new(move || Gateway::from_config(&provider))
    } else {
        let prompts = match &config.provider.prompt_dir {
            Some(dir) => PromptLibrary::load_dir(dir).map_err(|e| script_error(0, e))?,
            None => PromptLibrary::builtin(),
        };
        Arc::new(move || Ok(Gateway::from_provider(Arc::new(MockProvider::new(inline.clone()))).with_prompts(prompts.clone())))
    };
    Ok(SessionHost::new(config, factory, Arc::new(clock.clone()), None, IdSource::Fixed(deterministic_id(seed)))?)
}

/// Runs the script at `path`, resolving relative paths against its folder.
pub fn run_file(path: &Path) -> Result<ReplayOutput, ReplayError> {
    let script = std::fs::read_to_string(path)?;
    let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    run(&script, &base)
}

/// Session id derived from the script bytes, so replays are reproducible.
pub fn deterministic_id(seed: &[u8; 32]) -> Uuid {
    uuid::Builder::from_random_bytes(seed[..16].try_into().expect("16 bytes")).into_uuid()
}
