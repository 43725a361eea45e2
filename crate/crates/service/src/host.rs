//! Owns live sessions and the services they share.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use stepflow_core::command::CommandRegistry;
use stepflow_core::memory::{MemoryContext, MemoryStore};
use stepflow_core::provider::{Gateway, ProviderError};
use stepflow_core::qa::TaskKind;
use uuid::Uuid;

use crate::clock::{Clock, SystemClock};
use crate::config::ServiceConfig;
use crate::session::{LiveSession, SessionDeps, SessionError};
use crate::store::{SessionStore, StoreError};
use crate::tts::TtsCache;

pub type GatewayFactory = Arc<dyn Fn() -> Result<Gateway, ProviderError> + Send + Sync>;
pub type SharedSession = Arc<Mutex<LiveSession>>;

#[derive(Debug, thiserror::Error)]
pub enum HostError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{0}")]
    Setup(String),
}

/// Session id source: random in production, fixed or counted for
/// reproducible runs.
#[derive(Debug)]
pub enum IdSource {
    Random,
    Sequential(AtomicU64),
    /// Used for the first session; later ones count up from it.
    Fixed(Uuid),
}

impl IdSource {
    fn next(&self) -> Uuid {
        match self {
            IdSource::Random => Uuid::new_v4(),
            IdSource::Sequential(n) => Uuid::from_u128(u128::from(n.fetch_add(1, Ordering::SeqCst) + 1)),
            IdSource::Fixed(id) => *id,
        }
    }
}

pub struct SessionHost {
    config: ServiceConfig,
    registry: Arc<CommandRegistry>,
    tts: Arc<TtsCache>,
    clock: Arc<dyn Clock>,
    store: Option<SessionStore>,
    memory: Option<MemoryStore>,
    gateways: GatewayFactory,
    ids: IdSource,
    live: Mutex<HashMap<Uuid, SharedSession>>,
}

impl SessionHost {
    /// A host persisting under `config.data_dir`, with gateways built from
    /// the provider section and the wall clock.
    pub fn from_config(config: ServiceConfig) -> Result<Self, HostError> {
        config.validate().map_err(|e| HostError::Setup(e.to_string()))?;
        let provider = config.provider.clone().with_env();
        // Fail at startup rather than on the first session.
        Gateway::from_config(&provider)?;
        let factory: GatewayFactory = Arc::new(move || Gateway::from_config(&provider));
        let store = SessionStore::open(&config.data_dir.join("sessions"))?;
        Self::new(config, factory, Arc::new(SystemClock), Some(store), IdSource::Random)
    }

    pub fn new(
        config: ServiceConfig,
        gateways: GatewayFactory,
        clock: Arc<dyn Clock>,
        store: Option<SessionStore>,
        ids: IdSource,
    ) -> Result<Self, HostError> {
        let registry = match &config.command_registry_path {
            Some(path) => CommandRegistry::load(path),
            None => Ok(CommandRegistry::builtin()),
        }
        .and_then(|r| r.with_threshold(config.similarity_threshold))
        .map_err(|e| HostError::Setup(e.to_string()))?;
        let memory = config
            .memory_path
            .as_deref()
            .map(MemoryStore::open)
            .transpose()
            .map_err(|e| HostError::Setup(e.to_string()))?;
        if let (Some(m), true) = (&memory, config.memory_enabled) {
            m.set_enabled(true).map_err(|e| HostError::Setup(e.to_string()))?;
        }
        Ok(Self {
            tts: Arc::new(TtsCache::new(config.tts_cache_bytes)),
            registry: Arc::new(registry),
            config,
            clock,
            store,
            memory,
            gateways,
            ids,
            live: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn registry(&self) -> &CommandRegistry {
        &self.registry
    }

    pub fn tts(&self) -> &Arc<TtsCache> {
        &self.tts
    }

    pub fn memory(&self) -> Option<&MemoryStore> {
        self.memory.as_ref()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    fn memory_context(&self) -> MemoryContext {
        match (&self.memory, self.config.memory_enabled) {
            (Some(store), true) => store.snapshot(),
            (None, true) => MemoryContext::enabled(),
            _ => MemoryContext::default(),
        }
    }

    fn deps(&self) -> Result<SessionDeps, HostError> {
        Ok(SessionDeps {
            gateway: Arc::new((self.gateways)()?),
            registry: self.registry.clone(),
            tts: self.tts.clone(),
            clock: self.clock.clone(),
            store: self.store.clone(),
            memory: self.memory_context(),
            segmenter: self.config.segmenter_config(),
        })
    }

    pub fn create_session(&self, task_kind: TaskKind, original_text: Option<&str>) -> Result<SharedSession, HostError> {
        let live = LiveSession::create(
            self.ids.next(),
            task_kind,
            original_text,
            self.config.session_config(),
            self.deps()?,
        )?;
        let id = live.state.id;
        let shared = Arc::new(Mutex::new(live));
        self.live.lock().insert(id, shared.clone());
        Ok(shared)
    }

    /// The live session, reloading it from the store if this process has
    /// not seen it yet.
    pub fn session(&self, id: Uuid) -> Result<SharedSession, HostError> {
        if let Some(s) = self.live.lock().get(&id) {
            return Ok(s.clone());
        }
        self.resume_session(id)
    }

    pub fn resume_session(&self, id: Uuid) -> Result<SharedSession, HostError> {
        let store = self.store.as_ref().ok_or(StoreError::NotFound(id))?;
        let state = store.load(id)?;
        let live = LiveSession::resume(state, self.deps()?)?;
        let mut map = self.live.lock();
        // Another request may have resumed it first; keep that one.
        Ok(map.entry(id).or_insert_with(|| Arc::new(Mutex::new(live))).clone())
    }

    pub fn live_ids(&self) -> Vec<Uuid> {
        let mut ids: Vec<Uuid> = self.live.lock().keys().copied().collect();
        ids.sort();
        ids
    }
}
