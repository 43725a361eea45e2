//! Session service: per-user sessions over the core engines, a
//! drafting/revision time ledger, a shared speech cache, the HTTP and
//! WebSocket API, and headless replay.

pub mod clock;
pub mod config;
pub mod events;
pub mod host;
pub mod ledger;
pub mod replay;
pub mod server;
pub mod session;
pub mod store;
pub mod tts;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{ServiceConfig, SessionConfig};
pub use events::ServerEvent;
pub use host::{IdSource, SessionHost};
pub use ledger::{Phase, PhaseLedger, TimerSnapshot};
pub use session::{Effect, LiveSession, Session, TranscriptOutcome};
