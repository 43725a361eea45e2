//! Shared builders for service tests.

#![allow(dead_code)]

pub mod e2e;
pub mod sessions;

use std::sync::atomic::AtomicU64;
use std::sync::Arc;

use serde_json::json;
use stepflow_core::provider::mock::MockScript;
use stepflow_core::provider::Gateway;
use stepflow_service::host::GatewayFactory;
use stepflow_service::store::SessionStore;
use stepflow_service::{IdSource, ManualClock, ServiceConfig, SessionHost};

pub const QUESTIONS: [&str; 4] =
    ["What is the occasion?", "Who is invited?", "When does it start?", "Where should people meet?"];

/// Questions in order, then "no follow-up"; a one-pass compose after that.
pub fn script() -> MockScript {
    let mut s = MockScript::default();
    for q in QUESTIONS {
        s = s.chat("thinking partner", &json!({"question": q, "followup_needed": true}).to_string());
    }
    s.chat("thinking partner", &json!({"question": "", "followup_needed": false}).to_string())
        .chat("most appropriate tone", &json!({"tone": "friendly", "reasoning": "an invitation"}).to_string())
        .chat("coherent, concise response", "Come to the picnic on Saturday at noon.")
        .chat("meticulous fact-checker", &json!({"passed": true, "issues": []}).to_string())
}

pub fn host_with(config: ServiceConfig, script: MockScript, clock: Arc<ManualClock>, store: Option<SessionStore>) -> SessionHost {
    let factory: GatewayFactory = Arc::new(move || Ok(Gateway::mock(script.clone())));
    SessionHost::new(config, factory, clock, store, IdSource::Sequential(AtomicU64::new(0))).expect("host builds")
}

pub fn host(clock: Arc<ManualClock>) -> SessionHost {
    host_with(ServiceConfig::default(), script(), clock, None)
}
