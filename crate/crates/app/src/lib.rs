pub mod batch;
pub mod config;
pub mod gateway;
pub mod repl;
pub mod service;

use chrono::{DateTime, Utc};
use fireball_core::eventlog::EventLog;

/// The current time, clamped so a log's timestamps never go backwards.
pub fn stamp(log: &EventLog) -> DateTime<Utc> {
    let now = Utc::now();
    match log.events().last() {
        Some(e) if e.timestamp > now => e.timestamp,
        _ => now,
    }
}
