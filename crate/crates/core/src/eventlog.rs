//! Append-only per-combat event log, a live session that writes it, and
//! deterministic replay.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dice::DieSource;
use crate::engine::{parse_line, CommandAst, Engine, ExecutionError, ExecutionReport};
use crate::statecore::{CombatState, CombatStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessagePayload {
    pub author_id: String,
    pub author_name: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandPayload {
    pub author_id: String,
    /// Acting combatant: the resolved caster on success, the requested one
    /// (if it exists) on failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caster_id: Option<String>,
    pub text: String,
    /// `None` when the text did not parse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ast: Option<CommandAst>,
    /// Error message when the command was rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutomationRunPayload {
    pub report: ExecutionReport,
    /// The die source after the run, so replay can restore it without rolling.
    pub rng_after: DieSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionPayload {
    pub before: String,
    pub after: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event_type", content = "payload", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum EventBody {
    Message(MessagePayload),
    Command(CommandPayload),
    CombatStateUpdate { state: CombatState },
    AutomationRun(AutomationRunPayload),
    AliasResolution(ResolutionPayload),
    SnippetResolution(ResolutionPayload),
    CombatStart { author_id: String, state: CombatState },
    CombatEnd {},
    ButtonPress { author_id: String, combatant_id: String, label: String },
}

impl EventBody {
    pub fn type_name(&self) -> &'static str {
        match self {
            EventBody::Message(_) => "message",
            EventBody::Command(_) => "command",
            EventBody::CombatStateUpdate { .. } => "combat_state_update",
            EventBody::AutomationRun(_) => "automation_run",
            EventBody::AliasResolution(_) => "alias_resolution",
            EventBody::SnippetResolution(_) => "snippet_resolution",
            EventBody::CombatStart { .. } => "combat_start",
            EventBody::CombatEnd {} => "combat_end",
            EventBody::ButtonPress { .. } => "button_press",
        }
    }
}

pub const EVENT_TYPES: [&str; 9] = [
    "message",
    "command",
    "combat_state_update",
    "automation_run",
    "alias_resolution",
    "snippet_resolution",
    "combat_start",
    "combat_end",
    "button_press",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub combat_id: String,
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("expected seq {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("event for combat '{got}' appended to log of '{expected}'")]
    WrongCombat { expected: String, got: String },
    #[error("the first event must be combat_start, got {0}")]
    NotStarted(&'static str),
    #[error("combat_start may only appear first")]
    DuplicateStart,
    #[error("no events may follow combat_end")]
    AlreadyEnded,
    #[error("write failed: {0}")]
    WriteFailure(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Ordering rules shared by [`EventLog::append`] and [`replay`].
fn check_next(prev: Option<&Event>, combat_id: &str, e: &Event) -> Result<(), EventLogError> {
    if e.combat_id != combat_id {
        return Err(EventLogError::WrongCombat {
            expected: combat_id.to_string(),
            got: e.combat_id.clone(),
        });
    }
    let expected = prev.map_or(1, |p| p.seq + 1);
    if e.seq != expected {
        return Err(EventLogError::SequenceGap { expected, got: e.seq });
    }
    let is_start = matches!(e.body, EventBody::CombatStart { .. });
    match prev {
        None if !is_start => Err(EventLogError::NotStarted(e.body.type_name())),
        Some(_) if is_start => Err(EventLogError::DuplicateStart),
        Some(p) if matches!(p.body, EventBody::CombatEnd {}) => Err(EventLogError::AlreadyEnded),
        _ => Ok(()),
    }
}

/// The events of one combat, optionally mirrored to `<combat_id>.jsonl`.
#[derive(Debug)]
pub struct EventLog {
    combat_id: String,
    events: Vec<Event>,
    file: Option<(PathBuf, File)>,
}

impl EventLog {
    pub fn in_memory(combat_id: impl Into<String>) -> Self {
        EventLog {
            combat_id: combat_id.into(),
            events: Vec::new(),
            file: None,
        }
    }

    /// Opens (or creates) `<dir>/<combat_id>.jsonl`, loading any events
    /// already in it.
    pub fn open(dir: &Path, combat_id: impl Into<String>) -> Result<Self, EventLogError> {
        let combat_id = combat_id.into();
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{combat_id}.jsonl"));
        let events = if path.exists() { load_jsonl(&path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(EventLog {
            combat_id,
            events,
            file: Some((path, file)),
        })
    }

    pub fn combat_id(&self) -> &str {
        &self.combat_id
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn next_seq(&self) -> u64 {
        self.events.last().map_or(1, |e| e.seq + 1)
    }

    /// Validates ordering, writes and flushes the line if file-backed, then
    /// keeps the event.
    pub fn append(&mut self, e: Event) -> Result<&Event, EventLogError> {
        check_next(self.events.last(), &self.combat_id, &e)?;
        if let Some((_, f)) = &mut self.file {
            let mut line = serde_json::to_string(&e).expect("events serialize");
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.flush()?;
            f.sync_data()?;
        }
        self.events.push(e);
        Ok(self.events.last().expect("just pushed"))
    }

    /// Appends `body` with the next seq at time `at`.
    pub fn record(&mut self, at: DateTime<Utc>, body: EventBody) -> Result<&Event, EventLogError> {
        let e = Event {
            combat_id: self.combat_id.clone(),
            seq: self.next_seq(),
            timestamp: at,
            body,
        };
        self.append(e)
    }
}

pub fn load_jsonl(path: &Path) -> Result<Vec<Event>, EventLogError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EventLogError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl(path: &Path, events: &[Event]) -> Result<(), EventLogError> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    for e in events {
        serde_json::to_writer(&mut f, e).expect("events serialize");
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// A live combat: state plus the log that records everything done to it.
#[derive(Debug)]
pub struct Session {
    pub engine: Engine,
    pub state: CombatState,
    pub log: EventLog,
}

impl Session {
    /// Starts a session, recording `combat_start` authored by the DM.
    pub fn start(engine: Engine, log: EventLog, dm_id: &str, state: CombatState, at: DateTime<Utc>) -> Result<Self, EventLogError> {
        let mut s = Session { engine, state, log };
        s.log.record(
            at,
            EventBody::CombatStart {
                author_id: dm_id.to_string(),
                state: s.state.clone(),
            },
        )?;
        Ok(s)
    }

    pub fn message(&mut self, at: DateTime<Utc>, author_id: &str, author_name: &str, content: &str) -> Result<(), EventLogError> {
        self.log.record(
            at,
            EventBody::Message(MessagePayload {
                author_id: author_id.into(),
                author_name: author_name.into(),
                content: content.into(),
            }),
        )?;
        Ok(())
    }

    /// Runs a command and records it, followed on success by
    /// `automation_run` (when anything was rolled or automated) and
    /// `combat_state_update` (when the state changed). The outer error is a
    /// log failure; the inner one is the command's own outcome.
    pub fn command(
        &mut self,
        at: DateTime<Utc>,
        author_id: &str,
        caster: Option<&str>,
        text: &str,
    ) -> Result<Result<ExecutionReport, ExecutionError>, EventLogError> {
        let parsed = parse_line(text);
        let outcome = match &parsed {
            Ok(ast) => self.engine.execute(&mut self.state, ast, caster),
            Err(e) => Err(e.clone().into()),
        };
        let payload = CommandPayload {
            author_id: author_id.into(),
            caster_id: match &outcome {
                Ok(r) => Some(r.caster.clone()),
                Err(_) => caster.filter(|c| self.state.get(c).is_some()).map(str::to_string),
            },
            text: text.into(),
            ast: parsed.ok(),
            error: outcome.as_ref().err().map(|e| e.to_string()),
        };
        self.log.record(at, EventBody::Command(payload))?;
        if let Ok(report) = &outcome {
            if needs_run_event(report) {
                self.log.record(
                    at,
                    EventBody::AutomationRun(AutomationRunPayload {
                        report: report.clone(),
                        rng_after: self.state.rng.clone(),
                    }),
                )?;
            }
            if !report.state_delta.is_empty() {
                self.log.record(at, EventBody::CombatStateUpdate { state: self.state.clone() })?;
            }
            if self.state.status == CombatStatus::Ended && !self.is_ended() {
                self.log.record(at, EventBody::CombatEnd {})?;
            }
        }
        Ok(outcome)
    }

    pub fn press_button(
        &mut self,
        at: DateTime<Utc>,
        author_id: &str,
        combatant: &str,
        label: &str,
    ) -> Result<Result<String, ExecutionError>, EventLogError> {
        let before = self.state.clone();
        let outcome = self.engine.press_button(&mut self.state, combatant, label);
        if outcome.is_ok() {
            self.log.record(
                at,
                EventBody::ButtonPress {
                    author_id: author_id.into(),
                    combatant_id: combatant.into(),
                    label: label.into(),
                },
            )?;
            if self.state != before {
                self.log.record(at, EventBody::CombatStateUpdate { state: self.state.clone() })?;
            }
        }
        Ok(outcome)
    }

    pub fn resolution(&mut self, at: DateTime<Utc>, snippet: bool, payload: ResolutionPayload) -> Result<(), EventLogError> {
        let body = if snippet {
            EventBody::SnippetResolution(payload)
        } else {
            EventBody::AliasResolution(payload)
        };
        self.log.record(at, body)?;
        Ok(())
    }

    /// Whether `combat_end` has been recorded.
    pub fn is_ended(&self) -> bool {
        matches!(self.log.events().last().map(|e| &e.body), Some(EventBody::CombatEnd {}))
    }

    pub fn end(&mut self, at: DateTime<Utc>) -> Result<(), EventLogError> {
        self.log.record(at, EventBody::CombatEnd {})?;
        Ok(())
    }
}

fn needs_run_event(r: &ExecutionReport) -> bool {
    !r.automation.is_empty() || !r.faces.is_empty() || r.roll.is_some()
}

/// Replay failed: the log is malformed or re-execution disagrees with it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("replay diverged at seq {seq} ({path}): {detail}")]
pub struct ReplayDivergence {
    pub seq: u64,
    /// JSON-pointer-like path of the first differing field.
    pub path: String,
    pub detail: String,
}

fn divergence(seq: u64, path: impl Into<String>, detail: impl Into<String>) -> ReplayDivergence {
    ReplayDivergence {
        seq,
        path: path.into(),
        detail: detail.into(),
    }
}

/// First path at which two JSON values differ.
pub fn first_difference(a: &Value, b: &Value) -> Option<(String, String)> {
    fn walk(a: &Value, b: &Value, path: &mut String) -> Option<(String, String)> {
        match (a, b) {
            (Value::Object(x), Value::Object(y)) => {
                let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
                keys.sort();
                keys.dedup();
                for k in keys {
                    let len = path.len();
                    path.push('/');
                    path.push_str(k);
                    let r = walk(x.get(k).unwrap_or(&Value::Null), y.get(k).unwrap_or(&Value::Null), path);
                    if r.is_some() {
                        return r;
                    }
                    path.truncate(len);
                }
                None
            }
            (Value::Array(x), Value::Array(y)) => {
                for i in 0..x.len().max(y.len()) {
                    let len = path.len();
                    path.push_str(&format!("/{i}"));
                    let r = walk(x.get(i).unwrap_or(&Value::Null), y.get(i).unwrap_or(&Value::Null), path);
                    if r.is_some() {
                        return r;
                    }
                    path.truncate(len);
                }
                None
            }
            _ if a == b => None,
            _ => Some((path.clone(), format!("recorded {b}, replayed {a}"))),
        }
    }
    let mut path = String::new();
    walk(a, b, &mut path)
}

fn compare<T: Serialize>(seq: u64, prefix: &str, replayed: &T, recorded: &T) -> Result<(), ReplayDivergence> {
    let (a, b) = (serde_json::to_value(replayed).expect("serializes"), serde_json::to_value(recorded).expect("serializes"));
    match first_difference(&a, &b) {
        None => Ok(()),
        Some((path, detail)) => Err(divergence(seq, format!("{prefix}{path}"), detail)),
    }
}

/// Replays with the bundled starter pack.
pub fn replay(events: &[Event]) -> Result<CombatState, ReplayDivergence> {
    replay_with(&Engine::default(), events)
}

/// Rebuilds the final state from `combat_start` by re-executing every command
/// with the faces recorded in its `automation_run`, checking each report and
/// snapshot against the log.
pub fn replay_with(engine: &Engine, events: &[Event]) -> Result<CombatState, ReplayDivergence> {
    let first = events.first().ok_or_else(|| divergence(0, "", "empty log"))?;
    let combat_id = first.combat_id.as_str();
    for (i, e) in events.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| &events[j]);
        check_next(prev, combat_id, e).map_err(|err| divergence(e.seq, "/seq", err.to_string()))?;
        if let Some(p) = prev {
            if e.timestamp < p.timestamp {
                return Err(divergence(e.seq, "/timestamp", "timestamps went backwards"));
            }
        }
    }
    let EventBody::CombatStart { state, .. } = &first.body else {
        unreachable!("check_next requires combat_start first");
    };
    let mut state = state.clone();
    let mut i = 1;
    while i < events.len() {
        let e = &events[i];
        match &e.body {
            EventBody::Command(cmd) => {
                // The command's own run and snapshot follow it directly.
                let mut run = None;
                let mut update = None;
                let mut j = i + 1;
                if let Some(EventBody::AutomationRun(r)) = events.get(j).map(|x| &x.body) {
                    run = Some((events[j].seq, r));
                    j += 1;
                }
                if let Some(EventBody::CombatStateUpdate { state }) = events.get(j).map(|x| &x.body) {
                    update = Some((events[j].seq, state));
                    j += 1;
                }
                replay_command(engine, &mut state, e.seq, cmd, run, update)?;
                i = j;
            }
            EventBody::ButtonPress { combatant_id, label, .. } => {
                let before = state.clone();
                engine
                    .press_button(&mut state, combatant_id, label)
                    .map_err(|err| divergence(e.seq, "/payload", err.to_string()))?;
                match events.get(i + 1).map(|x| &x.body) {
                    Some(EventBody::CombatStateUpdate { state: snap }) => {
                        compare(events[i + 1].seq, "/payload/state", &state, snap)?;
                        i += 2;
                    }
                    _ if state == before => i += 1,
                    _ => return Err(divergence(e.seq, "/payload", "button press changed state but no snapshot follows")),
                }
            }
            EventBody::AutomationRun(_) | EventBody::CombatStateUpdate { .. } => {
                return Err(divergence(e.seq, "/event_type", format!("{} without a preceding command", e.body.type_name())));
            }
            EventBody::CombatStart { .. } => unreachable!("rejected by ordering checks"),
            EventBody::Message(_) | EventBody::AliasResolution(_) | EventBody::SnippetResolution(_) | EventBody::CombatEnd {} => {
                i += 1
            }
        }
    }
    Ok(state)
}

fn replay_command(
    engine: &Engine,
    state: &mut CombatState,
    seq: u64,
    cmd: &CommandPayload,
    run: Option<(u64, &AutomationRunPayload)>,
    update: Option<(u64, &CombatState)>,
) -> Result<(), ReplayDivergence> {
    let parsed = parse_line(&cmd.text);
    compare(seq, "/payload/ast", &parsed.as_ref().ok(), &cmd.ast.as_ref())?;
    if cmd.error.is_some() {
        if let Some(id) = &cmd.caster_id {
            if state.get(id).is_none() {
                return Err(divergence(seq, "/payload/caster_id", format!("no combatant '{id}'")));
            }
        }
    }
    let (faces, rng_after) = match run {
        Some((_, r)) => (r.report.faces.as_slice(), r.rng_after.clone()),
        None => (&[][..], state.rng.clone()),
    };
    let outcome = match &parsed {
        Ok(ast) => engine.execute_recorded(state, ast, cmd.caster_id.as_deref(), faces, &rng_after),
        Err(e) => Err(e.clone().into()),
    };
    match (outcome, &cmd.error) {
        (Err(e), Some(recorded)) => {
            if e.to_string() != *recorded {
                return Err(divergence(seq, "/payload/error", format!("recorded {recorded:?}, replayed {:?}", e.to_string())));
            }
        }
        (Err(e), None) => return Err(divergence(seq, "/payload", format!("replay failed: {e}"))),
        (Ok(_), Some(recorded)) => {
            return Err(divergence(seq, "/payload/error", format!("recorded failure {recorded:?} succeeded on replay")))
        }
        (Ok(report), None) => {
            if cmd.caster_id.as_deref() != Some(report.caster.as_str()) {
                return Err(divergence(seq, "/payload/caster_id", format!("replayed caster {}", report.caster)));
            }
            match run {
                Some((rseq, r)) => compare(rseq, "/payload/report", &report, &r.report)?,
                None if needs_run_event(&report) => {
                    return Err(divergence(seq, "/event_type", "automation ran but no automation_run follows"))
                }
                None => {}
            }
            match update {
                Some((useq, snap)) => compare(useq, "/payload/state", &*state, snap)?,
                None if !report.state_delta.is_empty() => {
                    return Err(divergence(seq, "/event_type", "state changed but no combat_state_update follows"))
                }
                None => {}
            }
            return Ok(());
        }
    }
    if run.is_some() || update.is_some() {
        return Err(divergence(seq, "/event_type", "failed command followed by results"));
    }
    Ok(())
}
