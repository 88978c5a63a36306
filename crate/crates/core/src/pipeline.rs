//! Distills event logs into (preceding utterances, commands + state change,
//! following utterances) triples.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{Event, EventBody};
use crate::exec::Execution;

pub const MIN_WORDS: usize = 5;

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// A command (or button press) with the events it produced. Only groups that
/// changed the state are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandGroup {
    pub command: Event,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub automation_run: Option<Event>,
    pub state_update: Event,
}

impl CommandGroup {
    /// The combatant that acted.
    pub fn actor(&self) -> &str {
        match &self.command.body {
            EventBody::Command(c) => c.caster_id.as_deref().unwrap_or_default(),
            EventBody::ButtonPress { combatant_id, .. } => combatant_id,
            _ => "",
        }
    }

    /// The participant who issued it.
    pub fn author(&self) -> &str {
        match &self.command.body {
            EventBody::Command(c) => &c.author_id,
            EventBody::ButtonPress { author_id, .. } => author_id,
            _ => "",
        }
    }

    pub fn text(&self) -> Option<&str> {
        match &self.command.body {
            EventBody::Command(c) => Some(&c.text),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    /// `<combat_id>:<seq of the first command>`.
    pub id: String,
    pub combat_id: String,
    pub command_events: Vec<CommandGroup>,
    /// Message events.
    pub preceding: Vec<Event>,
    pub following: Vec<Event>,
    pub command_author: String,
    pub dm: String,
}

pub fn message_author(e: &Event) -> &str {
    match &e.body {
        EventBody::Message(m) => &m.author_id,
        _ => "",
    }
}

pub fn message_text(e: &Event) -> &str {
    match &e.body {
        EventBody::Message(m) => &m.content,
        _ => "",
    }
}

impl Triple {
    pub fn utterances(&self) -> impl Iterator<Item = &Event> {
        self.preceding.iter().chain(&self.following)
    }

    /// Checks the post-distillation invariants.
    pub fn check_distilled(&self) -> Result<(), String> {
        if let Some(e) = self.utterances().find(|e| word_count(message_text(e)) < MIN_WORDS) {
            return Err(format!("seq {}: fewer than {MIN_WORDS} words", e.seq));
        }
        if let Some(e) = self
            .utterances()
            .find(|e| message_author(e) != self.command_author && message_author(e) != self.dm)
        {
            return Err(format!("seq {}: authored by {}", e.seq, message_author(e)));
        }
        let actors: BTreeSet<&str> = self.command_events.iter().map(CommandGroup::actor).collect();
        if actors.len() != 1 {
            return Err(format!("commands from {} actors", actors.len()));
        }
        if self.preceding.is_empty() && self.following.is_empty() {
            return Err("no utterances".into());
        }
        Ok(())
    }
}

/// Collects state-changing command groups, in log order, keyed by the index
/// of their `combat_state_update` event.
fn command_groups(events: &[Event]) -> Vec<(usize, CommandGroup)> {
    let mut out = Vec::new();
    for (i, e) in events.iter().enumerate() {
        if !matches!(e.body, EventBody::CombatStateUpdate { .. }) {
            continue;
        }
        let mut j = i;
        let mut run = None;
        if let Some(k) = j.checked_sub(1) {
            if matches!(events[k].body, EventBody::AutomationRun(_)) {
                run = Some(events[k].clone());
                j = k;
            }
        }
        let Some(k) = j.checked_sub(1) else { continue };
        if matches!(events[k].body, EventBody::Command(_) | EventBody::ButtonPress { .. }) {
            out.push((
                i,
                CommandGroup {
                    command: events[k].clone(),
                    automation_run: run,
                    state_update: e.clone(),
                },
            ));
        }
    }
    out
}

/// Attaches each message to its chronologically nearest state change (ties go
/// to the later change). Runs of state changes with no message between them
/// form one triple. Messages under five words are dropped; messages that
/// precede their state change in the log are `preceding`, the rest
/// `following`. Every run of changes yields a triple, even without messages.
pub fn align(events: &[Event]) -> Vec<Triple> {
    let combat_id = events.first().map(|e| e.combat_id.clone()).unwrap_or_default();
    let dm = events
        .iter()
        .find_map(|e| match &e.body {
            EventBody::CombatStart { author_id, .. } => Some(author_id.clone()),
            _ => None,
        })
        .unwrap_or_default();
    let groups = command_groups(events);
    if groups.is_empty() {
        return Vec::new();
    }

    // Cluster index for every group: a new cluster starts after any message.
    let mut cluster_of = Vec::with_capacity(groups.len());
    let mut cluster = 0usize;
    let mut gi = 0;
    let mut seen_message = false;
    for (i, e) in events.iter().enumerate() {
        if matches!(e.body, EventBody::Message(_)) {
            seen_message = true;
        }
        if gi < groups.len() && groups[gi].0 == i {
            if seen_message && gi > 0 {
                cluster += 1;
            }
            seen_message = false;
            cluster_of.push(cluster);
            gi += 1;
        }
    }

    let mut triples: Vec<Triple> = Vec::new();
    for (g, (_, group)) in groups.iter().enumerate() {
        if cluster_of[g] == triples.len() {
            triples.push(Triple {
                id: format!("{combat_id}:{}", group.command.seq),
                combat_id: combat_id.clone(),
                command_events: Vec::new(),
                preceding: Vec::new(),
                following: Vec::new(),
                command_author: group.author().to_string(),
                dm: dm.clone(),
            });
        }
        triples[cluster_of[g]].command_events.push(group.clone());
    }

    let times: Vec<i64> = groups.iter().map(|(_, g)| g.state_update.timestamp.timestamp_millis()).collect();
    for (i, e) in events.iter().enumerate() {
        if !matches!(e.body, EventBody::Message(_)) || word_count(message_text(e)) < MIN_WORDS {
            continue;
        }
        let g = nearest_change(&times, e.timestamp.timestamp_millis());
        let t = &mut triples[cluster_of[g]];
        if i < groups[g].0 {
            t.preceding.push(e.clone());
        } else {
            t.following.push(e.clone());
        }
    }
    triples
}

/// Index of the nearest time to `m` in the sorted `times`; among equals the
/// last one wins.
fn nearest_change(times: &[i64], m: i64) -> usize {
    let upto = times.partition_point(|&t| t <= m);
    let after = times.get(upto).map(|&t| t - m);
    let before = upto.checked_sub(1).map(|i| m - times[i]);
    let target = match (before, after) {
        (Some(b), Some(a)) if a <= b => m + a,
        (None, Some(a)) => m + a,
        _ => m,
    };
    times.partition_point(|&t| t <= target) - 1
}

/// Keeps only utterances by the command author or the DM. Drops the triple if
/// its commands came from more than one actor or if no utterances remain.
pub fn filter_authorship(mut t: Triple) -> Option<Triple> {
    let actors: BTreeSet<&str> = t.command_events.iter().map(CommandGroup::actor).collect();
    if actors.len() > 1 {
        return None;
    }
    let keep = |e: &Event| message_author(e) == t.command_author || message_author(e) == t.dm;
    let preceding: Vec<Event> = t.preceding.iter().filter(|e| keep(e)).cloned().collect();
    let following: Vec<Event> = t.following.iter().filter(|e| keep(e)).cloned().collect();
    if preceding.is_empty() && following.is_empty() {
        return None;
    }
    t.preceding = preceding;
    t.following = following;
    Some(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Register {
    Ic,
    Ooc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtteranceLabel {
    pub label: Register,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifierError {
    #[error("classifier unavailable: {0}")]
    Unavailable(String),
}

pub trait Classifier: Sync {
    fn classify(&self, text: &str) -> Result<UtteranceLabel, ClassifierError>;
}

/// Rule-based in-character/out-of-character classifier.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicClassifier;

const OOC_MARKERS: &[&str] = &["ooc", "brb", "afk", "lol", "lmao", "irl"];
const RULES_WORDS: &[&str] = &[
    "hp", "health", "ac", "turn", "roll", "dice", "feet", "ft", "action", "bonus", "spell", "slot", "initiative", "init",
    "advantage", "disadvantage", "modifier", "dm",
];
const QUESTION_OPENERS: &[&str] = &[
    "how", "what", "what's", "whats", "can", "could", "do", "does", "did", "is", "are", "should", "am", "who", "when",
];

impl Classifier for HeuristicClassifier {
    fn classify(&self, text: &str) -> Result<UtteranceLabel, ClassifierError> {
        let t = text.trim();
        let ooc = |confidence| Ok(UtteranceLabel { label: Register::Ooc, confidence });
        if t.is_empty() {
            return ooc(0.5);
        }
        let wrapped = |open: char, close: char| t.starts_with(open) && t.ends_with(close);
        if wrapped('(', ')') || wrapped('[', ']') || wrapped('{', '}') || t.starts_with("//") {
            return ooc(0.95);
        }
        if t.starts_with('!') {
            return ooc(0.95);
        }
        let lower = t.to_lowercase();
        let words: Vec<&str> = lower
            .split(|c: char| !(c.is_alphanumeric() || c == '\''))
            .filter(|w| !w.is_empty())
            .collect();
        if words.iter().any(|w| OOC_MARKERS.contains(w)) {
            return ooc(0.9);
        }
        let quoted = t.contains('"') || t.contains('\u{201c}');
        let rules_talk = words.iter().any(|w| RULES_WORDS.contains(w));
        let second_person = words.iter().any(|w| matches!(*w, "you" | "your" | "you're" | "u"));
        let question = t.ends_with('?') && words.first().is_some_and(|w| QUESTION_OPENERS.contains(w));
        if !quoted && question && (second_person || rules_talk || words.first() == Some(&"can")) {
            return ooc(0.8);
        }
        let first_person_plan = words
            .first()
            .is_some_and(|w| matches!(*w, "i'll" | "ill" | "i'm" | "im" | "i"))
            && words.iter().any(|w| matches!(*w, "will" | "going" | "i'll" | "ill" | "move" | "gonna"));
        if !quoted && first_person_plan && (rules_talk || words.iter().any(|w| w.chars().all(|c| c.is_ascii_digit()))) {
            return ooc(0.7);
        }
        Ok(UtteranceLabel { label: Register::Ic, confidence: 0.6 })
    }
}

/// Removes every balanced parenthesized span (nested spans included).
/// Unbalanced parentheses are left alone. When anything was removed, the
/// result is trimmed and runs of spaces are collapsed.
pub fn strip_parentheticals(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut remove = vec![false; chars.len()];
    let mut stack = Vec::new();
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '(' => stack.push(i),
            ')' => {
                if let Some(open) = stack.pop() {
                    if stack.is_empty() {
                        remove[open..=i].iter_mut().for_each(|r| *r = true);
                    }
                }
            }
            _ => {}
        }
    }
    if !remove.iter().any(|&r| r) {
        return text.to_string();
    }
    let kept: String = chars.iter().zip(&remove).filter(|(_, &r)| !r).map(|(c, _)| *c).collect();
    let mut out = String::with_capacity(kept.len());
    for c in kept.trim().chars() {
        if c == ' ' && out.ends_with(' ') {
            continue;
        }
        out.push(c);
    }
    out
}

/// Strips parenthesized spans from `following`, then drops utterances that
/// are empty or classified out-of-character. `preceding` is left alone.
pub fn filter_ooc(mut t: Triple, clf: &dyn Classifier) -> Result<Triple, ClassifierError> {
    let mut following = Vec::with_capacity(t.following.len());
    for mut e in t.following {
        let stripped = strip_parentheticals(message_text(&e));
        if stripped.trim().is_empty() || clf.classify(&stripped)?.label == Register::Ooc {
            continue;
        }
        if let EventBody::Message(m) = &mut e.body {
            m.content = stripped;
        }
        following.push(e);
    }
    t.following = following;
    Ok(t)
}

/// Authorship and register filters, a final word-count pass, and removal of
/// triples left without utterances. Applying it twice changes nothing.
pub fn refine(t: Triple, clf: &dyn Classifier) -> Result<Option<Triple>, ClassifierError> {
    let Some(t) = filter_authorship(t) else { return Ok(None) };
    let mut t = filter_ooc(t, clf)?;
    t.following.retain(|e| word_count(message_text(e)) >= MIN_WORDS);
    if t.preceding.is_empty() && t.following.is_empty() {
        return Ok(None);
    }
    Ok(Some(t))
}

/// Triple counts after each stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub aligned: usize,
    pub after_authorship: usize,
    pub after_ooc: usize,
}

impl StageCounts {
    fn add(&mut self, o: &StageCounts) {
        self.aligned += o.aligned;
        self.after_authorship += o.after_authorship;
        self.after_ooc += o.after_ooc;
    }
}

/// Aligns and refines one log.
pub fn distill(events: &[Event], clf: &dyn Classifier) -> Result<(Vec<Triple>, StageCounts), ClassifierError> {
    let aligned = align(events);
    let mut counts = StageCounts {
        aligned: aligned.len(),
        ..Default::default()
    };
    let mut out = Vec::new();
    for t in aligned {
        let Some(t) = filter_authorship(t) else { continue };
        counts.after_authorship += 1;
        if let Some(t) = refine(t, clf)? {
            out.push(t);
        }
    }
    counts.after_ooc = out.len();
    Ok((out, counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CommandCategory {
    Combat,
    Actions,
    Custom,
    Character,
    Checks,
    #[serde(rename = "Dice Rolls")]
    DiceRolls,
    Other,
}

impl CommandCategory {
    pub const ALL: [CommandCategory; 7] = [
        CommandCategory::Combat,
        CommandCategory::Actions,
        CommandCategory::Custom,
        CommandCategory::Character,
        CommandCategory::Checks,
        CommandCategory::DiceRolls,
        CommandCategory::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandCategory::Combat => "Combat",
            CommandCategory::Actions => "Actions",
            CommandCategory::Custom => "Custom",
            CommandCategory::Character => "Character",
            CommandCategory::Checks => "Checks",
            CommandCategory::DiceRolls => "Dice Rolls",
            CommandCategory::Other => "Other",
        }
    }
}

impl fmt::Display for CommandCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Command name (without `!`) to category. Names not listed are user
/// aliases and count as Custom.
pub const CATEGORY_TABLE: &[(&str, CommandCategory)] = &[
    ("init", CommandCategory::Combat),
    ("i", CommandCategory::Combat),
    ("initiative", CommandCategory::Combat),
    ("attack", CommandCategory::Actions),
    ("a", CommandCategory::Actions),
    ("cast", CommandCategory::Actions),
    ("action", CommandCategory::Actions),
    ("game", CommandCategory::Character),
    ("g", CommandCategory::Character),
    ("sheet", CommandCategory::Character),
    ("character", CommandCategory::Character),
    ("char", CommandCategory::Character),
    ("update", CommandCategory::Character),
    ("bag", CommandCategory::Character),
    ("coins", CommandCategory::Character),
    ("check", CommandCategory::Checks),
    ("c", CommandCategory::Checks),
    ("save", CommandCategory::Checks),
    ("s", CommandCategory::Checks),
    ("roll", CommandCategory::DiceRolls),
    ("r", CommandCategory::DiceRolls),
    ("rr", CommandCategory::DiceRolls),
    ("rrr", CommandCategory::DiceRolls),
    ("multiroll", CommandCategory::DiceRolls),
    ("help", CommandCategory::Other),
    ("lookup", CommandCategory::Other),
    ("spell", CommandCategory::Other),
    ("monster", CommandCategory::Other),
    ("item", CommandCategory::Other),
    ("ping", CommandCategory::Other),
    ("prefix", CommandCategory::Other),
    ("about", CommandCategory::Other),
];

/// `!init cast` and friends are actions taken through initiative.
pub fn categorize(text: &str) -> CommandCategory {
    let mut words = text.trim().trim_start_matches('!').split_whitespace();
    let Some(name) = words.next().map(str::to_lowercase) else {
        return CommandCategory::Other;
    };
    let cat = CATEGORY_TABLE
        .iter()
        .find(|(n, _)| *n == name)
        .map_or(CommandCategory::Custom, |(_, c)| *c);
    if cat == CommandCategory::Combat {
        if let Some(sub) = words.next().map(str::to_lowercase) {
            if matches!(sub.as_str(), "cast" | "attack" | "a" | "action") {
                return CommandCategory::Actions;
            }
        }
    }
    cat
}

/// Counts command events by category; every category is present.
pub fn categorize_commands(events: &[Event]) -> BTreeMap<CommandCategory, usize> {
    let mut out: BTreeMap<CommandCategory, usize> = CommandCategory::ALL.iter().map(|c| (*c, 0)).collect();
    for e in events {
        if let EventBody::Command(c) = &e.body {
            *out.entry(categorize(&c.text)).or_default() += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistillReport {
    pub logs: usize,
    pub events_by_type: BTreeMap<String, usize>,
    pub command_categories: BTreeMap<CommandCategory, usize>,
    pub stages: StageCounts,
    pub triples: usize,
    pub preceding_utterances: usize,
    pub following_utterances: usize,
}

impl fmt::Display for DistillReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "logs: {}", self.logs)?;
        writeln!(f, "events:")?;
        for (k, v) in &self.events_by_type {
            writeln!(f, "  {k:<20} {v}")?;
        }
        writeln!(f, "commands:")?;
        for (k, v) in &self.command_categories {
            writeln!(f, "  {:<20} {v}", k.name())?;
        }
        writeln!(
            f,
            "triples: aligned {}, after authorship {}, after ooc {}",
            self.stages.aligned, self.stages.after_authorship, self.stages.after_ooc
        )?;
        write!(
            f,
            "utterances: {} preceding, {} following",
            self.preceding_utterances, self.following_utterances
        )
    }
}

/// Distills many logs (one per combat), in parallel when asked.
pub fn distill_corpus(
    logs: &[Vec<Event>],
    clf: &dyn Classifier,
    exec: Execution,
) -> Result<(Vec<Triple>, DistillReport), ClassifierError> {
    let results = exec.map(logs, |events| distill(events, clf));
    let mut report = DistillReport {
        logs: logs.len(),
        command_categories: CommandCategory::ALL.iter().map(|c| (*c, 0)).collect(),
        ..Default::default()
    };
    let mut triples = Vec::new();
    for (events, r) in logs.iter().zip(results) {
        let (ts, counts) = r?;
        report.stages.add(&counts);
        for e in events {
            *report.events_by_type.entry(e.body.type_name().to_string()).or_default() += 1;
        }
        for (k, v) in categorize_commands(events) {
            *report.command_categories.entry(k).or_default() += v;
        }
        triples.extend(ts);
    }
    report.triples = triples.len();
    report.preceding_utterances = triples.iter().map(|t| t.preceding.len()).sum();
    report.following_utterances = triples.iter().map(|t| t.following.len()).sum();
    Ok((triples, report))
}
