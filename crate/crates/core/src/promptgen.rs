//! Prompt text for the command-prediction and narration tasks, plus the
//! plain-English lines describing an action's results.

use serde::{Deserialize, Serialize};

use crate::engine::{AutomationResult, ExecutionReport};
use crate::eventlog::{Event, EventBody};
use crate::pipeline::{message_text, Triple};
use crate::statecore::{render_actor_line, CombatState, Combatant};

/// Lines describing what a command did: a title, then one or more lines per
/// automation result, then any notes.
pub fn render_mechanical_lines(report: &ExecutionReport) -> Vec<String> {
    let mut out = Vec::new();
    out.extend(report.title.iter().cloned());
    for r in &report.automation {
        match r {
            AutomationResult::Target { target, children } => {
                result_lines(&report.caster_name, target, children, &mut out)
            }
            other => result_lines(&report.caster_name, &report.caster, std::slice::from_ref(other), &mut out),
        }
    }
    if let Some(r) = &report.roll {
        out.push(crate::dice::format_roll(r));
    }
    out.extend(report.notes.iter().cloned());
    out
}

fn damage_total(children: &[AutomationResult]) -> i32 {
    children
        .iter()
        .filter_map(|c| match c {
            AutomationResult::Damage { damage, .. } if *damage >= 0 => Some(*damage),
            _ => None,
        })
        .sum()
}

fn result_lines(caster: &str, target: &str, results: &[AutomationResult], out: &mut Vec<String>) {
    for r in results {
        match r {
            AutomationResult::Target { target, children } => result_lines(caster, target, children, out),
            AutomationResult::Attack { did_hit: false, children, .. } => {
                out.push(format!("{caster} attacked {target} but missed."));
                result_lines(caster, target, children, out);
            }
            AutomationResult::Attack { did_crit, children, .. } => {
                let how = if *did_crit { "critically hit" } else { "hit" };
                let dmg = damage_total(children);
                if children.iter().any(|c| matches!(c, AutomationResult::Damage { damage, .. } if *damage >= 0)) {
                    out.push(format!("{caster} attacked {target} and {how} for {dmg} damage."));
                } else {
                    out.push(format!("{caster} attacked {target} and {how}."));
                }
                let rest: Vec<AutomationResult> = children
                    .iter()
                    .filter(|c| !matches!(c, AutomationResult::Damage { damage, .. } if *damage >= 0))
                    .cloned()
                    .collect();
                result_lines(caster, target, &rest, out);
            }
            AutomationResult::Save { ability, did_save, dc, children, .. } => {
                let outcome = match (dc, did_save) {
                    (None, _) => ".",
                    (Some(_), true) => " and succeeded.",
                    (Some(_), false) => " but failed.",
                };
                out.push(format!("{target} rolled a {} save{outcome}", ability.full_name()));
                result_lines(caster, target, children, out);
            }
            AutomationResult::Damage { damage, .. } if *damage < 0 => {
                out.push(format!("{target} regained {} hit points.", -damage));
            }
            AutomationResult::Damage { damage, .. } => out.push(format!("{target} took {damage} damage.")),
            AutomationResult::TempHp { amount } => {
                out.push(format!("{target} gained {amount} temporary hit points."))
            }
            AutomationResult::IEffect { effect } => out.push(format!("{target} gained {effect}.")),
            AutomationResult::RemoveIEffect { effect } => out.push(format!("{target} lost {effect}.")),
            AutomationResult::Check { skill_name, did_succeed, .. } => {
                let outcome = match did_succeed {
                    None => ".",
                    Some(true) => " and succeeded.",
                    Some(false) => " but failed.",
                };
                out.push(format!("{target} rolled a {skill_name} check{outcome}"));
            }
        }
    }
}

/// Chat messages shown before a narration.
pub const HISTORY_LEN: usize = 5;

/// Order of the list lines in a caster sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SheetOrder {
    /// Attacks, Spells, Actions.
    #[default]
    SpellsFirst,
    /// Attacks, Actions, Spells.
    ActionsFirst,
}

fn sheet_lines(c: &Combatant, order: SheetOrder, with_effects: bool) -> Vec<String> {
    let sb = &c.statblock;
    let mut out = vec![format!("Name: {}", c.id)];
    if sb.is_player_character() {
        out.push(format!("Class: {}", sb.class_line()));
    }
    out.push(format!("Race: {}", sb.race.as_deref().unwrap_or(&sb.name)));
    let list = |label: &str, items: Vec<&str>| (!items.is_empty()).then(|| format!("{label}: {}", items.join(", ")));
    let attacks = list("Attacks", sb.attacks.iter().map(|a| a.name.as_str()).collect());
    let spells = list("Spells", sb.spellbook.spells.iter().map(String::as_str).collect());
    let actions = list("Actions", sb.actions.iter().map(String::as_str).collect());
    let ordered = match order {
        SheetOrder::SpellsFirst => [attacks, spells, actions],
        SheetOrder::ActionsFirst => [attacks, actions, spells],
    };
    out.extend(ordered.into_iter().flatten());
    if with_effects {
        out.extend(list("Effects", c.effects.iter().map(|e| e.name.as_str()).collect()));
    }
    out
}

/// Command-prediction prompt: actor list, the acting character's sheet, then
/// the player's utterances.
pub fn render_utt2cmd(state: &CombatState, caster: &Combatant, utterances: &[String]) -> String {
    let mut lines = vec!["Actors:".to_string()];
    lines.extend(state.actor_lines());
    lines.push(String::new());
    lines.push("Current:".into());
    lines.extend(sheet_lines(caster, SheetOrder::SpellsFirst, false));
    if !utterances.is_empty() {
        lines.push(String::new());
        lines.extend(utterances.iter().cloned());
    }
    lines.join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sta2NarVariant {
    /// History, full state, caster sheet and mechanical lines.
    #[default]
    Full,
    /// History and mechanical lines.
    Short,
    /// The command text alone.
    Command,
    /// History alone.
    Dialog,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryMessage {
    pub author: String,
    pub content: String,
}

impl HistoryMessage {
    pub fn new(author: impl Into<String>, content: impl Into<String>) -> Self {
        HistoryMessage {
            author: author.into(),
            content: content.into(),
        }
    }
}

/// Everything a narration prompt is built from. `state` is the post-action state.
#[derive(Debug, Clone)]
pub struct Sta2NarInput<'a> {
    pub history: &'a [HistoryMessage],
    pub state: &'a CombatState,
    pub caster: &'a Combatant,
    /// Target ids in command order.
    pub targets: &'a [String],
    pub command: &'a str,
    pub mechanical_lines: &'a [String],
    pub sheet_order: SheetOrder,
}

fn history_lines(history: &[HistoryMessage]) -> Vec<String> {
    history.iter().map(|m| format!("{}: {}", m.author, m.content)).collect()
}

/// Narration prompt in one of the four context variants.
pub fn render_sta2nar(input: &Sta2NarInput<'_>, variant: Sta2NarVariant) -> String {
    let history = || {
        let mut v = vec!["History:".to_string()];
        v.extend(history_lines(input.history));
        v.push("---".into());
        v
    };
    let lines: Vec<String> = match variant {
        Sta2NarVariant::Command => vec![input.command.to_string()],
        Sta2NarVariant::Dialog => history_lines(input.history),
        Sta2NarVariant::Short => {
            let mut v = history();
            v.extend(input.mechanical_lines.iter().cloned());
            v
        }
        Sta2NarVariant::Full => {
            let mut v = history();
            v.push(String::new());
            v.push("Actors:".into());
            v.extend(input.state.actor_lines());
            v.push(String::new());
            v.push("Targets:".into());
            v.extend(
                input
                    .targets
                    .iter()
                    .filter_map(|t| input.state.get(t))
                    .map(render_actor_line),
            );
            v.push(String::new());
            if let Some(desc) = &input.caster.statblock.description {
                let sep = if desc.starts_with('\n') { "" } else { " " };
                v.push(format!("Description:{sep}{desc}"));
            }
            v.push("---".into());
            v.extend(sheet_lines(input.caster, input.sheet_order, true));
            if !input.mechanical_lines.is_empty() {
                v.push(String::new());
                v.extend(input.mechanical_lines.iter().cloned());
            }
            v
        }
    };
    lines.join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Utt2cmd,
    Sta2nar,
}

/// One line of `prompts.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub task: Task,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    /// Id of the triple the record was built from.
    pub source: String,
}

/// Builds training records from distilled triples. `events` is the log the
/// triples came from; it supplies the state before each triple's first
/// command and the chat history leading up to it.
///
/// The command record's prompt is the pre-command state plus the preceding
/// utterances, and its completion is the command text (one per line). The
/// narration record uses the full variant over the post-command state, and
/// its completion is the following utterances.
pub fn prompt_records(events: &[Event], triples: &[Triple]) -> Vec<PromptRecord> {
    let mut out = Vec::new();
    for t in triples {
        let Some(first) = t.command_events.first() else { continue };
        let at = first.command.seq;
        let Some(pre) = events.iter().rev().filter(|e| e.seq < at).find_map(|e| match &e.body {
            EventBody::CombatStart { state, .. } | EventBody::CombatStateUpdate { state } => Some(state),
            _ => None,
        }) else {
            continue;
        };
        // Commands without an actor (`!i end`) are prompted from the current turn.
        let Some(caster) = pre.get(first.actor()).or_else(|| pre.current()) else { continue };

        let commands: Vec<&str> = t.command_events.iter().filter_map(|g| g.text()).collect();
        if !commands.is_empty() {
            let utts: Vec<String> = t.preceding.iter().map(|e| message_text(e).to_string()).collect();
            out.push(PromptRecord {
                task: Task::Utt2cmd,
                prompt: render_utt2cmd(pre, caster, &utts),
                completion: Some(commands.join("\n")),
                source: t.id.clone(),
            });
        }

        if t.following.is_empty() {
            continue;
        }
        let last = t.command_events.last().expect("non-empty");
        let EventBody::CombatStateUpdate { state: post } = &last.state_update.body else { continue };
        let Some(caster) = post.get(&caster.id).or_else(|| post.current()) else { continue };
        let reports: Vec<&ExecutionReport> = t
            .command_events
            .iter()
            .filter_map(|g| match g.automation_run.as_ref().map(|e| &e.body) {
                Some(EventBody::AutomationRun(run)) => Some(&run.report),
                _ => None,
            })
            .collect();
        let mut targets: Vec<String> = Vec::new();
        for r in &reports {
            for id in &r.targets {
                if !targets.contains(id) {
                    targets.push(id.clone());
                }
            }
        }
        let lines: Vec<String> = reports.iter().flat_map(|r| render_mechanical_lines(r)).collect();
        let mut history: Vec<HistoryMessage> = events
            .iter()
            .filter(|e| e.seq < at)
            .filter_map(|e| match &e.body {
                EventBody::Message(m) => Some(HistoryMessage::new(m.author_name.clone(), m.content.clone())),
                _ => None,
            })
            .collect();
        history.drain(..history.len().saturating_sub(HISTORY_LEN));
        let text = commands.join("\n");
        let input = Sta2NarInput {
            history: &history,
            state: post,
            caster,
            targets: &targets,
            command: &text,
            mechanical_lines: &lines,
            sheet_order: SheetOrder::default(),
        };
        out.push(PromptRecord {
            task: Task::Sta2nar,
            prompt: render_sta2nar(&input, Sta2NarVariant::Full),
            completion: Some(t.following.iter().map(message_text).collect::<Vec<_>>().join("\n")),
            source: t.id.clone(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statecore::tests::monster;

    #[test]
    fn utt2cmd_without_utterances_ends_after_current() {
        let c = monster("DW1", "Dire Wolf", 25, 37);
        let state = CombatState::new(vec![c.clone()], crate::dice::DieSource::seeded(1));
        let p = render_utt2cmd(&state, &c, &[]);
        assert_eq!(p, "Actors:\n- DW1 (Dire Wolf) <25/37 HP; Injured>\n\nCurrent:\nName: DW1\nRace: Dire Wolf");
    }

    #[test]
    fn dialog_and_command_variants() {
        let c = monster("DW1", "Dire Wolf", 25, 37);
        let state = CombatState::new(vec![c.clone()], crate::dice::DieSource::seeded(1));
        let history = vec![HistoryMessage::new("Player 1", "hi"), HistoryMessage::new("Player 0", "ho")];
        let input = Sta2NarInput {
            history: &history,
            state: &state,
            caster: &c,
            targets: &[],
            command: "!a bite -t x",
            mechanical_lines: &["DW1 attacks with a Bite!".to_string()],
            sheet_order: SheetOrder::default(),
        };
        assert_eq!(render_sta2nar(&input, Sta2NarVariant::Dialog), "Player 1: hi\nPlayer 0: ho");
        assert_eq!(render_sta2nar(&input, Sta2NarVariant::Command), "!a bite -t x");
        assert_eq!(
            render_sta2nar(&input, Sta2NarVariant::Short),
            "History:\nPlayer 1: hi\nPlayer 0: ho\n---\nDW1 attacks with a Bite!"
        );
    }
}
