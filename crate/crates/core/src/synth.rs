//! Seeded synthetic play sessions over the bundled combats, used to fuzz
//! replay and distillation.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dice::DieSource;
use crate::engine::Engine;
use crate::eventlog::{Event, EventLog, ResolutionPayload, Session};
use crate::fixtures;
use crate::statecore::{CombatState, Combatant};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    /// Number of commands to issue (the closing `!i end`, if any, is extra).
    pub commands: usize,
    /// Bundled combat name; picked at random when `None`.
    pub combat: Option<String>,
    /// Largest gap between consecutive events, in seconds.
    pub max_gap_secs: i64,
}

impl SynthConfig {
    pub fn new(seed: u64, commands: usize) -> Self {
        SynthConfig {
            seed,
            commands,
            combat: None,
            max_gap_secs: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSession {
    pub combat_id: String,
    pub events: Vec<Event>,
    /// Live state at the end of the session.
    pub final_state: CombatState,
    /// Events the generator asked for, by type, tallied from its own choices
    /// and the outcomes it observed.
    pub expected_counts: BTreeMap<&'static str, usize>,
}

const IC_LINES: &[&str] = &[
    "Filgo puts a hand on his axe, uneasy after the shaking he'd felt from the ground.",
    "\"Is someone there?\" she whispers, raising her holy symbol toward the dark.",
    "The dwarf roars and charges headlong into the snarling pack of beasts.",
    "With a flick of her wrist, sparks dance across her fingertips and leap forward.",
    "He ducks under the swing and plants his boots firmly in the mud.",
    "The creature howls in pain as the blow lands across its flank.",
    "She mutters a quick prayer and the air around her shimmers with light.",
    "Blood drips from the wolf's jaws as it circles around the fallen cart.",
    "Steady now, we hold this line together until the last of them falls.",
    "The orc grins wickedly and hefts its greataxe over one shoulder.",
];

const OOC_LINES: &[&str] = &[
    "How much health do you have left?",
    "I'll move back 30 feet after.",
    "BRB, going to the bathroom.",
    "(sorry, phone call, back in a few minutes)",
    "Can I use my bonus action to dash as well?",
    "Is it my turn yet or are we still waiting?",
];

const SHORT_LINES: &[&str] = &["Nice!", "lol", "Ouch, that hurt.", "Go team go", "ok"];

const SKILLS: &[&str] = &["perception", "athletics", "stealth", "arcana", "insight", "acrobatics"];
const SAVES: &[&str] = &["str", "dex", "con", "wis", "cha"];

fn author_name(controller: &str) -> String {
    match controller.strip_prefix("player-") {
        Some(rest) => {
            let mut cs = rest.chars();
            match cs.next() {
                Some(f) => format!("Player {}{}", f.to_uppercase(), cs.as_str()),
                None => "Player".into(),
            }
        }
        None if controller == "dm" => "DM".into(),
        None => controller.to_string(),
    }
}

fn quoted(name: &str) -> String {
    if name.contains(' ') {
        format!("\"{name}\"")
    } else {
        name.to_string()
    }
}

fn random_message(rng: &mut ChaCha8Rng) -> String {
    let roll: f64 = rng.gen();
    let base = if roll < 0.55 {
        IC_LINES.choose(rng)
    } else if roll < 0.8 {
        OOC_LINES.choose(rng)
    } else {
        SHORT_LINES.choose(rng)
    }
    .expect("non-empty")
    .to_string();
    if rng.gen_bool(0.15) {
        format!("{base} (ooc: rolling badly tonight)")
    } else {
        base
    }
}

fn target_flags(rng: &mut ChaCha8Rng, state: &CombatState, max: usize) -> String {
    let n = rng.gen_range(1..=max);
    let ids: Vec<&Combatant> = state.combatants.choose_multiple(rng, n).collect();
    ids.iter()
        .map(|c| {
            let id = if rng.gen_bool(0.3) { c.id.to_lowercase() } else { c.id.clone() };
            format!(" -t {}", quoted(&id))
        })
        .collect()
}

fn random_command(rng: &mut ChaCha8Rng, state: &CombatState, caster: &Combatant) -> String {
    let sb = &caster.statblock;
    let kind = rng.gen_range(0..100);
    match kind {
        0..=29 if !sb.attacks.is_empty() => {
            let a = sb.attacks.choose(rng).expect("non-empty");
            let prefix = if rng.gen_bool(0.5) { "!a" } else { "!i a" };
            let adv = match rng.gen_range(0..6) {
                0 => " adv",
                1 => " dis",
                _ => "",
            };
            format!("{prefix} {}{}{adv}", quoted(&a.name), target_flags(rng, state, 1))
        }
        30..=44 if !sb.spellbook.spells.is_empty() => {
            let s = sb.spellbook.spells.choose(rng).expect("non-empty");
            let dc = if rng.gen_bool(0.2) { " -dc 13" } else { "" };
            format!("!cast {}{}{dc}", quoted(s), target_flags(rng, state, 3))
        }
        45..=52 if !sb.actions.is_empty() => {
            let a = sb.actions.choose(rng).expect("non-empty");
            format!("!action {}{}", quoted(a), target_flags(rng, state, 1))
        }
        53..=69 => "!i next".into(),
        70..=74 => format!("!c {}", SKILLS.choose(rng).expect("non-empty")),
        75..=78 => format!("!s {}", SAVES.choose(rng).expect("non-empty")),
        79..=83 => format!("!r {}d{}+{}", rng.gen_range(1..=3), [4, 6, 8, 20][rng.gen_range(0..4)], rng.gen_range(0..=5)),
        84..=88 => match rng.gen_range(0..3) {
            0 => "!g hp".into(),
            1 => format!("!g hp -{}", rng.gen_range(1..=8)),
            _ => format!("!g hp {}", rng.gen_range(1..=8)),
        },
        89..=91 => "!a \"Vorpal Spoon\" -t nobody".into(),
        92 => "!help".into(),
        93 => "!i cast".into(),
        _ => "!a".into(),
    }
}

fn session_base(seed: u64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_640_995_200 + (seed % 10_000) as i64 * 3_600, 0).unwrap()
}

fn bump(counts: &mut BTreeMap<&'static str, usize>, k: &'static str) {
    *counts.entry(k).or_default() += 1;
}

/// Generates one session in memory.
pub fn generate(engine: &Engine, cfg: &SynthConfig) -> SynthSession {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let names: Vec<&str> = fixtures::combat_names().collect();
    let name = cfg.combat.clone().unwrap_or_else(|| names.choose(&mut rng).expect("bundled combats").to_string());
    let mut state = fixtures::combat(&name).unwrap_or_else(|| panic!("no bundled combat '{name}'"));
    state.rng = DieSource::seeded(rng.gen());
    let combat_id = format!("synth-{}-{name}", cfg.seed);

    let mut t = session_base(cfg.seed);
    let mut counts = BTreeMap::new();
    let mut tick = |rng: &mut ChaCha8Rng| {
        t += Duration::seconds(rng.gen_range(0..=cfg.max_gap_secs));
        t
    };
    let at = tick(&mut rng);
    let mut s = Session::start(engine.clone(), EventLog::in_memory(combat_id.clone()), "dm", state, at).expect("fresh log");
    bump(&mut counts, "combat_start");

    let mut issued = 0;
    while issued < cfg.commands {
        let actor = s.state.current().cloned().expect("bundled combats are non-empty");
        for _ in 0..rng.gen_range(0..=3) {
            let author = match rng.gen_range(0..10) {
                0..=5 => actor.controller.clone(),
                6..=7 => "dm".to_string(),
                _ => s.state.combatants.choose(&mut rng).expect("non-empty").controller.clone(),
            };
            let text = random_message(&mut rng);
            let at = tick(&mut rng);
            s.message(at, &author, &author_name(&author), &text).expect("in-memory append");
            bump(&mut counts, "message");
        }

        let choice = rng.gen_range(0..100);
        if choice < 4 {
            let before = format!("!{}", ["smite", "bonk", "rage2"].choose(&mut rng).expect("non-empty"));
            let payload = ResolutionPayload {
                after: "!a greataxe -t DW1".into(),
                code: format!("<drac2>return \"{}\"</drac2>", &before[1..]),
                before,
            };
            let snippet = rng.gen_bool(0.5);
            let at = tick(&mut rng);
            s.resolution(at, snippet, payload).expect("in-memory append");
            bump(&mut counts, if snippet { "snippet_resolution" } else { "alias_resolution" });
            continue;
        }
        if choice < 8 {
            let pressable: Vec<(String, String)> = s
                .state
                .combatants
                .iter()
                .flat_map(|c| c.effects.iter().flat_map(move |e| e.buttons.iter().map(move |b| (c.id.clone(), b.clone()))))
                .collect();
            if let Some((who, label)) = pressable.choose(&mut rng).cloned() {
                let controller = s.state.get(&who).map(|c| c.controller.clone()).unwrap_or_default();
                let at = tick(&mut rng);
                let r = s.press_button(at, &controller, &who, &label).expect("in-memory append");
                if r.is_ok() {
                    bump(&mut counts, "button_press");
                    bump(&mut counts, "combat_state_update");
                }
                continue;
            }
        }

        // Mostly the current combatant acts; occasionally someone out of turn.
        let caster = if rng.gen_bool(0.1) {
            s.state.combatants.choose(&mut rng).expect("non-empty").clone()
        } else {
            actor.clone()
        };
        let text = random_command(&mut rng, &s.state, &caster);
        let explicit = (caster.id != actor.id).then_some(caster.id.as_str());
        let at = tick(&mut rng);
        let outcome = s.command(at, &caster.controller, explicit, &text).expect("in-memory append");
        bump(&mut counts, "command");
        if let Ok(r) = &outcome {
            if !r.automation.is_empty() || !r.faces.is_empty() || r.roll.is_some() {
                bump(&mut counts, "automation_run");
            }
            if !r.state_delta.is_empty() {
                bump(&mut counts, "combat_state_update");
            }
        }
        issued += 1;

        for _ in 0..rng.gen_range(0..=2) {
            let author = if rng.gen_bool(0.7) { caster.controller.clone() } else { "dm".to_string() };
            let text = random_message(&mut rng);
            let at = tick(&mut rng);
            s.message(at, &author, &author_name(&author), &text).expect("in-memory append");
            bump(&mut counts, "message");
        }
    }

    let at = tick(&mut rng);
    if rng.gen_bool(0.5) {
        s.command(at, "dm", None, "!i end").expect("in-memory append").expect("combat is active");
        bump(&mut counts, "command");
        bump(&mut counts, "combat_state_update");
    } else {
        s.end(at).expect("in-memory append");
    }
    bump(&mut counts, "combat_end");

    SynthSession {
        combat_id,
        events: s.log.events().to_vec(),
        final_state: s.state,
        expected_counts: counts,
    }
}

/// Counts events by type.
pub fn count_events(events: &[Event]) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for e in events {
        bump(&mut out, e.body.type_name());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_counted() {
        let engine = Engine::default();
        let a = generate(&engine, &SynthConfig::new(7, 40));
        let b = generate(&engine, &SynthConfig::new(7, 40));
        assert_eq!(a.events, b.events);
        assert_eq!(count_events(&a.events), a.expected_counts);
        assert!((40..=41).contains(&a.expected_counts["command"]));
    }

    #[test]
    fn author_names() {
        assert_eq!(author_name("player-filgo"), "Player Filgo");
        assert_eq!(author_name("dm"), "DM");
    }
}
