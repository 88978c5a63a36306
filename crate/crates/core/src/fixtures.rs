//! Bundled stat blocks and combat setups, and the combat document format.
//!
//! A combat document lists combatants in initiative order. Each combatant's
//! `statblock` is either the name of a bundled stat block or an inline one;
//! `effects` entries are either bare names or full effect objects.

use serde::Deserialize;
use serde_json::Value;

use crate::dice::DieSource;
use crate::statecore::{from_value_with_path, validate_statblock, ActiveEffect, CombatState, Combatant, SchemaError, StatBlock};

macro_rules! bundled {
    ($dir:literal: $($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../fixtures/", $dir, "/", $name, ".json")))),*]
    };
}

const STATBLOCKS: &[(&str, &str)] = bundled!("statblocks":
    "aleksandra", "calti", "death_dog", "dire_wolf", "filgo", "kobold",
    "noxxis", "orc", "rahotur", "reef", "sea_hag", "umbrage",
);

const COMBATS: &[(&str, &str)] = bundled!("combats": "appendix_d", "appendix_e", "appendix_f", "appendix_h");

pub fn statblock_names() -> impl Iterator<Item = &'static str> {
    STATBLOCKS.iter().map(|(n, _)| *n)
}

pub fn combat_names() -> impl Iterator<Item = &'static str> {
    COMBATS.iter().map(|(n, _)| *n)
}

pub fn statblock(name: &str) -> Option<StatBlock> {
    let (_, text) = STATBLOCKS.iter().find(|(n, _)| *n == name)?;
    let doc: Value = serde_json::from_str(text).expect("bundled stat block is valid JSON");
    Some(crate::statecore::load_statblock(&doc).expect("bundled stat block is valid"))
}

/// A bundled combat by name (`appendix_f`, ...).
pub fn combat(name: &str) -> Option<CombatState> {
    let (_, text) = COMBATS.iter().find(|(n, _)| *n == name)?;
    let doc: Value = serde_json::from_str(text).expect("bundled combat is valid JSON");
    Some(load_combat(&doc).expect("bundled combat is valid"))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StatBlockRef {
    Named(String),
    Inline(Box<Value>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EffectDoc {
    Named(String),
    Full(ActiveEffect),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CombatantDoc {
    id: String,
    statblock: StatBlockRef,
    hp: i32,
    max_hp: i32,
    #[serde(default)]
    temp_hp: i32,
    #[serde(default)]
    effects: Vec<EffectDoc>,
    #[serde(default)]
    initiative: i32,
    #[serde(default)]
    controller: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CombatDoc {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    round: Option<u32>,
    /// Id of the combatant whose turn it is; defaults to the first.
    #[serde(default)]
    current: Option<String>,
    combatants: Vec<CombatantDoc>,
    #[serde(default)]
    bench: Vec<CombatantDoc>,
}

fn build(doc: CombatantDoc, path: &str) -> Result<Combatant, SchemaError> {
    let statblock = match doc.statblock {
        StatBlockRef::Named(n) => statblock(&n)
            .ok_or_else(|| SchemaError::single(format!("{path}.statblock"), format!("no bundled stat block '{n}'")))?,
        StatBlockRef::Inline(v) => {
            let sb: StatBlock = from_value_with_path(&v).map_err(|e| SchemaError {
                problems: e
                    .problems
                    .into_iter()
                    .map(|(p, m)| (format!("{path}.statblock.{p}"), m))
                    .collect(),
            })?;
            validate_statblock(&sb)?;
            sb
        }
    };
    if doc.max_hp <= 0 {
        return Err(SchemaError::single(format!("{path}.max_hp"), "must be positive"));
    }
    Ok(Combatant {
        id: doc.id,
        statblock,
        hp: doc.hp,
        max_hp: doc.max_hp,
        temp_hp: doc.temp_hp,
        effects: doc
            .effects
            .into_iter()
            .map(|e| match e {
                EffectDoc::Named(n) => ActiveEffect::named(n),
                EffectDoc::Full(e) => e,
            })
            .collect(),
        initiative: doc.initiative,
        controller: doc.controller,
    })
}

/// Parses a combat document into a state seeded from its `seed`.
pub fn load_combat(doc: &Value) -> Result<CombatState, SchemaError> {
    let doc: CombatDoc = from_value_with_path(doc)?;
    let combatants = doc
        .combatants
        .into_iter()
        .enumerate()
        .map(|(i, c)| build(c, &format!("combatants[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let bench = doc
        .bench
        .into_iter()
        .enumerate()
        .map(|(i, c)| build(c, &format!("bench[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut state = CombatState::new(combatants, DieSource::seeded(doc.seed));
    state.bench = bench;
    if let Some(r) = doc.round {
        state.round = r;
    }
    if let Some(cur) = doc.current {
        state.turn_index = state
            .index_of(&cur)
            .ok_or_else(|| SchemaError::single("current", format!("no combatant '{cur}'")))?;
    }
    state
        .check_invariants()
        .map_err(|m| SchemaError::single("combatants", m))?;
    Ok(state)
}
