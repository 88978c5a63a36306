//! Actor and combat data model, health descriptors, and the one-line actor
//! rendering shared by every prompt.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dice::{DiceExpr, DieSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ability {
    Str,
    Dex,
    Con,
    Int,
    Wis,
    Cha,
}

impl Ability {
    pub const ALL: [Ability; 6] = [
        Ability::Str,
        Ability::Dex,
        Ability::Con,
        Ability::Int,
        Ability::Wis,
        Ability::Cha,
    ];

    pub fn full_name(self) -> &'static str {
        match self {
            Ability::Str => "Strength",
            Ability::Dex => "Dexterity",
            Ability::Con => "Constitution",
            Ability::Int => "Intelligence",
            Ability::Wis => "Wisdom",
            Ability::Cha => "Charisma",
        }
    }

    pub fn abbrev(self) -> &'static str {
        match self {
            Ability::Str => "STR",
            Ability::Dex => "DEX",
            Ability::Con => "CON",
            Ability::Int => "INT",
            Ability::Wis => "WIS",
            Ability::Cha => "CHA",
        }
    }

    /// Accepts `wis`, `WIS`, `wisdom`, or any unambiguous prefix of the full name.
    pub fn parse(s: &str) -> Option<Ability> {
        let s = s.to_ascii_lowercase();
        if s.len() < 3 {
            return None;
        }
        Ability::ALL
            .into_iter()
            .find(|a| a.full_name().to_ascii_lowercase().starts_with(&s))
    }
}

impl fmt::Display for Ability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.full_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub str: i32,
    pub dex: i32,
    pub con: i32,
    pub int: i32,
    pub wis: i32,
    pub cha: i32,
}

impl Default for Stats {
    fn default() -> Self {
        Stats {
            str: 10,
            dex: 10,
            con: 10,
            int: 10,
            wis: 10,
            cha: 10,
        }
    }
}

impl Stats {
    pub fn score(&self, a: Ability) -> i32 {
        match a {
            Ability::Str => self.str,
            Ability::Dex => self.dex,
            Ability::Con => self.con,
            Ability::Int => self.int,
            Ability::Wis => self.wis,
            Ability::Cha => self.cha,
        }
    }

    pub fn modifier(&self, a: Ability) -> i32 {
        (self.score(a) - 10).div_euclid(2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLevel {
    pub class: String,
    pub level: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillBonus {
    pub modifier: i32,
    #[serde(default)]
    pub proficient: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackRef {
    pub name: String,
    pub to_hit: i32,
    pub damage: DiceExpr,
    pub damage_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Spellbook {
    #[serde(default)]
    pub spell_bonus: i32,
    #[serde(default)]
    pub dc: i32,
    #[serde(default)]
    pub spells: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counter {
    pub current: u32,
    pub max: u32,
}

/// A creature's full attribute sheet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatBlock {
    /// Sheet name: the character's name for player characters, the monster
    /// name ("Dire Wolf") otherwise.
    pub name: String,
    #[serde(default)]
    pub class_levels: Vec<ClassLevel>,
    #[serde(default)]
    pub race: Option<String>,
    #[serde(default)]
    pub stats: Stats,
    #[serde(default)]
    pub proficiency: i32,
    #[serde(default)]
    pub skills: BTreeMap<String, SkillBonus>,
    #[serde(default)]
    pub saves: BTreeMap<Ability, i32>,
    #[serde(default)]
    pub resistances: Vec<String>,
    #[serde(default)]
    pub immunities: Vec<String>,
    #[serde(default)]
    pub attacks: Vec<AttackRef>,
    #[serde(default)]
    pub spellbook: Spellbook,
    #[serde(default)]
    pub actions: Vec<String>,
    #[serde(default)]
    pub custom_counters: BTreeMap<String, Counter>,
    #[serde(default = "default_ac")]
    pub armor_class: i32,
    #[serde(default)]
    pub creature_type: String,
    #[serde(default)]
    pub description: Option<String>,
}

fn default_ac() -> i32 {
    10
}

impl StatBlock {
    /// Player characters carry class levels; monsters do not.
    pub fn is_player_character(&self) -> bool {
        !self.class_levels.is_empty()
    }

    pub fn class_line(&self) -> String {
        self.class_levels
            .iter()
            .map(|c| format!("{} {}", c.class, c.level))
            .collect::<Vec<_>>()
            .join("/")
    }

    pub fn total_level(&self) -> u32 {
        self.class_levels.iter().map(|c| c.level).sum()
    }

    pub fn save_modifier(&self, a: Ability) -> i32 {
        self.saves
            .get(&a)
            .copied()
            .unwrap_or_else(|| self.stats.modifier(a))
    }

    /// Skill lookup is case-insensitive; unknown skills fall back to the
    /// governing ability modifier, or to an ability itself (`!check str`).
    pub fn skill_modifier(&self, skill: &str) -> Option<i32> {
        let key = skill.to_ascii_lowercase().replace(' ', "_");
        if let Some((_, b)) = self
            .skills
            .iter()
            .find(|(k, _)| k.to_ascii_lowercase().replace(' ', "_") == key)
        {
            return Some(b.modifier);
        }
        if let Some(a) = skill_ability(&key) {
            return Some(self.stats.modifier(a));
        }
        Ability::parse(skill).map(|a| self.stats.modifier(a))
    }

    /// Spellcasting ability modifier implied by the spell attack bonus.
    pub fn spell_modifier(&self) -> i32 {
        self.spellbook.spell_bonus - self.proficiency
    }

    pub fn find_attack(&self, name: &str) -> Option<&AttackRef> {
        self.attacks
            .iter()
            .find(|a| a.name.eq_ignore_ascii_case(name))
    }

    pub fn knows_spell(&self, name: &str) -> bool {
        self.spellbook
            .spells
            .iter()
            .any(|s| s.eq_ignore_ascii_case(name))
    }

    pub fn has_action(&self, name: &str) -> bool {
        self.actions.iter().any(|s| s.eq_ignore_ascii_case(name))
    }
}

/// The 18 standard skills and their governing abilities.
pub const SKILLS: [(&str, Ability); 18] = [
    ("acrobatics", Ability::Dex),
    ("animal_handling", Ability::Wis),
    ("arcana", Ability::Int),
    ("athletics", Ability::Str),
    ("deception", Ability::Cha),
    ("history", Ability::Int),
    ("insight", Ability::Wis),
    ("intimidation", Ability::Cha),
    ("investigation", Ability::Int),
    ("medicine", Ability::Wis),
    ("nature", Ability::Int),
    ("perception", Ability::Wis),
    ("performance", Ability::Cha),
    ("persuasion", Ability::Cha),
    ("religion", Ability::Int),
    ("sleight_of_hand", Ability::Dex),
    ("stealth", Ability::Dex),
    ("survival", Ability::Wis),
];

pub fn skill_ability(skill: &str) -> Option<Ability> {
    let key = skill.to_ascii_lowercase().replace(' ', "_");
    SKILLS.iter().find(|(s, _)| *s == key).map(|&(_, a)| a)
}

/// Title-cased display name of a skill key (`animal_handling` → `Animal Handling`).
pub fn skill_display_name(skill: &str) -> String {
    skill
        .split(['_', ' '])
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(f) => f.to_uppercase().chain(c.flat_map(char::to_lowercase)).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<String>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectParent {
    pub combatant: String,
    pub effect: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveEffect {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_rounds: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<EffectParent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub buttons: Vec<String>,
    /// The owner is concentrating on this effect; casting another
    /// concentration ability replaces it.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub concentration: bool,
}

impl ActiveEffect {
    pub fn named(name: impl Into<String>) -> Self {
        ActiveEffect {
            name: name.into(),
            duration_rounds: None,
            parent: None,
            buttons: Vec::new(),
            concentration: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combatant {
    /// Name in the initiative list ("DW1", "Filgo Bitterfoot"); unique per
    /// combat, case-insensitively.
    pub id: String,
    pub statblock: StatBlock,
    pub hp: i32,
    pub max_hp: i32,
    #[serde(default)]
    pub temp_hp: i32,
    #[serde(default)]
    pub effects: Vec<ActiveEffect>,
    #[serde(default)]
    pub initiative: i32,
    #[serde(default)]
    pub controller: String,
}

impl Combatant {
    pub fn health(&self) -> HealthDescriptor {
        derive_health(self.hp, self.max_hp)
    }

    pub fn has_effect(&self, name: &str) -> bool {
        self.effects.iter().any(|e| e.name.eq_ignore_ascii_case(name))
    }

    /// Name used when this combatant acts: the sheet name for player
    /// characters, the initiative name for monsters.
    pub fn acting_name(&self) -> &str {
        if self.statblock.is_player_character() {
            &self.statblock.name
        } else {
            &self.id
        }
    }

    /// Parenthetical descriptor: race (or monster name) plus class levels.
    pub fn descriptor(&self) -> String {
        let base = self.statblock.race.as_deref().unwrap_or(&self.statblock.name);
        if self.statblock.class_levels.is_empty() {
            base.to_string()
        } else {
            format!("{base}; {}", self.statblock.class_line())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HealthDescriptor {
    Dead,
    Critical,
    Bloodied,
    Injured,
    Healthy,
}

impl fmt::Display for HealthDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HealthDescriptor::Dead => "Dead",
            HealthDescriptor::Critical => "Critical",
            HealthDescriptor::Bloodied => "Bloodied",
            HealthDescriptor::Injured => "Injured",
            HealthDescriptor::Healthy => "Healthy",
        })
    }
}

/// Descriptor cut-offs in thousandths of max HP. Avrae's exact values are not
/// public; these reproduce every published actor listing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HealthThresholds {
    pub critical_permille: i64,
    pub bloodied_permille: i64,
}

impl Default for HealthThresholds {
    fn default() -> Self {
        HealthThresholds {
            critical_permille: 150,
            bloodied_permille: 500,
        }
    }
}

pub fn derive_health(hp: i32, max_hp: i32) -> HealthDescriptor {
    derive_health_with(hp, max_hp, HealthThresholds::default())
}

pub fn derive_health_with(hp: i32, max_hp: i32, t: HealthThresholds) -> HealthDescriptor {
    debug_assert!(max_hp > 0);
    let (hp, max) = (hp as i64, max_hp.max(1) as i64);
    if hp <= 0 {
        HealthDescriptor::Dead
    } else if hp * 1000 <= t.critical_permille * max {
        HealthDescriptor::Critical
    } else if hp * 1000 <= t.bloodied_permille * max {
        HealthDescriptor::Bloodied
    } else if hp < max {
        HealthDescriptor::Injured
    } else {
        HealthDescriptor::Healthy
    }
}

/// `- DW1 (Dire Wolf) <25/37 HP; Injured> [effect, effect]`
pub fn render_actor_line(c: &Combatant) -> String {
    let mut line = format!(
        "- {} ({}) <{}/{} HP; {}>",
        c.id,
        c.descriptor(),
        c.hp,
        c.max_hp,
        c.health()
    );
    if !c.effects.is_empty() {
        let names: Vec<&str> = c.effects.iter().map(|e| e.name.as_str()).collect();
        line.push_str(" [");
        line.push_str(&names.join(", "));
        line.push(']');
    }
    line
}

pub const DAMAGE_TYPES: [&str; 13] = [
    "acid",
    "bludgeoning",
    "cold",
    "fire",
    "force",
    "lightning",
    "necrotic",
    "piercing",
    "poison",
    "psychic",
    "radiant",
    "slashing",
    "thunder",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("negative damage amount {0}")]
    NegativeDamage(i32),
    #[error("unknown damage type '{0}'")]
    UnknownDamageType(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DamageOutcome {
    /// Damage after resistance/immunity, before temp HP absorption.
    pub applied: i32,
    pub absorbed_by_temp: i32,
}

/// Applies typed damage: immunity zeroes it, resistance halves it (rounded
/// down), temp HP absorbs before real HP. HP may go negative.
pub fn apply_damage(
    c: &mut Combatant,
    amount: i32,
    damage_type: &str,
    strict_types: bool,
) -> Result<DamageOutcome, StateError> {
    if amount < 0 {
        return Err(StateError::NegativeDamage(amount));
    }
    let ty = damage_type.to_ascii_lowercase();
    if strict_types && !DAMAGE_TYPES.contains(&ty.as_str()) {
        return Err(StateError::UnknownDamageType(damage_type.to_string()));
    }
    let matches = |list: &[String]| list.iter().any(|t| t.eq_ignore_ascii_case(&ty));
    let applied = if matches(&c.statblock.immunities) {
        0
    } else if matches(&c.statblock.resistances) {
        amount / 2
    } else {
        amount
    };
    let absorbed = applied.min(c.temp_hp.max(0));
    c.temp_hp -= absorbed;
    c.hp -= applied - absorbed;
    Ok(DamageOutcome {
        applied,
        absorbed_by_temp: absorbed,
    })
}

/// Heals up to max HP; returns HP actually restored. Dead combatants heal from 0.
pub fn apply_healing(c: &mut Combatant, amount: i32) -> i32 {
    let before = c.hp;
    let base = c.hp.max(0);
    c.hp = (base + amount.max(0)).min(c.max_hp).max(before);
    c.hp - before
}

/// Temp HP does not stack: the larger value wins.
pub fn grant_temp_hp(c: &mut Combatant, amount: i32) -> i32 {
    let before = c.temp_hp;
    c.temp_hp = c.temp_hp.max(amount.max(0));
    c.temp_hp - before
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombatStatus {
    #[default]
    Active,
    Ended,
}

/// Ordered initiative list plus turn pointer and the session's die source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombatState {
    pub combatants: Vec<Combatant>,
    #[serde(default)]
    pub turn_index: usize,
    #[serde(default = "first_round")]
    pub round: u32,
    pub rng: DieSource,
    #[serde(default)]
    pub status: CombatStatus,
    /// Known creatures not yet in initiative (`!init join` pulls from here).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bench: Vec<Combatant>,
}

fn first_round() -> u32 {
    1
}

impl CombatState {
    pub fn new(combatants: Vec<Combatant>, rng: DieSource) -> Self {
        let mut s = CombatState {
            combatants,
            turn_index: 0,
            round: 1,
            rng,
            status: CombatStatus::Active,
            bench: Vec::new(),
        };
        s.sort_initiative();
        s
    }

    /// Stable sort by initiative, highest first.
    pub fn sort_initiative(&mut self) {
        self.combatants.sort_by_key(|c| std::cmp::Reverse(c.initiative));
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.combatants
            .iter()
            .position(|c| c.id.eq_ignore_ascii_case(id))
    }

    pub fn get(&self, id: &str) -> Option<&Combatant> {
        self.index_of(id).map(|i| &self.combatants[i])
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut Combatant> {
        self.index_of(id).map(move |i| &mut self.combatants[i])
    }

    pub fn current(&self) -> Option<&Combatant> {
        self.combatants.get(self.turn_index)
    }

    pub fn actor_lines(&self) -> Vec<String> {
        self.combatants.iter().map(render_actor_line).collect()
    }

    /// Checks structural invariants, returning a description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.combatants.is_empty() && self.turn_index >= self.combatants.len() {
            return Err(format!(
                "turn_index {} out of range for {} combatants",
                self.turn_index,
                self.combatants.len()
            ));
        }
        if self.round < 1 {
            return Err("round must be at least 1".into());
        }
        let mut seen = std::collections::HashSet::new();
        for c in self.combatants.iter().chain(&self.bench) {
            if !seen.insert(c.id.to_ascii_lowercase()) {
                return Err(format!("duplicate combatant id '{}'", c.id));
            }
            if c.hp > c.max_hp {
                return Err(format!("{} has hp {} above max {}", c.id, c.hp, c.max_hp));
            }
            if c.temp_hp < 0 {
                return Err(format!("{} has negative temp hp", c.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("schema error: {}", .problems.iter().map(|(p, m)| format!("{p}: {m}")).collect::<Vec<_>>().join("; "))]
pub struct SchemaError {
    /// (field path, problem) pairs.
    pub problems: Vec<(String, String)>,
}

impl SchemaError {
    pub fn single(path: impl Into<String>, msg: impl Into<String>) -> Self {
        SchemaError {
            problems: vec![(path.into(), msg.into())],
        }
    }

    pub fn paths(&self) -> Vec<&str> {
        self.problems.iter().map(|(p, _)| p.as_str()).collect()
    }
}

/// Deserializes with field-path reporting.
pub(crate) fn from_value_with_path<T: serde::de::DeserializeOwned>(
    doc: &serde_json::Value,
) -> Result<T, SchemaError> {
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        SchemaError::single(path, e.into_inner().to_string())
    })
}

/// Loads and validates a stat block document.
pub fn load_statblock(doc: &serde_json::Value) -> Result<StatBlock, SchemaError> {
    let sb: StatBlock = from_value_with_path(doc)?;
    validate_statblock(&sb)?;
    Ok(sb)
}

pub fn validate_statblock(sb: &StatBlock) -> Result<(), SchemaError> {
    let mut problems = Vec::new();
    if sb.name.trim().is_empty() {
        problems.push(("name".into(), "must not be empty".into()));
    }
    if sb.proficiency < 0 {
        problems.push(("proficiency".into(), "must be non-negative".into()));
    }
    for (name, c) in &sb.custom_counters {
        if c.current > c.max {
            problems.push((
                format!("custom_counters.{name}"),
                format!("current {} exceeds max {}", c.current, c.max),
            ));
        }
    }
    for (i, cl) in sb.class_levels.iter().enumerate() {
        if cl.level == 0 {
            problems.push((format!("class_levels[{i}].level"), "must be at least 1".into()));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(SchemaError { problems })
    }
}
