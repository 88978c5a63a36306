//! Command execution against a [`CombatState`].

mod automation;
pub mod command;
pub mod delta;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use command::{parse_command, parse_line, tokenize, CommandAst, CommandError};
pub use delta::{apply_delta, diff_states, DeltaError, StateChange};

use crate::content::{match_name, starter_pack, AbilityKind, ContentIndex, LookupError, ResolveError};
use crate::dice::{parse_dice, roll, DiceError, DiceExpr, DieGroup, DieSource, KeepMode, RollResult, Term};
use crate::statecore::{
    apply_healing, render_actor_line, skill_display_name, Ability, CombatState, CombatStatus,
    Combatant, StateError, SKILLS,
};

use automation::Runner;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecutionError {
    #[error(transparent)]
    Command(#[from] CommandError),
    #[error("no combatant named '{0}'")]
    CasterNotFound(String),
    #[error("target '{0}' not found")]
    TargetNotFound(String),
    #[error("target '{query}' is ambiguous: {}", .candidates.join(", "))]
    AmbiguousTarget { query: String, candidates: Vec<String> },
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Dice(#[from] DiceError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("{caster} has no weapon stats for {ability}")]
    NoWeapon { caster: String, ability: String },
    #[error("unknown skill '{0}'")]
    UnknownSkill(String),
    #[error("unknown ability '{0}'")]
    UnknownAbility(String),
    #[error("invalid value '{value}' for {flag}")]
    InvalidFlag { flag: String, value: String },
    #[error("there are no combatants")]
    NoCombatants,
    #[error("combat has ended")]
    CombatEnded,
    #[error("combat is already in progress")]
    AlreadyStarted,
    #[error("'{0}' is already in combat")]
    AlreadyInCombat(String),
    #[error("unsupported subcommand '{0}'")]
    UnsupportedSubcommand(String),
    #[error("{0} recorded die faces were not consumed")]
    UnusedFaces(usize),
    #[error("no effect on {combatant} has a '{label}' button")]
    NoSuchButton { combatant: String, label: String },
}

impl ExecutionError {
    /// Stable machine-readable name for the error kind, e.g. `TargetNotFound`.
    pub fn reason(&self) -> &'static str {
        use crate::content::LookupError;
        match self {
            ExecutionError::Command(e) => match e {
                CommandError::NotACommand => "NotACommand",
                CommandError::UnterminatedQuote(_) => "UnterminatedQuote",
                CommandError::Empty => "EmptyCommand",
                CommandError::UnknownCommand(_) => "UnknownCommand",
                CommandError::UnknownSubcommand { .. } => "UnknownSubcommand",
                CommandError::MissingArgument { .. } => "MissingArgument",
                CommandError::MissingFlagValue(_) => "MissingFlagValue",
            },
            ExecutionError::CasterNotFound(_) => "CasterNotFound",
            ExecutionError::TargetNotFound(_) => "TargetNotFound",
            ExecutionError::AmbiguousTarget { .. } => "AmbiguousTarget",
            ExecutionError::Resolve(ResolveError::NotKnown { .. }) => "AbilityNotKnown",
            ExecutionError::Resolve(ResolveError::Lookup(LookupError::NotFound(_))) => "AbilityNotFound",
            ExecutionError::Resolve(ResolveError::Lookup(LookupError::Ambiguous { .. })) => "AmbiguousAbility",
            ExecutionError::Dice(DiceError::Syntax { .. }) => "DiceSyntax",
            ExecutionError::Dice(_) => "DiceSource",
            ExecutionError::State(StateError::NegativeDamage(_)) => "NegativeDamage",
            ExecutionError::State(StateError::UnknownDamageType(_)) => "UnknownDamageType",
            ExecutionError::NoWeapon { .. } => "NoWeapon",
            ExecutionError::UnknownSkill(_) => "UnknownSkill",
            ExecutionError::UnknownAbility(_) => "UnknownAbility",
            ExecutionError::InvalidFlag { .. } => "InvalidFlag",
            ExecutionError::NoCombatants => "NoCombatants",
            ExecutionError::CombatEnded => "CombatEnded",
            ExecutionError::AlreadyStarted => "AlreadyStarted",
            ExecutionError::AlreadyInCombat(_) => "AlreadyInCombat",
            ExecutionError::UnsupportedSubcommand(_) => "UnsupportedSubcommand",
            ExecutionError::UnusedFaces(_) => "UnusedFaces",
            ExecutionError::NoSuchButton { .. } => "NoSuchButton",
        }
    }
}

/// Outcome of one automation node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AutomationResult {
    Target {
        target: String,
        children: Vec<AutomationResult>,
    },
    Attack {
        did_hit: bool,
        did_crit: bool,
        roll: RollResult,
        children: Vec<AutomationResult>,
    },
    Save {
        dc: Option<i32>,
        ability: Ability,
        did_save: bool,
        roll: RollResult,
        children: Vec<AutomationResult>,
    },
    /// Negative damage is healing.
    Damage { damage: i32, in_crit: bool },
    #[serde(rename = "temphp")]
    TempHp { amount: i32 },
    #[serde(rename = "ieffect")]
    IEffect { effect: String },
    #[serde(rename = "remove_ieffect")]
    RemoveIEffect { effect: String },
    Check {
        skill_name: String,
        dc: Option<i32>,
        did_succeed: Option<bool>,
        contest_roll: Option<RollResult>,
        contest_did_tie: Option<bool>,
        roll: RollResult,
    },
}

impl AutomationResult {
    pub fn children(&self) -> &[AutomationResult] {
        match self {
            AutomationResult::Target { children, .. }
            | AutomationResult::Attack { children, .. }
            | AutomationResult::Save { children, .. } => children,
            _ => &[],
        }
    }

    /// Pre-order walk over this node and its descendants.
    pub fn walk(&self) -> Vec<&AutomationResult> {
        let mut out = vec![self];
        for c in self.children() {
            out.extend(c.walk());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub ast: CommandAst,
    /// Combatant id of the actor.
    pub caster: String,
    /// Name the caster acts under in result lines.
    pub caster_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ability: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ability_kind: Option<AbilityKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default)]
    pub automation: Vec<AutomationResult>,
    /// Bare dice roll (`!roll`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roll: Option<RollResult>,
    /// Lines from non-automation commands (turn banners, HP readouts).
    #[serde(default)]
    pub notes: Vec<String>,
    pub state_delta: Vec<StateChange>,
    pub mechanical_lines: Vec<String>,
    /// Every die face consumed, in draw order.
    pub faces: Vec<u32>,
}

/// `Initiative 12 (round 1): Umbrage`
pub fn turn_banner(state: &CombatState) -> Result<String, ExecutionError> {
    let c = state.current().ok_or(ExecutionError::NoCombatants)?;
    Ok(format!(
        "Initiative {} (round {}): {}",
        c.initiative, state.round, c.id
    ))
}

/// Maps each raw `-t` value to a combatant id: case-insensitive exact id,
/// else unambiguous prefix. Order and duplicates are kept.
pub fn resolve_targets(ast: &CommandAst, state: &CombatState) -> Result<Vec<String>, ExecutionError> {
    ast.targets
        .iter()
        .map(|raw| {
            match_name(raw, state.combatants.iter().map(|c| (c.id.as_str(), c.id.clone()))).map_err(
                |e| match e {
                    LookupError::NotFound(q) => ExecutionError::TargetNotFound(q),
                    LookupError::Ambiguous { query, candidates } => {
                        ExecutionError::AmbiguousTarget { query, candidates }
                    }
                },
            )
        })
        .collect()
}

/// Removes the first effect called `name` from `owner`, then every effect
/// (on any combatant) whose parent it was, recursively. Returns whether
/// anything was removed.
pub fn remove_effect(state: &mut CombatState, owner: &str, name: &str) -> bool {
    let Some(c) = state.get_mut(owner) else {
        return false;
    };
    let Some(pos) = c.effects.iter().position(|e| e.name.eq_ignore_ascii_case(name)) else {
        return false;
    };
    let removed = c.effects.remove(pos);
    let owner_id = c.id.clone();
    let mut orphans = Vec::new();
    for other in &state.combatants {
        for e in &other.effects {
            if let Some(p) = &e.parent {
                if p.combatant.eq_ignore_ascii_case(&owner_id) && p.effect.eq_ignore_ascii_case(&removed.name) {
                    orphans.push((other.id.clone(), e.name.clone()));
                }
            }
        }
    }
    for (id, e) in orphans {
        remove_effect(state, &id, &e);
    }
    true
}

fn d20(adv: bool, dis: bool) -> DiceExpr {
    let group = match (adv, dis) {
        (true, false) => DieGroup::new(2, 20).keep(KeepMode::Highest, 1),
        (false, true) => DieGroup::new(2, 20).keep(KeepMode::Lowest, 1),
        _ => DieGroup::new(1, 20),
    };
    DiceExpr::from_terms(vec![Term::Dice {
        sign: crate::dice::Sign::Plus,
        group,
    }])
    .expect("a single die group is valid")
}

fn article(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Skill key (`athletics`) or ability (`Strength`) named by a check argument.
fn resolve_skill(arg: &str) -> Result<(String, Option<Ability>), ExecutionError> {
    if let Some(a) = Ability::parse(arg) {
        return Ok((a.full_name().to_string(), Some(a)));
    }
    let q = arg.replace(' ', "_");
    match_name(&q, SKILLS.iter().map(|(k, _)| (*k, *k)))
        .map(|k| (k.to_string(), None))
        .map_err(|_| ExecutionError::UnknownSkill(arg.to_string()))
}

/// Executes commands against combat states using one content pack.
#[derive(Debug, Clone)]
pub struct Engine {
    content: Arc<ContentIndex>,
    /// Reject damage types outside the standard thirteen.
    pub strict_damage_types: bool,
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new(Arc::new(starter_pack()))
    }
}

impl Engine {
    pub fn new(content: Arc<ContentIndex>) -> Self {
        Engine {
            content,
            strict_damage_types: false,
        }
    }

    pub fn content(&self) -> &ContentIndex {
        &self.content
    }

    /// Parses and executes one command line.
    pub fn execute_line(
        &self,
        state: &mut CombatState,
        line: &str,
        caster: Option<&str>,
    ) -> Result<ExecutionReport, ExecutionError> {
        let ast = parse_line(line)?;
        self.execute(state, &ast, caster)
    }

    /// Executes `ast` on behalf of `caster` (a combatant id; defaults to the
    /// current combatant, and is ignored for `!i` commands). On error `state`
    /// is left untouched.
    pub fn execute(
        &self,
        state: &mut CombatState,
        ast: &CommandAst,
        caster: Option<&str>,
    ) -> Result<ExecutionReport, ExecutionError> {
        self.execute_inner(state, ast, caster, None)
    }

    /// Executes with recorded die faces instead of the state's own source,
    /// then sets the source to `rng_after`, the value it had after the
    /// recorded execution. Every face must be consumed. The report matches
    /// the recorded one without consulting any generator.
    pub fn execute_recorded(
        &self,
        state: &mut CombatState,
        ast: &CommandAst,
        caster: Option<&str>,
        faces: &[u32],
        rng_after: &DieSource,
    ) -> Result<ExecutionReport, ExecutionError> {
        self.execute_inner(state, ast, caster, Some((faces, rng_after)))
    }

    fn execute_inner(
        &self,
        state: &mut CombatState,
        ast: &CommandAst,
        caster: Option<&str>,
        recorded: Option<(&[u32], &DieSource)>,
    ) -> Result<ExecutionReport, ExecutionError> {
        let mut work = state.clone();
        if let Some((faces, _)) = recorded {
            work.rng = DieSource::forced(faces.iter().copied());
        }
        work.rng.take_drawn();
        let mut report = self.run(&mut work, ast, caster)?;
        report.faces = work.rng.take_drawn();
        if let Some((faces, after)) = recorded {
            if report.faces.len() != faces.len() {
                return Err(ExecutionError::UnusedFaces(faces.len() - report.faces.len()));
            }
            work.rng = after.clone();
        }
        report.state_delta = diff_states(state, &work);
        report.mechanical_lines = crate::promptgen::render_mechanical_lines(&report);
        debug_assert_eq!(
            apply_delta(state, &report.state_delta).as_ref(),
            Ok(&work),
            "state delta must reproduce the post-state"
        );
        *state = work;
        Ok(report)
    }

    fn caster_id(
        &self,
        state: &CombatState,
        ast: &CommandAst,
        caster: Option<&str>,
    ) -> Result<String, ExecutionError> {
        match caster.filter(|_| !ast.init_scoped) {
            Some(id) => state
                .get(id)
                .map(|c| c.id.clone())
                .ok_or_else(|| ExecutionError::CasterNotFound(id.to_string())),
            None => state
                .current()
                .map(|c| c.id.clone())
                .ok_or(ExecutionError::NoCombatants),
        }
    }

    fn run(
        &self,
        state: &mut CombatState,
        ast: &CommandAst,
        caster: Option<&str>,
    ) -> Result<ExecutionReport, ExecutionError> {
        let blank = |caster: String, caster_name: String| ExecutionReport {
            ast: ast.clone(),
            caster,
            caster_name,
            ability: None,
            ability_kind: None,
            title: None,
            targets: Vec::new(),
            automation: Vec::new(),
            roll: None,
            notes: Vec::new(),
            state_delta: Vec::new(),
            mechanical_lines: Vec::new(),
            faces: Vec::new(),
        };

        let ended = state.status == CombatStatus::Ended;
        match ast.name.as_str() {
            "roll" => {
                let expr = parse_dice(ast.argument().unwrap_or_default())?;
                let r = roll(&expr, &mut state.rng)?;
                let (id, name) = match self.caster_id(state, ast, caster) {
                    Ok(id) => {
                        let name = state.get(&id).map(|c| c.acting_name().to_string()).unwrap_or_default();
                        (id, name)
                    }
                    Err(_) => (caster.unwrap_or_default().to_string(), caster.unwrap_or_default().to_string()),
                };
                let mut rep = blank(id, name);
                rep.roll = Some(r);
                return Ok(rep);
            }
            "help" => {
                let mut rep = blank(caster.unwrap_or_default().to_string(), String::new());
                rep.notes = vec![
                    "Commands: !attack, !cast, !action, !check, !save, !roll, !game hp, !init begin|next|join|end|cast|attack|action".into(),
                ];
                return Ok(rep);
            }
            "init" if ast.subcommand.as_deref() == Some("begin") => {
                if !ended {
                    return Err(ExecutionError::AlreadyStarted);
                }
                if state.combatants.is_empty() {
                    return Err(ExecutionError::NoCombatants);
                }
                state.status = CombatStatus::Active;
                state.round = 1;
                state.turn_index = 0;
                let mut rep = blank(caster.unwrap_or_default().to_string(), String::new());
                rep.notes = vec!["Combat started.".into(), turn_banner(state)?];
                return Ok(rep);
            }
            _ if ended => return Err(ExecutionError::CombatEnded),
            _ => {}
        }

        if ast.name == "init" {
            return match ast.subcommand.as_deref() {
                Some("next") => {
                    let id = self.next_turn(state)?;
                    let mut rep = blank(id.clone(), id);
                    rep.notes = vec![turn_banner(state)?];
                    Ok(rep)
                }
                Some("end") => {
                    state.status = CombatStatus::Ended;
                    let mut rep = blank(caster.unwrap_or_default().to_string(), String::new());
                    rep.notes = vec!["End of combat.".into()];
                    Ok(rep)
                }
                Some("join") => self.join(state, ast, caster, blank),
                other => Err(ExecutionError::UnsupportedSubcommand(other.unwrap_or_default().to_string())),
            };
        }

        let caster_id = self.caster_id(state, ast, caster)?;
        let caster_name = state.get(&caster_id).map(|c| c.acting_name().to_string()).unwrap_or_default();
        let mut rep = blank(caster_id.clone(), caster_name.clone());

        match ast.name.as_str() {
            "attack" | "cast" | "action" => {
                let kind = match ast.name.as_str() {
                    "attack" => AbilityKind::Attack,
                    "cast" => AbilityKind::Spell,
                    _ => AbilityKind::Action,
                };
                let sheet = &state.get(&caster_id).expect("caster resolved").statblock;
                let def = self.content.resolve_ability(
                    sheet,
                    ast.argument().unwrap_or_default(),
                    kind,
                    ast.has("-i"),
                )?;
                let targets = resolve_targets(ast, state)?;
                let repeats = match ast.flag("-rr") {
                    None => 1,
                    Some(v) => v
                        .parse::<u32>()
                        .ok()
                        .filter(|n| (1..=25).contains(n))
                        .ok_or_else(|| ExecutionError::InvalidFlag {
                            flag: "-rr".into(),
                            value: v.to_string(),
                        })?,
                };
                let dc_override = match ast.flag("-dc") {
                    None => None,
                    Some(v) => Some(v.parse::<i32>().map_err(|_| ExecutionError::InvalidFlag {
                        flag: "-dc".into(),
                        value: v.to_string(),
                    })?),
                };
                let title = match ast.flag("-title") {
                    Some(t) => t.to_string(),
                    None => match kind {
                        AbilityKind::Attack => {
                            format!("{caster_name} attacks with {} {}!", article(&def.name), def.name)
                        }
                        AbilityKind::Spell => format!("{caster_name} casts {}!", def.name),
                        AbilityKind::Action => format!("{caster_name} uses {}!", def.name),
                    },
                };
                let mut runner = Runner {
                    state,
                    caster: caster_id,
                    ability: &def,
                    adv: (ast.has("adv"), ast.has("dis")),
                    save_adv: (ast.has("sadv"), ast.has("sdis")),
                    dc_override,
                    strict_types: self.strict_damage_types,
                };
                runner.begin_concentration();
                for node in &def.automation {
                    let results = runner.run_root(node, &targets, repeats)?;
                    rep.automation.extend(results);
                }
                rep.ability = Some(def.name.clone());
                rep.ability_kind = Some(kind);
                rep.title = Some(title);
                rep.targets = targets;
            }
            "check" | "save" => {
                let arg = ast.argument().unwrap_or_default();
                let dc = match ast.flag("-dc") {
                    None => None,
                    Some(v) => Some(v.parse::<i32>().map_err(|_| ExecutionError::InvalidFlag {
                        flag: "-dc".into(),
                        value: v.to_string(),
                    })?),
                };
                let expr = d20(ast.has("adv"), ast.has("dis"));
                let sheet = state.get(&caster_id).expect("caster resolved").statblock.clone();
                let result = if ast.name == "check" {
                    let (skill, ability) = resolve_skill(arg)?;
                    let bonus = match ability {
                        Some(a) => sheet.stats.modifier(a),
                        None => sheet.skill_modifier(&skill).unwrap_or(0),
                    };
                    let r = roll(&expr.plus_constant(bonus as i64), &mut state.rng)?;
                    let name = if ability.is_some() { skill.clone() } else { skill_display_name(&skill) };
                    rep.title = Some(format!("{caster_name} makes {} {name} check!", article(&name)));
                    AutomationResult::Check {
                        skill_name: name,
                        dc,
                        did_succeed: dc.map(|dc| r.total >= dc as i64),
                        contest_roll: None,
                        contest_did_tie: None,
                        roll: r,
                    }
                } else {
                    let ability = Ability::parse(arg).ok_or_else(|| ExecutionError::UnknownAbility(arg.to_string()))?;
                    let r = roll(&expr.plus_constant(sheet.save_modifier(ability) as i64), &mut state.rng)?;
                    rep.title = Some(format!("{caster_name} makes {} {} save!", article(ability.full_name()), ability.full_name()));
                    AutomationResult::Save {
                        dc,
                        ability,
                        did_save: dc.is_none_or(|dc| r.total >= dc as i64),
                        roll: r,
                        children: Vec::new(),
                    }
                };
                rep.automation.push(AutomationResult::Target {
                    target: caster_id.clone(),
                    children: vec![result],
                });
            }
            "game" => match ast.subcommand.as_deref() {
                Some("hp") => {
                    let c = state.get_mut(&caster_id).expect("caster resolved");
                    if let Some(arg) = ast.argument() {
                        let delta: i32 = arg.parse().map_err(|_| ExecutionError::InvalidFlag {
                            flag: "hp".into(),
                            value: arg.to_string(),
                        })?;
                        if delta >= 0 {
                            apply_healing(c, delta);
                        } else {
                            c.hp += delta;
                        }
                    }
                    rep.notes = vec![render_actor_line(c)];
                }
                other => {
                    return Err(ExecutionError::UnsupportedSubcommand(other.unwrap_or_default().to_string()))
                }
            },
            other => return Err(CommandError::UnknownCommand(other.to_string()).into()),
        }
        Ok(rep)
    }

    /// Ends the current turn: ticks the current combatant's effect durations,
    /// then advances the pointer, wrapping into a new round. Returns the id
    /// of the combatant now up.
    fn next_turn(&self, state: &mut CombatState) -> Result<String, ExecutionError> {
        if state.combatants.is_empty() {
            return Err(ExecutionError::NoCombatants);
        }
        let cur = state.turn_index;
        let owner = state.combatants[cur].id.clone();
        let mut expired = Vec::new();
        for e in &mut state.combatants[cur].effects {
            if let Some(d) = e.duration_rounds.as_mut() {
                *d = d.saturating_sub(1);
                if *d == 0 {
                    expired.push(e.name.clone());
                }
            }
        }
        for name in expired {
            remove_effect(state, &owner, &name);
        }
        state.turn_index += 1;
        if state.turn_index >= state.combatants.len() {
            state.turn_index = 0;
            state.round += 1;
        }
        Ok(state.combatants[state.turn_index].id.clone())
    }

    fn join(
        &self,
        state: &mut CombatState,
        ast: &CommandAst,
        caster: Option<&str>,
        blank: impl Fn(String, String) -> ExecutionReport,
    ) -> Result<ExecutionReport, ExecutionError> {
        let who = ast
            .argument()
            .or(caster)
            .ok_or_else(|| CommandError::MissingArgument {
                command: "init join".into(),
                what: "combatant".into(),
            })?
            .to_string();
        if state.get(&who).is_some() {
            return Err(ExecutionError::AlreadyInCombat(who));
        }
        let idx = match_name(&who, state.bench.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)))
            .map_err(|_| ExecutionError::CasterNotFound(who.clone()))?;
        let mut c: Combatant = state.bench.remove(idx);
        c.initiative = match ast.flag("-p") {
            Some(v) => v.parse().map_err(|_| ExecutionError::InvalidFlag {
                flag: "-p".into(),
                value: v.to_string(),
            })?,
            None => {
                let dex = c.statblock.stats.modifier(Ability::Dex) as i64;
                roll(&d20(false, false).plus_constant(dex), &mut state.rng)?.total as i32
            }
        };
        let current = state.current().map(|x| x.id.clone());
        let (id, name, init) = (c.id.clone(), c.acting_name().to_string(), c.initiative);
        state.combatants.push(c);
        state.sort_initiative();
        if let Some(cur) = current {
            state.turn_index = state.index_of(&cur).unwrap_or(0);
        }
        let mut rep = blank(id.clone(), name);
        rep.notes = vec![format!("{id} joined combat with initiative {init}.")];
        Ok(rep)
    }

    /// Handles an effect button: the pressing combatant drops the effect that
    /// carries the button (and anything hanging off it).
    pub fn press_button(
        &self,
        state: &mut CombatState,
        combatant: &str,
        label: &str,
    ) -> Result<String, ExecutionError> {
        let c = state
            .get(combatant)
            .ok_or_else(|| ExecutionError::CasterNotFound(combatant.to_string()))?;
        let effect = c
            .effects
            .iter()
            .find(|e| e.buttons.iter().any(|b| b.eq_ignore_ascii_case(label)))
            .map(|e| e.name.clone())
            .ok_or_else(|| ExecutionError::NoSuchButton {
                combatant: combatant.to_string(),
                label: label.to_string(),
            })?;
        let id = c.id.clone();
        remove_effect(state, &id, &effect);
        Ok(effect)
    }
}

#[cfg(test)]
mod tests;
