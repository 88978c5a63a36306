//! Data-defined abilities: attacks, spells and actions described as automation
//! trees, indexed for case-insensitive and unambiguous-prefix lookup.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dice::DiceExpr;
use crate::statecore::{from_value_with_path, Ability, AttackRef, SchemaError, StatBlock};

const STARTER_PACK: &str = include_str!("../fixtures/starter_pack.json");

/// Where an attack roll's bonus comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonusSource {
    /// To-hit of the caster's matching weapon attack.
    Weapon,
    /// Caster's spell attack bonus.
    Spell,
    Fixed(i32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcSource {
    CasterSpellDc,
    Fixed(i32),
}

/// Dice for damage/healing/temp HP nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiceSource {
    /// The literal string `"weapon"`: damage dice of the caster's matching attack.
    Weapon(WeaponDice),
    Expr(DiceExpr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeaponDice {
    Weapon,
}

/// Flat modifier added to rolled damage or healing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modifier {
    #[default]
    None,
    /// Spellcasting ability modifier.
    Spellcasting,
    /// Total character level.
    Level,
    Fixed(i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    #[default]
    Each,
    #[serde(rename = "self")]
    Caster,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AutomationNode {
    Target {
        #[serde(default)]
        mode: TargetMode,
        #[serde(default)]
        children: Vec<AutomationNode>,
    },
    Attack {
        #[serde(default = "weapon_bonus")]
        bonus: BonusSource,
        #[serde(default)]
        hit: Vec<AutomationNode>,
        #[serde(default)]
        miss: Vec<AutomationNode>,
    },
    Save {
        ability: Ability,
        #[serde(default = "caster_dc")]
        dc: DcSource,
        #[serde(default)]
        fail: Vec<AutomationNode>,
        #[serde(default)]
        success: Vec<AutomationNode>,
    },
    Damage {
        dice: DiceSource,
        #[serde(default)]
        modifier: Modifier,
        /// Damage type; `healing` restores hit points instead.
        damage_type: String,
        #[serde(default)]
        half_on_save: bool,
    },
    #[serde(rename = "temphp")]
    TempHp {
        dice: DiceSource,
        #[serde(default)]
        modifier: Modifier,
    },
    #[serde(rename = "ieffect")]
    IEffect {
        name: String,
        #[serde(default)]
        duration_rounds: Option<u32>,
        /// Links the effect to the caster's concentration effect.
        #[serde(default)]
        parent_link: bool,
        #[serde(default)]
        buttons: Vec<String>,
    },
    RemoveIeffect {
        name: String,
    },
    Check {
        skill: String,
        #[serde(default)]
        dc: Option<i32>,
        #[serde(default)]
        contest_skill: Option<String>,
    },
}

fn weapon_bonus() -> BonusSource {
    BonusSource::Weapon
}

fn caster_dc() -> DcSource {
    DcSource::CasterSpellDc
}

impl AutomationNode {
    pub fn children(&self) -> Vec<&AutomationNode> {
        match self {
            AutomationNode::Target { children, .. } => children.iter().collect(),
            AutomationNode::Attack { hit, miss, .. } => hit.iter().chain(miss).collect(),
            AutomationNode::Save { fail, success, .. } => fail.iter().chain(success).collect(),
            _ => Vec::new(),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            AutomationNode::Target { .. } => "target",
            AutomationNode::Attack { .. } => "attack",
            AutomationNode::Save { .. } => "save",
            AutomationNode::Damage { .. } => "damage",
            AutomationNode::TempHp { .. } => "temphp",
            AutomationNode::IEffect { .. } => "ieffect",
            AutomationNode::RemoveIeffect { .. } => "remove_ieffect",
            AutomationNode::Check { .. } => "check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbilityKind {
    Attack,
    Spell,
    Action,
}

impl AbilityKind {
    fn list_name(self) -> &'static str {
        match self {
            AbilityKind::Attack => "attack list",
            AbilityKind::Spell => "spellbook",
            AbilityKind::Action => "action list",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbilityDef {
    pub name: String,
    pub kind: AbilityKind,
    /// Root nodes; each must be a `target` node.
    pub automation: Vec<AutomationNode>,
    #[serde(default)]
    pub text: String,
    /// Concentration duration: the caster gains an effect named after the
    /// ability, which `parent_link` effects hang off.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration_rounds: Option<u32>,
    /// Provenance of the numeric parameters (`srd`, `fixture`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl AbilityDef {
    /// Default automation for a weapon attack defined only on a stat block.
    pub fn from_attack_ref(a: &AttackRef) -> Self {
        AbilityDef {
            name: a.name.clone(),
            kind: AbilityKind::Attack,
            automation: vec![AutomationNode::Target {
                mode: TargetMode::Each,
                children: vec![AutomationNode::Attack {
                    bonus: BonusSource::Weapon,
                    hit: vec![AutomationNode::Damage {
                        dice: DiceSource::Weapon(WeaponDice::Weapon),
                        modifier: Modifier::None,
                        damage_type: a.damage_type.clone(),
                        half_on_save: false,
                    }],
                    miss: vec![],
                }],
            }],
            text: String::new(),
            concentration_rounds: None,
            source: Some("statblock".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentPack {
    #[serde(default)]
    pub name: String,
    pub abilities: Vec<AbilityDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContentError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("duplicate ability name '{0}'")]
    DuplicateName(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("'{0}' not found")]
    NotFound(String),
    #[error("'{query}' is ambiguous: {}", .candidates.join(", "))]
    Ambiguous {
        query: String,
        candidates: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("{caster} does not know '{name}' (not in {list})")]
    NotKnown {
        caster: String,
        name: String,
        list: &'static str,
    },
    #[error(transparent)]
    Lookup(#[from] LookupError),
}

/// Exact-then-unique-prefix matching over names, case-insensitive.
pub(crate) fn match_name<'a, T>(
    query: &str,
    items: impl IntoIterator<Item = (&'a str, T)> + Clone,
) -> Result<T, LookupError> {
    let q = query.trim().to_lowercase();
    if q.is_empty() {
        return Err(LookupError::NotFound(query.to_string()));
    }
    if let Some((_, t)) = items.clone().into_iter().find(|(n, _)| n.to_lowercase() == q) {
        return Ok(t);
    }
    let mut hits: Vec<(&str, T)> = items
        .into_iter()
        .filter(|(n, _)| n.to_lowercase().starts_with(&q))
        .collect();
    match hits.len() {
        0 => Err(LookupError::NotFound(query.to_string())),
        1 => Ok(hits.pop().unwrap().1),
        _ => Err(LookupError::Ambiguous {
            query: query.to_string(),
            candidates: hits.into_iter().map(|(n, _)| n.to_string()).collect(),
        }),
    }
}

/// Immutable index over a loaded content pack.
#[derive(Debug, Clone)]
pub struct ContentIndex {
    pack: ContentPack,
    by_name: HashMap<String, usize>,
}

impl ContentIndex {
    pub fn pack(&self) -> &ContentPack {
        &self.pack
    }

    pub fn len(&self) -> usize {
        self.pack.abilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pack.abilities.is_empty()
    }

    pub fn get_exact(&self, name: &str) -> Option<&AbilityDef> {
        self.by_name
            .get(&name.to_lowercase())
            .map(|&i| &self.pack.abilities[i])
    }

    /// Case-insensitive exact match, else unambiguous prefix, optionally
    /// restricted to one kind.
    pub fn lookup(&self, name: &str, kind: Option<AbilityKind>) -> Result<&AbilityDef, LookupError> {
        let items = self
            .pack
            .abilities
            .iter()
            .filter(|a| kind.is_none_or(|k| a.kind == k))
            .map(|a| (a.name.as_str(), a));
        match_name(name, items)
    }

    /// Resolves an ability for a caster. Spells must be in the spellbook
    /// unless `ignore_requirements`; attacks resolve through the caster's
    /// attack list (falling back to the stat block's own damage when the pack
    /// has no automation for that weapon); actions must be in the action list.
    pub fn resolve_ability(
        &self,
        caster: &StatBlock,
        name: &str,
        kind: AbilityKind,
        ignore_requirements: bool,
    ) -> Result<AbilityDef, ResolveError> {
        if kind == AbilityKind::Attack {
            let attack = match_name(name, caster.attacks.iter().map(|a| (a.name.as_str(), a)));
            return match attack {
                Ok(a) => Ok(self
                    .get_exact(&a.name)
                    .filter(|d| d.kind == AbilityKind::Attack)
                    .cloned()
                    .unwrap_or_else(|| AbilityDef::from_attack_ref(a))),
                Err(LookupError::NotFound(_)) if ignore_requirements => {
                    Ok(self.lookup(name, Some(kind))?.clone())
                }
                Err(LookupError::NotFound(_)) => {
                    // Distinguish "no such weapon anywhere" from "not yours".
                    let def = self.lookup(name, Some(kind))?;
                    Err(ResolveError::NotKnown {
                        caster: caster.name.clone(),
                        name: def.name.clone(),
                        list: kind.list_name(),
                    })
                }
                Err(e) => Err(e.into()),
            };
        }
        let def = self.lookup(name, Some(kind))?;
        let known = match kind {
            AbilityKind::Spell => caster.knows_spell(&def.name),
            AbilityKind::Action => caster.has_action(&def.name),
            AbilityKind::Attack => unreachable!(),
        };
        if !known && !ignore_requirements {
            return Err(ResolveError::NotKnown {
                caster: caster.name.clone(),
                name: def.name.clone(),
                list: kind.list_name(),
            });
        }
        Ok(def.clone())
    }
}

fn validate_tree(nodes: &[AutomationNode], path: &str, under_save: bool, problems: &mut Vec<(String, String)>) {
    for (i, node) in nodes.iter().enumerate() {
        let here = format!("{path}[{i}]");
        match node {
            AutomationNode::Target { children, .. } => {
                validate_tree(children, &format!("{here}.children"), under_save, problems)
            }
            AutomationNode::Attack { hit, miss, .. } => {
                validate_tree(hit, &format!("{here}.hit"), under_save, problems);
                validate_tree(miss, &format!("{here}.miss"), under_save, problems);
            }
            AutomationNode::Save { fail, success, .. } => {
                validate_tree(fail, &format!("{here}.fail"), true, problems);
                validate_tree(success, &format!("{here}.success"), true, problems);
            }
            AutomationNode::Damage { half_on_save, .. } if *half_on_save && !under_save => {
                problems.push((format!("{here}.half_on_save"), "requires a save ancestor".into()));
            }
            AutomationNode::IEffect { name, .. } | AutomationNode::RemoveIeffect { name } if name.trim().is_empty() => {
                problems.push((format!("{here}.name"), "must not be empty".into()));
            }
            _ => {}
        }
    }
}

/// Loads a content pack document into an index.
pub fn load_content(doc: &serde_json::Value) -> Result<ContentIndex, ContentError> {
    let pack: ContentPack = from_value_with_path(doc)?;
    let mut problems = Vec::new();
    for (i, a) in pack.abilities.iter().enumerate() {
        if a.name.trim().is_empty() {
            problems.push((format!("abilities[{i}].name"), "must not be empty".into()));
        }
        for (j, root) in a.automation.iter().enumerate() {
            if !matches!(root, AutomationNode::Target { .. }) {
                problems.push((
                    format!("abilities[{i}].automation[{j}]"),
                    format!("root nodes must be targets, found {}", root.type_name()),
                ));
            }
        }
        validate_tree(&a.automation, &format!("abilities[{i}].automation"), false, &mut problems);
    }
    if !problems.is_empty() {
        return Err(SchemaError { problems }.into());
    }
    let mut by_name = HashMap::new();
    for (i, a) in pack.abilities.iter().enumerate() {
        if by_name.insert(a.name.to_lowercase(), i).is_some() {
            return Err(ContentError::DuplicateName(a.name.clone()));
        }
    }
    Ok(ContentIndex { pack, by_name })
}

/// The bundled starter pack: every ability used by the bundled fixtures.
pub fn starter_pack() -> ContentIndex {
    let doc: serde_json::Value =
        serde_json::from_str(STARTER_PACK).expect("bundled starter pack is valid JSON");
    load_content(&doc).expect("bundled starter pack is schema-valid")
}
