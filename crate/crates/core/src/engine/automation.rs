//! Walks an ability's automation tree, rolling dice and mutating state.

use crate::content::{AbilityDef, AutomationNode, BonusSource, DcSource, DiceSource, Modifier, TargetMode};
use crate::dice::{roll, DiceExpr};
use crate::statecore::{apply_damage, apply_healing, grant_temp_hp, ActiveEffect, CombatState, EffectParent, StatBlock};

use super::{d20, remove_effect, skill_display_name, AutomationResult, ExecutionError};

#[derive(Debug, Clone, Copy, Default)]
struct Ctx {
    /// Outcome of the nearest enclosing save.
    did_save: Option<bool>,
    in_crit: bool,
}

pub(super) struct Runner<'a> {
    pub state: &'a mut CombatState,
    pub caster: String,
    pub ability: &'a AbilityDef,
    /// (advantage, disadvantage) on the caster's attack rolls.
    pub adv: (bool, bool),
    /// (advantage, disadvantage) on targets' saving throws.
    pub save_adv: (bool, bool),
    pub dc_override: Option<i32>,
    pub strict_types: bool,
}

impl Runner<'_> {
    fn sheet(&self) -> &StatBlock {
        &self.state.get(&self.caster).expect("caster exists").statblock
    }

    fn no_weapon(&self) -> ExecutionError {
        ExecutionError::NoWeapon {
            caster: self.caster.clone(),
            ability: self.ability.name.clone(),
        }
    }

    /// Concentration abilities replace whatever the caster was concentrating on.
    pub fn begin_concentration(&mut self) {
        let Some(rounds) = self.ability.concentration_rounds else {
            return;
        };
        let previous: Vec<String> = self
            .state
            .get(&self.caster)
            .map(|c| c.effects.iter().filter(|e| e.concentration).map(|e| e.name.clone()).collect())
            .unwrap_or_default();
        for name in previous {
            remove_effect(self.state, &self.caster, &name);
        }
        let mut effect = ActiveEffect::named(self.ability.name.clone());
        effect.duration_rounds = Some(rounds);
        effect.concentration = true;
        self.state.get_mut(&self.caster).expect("caster exists").effects.push(effect);
    }

    pub fn run_root(
        &mut self,
        node: &AutomationNode,
        targets: &[String],
        repeats: u32,
    ) -> Result<Vec<AutomationResult>, ExecutionError> {
        let AutomationNode::Target { mode, children } = node else {
            unreachable!("content validation guarantees target roots");
        };
        let (list, repeats) = match mode {
            TargetMode::Each => (targets.to_vec(), repeats),
            TargetMode::Caster => (vec![self.caster.clone()], 1),
        };
        let mut out = Vec::new();
        for t in &list {
            for _ in 0..repeats {
                let children = self.run_nodes(children, t, Ctx::default())?;
                out.push(AutomationResult::Target {
                    target: t.clone(),
                    children,
                });
            }
        }
        Ok(out)
    }

    fn run_nodes(
        &mut self,
        nodes: &[AutomationNode],
        target: &str,
        ctx: Ctx,
    ) -> Result<Vec<AutomationResult>, ExecutionError> {
        nodes.iter().map(|n| self.run_node(n, target, ctx)).collect()
    }

    fn modifier(&self, m: Modifier) -> i64 {
        let sheet = self.sheet();
        match m {
            Modifier::None => 0,
            Modifier::Spellcasting => sheet.spell_modifier() as i64,
            Modifier::Level => sheet.total_level() as i64,
            Modifier::Fixed(n) => n as i64,
        }
    }

    fn dice(&self, src: &DiceSource) -> Result<DiceExpr, ExecutionError> {
        match src {
            DiceSource::Expr(e) => Ok(e.clone()),
            DiceSource::Weapon(_) => self
                .sheet()
                .find_attack(&self.ability.name)
                .map(|a| a.damage.clone())
                .ok_or_else(|| self.no_weapon()),
        }
    }

    fn run_node(&mut self, node: &AutomationNode, target: &str, ctx: Ctx) -> Result<AutomationResult, ExecutionError> {
        Ok(match node {
            AutomationNode::Target { .. } => unreachable!("targets only appear at the root"),
            AutomationNode::Attack { bonus, hit, miss } => {
                let sheet = self.sheet();
                let bonus = match bonus {
                    BonusSource::Weapon => match sheet.find_attack(&self.ability.name) {
                        Some(a) => a.to_hit,
                        None => {
                            let s = &sheet.stats;
                            let best = s
                                .modifier(crate::statecore::Ability::Str)
                                .max(s.modifier(crate::statecore::Ability::Dex));
                            sheet.proficiency + best
                        }
                    },
                    BonusSource::Spell => sheet.spellbook.spell_bonus,
                    BonusSource::Fixed(n) => *n,
                };
                let expr = d20(self.adv.0, self.adv.1).plus_constant(bonus as i64);
                let r = roll(&expr, &mut self.state.rng)?;
                let natural = r.natural().unwrap_or(0);
                let ac = self.state.get(target).expect("target resolved").statblock.armor_class;
                let did_crit = natural == 20;
                let did_hit = did_crit || (natural != 1 && r.total >= ac as i64);
                let children = if did_hit {
                    self.run_nodes(hit, target, Ctx { in_crit: did_crit, ..ctx })?
                } else {
                    self.run_nodes(miss, target, ctx)?
                };
                AutomationResult::Attack {
                    did_hit,
                    did_crit,
                    roll: r,
                    children,
                }
            }
            AutomationNode::Save { ability, dc, fail, success } => {
                let dc = self.dc_override.unwrap_or(match dc {
                    DcSource::CasterSpellDc => self.sheet().spellbook.dc,
                    DcSource::Fixed(n) => *n,
                });
                let modifier = self.state.get(target).expect("target resolved").statblock.save_modifier(*ability);
                let expr = d20(self.save_adv.0, self.save_adv.1).plus_constant(modifier as i64);
                let r = roll(&expr, &mut self.state.rng)?;
                let did_save = r.total >= dc as i64;
                let branch = if did_save { success } else { fail };
                let children = self.run_nodes(branch, target, Ctx { did_save: Some(did_save), in_crit: false })?;
                AutomationResult::Save {
                    dc: Some(dc),
                    ability: *ability,
                    did_save,
                    roll: r,
                    children,
                }
            }
            AutomationNode::Damage { dice, modifier, damage_type, half_on_save } => {
                let mut expr = self.dice(dice)?;
                if ctx.in_crit {
                    expr = expr.with_dice_multiplied(2);
                }
                let expr = expr.plus_constant(self.modifier(*modifier));
                let r = roll(&expr, &mut self.state.rng)?;
                let mut amount = r.total.max(0) as i32;
                if *half_on_save && ctx.did_save == Some(true) {
                    amount /= 2;
                }
                let strict = self.strict_types;
                let t = self.state.get_mut(target).expect("target resolved");
                let damage = if damage_type.eq_ignore_ascii_case("healing") {
                    -apply_healing(t, amount)
                } else {
                    apply_damage(t, amount, damage_type, strict)?.applied
                };
                AutomationResult::Damage {
                    damage,
                    in_crit: ctx.in_crit,
                }
            }
            AutomationNode::TempHp { dice, modifier } => {
                let expr = self.dice(dice)?.plus_constant(self.modifier(*modifier));
                let r = roll(&expr, &mut self.state.rng)?;
                let amount = r.total.max(0) as i32;
                grant_temp_hp(self.state.get_mut(target).expect("target resolved"), amount);
                AutomationResult::TempHp { amount }
            }
            AutomationNode::IEffect { name, duration_rounds, parent_link, buttons } => {
                let parent = (*parent_link && self.ability.concentration_rounds.is_some()).then(|| EffectParent {
                    combatant: self.caster.clone(),
                    effect: self.ability.name.clone(),
                });
                let t = self.state.get_mut(target).expect("target resolved");
                let effect = ActiveEffect {
                    name: name.clone(),
                    duration_rounds: *duration_rounds,
                    parent,
                    buttons: buttons.clone(),
                    concentration: false,
                };
                // Reapplying an effect refreshes it in place.
                match t.effects.iter_mut().find(|e| e.name.eq_ignore_ascii_case(name)) {
                    Some(existing) => *existing = effect,
                    None => t.effects.push(effect),
                }
                AutomationResult::IEffect { effect: name.clone() }
            }
            AutomationNode::RemoveIeffect { name } => {
                remove_effect(self.state, target, name);
                AutomationResult::RemoveIEffect { effect: name.clone() }
            }
            AutomationNode::Check { skill, dc, contest_skill } => {
                let t = &self.state.get(target).expect("target resolved").statblock;
                let bonus = t.skill_modifier(skill).unwrap_or(0);
                let expr = d20(false, false).plus_constant(bonus as i64);
                let r = roll(&expr, &mut self.state.rng)?;
                let (contest_roll, did_succeed, tie) = match contest_skill {
                    Some(cs) => {
                        let cb = self.sheet().skill_modifier(cs).unwrap_or(0);
                        let expr = d20(self.adv.0, self.adv.1).plus_constant(cb as i64);
                        let c = roll(&expr, &mut self.state.rng)?;
                        // Ties keep the status quo: the target resists.
                        let ok = r.total >= c.total;
                        let tie = r.total == c.total;
                        (Some(c), Some(ok), Some(tie))
                    }
                    None => (None, dc.map(|dc| r.total >= dc as i64), None),
                };
                AutomationResult::Check {
                    skill_name: skill_display_name(skill),
                    dc: *dc,
                    did_succeed,
                    contest_roll,
                    contest_did_tie: tie,
                    roll: r,
                }
            }
        })
    }
}
