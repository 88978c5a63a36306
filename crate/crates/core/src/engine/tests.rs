use super::*;
use crate::dice::DieSource;
use crate::fixtures::combat;

const CAUSE_FEAR: &str = r#"!i cast "Cause Fear" -dc 15 -t dd1 -t dd3 -t dd4 -t dd5 -t dd6 -t dd7 -t dd8 sadv -i -title "Pipes of Haunting!" -thumb https://cdn.discordapp.com/attachments/979075315706003459/1005867411385364480/giphy_6.gif"#;
const H_FACES: [u32; 14] = [15, 12, 5, 2, 9, 16, 2, 8, 19, 18, 20, 17, 9, 3];

fn forced(state: &mut CombatState, faces: &[u32]) {
    state.rng = DieSource::forced(faces.iter().copied());
}

#[test]
fn cause_fear_replay() {
    let engine = Engine::default();
    let mut s = combat("appendix_h").unwrap();
    forced(&mut s, &H_FACES);
    let rep = engine.execute_line(&mut s, CAUSE_FEAR, None).unwrap();
    assert_eq!(rep.caster, "Umbrage");
    let frightened: Vec<&str> = s
        .combatants
        .iter()
        .filter(|c| c.has_effect("Frightened (Cause Fear)"))
        .map(|c| c.id.as_str())
        .collect();
    assert_eq!(frightened, ["DD8", "DD3", "DD5"]);
    for id in ["DD3", "DD5", "DD8"] {
        let e = s.get(id).unwrap().effects.iter().find(|e| e.name == "Frightened (Cause Fear)").unwrap();
        assert_eq!(e.duration_rounds, Some(10));
        assert_eq!(e.buttons, ["Resist Fear"]);
        assert_eq!(e.parent.as_ref().unwrap().effect, "Cause Fear");
    }
    assert!(s.get("Umbrage").unwrap().has_effect("Cause Fear"));
    assert_eq!(
        rep.mechanical_lines,
        [
            "Pipes of Haunting!",
            "DD1 rolled a Wisdom save and succeeded.",
            "DD3 rolled a Wisdom save but failed.",
            "DD3 gained Frightened (Cause Fear).",
            "DD4 rolled a Wisdom save and succeeded.",
            "DD5 rolled a Wisdom save but failed.",
            "DD5 gained Frightened (Cause Fear).",
            "DD6 rolled a Wisdom save and succeeded.",
            "DD7 rolled a Wisdom save and succeeded.",
            "DD8 rolled a Wisdom save but failed.",
            "DD8 gained Frightened (Cause Fear).",
        ]
    );
    let rolls: Vec<String> = rep
        .automation
        .iter()
        .flat_map(|t| t.walk())
        .filter_map(|r| match r {
            AutomationResult::Save { roll, .. } => Some(crate::dice::format_roll(roll)),
            _ => None,
        })
        .collect();
    assert_eq!(rolls[0], "2d20kh1 (15, 12) + 1 = 16");
    assert_eq!(rolls[6], "2d20kh1 (9, 3) + 1 = 10");
    assert_eq!(rep.faces, H_FACES);
}

#[test]
fn cause_fear_expires_with_its_children() {
    let engine = Engine::default();
    let mut s = combat("appendix_h").unwrap();
    forced(&mut s, &H_FACES);
    engine.execute_line(&mut s, CAUSE_FEAR, None).unwrap();
    s.rng = DieSource::seeded(1);
    // Cause Fear ticks down at the end of each of Umbrage's turns.
    let n = s.combatants.len();
    for _ in 0..(10 * n) {
        assert!(s.get("DD3").unwrap().has_effect("Frightened (Cause Fear)") || !s.get("Umbrage").unwrap().has_effect("Cause Fear"));
        engine.execute_line(&mut s, "!init next", None).unwrap();
    }
    assert!(!s.get("Umbrage").unwrap().has_effect("Cause Fear"));
    assert!(s.combatants.iter().all(|c| !c.has_effect("Frightened (Cause Fear)")));
}

#[test]
fn button_press_removes_the_effect() {
    let engine = Engine::default();
    let mut s = combat("appendix_h").unwrap();
    forced(&mut s, &H_FACES);
    engine.execute_line(&mut s, CAUSE_FEAR, None).unwrap();
    assert_eq!(engine.press_button(&mut s, "dd3", "resist fear").unwrap(), "Frightened (Cause Fear)");
    assert!(!s.get("DD3").unwrap().has_effect("Frightened (Cause Fear)"));
    assert!(matches!(engine.press_button(&mut s, "DD3", "Resist Fear"), Err(ExecutionError::NoSuchButton { .. })));
}

#[test]
fn filgo_greataxe_hand_trace() {
    // Greataxe on Filgo's sheet: +5 to hit, 1d12+2 slashing. DW1 is AC 14.
    // d20 face 10: 10 + 5 = 15 >= 14, a hit. d12 face 12: 12 + 2 = 14 damage.
    let engine = Engine::default();
    let mut s = combat("appendix_f").unwrap();
    s.get_mut("DW1").unwrap().hp = 37;
    forced(&mut s, &[10, 12]);
    let rep = engine.execute_line(&mut s, "!a greataxe -t dw1", None).unwrap();
    assert_eq!(s.get("DW1").unwrap().hp, 37 - 14);
    assert_eq!(
        rep.mechanical_lines,
        [
            "Filgo Bitterfoot attacks with a Greataxe!",
            "Filgo Bitterfoot attacked DW1 and hit for 14 damage."
        ]
    );
    assert_eq!(
        rep.state_delta,
        vec![
            StateChange {
                combatant: None,
                field: "rng".into(),
                old: serde_json::json!({"mode": "forced", "queue": [10, 12]}),
                new: serde_json::json!({"mode": "forced", "queue": []}),
            },
            StateChange {
                combatant: Some("DW1".into()),
                field: "hp".into(),
                old: 37.into(),
                new: 23.into(),
            }
        ]
    );
}

#[test]
fn natural_twenty_doubles_dice_and_natural_one_misses() {
    let engine = Engine::default();
    let mut s = combat("appendix_f").unwrap();
    s.get_mut("DW1").unwrap().hp = 37;
    forced(&mut s, &[20, 7, 5]);
    let rep = engine.execute_line(&mut s, "!a greataxe -t dw1", None).unwrap();
    // 2d12 (7, 5) + 2
    assert_eq!(s.get("DW1").unwrap().hp, 37 - 14);
    assert!(rep.mechanical_lines[1].contains("critically hit for 14"));
    match &rep.automation[0].children()[0] {
        AutomationResult::Attack { did_hit, did_crit, children, .. } => {
            assert!(did_hit & did_crit);
            assert_eq!(children[0], AutomationResult::Damage { damage: 14, in_crit: true });
        }
        other => panic!("{other:?}"),
    }
    forced(&mut s, &[1]);
    // +5 would beat nothing with a natural 1, even against AC 1.
    s.get_mut("DW1").unwrap().statblock.armor_class = 1;
    let rep = engine.execute_line(&mut s, "!a greataxe -t dw1", None).unwrap();
    assert_eq!(rep.mechanical_lines[1], "Filgo Bitterfoot attacked DW1 but missed.");
}

#[test]
fn aleksandra_misses_the_hag() {
    let engine = Engine::default();
    let mut s = combat("appendix_e").unwrap();
    forced(&mut s, &[5]);
    let rep = engine.execute_line(&mut s, "!a mace -t sh1", None).unwrap();
    assert_eq!(rep.mechanical_lines, ["Aleksandra attacks with a Mace!", "Aleksandra attacked SH1 but missed."]);
}

#[test]
fn init_next_wraps_to_a_new_round() {
    let engine = Engine::default();
    let mut s = combat("appendix_f").unwrap();
    s.turn_index = s.combatants.len() - 1;
    let rep = engine.execute_line(&mut s, "!init next", None).unwrap();
    assert_eq!((s.turn_index, s.round), (0, 2));
    assert_eq!(rep.mechanical_lines, ["Initiative 17 (round 2): Filgo Bitterfoot"]);
    assert_eq!(turn_banner(&combat("appendix_h").unwrap()).unwrap(), "Initiative 12 (round 1): Umbrage");
    let empty = CombatState::new(vec![], DieSource::seeded(0));
    assert_eq!(turn_banner(&empty), Err(ExecutionError::NoCombatants));
}

#[test]
fn target_resolution() {
    let s = combat("appendix_d").unwrap();
    let ids = |line: &str| resolve_targets(&parse_line(line).unwrap(), &s);
    assert_eq!(ids("!cast fireball -t or1 -t or2 -t or1").unwrap(), ["OR1", "OR2", "OR1"]);
    assert_eq!(ids("!cast fireball -t calti").unwrap(), ["Calti Xihooda"]);
    assert!(matches!(ids("!cast fireball -t o"), Err(ExecutionError::AmbiguousTarget { .. })));
    assert_eq!(ids("!cast fireball -t zz"), Err(ExecutionError::TargetNotFound("zz".into())));
}

#[test]
fn failures_leave_state_untouched() {
    let engine = Engine::default();
    let mut s = combat("appendix_d").unwrap();
    let before = s.clone();
    for line in [
        "!cast wish -t or1",
        "!cast fireball -t nobody",
        "!cast \"word of radiance\"",
        "!a claws -t or1",
        "!check juggling",
        "!save luck",
    ] {
        assert!(engine.execute_line(&mut s, line, Some("Noxxis Blazehammer")).is_err(), "{line}");
        assert_eq!(s, before, "{line}");
    }
    // Forced dice that run out midway also roll back.
    forced(&mut s, &[10]);
    let snapshot = s.clone();
    assert!(matches!(
        engine.execute_line(&mut s, "!cast fireball -t or1 -t or2", None),
        Err(ExecutionError::Dice(DiceError::ForcedSequenceExhausted))
    ));
    assert_eq!(s, snapshot);
}

#[test]
fn spellbook_gates_casting_unless_ignored() {
    let engine = Engine::default();
    let mut s = combat("appendix_d").unwrap();
    s.get_mut("Noxxis Blazehammer").unwrap().statblock.spellbook.spells.retain(|x| x != "Fireball");
    let err = engine.execute_line(&mut s, "!cast fireball -t or1", None).unwrap_err();
    assert!(matches!(err, ExecutionError::Resolve(ResolveError::NotKnown { .. })));
    engine.execute_line(&mut s, "!cast fireball -t or1 -i", None).unwrap();
    engine.execute_line(&mut s, "!cast \"burning hands\" -t or1 -t or2", None).unwrap();
}

#[test]
fn fireball_halves_on_save() {
    let engine = Engine::default();
    let mut s = combat("appendix_d").unwrap();
    // OR1 DEX save +1 vs DC 15: face 20 saves, then 8d6 all sixes = 48, halved 24.
    forced(&mut s, &[20, 6, 6, 6, 6, 6, 6, 6, 6]);
    let rep = engine.execute_line(&mut s, "!cast fireball -t or1", None).unwrap();
    assert_eq!(s.get("OR1").unwrap().hp, 13 - 24);
    assert_eq!(
        rep.mechanical_lines,
        [
            "Noxxis Blazehammer casts Fireball!",
            "OR1 rolled a Dexterity save and succeeded.",
            "OR1 took 24 damage."
        ]
    );
}

#[test]
fn healing_and_self_targets() {
    let engine = Engine::default();
    let mut s = combat("appendix_f").unwrap();
    s.get_mut("Filgo Bitterfoot").unwrap().hp = 30;
    // Second Wind: 1d10 + fighter level 5.
    forced(&mut s, &[4]);
    let rep = engine.execute_line(&mut s, "!action \"second wind\"", None).unwrap();
    assert_eq!(s.get("Filgo Bitterfoot").unwrap().hp, 39);
    assert_eq!(rep.mechanical_lines[1], "Filgo Bitterfoot regained 9 hit points.");
}

#[test]
fn rr_repeats_per_target() {
    let engine = Engine::default();
    let mut s = combat("appendix_f").unwrap();
    forced(&mut s, &[1, 1, 1]);
    let rep = engine.execute_line(&mut s, "!a longbow -t dw1 -rr 3", None).unwrap();
    assert_eq!(rep.automation.len(), 3);
    assert!(engine.execute_line(&mut s, "!a longbow -t dw1 -rr 0", None).is_err());
}

#[test]
fn checks_saves_rolls_and_game() {
    let engine = Engine::default();
    let mut s = combat("appendix_f").unwrap();
    forced(&mut s, &[10, 3, 17, 4, 2]);
    let rep = engine.execute_line(&mut s, "!check athletics -dc 15", None).unwrap();
    assert_eq!(rep.mechanical_lines, ["Filgo Bitterfoot makes an Athletics check!", "Filgo Bitterfoot rolled a Athletics check and succeeded."]);
    let rep = engine.execute_line(&mut s, "!save dex -dc 12", None).unwrap();
    assert_eq!(rep.mechanical_lines[1], "Filgo Bitterfoot rolled a Dexterity save but failed.");
    let rep = engine.execute_line(&mut s, "!roll 1d20+2", None).unwrap();
    assert_eq!(rep.mechanical_lines, ["1d20 (17) + 2 = 19"]);
    let rep = engine.execute_line(&mut s, "!roll 2d6", None).unwrap();
    assert_eq!(rep.mechanical_lines, ["2d6 (4, 2) = 6"]);
    let rep = engine.execute_line(&mut s, "!g hp -5", None).unwrap();
    assert_eq!(rep.mechanical_lines, ["- Filgo Bitterfoot (Mountain Dwarf; Fighter 5) <38/43 HP; Injured>"]);
}

#[test]
fn join_and_end() {
    let engine = Engine::default();
    let mut s = combat("appendix_f").unwrap();
    let mut extra = s.combatants[1].clone();
    extra.id = "DW2".into();
    s.bench.push(extra);
    engine.execute_line(&mut s, "!init join DW2 -p 20", None).unwrap();
    assert_eq!(s.combatants[0].id, "DW2");
    assert_eq!(s.current().unwrap().id, "Filgo Bitterfoot");
    engine.execute_line(&mut s, "!init end", None).unwrap();
    assert_eq!(engine.execute_line(&mut s, "!a greataxe -t dw1", None).unwrap_err(), ExecutionError::CombatEnded);
    engine.execute_line(&mut s, "!init begin", None).unwrap();
    assert_eq!(s.status, CombatStatus::Active);
    assert_eq!(engine.execute_line(&mut s, "!init begin", None).unwrap_err(), ExecutionError::AlreadyStarted);
}

#[test]
fn unknown_flags_do_not_block_execution() {
    let engine = Engine::default();
    let mut s = combat("appendix_f").unwrap();
    let rep = engine.execute_line(&mut s, "!a greataxe -t dw1 -foo bar", None).unwrap();
    assert_eq!(rep.ast.warnings, ["-foo", "bar"]);
}

#[test]
fn identical_inputs_give_identical_reports() {
    let engine = Engine::default();
    let run = || {
        let mut s = combat("appendix_h").unwrap();
        forced(&mut s, &H_FACES);
        serde_json::to_string(&engine.execute_line(&mut s, CAUSE_FEAR, None).unwrap()).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn error_reasons() {
    let engine = Engine::default();
    let mut s = crate::fixtures::combat("appendix_f").unwrap();
    let reason = |s: &mut CombatState, line: &str| engine.execute_line(s, line, None).unwrap_err().reason();
    assert_eq!(reason(&mut s, "!a greataxe -t nobody"), "TargetNotFound");
    assert_eq!(reason(&mut s, "!frobnicate"), "UnknownCommand");
    assert_eq!(reason(&mut s, "!a \"greataxe"), "UnterminatedQuote");
    assert_eq!(reason(&mut s, "a greataxe"), "NotACommand");
}
