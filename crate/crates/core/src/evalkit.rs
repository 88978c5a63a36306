//! Executable scoring of predicted commands and narrations: pass rate,
//! state-assertion unit scenarios and token metrics.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dice::DieSource;
use crate::engine::{AutomationResult, Engine, ExecutionReport};
use crate::exec::Execution;
use crate::fixtures;
use crate::promptgen::render_utt2cmd;
use crate::statecore::CombatState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictorError {
    #[error("predictor unavailable: {0}")]
    Unavailable(String),
    #[error("no gold completion for this prompt")]
    UnknownPrompt,
}

/// Produces a completion for a prompt. `sample` distinguishes repeated
/// generations for the same prompt; stubs are deterministic in it.
pub trait Predictor: Sync {
    fn predict(&self, prompt: &str, sample: u64) -> Result<String, PredictorError>;
}

/// Returns the recorded gold completion.
#[derive(Debug, Clone, Default)]
pub struct GoldStub {
    gold: HashMap<String, String>,
}

impl GoldStub {
    pub fn new<I: IntoIterator<Item = (String, String)>>(pairs: I) -> Self {
        GoldStub { gold: pairs.into_iter().collect() }
    }

    pub fn from_items(items: &[EvalItem]) -> Self {
        GoldStub::new(items.iter().filter_map(|i| Some((i.prompt.clone(), i.gold.clone()?))))
    }
}

impl Predictor for GoldStub {
    fn predict(&self, prompt: &str, _: u64) -> Result<String, PredictorError> {
        self.gold.get(prompt).cloned().ok_or(PredictorError::UnknownPrompt)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3))
}

fn sample_rng(seed: u64, prompt: &str, sample: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(prompt.as_bytes()) ^ sample.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// With probability `p` replaces the gold completion by a corrupted one that
/// can never execute; otherwise returns gold unchanged.
#[derive(Debug, Clone)]
pub struct CorruptStub {
    pub gold: GoldStub,
    pub p: f64,
    pub seed: u64,
}

impl CorruptStub {
    /// Expected pass rate when the gold commands pass at `gold_rate`.
    pub fn expected_pass_rate(&self, gold_rate: f64) -> f64 {
        (1.0 - self.p) * gold_rate
    }
}

/// A corruption of `cmd` that fails to parse or execute.
pub fn corrupt(cmd: &str, rng: &mut impl Rng) -> String {
    let mut options: Vec<String> = vec![
        cmd.trim_start_matches('!').to_string(),
        format!("{cmd} \"unterminated"),
        match cmd.split_once(' ') {
            Some((_, rest)) => format!("!frobnicate {rest}"),
            None => "!frobnicate".to_string(),
        },
    ];
    if cmd.contains(" -t ") {
        let head = cmd.split(" -t ").next().unwrap_or(cmd);
        options.push(format!("{head} -t Nobody9"));
    }
    options.choose(rng).expect("non-empty").clone()
}

impl Predictor for CorruptStub {
    fn predict(&self, prompt: &str, sample: u64) -> Result<String, PredictorError> {
        let gold = self.gold.predict(prompt, sample)?;
        let mut rng = sample_rng(self.seed, prompt, sample);
        if rng.gen_bool(self.p) {
            Ok(corrupt(&gold, &mut rng))
        } else {
            Ok(gold)
        }
    }
}

/// Word salad without a command prefix.
#[derive(Debug, Clone, Copy, Default)]
pub struct GarbageStub {
    pub seed: u64,
}

const GARBAGE: &[&str] = &["the", "wolf", "axe", "swings", "fire", "and", "then", "maybe", "roll", "dice", "hmm"];

impl Predictor for GarbageStub {
    fn predict(&self, prompt: &str, sample: u64) -> Result<String, PredictorError> {
        let mut rng = sample_rng(self.seed, prompt, sample);
        let n = rng.gen_range(1..8);
        Ok((0..n).map(|_| *GARBAGE.choose(&mut rng).expect("non-empty")).collect::<Vec<_>>().join(" "))
    }
}

/// Fixed completions keyed by prompt.
pub type TableStub = GoldStub;

/// Whitespace tokenization used by the metrics.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F1. Both empty scores 1, one empty 0.
pub fn rouge_l<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> f64 {
    match (reference.is_empty(), hypothesis.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let lcs = lcs_len(reference, hypothesis) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / hypothesis.len() as f64;
    let r = lcs / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// Sentence GLEU over 1..=4-grams: clipped n-gram matches summed over all
/// orders, divided by the larger of the hypothesis and reference n-gram
/// totals. Both empty scores 1, one empty 0.
pub fn sentence_gleu<T: Eq + std::hash::Hash>(reference: &[T], hypothesis: &[T]) -> f64 {
    match (reference.is_empty(), hypothesis.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let (mut matches, mut hyp_total, mut ref_total) = (0usize, 0usize, 0usize);
    for n in 1..=4 {
        let mut counts: HashMap<&[T], isize> = HashMap::new();
        for g in reference.windows(n) {
            *counts.entry(g).or_default() += 1;
            ref_total += 1;
        }
        for g in hypothesis.windows(n) {
            hyp_total += 1;
            if let Some(c) = counts.get_mut(g) {
                if *c > 0 {
                    *c -= 1;
                    matches += 1;
                }
            }
        }
    }
    matches as f64 / hyp_total.max(ref_total) as f64
}

/// A prediction target: the prompt plus the state it is executed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: String,
    pub prompt: String,
    pub state: CombatState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caster: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
}

/// Whether `command` executes cleanly against a copy of `state`.
pub fn executes(engine: &Engine, command: &str, state: &CombatState, caster: Option<&str>) -> Result<ExecutionReport, String> {
    let mut sandbox = state.clone();
    engine.execute_line(&mut sandbox, command, caster).map_err(|e| e.to_string())
}

/// Fraction of predictions that parse, resolve and execute without error.
/// An empty list scores 0.
pub fn pass_rate(engine: &Engine, preds: &[(String, &CombatState, Option<&str>)], exec: Execution) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    let passed = exec.map(preds, |(cmd, state, caster)| executes(engine, cmd, state, *caster).is_ok());
    passed.iter().filter(|&&p| p).count() as f64 / preds.len() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "predicate", rename_all = "snake_case")]
pub enum Assertion {
    HpDecreased { combatant: String },
    HpIncreased { combatant: String },
    HpEquals { combatant: String, hp: i32 },
    HasEffect { combatant: String, effect: String },
    EffectAbsent { combatant: String, effect: String },
    TargetsExactly { ids: Vec<String> },
    IsCurrent { combatant: String },
    CheckMade { combatant: String, skill: String },
}

impl Assertion {
    fn combatants(&self) -> Vec<&str> {
        match self {
            Assertion::TargetsExactly { ids } => ids.iter().map(String::as_str).collect(),
            Assertion::HpDecreased { combatant }
            | Assertion::HpIncreased { combatant }
            | Assertion::HpEquals { combatant, .. }
            | Assertion::HasEffect { combatant, .. }
            | Assertion::EffectAbsent { combatant, .. }
            | Assertion::IsCurrent { combatant }
            | Assertion::CheckMade { combatant, .. } => vec![combatant],
        }
    }

    /// `Err` explains the failure.
    pub fn check(&self, pre: &CombatState, post: &CombatState, report: &ExecutionReport) -> Result<(), String> {
        let hp = |s: &CombatState, id: &str| s.get(id).map(|c| c.hp);
        let ok = |cond: bool, msg: String| if cond { Ok(()) } else { Err(msg) };
        match self {
            Assertion::HpDecreased { combatant } => {
                let (a, b) = (hp(pre, combatant), hp(post, combatant));
                ok(matches!((a, b), (Some(a), Some(b)) if b < a), format!("{combatant} hp {a:?} -> {b:?}, expected a decrease"))
            }
            Assertion::HpIncreased { combatant } => {
                let (a, b) = (hp(pre, combatant), hp(post, combatant));
                ok(matches!((a, b), (Some(a), Some(b)) if b > a), format!("{combatant} hp {a:?} -> {b:?}, expected an increase"))
            }
            Assertion::HpEquals { combatant, hp: want } => {
                let got = hp(post, combatant);
                ok(got == Some(*want), format!("{combatant} hp {got:?}, expected {want}"))
            }
            Assertion::HasEffect { combatant, effect } => ok(
                post.get(combatant).is_some_and(|c| c.has_effect(effect)),
                format!("{combatant} lacks {effect}"),
            ),
            Assertion::EffectAbsent { combatant, effect } => ok(
                post.get(combatant).is_some_and(|c| !c.has_effect(effect)),
                format!("{combatant} has {effect}"),
            ),
            Assertion::TargetsExactly { ids } => {
                let want: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
                let got: BTreeSet<&str> = report.targets.iter().map(String::as_str).collect();
                ok(want == got && report.targets.len() == ids.len(), format!("targets {:?}, expected {ids:?}", report.targets))
            }
            Assertion::IsCurrent { combatant } => {
                let cur = post.current().map(|c| c.id.as_str());
                ok(cur == Some(combatant.as_str()), format!("current is {cur:?}, expected {combatant}"))
            }
            Assertion::CheckMade { combatant, skill } => {
                let made = report.caster == *combatant
                    && report.automation.iter().flat_map(|r| r.walk()).any(|r| {
                        matches!(r, AutomationResult::Check { skill_name, .. } if skill_name.eq_ignore_ascii_case(skill))
                    });
                ok(made, format!("{combatant} made no {skill} check"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitScenario {
    pub id: String,
    /// Bundled combat name.
    pub combat: String,
    /// Seed for the scenario's dice.
    pub seed: u64,
    /// Acting combatant; the current one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caster: Option<String>,
    /// Spells struck from the caster's spellbook before the scenario runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub remove_spells: Vec<String>,
    pub utterance: String,
    pub gold: String,
    /// A plausible but wrong command (usually the right ability at the
    /// wrong target).
    pub wrong: String,
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioFixtureError {
    #[error("scenario file: {0}")]
    Parse(String),
    #[error("scenario {scenario}: no bundled combat '{combat}'")]
    UnknownCombat { scenario: String, combat: String },
    #[error("scenario {scenario}: no combatant '{id}'")]
    UnknownCombatant { scenario: String, id: String },
    #[error("scenario {scenario}: no assertions")]
    NoAssertions { scenario: String },
}

impl UnitScenario {
    /// The initial state, with the scenario's seed and spellbook edits.
    pub fn initial_state(&self) -> Result<CombatState, ScenarioFixtureError> {
        let mut state = fixtures::combat(&self.combat).ok_or_else(|| ScenarioFixtureError::UnknownCombat {
            scenario: self.id.clone(),
            combat: self.combat.clone(),
        })?;
        state.rng = DieSource::seeded(self.seed);
        let caster = self.caster_id(&state)?;
        let missing = |id: &str| ScenarioFixtureError::UnknownCombatant {
            scenario: self.id.clone(),
            id: id.to_string(),
        };
        for id in self.assertions.iter().flat_map(Assertion::combatants) {
            state.get(id).ok_or_else(|| missing(id))?;
        }
        if self.assertions.is_empty() {
            return Err(ScenarioFixtureError::NoAssertions { scenario: self.id.clone() });
        }
        let c = state.get_mut(&caster).ok_or_else(|| missing(&caster))?;
        c.statblock
            .spellbook
            .spells
            .retain(|s| !self.remove_spells.iter().any(|r| r.eq_ignore_ascii_case(s)));
        Ok(state)
    }

    fn caster_id(&self, state: &CombatState) -> Result<String, ScenarioFixtureError> {
        match &self.caster {
            Some(id) => Ok(id.clone()),
            None => state.current().map(|c| c.id.clone()).ok_or_else(|| ScenarioFixtureError::UnknownCombatant {
                scenario: self.id.clone(),
                id: "<current>".into(),
            }),
        }
    }

    /// The command-prediction prompt for this scenario.
    pub fn item(&self) -> Result<EvalItem, ScenarioFixtureError> {
        let state = self.initial_state()?;
        let caster = self.caster_id(&state)?;
        let c = state.get(&caster).expect("checked in initial_state");
        Ok(EvalItem {
            id: self.id.clone(),
            prompt: render_utt2cmd(&state, c, std::slice::from_ref(&self.utterance)),
            caster: Some(caster),
            state,
            gold: Some(self.gold.clone()),
        })
    }

    /// Runs `command` on a fresh copy and checks every assertion.
    pub fn check(&self, engine: &Engine, state: &CombatState, command: &str) -> Result<(), String> {
        let mut post = state.clone();
        let report = engine
            .execute_line(&mut post, command, self.caster.as_deref())
            .map_err(|e| format!("execution failed: {e}"))?;
        for a in &self.assertions {
            a.check(state, &post, &report)?;
        }
        Ok(())
    }
}

pub fn load_scenarios(text: &str) -> Result<Vec<UnitScenario>, ScenarioFixtureError> {
    let scenarios: Vec<UnitScenario> = serde_json::from_str(text).map_err(|e| ScenarioFixtureError::Parse(e.to_string()))?;
    for s in &scenarios {
        s.initial_state()?;
    }
    Ok(scenarios)
}

/// The ten bundled scenarios.
pub fn bundled_scenarios() -> Vec<UnitScenario> {
    load_scenarios(include_str!("../fixtures/scenarios.json")).expect("bundled scenarios are valid")
}

/// Scenario items plus the appendix command-prediction cases.
pub fn bundled_items() -> Vec<EvalItem> {
    let mut items: Vec<EvalItem> = bundled_scenarios().iter().map(|s| s.item().expect("bundled scenarios are valid")).collect();
    let cases: &[(&str, &str, &str, &str, &str)] = &[
        (
            "appendix-f",
            "appendix_f",
            "Filgo Bitterfoot",
            "Filgo swings his axe at the wolf! \"Raaaargh!\"",
            "!a greataxe -t dw1",
        ),
        (
            "appendix-d",
            "appendix_d",
            "Noxxis Blazehammer",
            "*Noxxis invokes divine anger of his deity, coalescing it into a gout of flame that he launches towards the orcs*",
            "!cast fireball -t OR1 -t OR2 -t OR3 -t OR4",
        ),
        (
            "appendix-h",
            "appendix_h",
            "Umbrage",
            "\"Dogs... so many of them making it more annoying then anything.\" *Umbrage didn't want to waste anything big. So he pulled out his pipes, taking the attack of opportunity as he would start to play.* \n\"**Fear me!**\"",
            "!i cast \"Cause Fear\" -dc 15 -t dd1 -t dd3 -t dd4 -t dd5 -t dd6 -t dd7 -t dd8 sadv -i -title \"Pipes of Haunting!\"",
        ),
    ];
    for (id, combat, caster, utterance, gold) in cases {
        let state = fixtures::combat(combat).expect("bundled combat");
        let c = state.get(caster).expect("bundled caster");
        items.push(EvalItem {
            id: id.to_string(),
            prompt: render_utt2cmd(&state, c, &[utterance.to_string()]),
            caster: Some(caster.to_string()),
            state,
            gold: Some(gold.to_string()),
        });
    }
    items
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub scenario: String,
    pub command: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitReport {
    pub score: f64,
    pub records: Vec<UnitRecord>,
}

/// For each scenario, draws `samples` generations, deduplicates them, runs
/// each unique command on a fresh copy and checks the assertions. The score
/// is the fraction of unique generations that pass.
pub fn run_unit_tests(
    engine: &Engine,
    scenarios: &[UnitScenario],
    predictor: &dyn Predictor,
    samples: u64,
    exec: Execution,
) -> Result<UnitReport, PredictorError> {
    let per = exec.map(scenarios, |s| -> Result<Vec<UnitRecord>, PredictorError> {
        let item = s.item().expect("scenarios are validated on load");
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for k in 0..samples.max(1) {
            let cmd = predictor.predict(&item.prompt, k)?.trim().to_string();
            if !seen.insert(cmd.clone()) {
                continue;
            }
            let r = s.check(engine, &item.state, &cmd);
            out.push(UnitRecord {
                scenario: s.id.clone(),
                command: cmd,
                passed: r.is_ok(),
                failure: r.err(),
            });
        }
        Ok(out)
    });
    let mut records = Vec::new();
    for r in per {
        records.extend(r?);
    }
    let score = if records.is_empty() {
        0.0
    } else {
        records.iter().filter(|r| r.passed).count() as f64 / records.len() as f64
    };
    Ok(UnitReport { score, records })
}

/// One prediction as read from a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    #[serde(default)]
    pub prompt: String,
    pub prediction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    pub prediction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sgleu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pass_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_pass: Option<f64>,
    /// Means over items that have a gold completion.
    pub sgleu: f64,
    pub rouge_l: f64,
    /// Computed elsewhere, if at all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bertscore: Option<f64>,
    pub items: Vec<ItemRecord>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Scores `predictions[i]` against `items[i]`.
pub fn score_predictions(engine: &Engine, items: &[EvalItem], predictions: &[String], exec: Execution) -> EvalReport {
    assert_eq!(items.len(), predictions.len(), "one prediction per item");
    let pairs: Vec<(&EvalItem, &String)> = items.iter().zip(predictions).collect();
    let records = exec.map(&pairs, |(item, pred)| {
        let run = executes(engine, pred, &item.state, item.caster.as_deref());
        let (sgleu, rouge) = match &item.gold {
            Some(g) => (
                Some(sentence_gleu(&tokenize(g), &tokenize(pred))),
                Some(rouge_l(&tokenize(g), &tokenize(pred))),
            ),
            None => (None, None),
        };
        ItemRecord {
            id: item.id.clone(),
            prediction: (*pred).clone(),
            gold: item.gold.clone(),
            passed: run.is_ok(),
            error: run.err(),
            sgleu,
            rouge_l: rouge,
        }
    });
    EvalReport {
        pass_rate: if records.is_empty() {
            0.0
        } else {
            records.iter().filter(|r| r.passed).count() as f64 / records.len() as f64
        },
        unit_pass: None,
        sgleu: mean(records.iter().filter_map(|r| r.sgleu)),
        rouge_l: mean(records.iter().filter_map(|r| r.rouge_l)),
        perplexity: None,
        bertscore: None,
        items: records,
    }
}

/// Draws one prediction per item (sample `i` for the i-th) and scores them.
pub fn evaluate(
    engine: &Engine,
    items: &[EvalItem],
    predictor: &dyn Predictor,
    exec: Execution,
) -> Result<EvalReport, PredictorError> {
    let indexed: Vec<(u64, &EvalItem)> = items.iter().enumerate().map(|(i, it)| (i as u64, it)).collect();
    let preds = exec
        .map(&indexed, |(i, it)| predictor.predict(&it.prompt, *i))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(score_predictions(engine, items, &preds, exec))
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24} {:>5} {:>7} {:>7}", "id", "pass", "sgleu", "rougeL")?;
        for r in &self.items {
            let num = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
            writeln!(f, "{:<24} {:>5} {:>7} {:>7}", r.id, if r.passed { "yes" } else { "no" }, num(r.sgleu), num(r.rouge_l))?;
        }
        write!(f, "pass rate {:.3}  sgleu {:.3}  rougeL {:.3}", self.pass_rate, self.sgleu, self.rouge_l)?;
        if let Some(u) = self.unit_pass {
            write!(f, "  unit tests {u:.3}")?;
        }
        Ok(())
    }
}

/// Repeats `items` to length `n`, giving copies distinct ids.
pub fn cycle_items(items: &[EvalItem], n: usize) -> Vec<EvalItem> {
    (0..n)
        .map(|i| {
            let mut it = items[i % items.len()].clone();
            it.id = format!("{}#{i}", it.id);
            it
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_edge_cases() {
        let e: [&str; 0] = [];
        assert_eq!(rouge_l(&e, &e), 1.0);
        assert_eq!(rouge_l(&["a"], &e), 0.0);
        assert_eq!(sentence_gleu(&e, &["a"]), 0.0);
        assert_eq!(sentence_gleu(&["a", "b"], &["a", "b"]), 1.0);
        assert_eq!(rouge_l(&["a", "b"], &["c"]), 0.0);
        let r = rouge_l(&tokenize("!a greataxe -t dw1"), &tokenize("!a sword -t dw1"));
        assert!((r - 0.75).abs() < 1e-12);
    }

    #[test]
    fn corruptions_never_execute() {
        let engine = Engine::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for item in bundled_items() {
            let gold = item.gold.as_deref().unwrap();
            for _ in 0..20 {
                let bad = corrupt(gold, &mut rng);
                assert!(executes(&engine, &bad, &item.state, item.caster.as_deref()).is_err(), "{bad}");
            }
        }
    }
}
