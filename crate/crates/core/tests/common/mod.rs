#![allow(dead_code)]

use std::path::PathBuf;

use fireball_core::dice::DieSource;
use fireball_core::engine::Engine;
use fireball_core::fixtures::combat;
use fireball_core::promptgen::{
    render_sta2nar, render_utt2cmd, HistoryMessage, SheetOrder, Sta2NarInput, Sta2NarVariant,
};
use serde::Deserialize;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[derive(Deserialize)]
pub struct Sta2NarCase {
    pub name: String,
    pub combat: String,
    pub caster: String,
    pub command: String,
    pub faces: Vec<u32>,
    pub history: Vec<HistoryMessage>,
    pub sheet_order: SheetOrder,
    pub golden: String,
}

#[derive(Deserialize)]
pub struct Utt2CmdCase {
    pub name: String,
    pub combat: String,
    pub caster: String,
    pub utterances: Vec<String>,
    pub gold: String,
    pub golden: String,
}

#[derive(Deserialize)]
pub struct Cases {
    pub sta2nar: Vec<Sta2NarCase>,
    pub utt2cmd: Vec<Utt2CmdCase>,
}

pub fn cases() -> Cases {
    let text = std::fs::read_to_string(fixture_dir().join("golden/cases.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn golden(file: &str) -> String {
    std::fs::read_to_string(fixture_dir().join("golden").join(file)).unwrap()
}

/// Executes the case's command with its forced faces and renders the FULL prompt.
pub fn render_sta2nar_case(case: &Sta2NarCase) -> String {
    let engine = Engine::default();
    let mut state = combat(&case.combat).unwrap();
    state.rng = DieSource::forced(case.faces.iter().copied());
    let report = engine.execute_line(&mut state, &case.command, Some(&case.caster)).unwrap();
    let caster = state.get(&case.caster).unwrap().clone();
    render_sta2nar(
        &Sta2NarInput {
            history: &case.history,
            state: &state,
            caster: &caster,
            targets: &report.targets,
            command: &case.command,
            mechanical_lines: &report.mechanical_lines,
            sheet_order: case.sheet_order,
        },
        Sta2NarVariant::Full,
    )
}

pub fn render_utt2cmd_case(case: &Utt2CmdCase) -> String {
    let state = combat(&case.combat).unwrap();
    let caster = state.get(&case.caster).unwrap();
    render_utt2cmd(&state, caster, &case.utterances)
}

/// First differing line, for readable failures.
pub fn first_diff(a: &str, b: &str) -> Option<(usize, String, String)> {
    let (la, lb): (Vec<&str>, Vec<&str>) = (a.split('\n').collect(), b.split('\n').collect());
    (0..la.len().max(lb.len())).find_map(|i| {
        let (x, y) = (la.get(i).copied().unwrap_or("<eof>"), lb.get(i).copied().unwrap_or("<eof>"));
        (x != y).then(|| (i + 1, x.to_string(), y.to_string()))
    })
}

use fireball_core::eventlog::{Event, EventBody};
use fireball_core::pipeline::Triple;

/// Brute-force nearest state change: for every message of at least five
/// words, scan every `combat_state_update` for the smallest time distance,
/// preferring the later one on ties. Returns (message seq, update seq).
pub fn nearest_change_oracle(events: &[Event]) -> Vec<(u64, u64)> {
    let changes: Vec<&Event> = events
        .iter()
        .filter(|e| matches!(e.body, EventBody::CombatStateUpdate { .. }))
        .collect();
    let mut out = Vec::new();
    for m in events {
        let EventBody::Message(msg) = &m.body else { continue };
        if msg.content.split_whitespace().count() < 5 {
            continue;
        }
        let mut best: Option<(i64, u64)> = None;
        for c in &changes {
            let d = (c.timestamp - m.timestamp).num_milliseconds().abs();
            let better = match best {
                None => true,
                Some((bd, bs)) => d < bd || (d == bd && c.seq > bs),
            };
            if better {
                best = Some((d, c.seq));
            }
        }
        if let Some((_, s)) = best {
            out.push((m.seq, s));
        }
    }
    out
}

/// Checks aligned triples against the oracle: every long message sits in
/// exactly one triple, that triple holds the oracle's state change, and the
/// message is on the correct side of it.
pub fn check_alignment(events: &[Event], triples: &[Triple]) -> Result<usize, String> {
    let mut placed = std::collections::BTreeMap::new();
    for (i, t) in triples.iter().enumerate() {
        for (side, list) in [("preceding", &t.preceding), ("following", &t.following)] {
            for e in list {
                if placed.insert(e.seq, (i, side)).is_some() {
                    return Err(format!("message {} placed twice", e.seq));
                }
            }
        }
    }
    let expected = nearest_change_oracle(events);
    if expected.len() != placed.len() {
        return Err(format!("oracle assigns {} messages, align placed {}", expected.len(), placed.len()));
    }
    for (m, u) in &expected {
        let Some((i, side)) = placed.get(m) else {
            return Err(format!("message {m} not placed"));
        };
        if !triples[*i].command_events.iter().any(|g| g.state_update.seq == *u) {
            return Err(format!("message {m}: oracle picks update {u}, align chose triple {}", triples[*i].id));
        }
        let want = if m < u { "preceding" } else { "following" };
        if *side != want {
            return Err(format!("message {m} is {side}, expected {want}"));
        }
    }
    Ok(expected.len())
}

/// Fuzzed synthetic log for alignment: short sessions with small time gaps so
/// ties and equal timestamps are common.
pub fn fuzz_log(engine: &Engine, seed: u64) -> Vec<Event> {
    let mut cfg = fireball_core::synth::SynthConfig::new(seed, 5 + (seed % 36) as usize);
    cfg.max_gap_secs = [0, 1, 2, 5, 20][(seed % 5) as usize];
    fireball_core::synth::generate(engine, &cfg).events
}

pub fn check_distilled(triples: &[Triple]) -> Result<(), String> {
    for t in triples {
        t.check_distilled().map_err(|e| format!("{}: {e}", t.id))?;
    }
    Ok(())
}

/// Longest common subsequence by enumerating every subsequence of the shorter
/// sequence.
pub fn brute_lcs(a: &[&str], b: &[&str]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    assert!(short.len() <= 16, "brute force is exponential");
    let is_subseq = |sub: &[&str]| {
        let mut it = long.iter();
        sub.iter().all(|x| it.any(|y| y == x))
    };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let n = mask.count_ones() as usize;
        if n <= best {
            continue;
        }
        let sub: Vec<&str> = (0..short.len()).filter(|i| mask & (1 << i) != 0).map(|i| short[i]).collect();
        if is_subseq(&sub) {
            best = n;
        }
    }
    best
}

pub fn brute_rouge_l(r: &[&str], h: &[&str]) -> f64 {
    if r.is_empty() && h.is_empty() {
        return 1.0;
    }
    if r.is_empty() || h.is_empty() {
        return 0.0;
    }
    let l = brute_lcs(r, h) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let (p, rec) = (l / h.len() as f64, l / r.len() as f64);
    2.0 * p * rec / (p + rec)
}

/// GLEU from the definition: for each hypothesis n-gram, consume one unused
/// equal reference n-gram; score is min(precision, recall) over the pooled
/// 1..4-gram counts.
pub fn brute_gleu(r: &[&str], h: &[&str]) -> f64 {
    if r.is_empty() && h.is_empty() {
        return 1.0;
    }
    if r.is_empty() || h.is_empty() {
        return 0.0;
    }
    let (mut m, mut hp, mut rp) = (0.0, 0.0, 0.0);
    for n in 1..=4usize {
        let grams = |s: &[&str]| -> Vec<String> {
            if s.len() < n {
                return Vec::new();
            }
            (0..=s.len() - n).map(|i| s[i..i + n].join("\u{1}")).collect()
        };
        let rg = grams(r);
        let hg = grams(h);
        let mut used = vec![false; rg.len()];
        for g in &hg {
            if let Some(k) = (0..rg.len()).find(|&k| !used[k] && rg[k] == *g) {
                used[k] = true;
                m += 1.0;
            }
        }
        hp += hg.len() as f64;
        rp += rg.len() as f64;
    }
    (m / hp).min(m / rp)
}

/// Random token sequence pairs over a small vocabulary (so overlaps happen).
pub fn random_pairs(seed: u64, n: usize) -> Vec<(Vec<&'static str>, Vec<&'static str>)> {
    use rand::{Rng, SeedableRng};
    const VOCAB: [&str; 8] = ["!a", "greataxe", "-t", "dw1", "fireball", "or1", "!cast", "adv"];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let seq = |rng: &mut rand_chacha::ChaCha8Rng| {
                let len = rng.gen_range(0..=12);
                (0..len).map(|_| VOCAB[rng.gen_range(0..VOCAB.len())]).collect::<Vec<_>>()
            };
            (seq(&mut rng), seq(&mut rng))
        })
        .collect()
}

/// JSON pointers of the leaves replay is expected to protect: sequence
/// numbers, combat ids and the payloads of state-bearing events (author ids
/// excluded). Message and alias/snippet payloads and timestamps are not
/// covered.
pub fn tamperable_leaves(e: &Event) -> Vec<String> {
    fn walk(v: &serde_json::Value, path: String, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, x) in m {
                    if k == "author_id" || k == "author_name" {
                        continue;
                    }
                    walk(x, format!("{path}/{}", k.replace('~', "~0").replace('/', "~1")), out);
                }
            }
            serde_json::Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(x, format!("{path}/{i}"), out);
                }
            }
            serde_json::Value::Null => {}
            _ => out.push(path),
        }
    }
    let v = serde_json::to_value(e).unwrap();
    let mut out = vec!["/seq".to_string(), "/combat_id".to_string()];
    if !matches!(
        e.body,
        EventBody::Message(_) | EventBody::AliasResolution(_) | EventBody::SnippetResolution(_) | EventBody::CombatEnd {}
    ) {
        walk(&v["payload"], "/payload".into(), &mut out);
    }
    out
}

/// Changes one leaf: numbers move by one, strings gain a character, booleans
/// flip. Returns `None` when the result no longer parses as an event.
pub fn tamper_at(e: &Event, pointer: &str) -> Option<Event> {
    let mut v = serde_json::to_value(e).unwrap();
    let leaf = v.pointer_mut(pointer)?;
    *leaf = match leaf.clone() {
        serde_json::Value::Bool(b) => serde_json::Value::Bool(!b),
        serde_json::Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) if u > 0 => (u - 1).into(),
            (Some(u), _) => (u + 1).into(),
            (None, Some(i)) => (i + 1).into(),
            _ => (n.as_f64()? + 1.0).into(),
        },
        serde_json::Value::String(s) => format!("{s}x").into(),
        _ => return None,
    };
    let out: Event = serde_json::from_value(v).ok()?;
    (out != *e).then_some(out)
}
