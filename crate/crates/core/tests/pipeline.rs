mod common;

use chrono::{DateTime, TimeZone, Utc};
use fireball_core::dice::DieSource;
use fireball_core::engine::Engine;
use fireball_core::eventlog::{EventLog, Session};
use fireball_core::fixtures::combat;
use fireball_core::pipeline::*;

fn t(s: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_700_000_000 + s, 0).unwrap()
}

fn session() -> Session {
    let mut state = combat("appendix_f").unwrap();
    state.rng = DieSource::seeded(3);
    Session::start(Engine::default(), EventLog::in_memory("p"), "dm", state, t(0)).unwrap()
}

const LONG: &str = "Filgo grips the axe and steps forward slowly.";
const LONG2: &str = "The wolf snarls and lunges toward the dwarf.";

#[test]
fn one_change_between_two_messages() {
    let mut s = session();
    s.message(t(10), "player-filgo", "Player 4", LONG).unwrap();
    s.command(t(12), "player-filgo", None, "!a greataxe -t dw1").unwrap().unwrap();
    s.message(t(13), "player-filgo", "Player 4", LONG2).unwrap();
    let triples = align(s.log.events());
    assert_eq!(triples.len(), 1);
    assert_eq!(triples[0].preceding.len(), 1);
    assert_eq!(triples[0].following.len(), 1);
    assert_eq!(triples[0].command_author, "player-filgo");
    assert_eq!(triples[0].dm, "dm");
    assert_eq!(common::check_alignment(s.log.events(), &triples), Ok(2));
}

#[test]
fn short_messages_dropped() {
    let mut s = session();
    s.message(t(10), "player-filgo", "Player 4", "Nice!").unwrap();
    s.command(t(12), "player-filgo", None, "!a greataxe -t dw1").unwrap().unwrap();
    let triples = align(s.log.events());
    assert!(triples[0].preceding.is_empty() && triples[0].following.is_empty());
}

#[test]
fn equidistant_message_goes_to_later_change() {
    let mut s = session();
    s.command(t(10), "player-filgo", None, "!a greataxe -t dw1").unwrap().unwrap();
    s.message(t(12), "player-filgo", "Player 4", LONG).unwrap();
    s.command(t(14), "player-filgo", None, "!a greataxe -t dw1").unwrap().unwrap();
    let triples = align(s.log.events());
    assert_eq!(triples.len(), 2);
    assert!(triples[0].following.is_empty());
    assert_eq!(triples[1].preceding.len(), 1);
}

#[test]
fn no_state_changes_means_no_triples() {
    let mut s = session();
    s.message(t(1), "player-filgo", "Player 4", LONG).unwrap();
    assert!(align(s.log.events()).is_empty());
    assert!(align(&[]).is_empty());
}

#[test]
fn authorship_filter() {
    let mut s = session();
    s.message(t(10), "player-filgo", "Player 4", LONG).unwrap();
    s.message(t(10), "player-other", "Player 2", "I am just here chatting about lunch.").unwrap();
    s.message(t(11), "dm", "DM", "The wolves howl as the dwarf advances.").unwrap();
    s.command(t(12), "player-filgo", None, "!a greataxe -t dw1").unwrap().unwrap();
    let t0 = align(s.log.events()).remove(0);
    assert_eq!(t0.preceding.len(), 3);
    let kept = filter_authorship(t0).unwrap();
    let authors: Vec<&str> = kept.preceding.iter().map(message_author).collect();
    assert_eq!(authors, ["player-filgo", "dm"]);
}

#[test]
fn multi_actor_and_empty_triples_dropped() {
    let mut s = session();
    s.message(t(10), "player-filgo", "Player 4", LONG).unwrap();
    s.command(t(12), "player-filgo", None, "!a greataxe -t dw1").unwrap().unwrap();
    s.command(t(12), "dm", Some("DW1"), "!a bite -t filgo").unwrap().unwrap();
    let triples = align(s.log.events());
    assert_eq!(triples.len(), 1);
    assert_eq!(triples[0].command_events.len(), 2);
    assert!(filter_authorship(triples[0].clone()).is_none());

    let mut s = session();
    s.message(t(10), "player-other", "Player 2", LONG).unwrap();
    s.command(t(12), "player-filgo", None, "!a greataxe -t dw1").unwrap().unwrap();
    assert!(filter_authorship(align(s.log.events()).remove(0)).is_none());
}

#[test]
fn ooc_filter_touches_following_only() {
    let mut s = session();
    s.message(t(10), "player-filgo", "Player 4", "How much health do you have left?").unwrap();
    s.command(t(12), "player-filgo", None, "!a greataxe -t dw1").unwrap().unwrap();
    s.message(t(13), "player-filgo", "Player 4", "(OOC: brb) Filgo swings. Placeholder").unwrap();
    s.message(t(13), "player-filgo", "Player 4", "How much health do you have left?").unwrap();
    s.message(t(14), "player-filgo", "Player 4", LONG2).unwrap();
    let mut aligned = align(s.log.events()).remove(0);
    assert_eq!(aligned.following.len(), 3);
    // Too short to survive alignment on its own, so set it after the fact.
    if let fireball_core::eventlog::EventBody::Message(m) = &mut aligned.following[0].body {
        m.content = "(OOC: brb) Filgo swings.".into();
    }
    let out = filter_ooc(aligned.clone(), &HeuristicClassifier).unwrap();
    assert_eq!(out.preceding, aligned.preceding);
    let texts: Vec<&str> = out.following.iter().map(message_text).collect();
    assert_eq!(texts, ["Filgo swings.", LONG2]);

    // The stripped line is now under five words, so the full pass drops it.
    let refined = refine(aligned, &HeuristicClassifier).unwrap().unwrap();
    let texts: Vec<&str> = refined.following.iter().map(message_text).collect();
    assert_eq!(texts, [LONG2]);
}

struct Down;
impl Classifier for Down {
    fn classify(&self, _: &str) -> Result<UtteranceLabel, ClassifierError> {
        Err(ClassifierError::Unavailable("offline".into()))
    }
}

#[test]
fn classifier_errors_propagate() {
    let mut s = session();
    s.command(t(12), "player-filgo", None, "!a greataxe -t dw1").unwrap().unwrap();
    s.message(t(13), "player-filgo", "Player 4", LONG2).unwrap();
    let aligned = align(s.log.events()).remove(0);
    assert!(matches!(filter_ooc(aligned, &Down), Err(ClassifierError::Unavailable(_))));
}

#[test]
fn fuzzed_alignment_matches_oracle_and_refine_is_idempotent() {
    let engine = Engine::default();
    let mut placed = 0;
    for seed in 0..150 {
        let events = common::fuzz_log(&engine, seed);
        let triples = align(&events);
        placed += common::check_alignment(&events, &triples).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let (out, counts) = distill(&events, &HeuristicClassifier).unwrap();
        assert_eq!(counts.aligned, triples.len());
        assert_eq!(counts.after_ooc, out.len());
        common::check_distilled(&out).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        for tr in &out {
            let again = refine(tr.clone(), &HeuristicClassifier).unwrap();
            assert_eq!(again.as_ref(), Some(tr), "seed {seed}");
        }
        assert_eq!(distill(&events, &HeuristicClassifier).unwrap().0, out);
    }
    assert!(placed > 500, "fuzz placed only {placed} messages");
}

#[test]
fn corpus_report_counts_match_generator() {
    let engine = Engine::default();
    let sessions: Vec<_> = (0..20)
        .map(|seed| fireball_core::synth::generate(&engine, &fireball_core::synth::SynthConfig::new(seed, 30)))
        .collect();
    let logs: Vec<_> = sessions.iter().map(|s| s.events.clone()).collect();
    let (seq, report) = distill_corpus(&logs, &HeuristicClassifier, fireball_core::exec::Execution::Sequential).unwrap();
    let (par, report_par) = distill_corpus(&logs, &HeuristicClassifier, fireball_core::exec::Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(report, report_par);
    let mut expected = std::collections::BTreeMap::new();
    for s in &sessions {
        for (k, v) in &s.expected_counts {
            *expected.entry(k.to_string()).or_insert(0) += v;
        }
    }
    assert_eq!(report.events_by_type, expected);
    let commands: usize = report.command_categories.values().sum();
    assert_eq!(commands, expected["command"]);
    assert!(report.command_categories[&CommandCategory::Combat] > 0);
    assert!(report.triples > 0);
    let text = report.to_string();
    assert!(text.contains("Dice Rolls"));
}

#[test]
fn prompt_records_follow_their_triples() {
    use fireball_core::promptgen::{prompt_records, Task};
    use fireball_core::synth::{generate, SynthConfig};
    let engine = Engine::default();
    let (mut cmd, mut nar) = (0, 0);
    for seed in 0..20 {
        let s = generate(&engine, &SynthConfig::new(seed, 60));
        let (triples, _) = distill(&s.events, &HeuristicClassifier).unwrap();
        let recs = prompt_records(&s.events, &triples);
        for r in &recs {
            let t = triples.iter().find(|t| t.id == r.source).expect("source triple exists");
            assert!(r.prompt.starts_with(match r.task {
                Task::Utt2cmd => "Actors:\n",
                Task::Sta2nar => "History:\n",
            }));
            let completion = r.completion.as_deref().unwrap();
            match r.task {
                Task::Utt2cmd => {
                    cmd += 1;
                    assert!(completion.starts_with('!'), "{completion}");
                    for u in &t.preceding {
                        assert!(r.prompt.contains(message_text(u)));
                    }
                    if let Some(last) = t.preceding.last() {
                        assert!(r.prompt.ends_with(message_text(last)));
                    }
                }
                Task::Sta2nar => {
                    nar += 1;
                    let want: Vec<&str> = t.following.iter().map(message_text).collect();
                    assert_eq!(completion, want.join("\n"));
                }
            }
        }
        let with_text = triples.iter().filter(|t| t.command_events.iter().any(|g| g.text().is_some())).count();
        assert_eq!(recs.iter().filter(|r| r.task == Task::Utt2cmd).count(), with_text);
    }
    assert!(cmd > 50 && nar > 20, "{cmd} {nar}");
}
