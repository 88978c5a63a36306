use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use fireball_app::batch::read_jsonl;
use fireball_app::repl;
use fireball_core::dice::DieSource;
use fireball_core::engine::Engine;
use fireball_core::evalkit::{bundled_items, Prediction};
use fireball_core::eventlog::{load_jsonl, replay, write_jsonl, EventBody, EventLog, Session};
use fireball_core::fixtures::combat;
use fireball_core::pipeline::Triple;
use fireball_core::promptgen::{PromptRecord, Task};
use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fireball"));
    c.env_remove("FIREBALL_DATA_DIR").env_remove("MODEL_API_URL").env_remove("MODEL_API_KEY");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8_lossy(&out.stderr).into_owned() + &String::from_utf8_lossy(&out.stdout)
}

#[test]
fn roll_is_frozen_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    // Recorded once from the seeded generator.
    assert_eq!(ok(&["roll", "2d20kh1+1", "--seed", "7"], dir.path()), "2d20kh1 (20, 17) + 1 = 21\n");
    assert_eq!(ok(&["roll", "1d6", "--seed", "7"], dir.path()).trim().split(" = ").count(), 2);
    assert!(fails(&["roll", "2d"], dir.path()).contains("error:"));
}

#[test]
fn repl_library_loop() {
    let mut state = combat("appendix_f").unwrap();
    state.rng = DieSource::forced([2, 15, 3, 1]);
    let mut s = Session::start(Engine::default(), EventLog::in_memory("r"), "dm", state, chrono::Utc::now()).unwrap();
    let input = "!attack longbow -t DW1\n!init next\n!bogus\nThe dwarf curses loudly at the wolf.\n:as nobody\n:actors\n:quit\n!i next\n";
    let mut out = Vec::new();
    repl::run(&mut s, input.as_bytes(), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines,
        [
            "- Filgo Bitterfoot (Mountain Dwarf; Fighter 5) <43/43 HP; Healthy>",
            "- DW1 (Dire Wolf) <25/37 HP; Injured>",
            "Initiative 17 (round 1): Filgo Bitterfoot",
            "Filgo Bitterfoot attacks with a Longbow!",
            "Filgo Bitterfoot attacked DW1 but missed.",
            "- DW1 (Dire Wolf) <25/37 HP; Injured>",
            "Initiative 12 (round 1): DW1",
            "error: unknown command 'bogus'",
            "error: no combatant named 'nobody'",
            "- Filgo Bitterfoot (Mountain Dwarf; Fighter 5) <43/43 HP; Healthy>",
            "- DW1 (Dire Wolf) <25/37 HP; Injured>",
        ]
    );
    // Input after :quit is ignored; everything before it was logged.
    let kinds: Vec<&str> = s.log.events().iter().map(|e| e.body.type_name()).collect();
    assert_eq!(
        kinds,
        ["combat_start", "command", "automation_run", "combat_state_update", "command", "combat_state_update", "command", "message"]
    );
    assert_eq!(replay(s.log.events()).unwrap(), s.state);
}

#[test]
fn repl_binary_logs_to_the_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = bin()
        .args(["repl", "--seed", "3"])
        .env("FIREBALL_DATA_DIR", dir.path().join("logs"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"!attack longbow -t DW1\n!init next\n:quit\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Filgo Bitterfoot attacks with a Longbow!"), "{text}");
    assert!(text.contains("Initiative 12 (round 1): DW1"), "{text}");
    let logs: Vec<_> = std::fs::read_dir(dir.path().join("logs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(logs.len(), 1);
    let replayed = ok(&["replay", logs[0].to_str().unwrap()], dir.path());
    assert!(replayed.starts_with("ok "), "{replayed}");

    assert!(fails(&["repl", "--combat", "nowhere"], dir.path()).contains("no bundled combat 'nowhere'"));
}

#[test]
fn synth_distill_prompts_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(ok(&["synth", "--out", "logs", "--sessions", "6", "--commands", "40", "--seed", "11"], d).starts_with("wrote 6 sessions"));
    let summary = ok(&["distill", "--in", "logs", "--out", "t.jsonl", "--report", "r.json"], d);
    let triples: Vec<Triple> = read_jsonl(&d.join("t.jsonl")).unwrap();
    assert!(summary.ends_with(&format!("wrote {} triples to t.jsonl\n", triples.len())), "{summary}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["triples"], json!(triples.len()));
    assert_eq!(report["logs"], json!(6));

    // One thread or many, the output is the same.
    ok(&["--sequential", "distill", "--in", "logs", "--out", "t2.jsonl"], d);
    assert_eq!(std::fs::read(d.join("t.jsonl")).unwrap(), std::fs::read(d.join("t2.jsonl")).unwrap());

    ok(&["prompts", "--in", "logs", "--out", "p.jsonl"], d);
    let recs: Vec<PromptRecord> = read_jsonl(&d.join("p.jsonl")).unwrap();
    let with_text = triples.iter().filter(|t| t.command_events.iter().any(|g| g.text().is_some())).count();
    assert_eq!(recs.iter().filter(|r| r.task == Task::Utt2cmd).count(), with_text);
    assert!(recs.iter().all(|r| !r.prompt.is_empty()));
    assert!(recs.iter().filter(|r| r.task == Task::Utt2cmd).all(|r| r.completion.as_deref().unwrap().starts_with('!')));

    // The records work as gold for the stub predictor.
    let out = ok(&["eval", "unittests", "--gold", "p.jsonl", "--samples", "2"], d);
    assert!(out.ends_with("unit test pass rate 1.000 over 10 generations\n"), "{out}");

    let out = ok(&["replay", "logs"], d);
    assert_eq!(out.lines().filter(|l| l.starts_with("ok ")).count(), 6);

    // A single edited damage number is caught.
    let mut paths: Vec<_> = std::fs::read_dir(d.join("logs")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    let mut events = load_jsonl(&paths[0]).unwrap();
    let hit = events
        .iter()
        .position(|e| matches!(&e.body, EventBody::CombatStateUpdate { .. }))
        .expect("some state update");
    if let EventBody::CombatStateUpdate { state } = &mut events[hit].body {
        state.combatants[0].hp -= 1;
    }
    write_jsonl(&paths[0], &events).unwrap();
    let out = run(&["replay", "logs"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("DIVERGED"));
}

#[test]
fn eval_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(ok(&["eval", "passrate"], d), "pass rate 1.000 (13/13)\n");
    assert_eq!(ok(&["eval", "passrate", "--predictor", "garbage"], d), "pass rate 0.000 (0/13)\n");

    // Gold for every other item, an unparseable line for the rest.
    let items = bundled_items();
    let preds: Vec<Prediction> = items
        .iter()
        .enumerate()
        .map(|(i, it)| Prediction {
            id: it.id.clone(),
            prompt: it.prompt.clone(),
            prediction: if i % 2 == 0 { it.gold.clone().unwrap() } else { "roll a d20 please".into() },
        })
        .collect();
    let file = std::fs::File::create(d.join("p.jsonl")).unwrap();
    let mut w = std::io::BufWriter::new(file);
    for p in &preds {
        serde_json::to_writer(&mut w, p).unwrap();
        w.write_all(b"\n").unwrap();
    }
    drop(w);
    assert_eq!(ok(&["eval", "passrate", "--pred", "p.jsonl", "--report", "rep.json"], d), "pass rate 0.538 (7/13)\n");
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(d.join("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["items"].as_array().unwrap().len(), 13);
    assert!(rep.get("perplexity").is_none());

    let out = ok(&["eval", "metrics", "--pred", "p.jsonl"], d);
    assert!(out.starts_with("sgleu 0.5385  rougeL 0.5385  (n=13)"), "{out}");

    std::fs::write(d.join("bad.jsonl"), "{\"id\": \"nope\", \"prediction\": \"!i next\"}\n").unwrap();
    assert!(fails(&["eval", "passrate", "--pred", "bad.jsonl"], d).contains("prediction 'nope' has no matching item"));

    let out = ok(&["eval", "unittests"], d);
    assert!(out.ends_with("unit test pass rate 1.000 over 10 generations\n"), "{out}");
    assert!(fails(&["eval", "unittests", "--predictor", "stub-corrupt:2"], d).contains("outside [0, 1]"));
    assert!(fails(&["eval", "unittests", "--predictor", "gateway"], d).contains("MODEL_API_URL is not set"));
}

#[test]
fn serve_rejects_bad_config_and_answers_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(fails(&["serve", "--port", "0"], d).contains("port must be in"));
    assert!(fails(&["--content", "missing.json", "serve"], d).contains("missing.json"));

    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let mut child = bin()
        .args(["serve", "--port", &port.to_string(), "--data-dir", "sessions"])
        .current_dir(d)
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let base = format!("http://127.0.0.1:{port}");
    let client = reqwest::blocking::Client::new();
    let deadline = Instant::now() + Duration::from_secs(20);
    let created: Value = loop {
        match client.post(format!("{base}/v1/sessions")).json(&json!({"fixture": "appendix_f", "seed": 2})).send() {
            Ok(r) => break r.json().unwrap(),
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(100)),
            Err(e) => {
                child.kill().ok();
                panic!("server never came up: {e}");
            }
        }
    };
    let id = created["session_id"].as_str().unwrap().to_string();
    let suggestion: Value = client
        .post(format!("{base}/v1/suggest"))
        .json(&json!({"session_id": id, "roleplay_text": "Filgo swings his axe at the wolf! \"Raaaargh!\""}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    let cmd = suggestion["command"].as_str().unwrap().to_string();
    assert_eq!(cmd, "!a greataxe -t dw1");
    let r = client.post(format!("{base}/v1/sessions/{id}/commands")).json(&json!({"text": cmd})).send().unwrap();
    assert_eq!(r.status().as_u16(), 200);
    child.kill().ok();
    child.wait().ok();

    let log = d.join("sessions").join(format!("{id}.jsonl"));
    assert!(ok(&["replay", log.to_str().unwrap()], d).starts_with("ok "));
}
