//! Non-interactive subcommands. Each returns the summary it prints.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use fireball_core::dice::{format_roll, parse_dice, roll, DieSource};
use fireball_core::engine::Engine;
use fireball_core::evalkit::{
    bundled_items, bundled_scenarios, load_scenarios, rouge_l, run_unit_tests, score_predictions, sentence_gleu, tokenize,
    EvalItem, EvalReport, Prediction, Predictor, UnitReport,
};
use fireball_core::eventlog::{load_jsonl, replay_with, write_jsonl, Event};
use fireball_core::exec::Execution;
use fireball_core::pipeline::{distill_corpus, DistillReport, HeuristicClassifier, Triple};
use fireball_core::promptgen::{prompt_records, PromptRecord, Task};
use fireball_core::synth::{generate, SynthConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn write_jsonl_records<T: Serialize>(path: &Path, records: &[T]) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Log files named on the command line; directories contribute every
/// `*.jsonl` inside, sorted by name.
pub fn log_paths(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no event logs found");
    }
    Ok(out)
}

pub fn read_logs(inputs: &[PathBuf]) -> anyhow::Result<Vec<Vec<Event>>> {
    log_paths(inputs)?
        .iter()
        .map(|p| load_jsonl(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn distill_logs(logs: &[Vec<Event>], exec: Execution) -> anyhow::Result<(Vec<Triple>, DistillReport)> {
    Ok(distill_corpus(logs, &HeuristicClassifier, exec)?)
}

pub fn distill(inputs: &[PathBuf], out: &Path, report: Option<&Path>, exec: Execution) -> anyhow::Result<String> {
    let logs = read_logs(inputs)?;
    let (triples, rep) = distill_logs(&logs, exec)?;
    write_jsonl_records(out, &triples)?;
    if let Some(r) = report {
        write_json(r, &rep)?;
    }
    Ok(format!("{rep}\nwrote {} triples to {}", triples.len(), out.display()))
}

pub fn prompts(inputs: &[PathBuf], out: &Path, exec: Execution) -> anyhow::Result<String> {
    let logs = read_logs(inputs)?;
    let per_log = exec.map(&logs, |events| -> anyhow::Result<Vec<PromptRecord>> {
        let (triples, _) = distill_logs(std::slice::from_ref(events), Execution::Sequential)?;
        Ok(prompt_records(events, &triples))
    });
    let mut records = Vec::new();
    for r in per_log {
        records.extend(r?);
    }
    write_jsonl_records(out, &records)?;
    let n_cmd = records.iter().filter(|r| r.task == Task::Utt2cmd).count();
    Ok(format!(
        "wrote {} records ({n_cmd} utt2cmd, {} sta2nar) to {}",
        records.len(),
        records.len() - n_cmd,
        out.display()
    ))
}

fn load_items(path: Option<&Path>) -> anyhow::Result<Vec<EvalItem>> {
    match path {
        Some(p) => read_jsonl(p),
        None => Ok(bundled_items()),
    }
}

/// Pairs each prediction with its item by id. Every prediction must match.
pub fn match_predictions(items: &[EvalItem], preds: &[Prediction]) -> anyhow::Result<(Vec<EvalItem>, Vec<String>)> {
    let by_id: HashMap<&str, &EvalItem> = items.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut matched = Vec::with_capacity(preds.len());
    let mut texts = Vec::with_capacity(preds.len());
    for p in preds {
        let Some(item) = by_id.get(p.id.as_str()) else {
            bail!("prediction '{}' has no matching item", p.id);
        };
        if !p.prompt.is_empty() && p.prompt != item.prompt {
            bail!("prediction '{}' was made for a different prompt", p.id);
        }
        matched.push((*item).clone());
        texts.push(p.prediction.clone());
    }
    Ok((matched, texts))
}

pub enum PredictionSource<'a> {
    File(&'a Path),
    Predictor(&'a dyn Predictor),
}

pub fn passrate(
    engine: &Engine,
    items: Option<&Path>,
    source: PredictionSource<'_>,
    report: Option<&Path>,
    exec: Execution,
) -> anyhow::Result<EvalReport> {
    let items = load_items(items)?;
    let rep = match source {
        PredictionSource::File(p) => {
            let preds: Vec<Prediction> = read_jsonl(p)?;
            let (items, texts) = match_predictions(&items, &preds)?;
            score_predictions(engine, &items, &texts, exec)
        }
        PredictionSource::Predictor(pred) => fireball_core::evalkit::evaluate(engine, &items, pred, exec)?,
    };
    if let Some(r) = report {
        write_json(r, &rep)?;
    }
    Ok(rep)
}

pub fn unittests(
    engine: &Engine,
    scenarios: Option<&Path>,
    predictor: &dyn Predictor,
    samples: u64,
    report: Option<&Path>,
    exec: Execution,
) -> anyhow::Result<UnitReport> {
    let scenarios = match scenarios {
        Some(p) => load_scenarios(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => bundled_scenarios(),
    };
    let rep = run_unit_tests(engine, &scenarios, predictor, samples, exec)?;
    if let Some(r) = report {
        write_json(r, &rep)?;
    }
    Ok(rep)
}

pub fn format_unit_report(r: &UnitReport) -> String {
    let mut s = String::new();
    for rec in &r.records {
        let status = if rec.passed { "pass" } else { "FAIL" };
        s.push_str(&format!("{status} {:<20} {}", rec.scenario, rec.command));
        if let Some(f) = &rec.failure {
            s.push_str(&format!("  ({f})"));
        }
        s.push('\n');
    }
    s.push_str(&format!("unit test pass rate {:.3} over {} generations", r.score, r.records.len()));
    s
}

/// A reference text for `eval metrics`: `gold`, `reference` or `completion`.
#[derive(Debug, Deserialize)]
struct Reference {
    id: String,
    #[serde(alias = "reference", alias = "completion")]
    gold: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub sgleu: f64,
    pub rouge_l: f64,
    pub items: Vec<MetricsRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub id: String,
    pub sgleu: f64,
    pub rouge_l: f64,
}

/// Text metrics of predictions against references matched by id. Without a
/// reference file the bundled items' gold commands are used.
pub fn metrics(preds: &Path, refs: Option<&Path>, report: Option<&Path>) -> anyhow::Result<MetricsReport> {
    let preds: Vec<Prediction> = read_jsonl(preds)?;
    let refs: HashMap<String, String> = match refs {
        Some(p) => read_jsonl::<Reference>(p)?.into_iter().map(|r| (r.id, r.gold)).collect(),
        None => bundled_items().into_iter().filter_map(|i| Some((i.id, i.gold?))).collect(),
    };
    let mut items = Vec::new();
    for p in &preds {
        let Some(gold) = refs.get(&p.id) else {
            bail!("prediction '{}' has no reference", p.id);
        };
        let (g, h) = (tokenize(gold), tokenize(&p.prediction));
        items.push(MetricsRecord {
            id: p.id.clone(),
            sgleu: sentence_gleu(&g, &h),
            rouge_l: rouge_l(&g, &h),
        });
    }
    let n = items.len();
    let mean = |f: fn(&MetricsRecord) -> f64| if n == 0 { 0.0 } else { items.iter().map(f).sum::<f64>() / n as f64 };
    let rep = MetricsReport {
        n,
        sgleu: mean(|r| r.sgleu),
        rouge_l: mean(|r| r.rouge_l),
        items: items.clone(),
    };
    if let Some(r) = report {
        write_json(r, &rep)?;
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub path: PathBuf,
    pub events: usize,
    pub error: Option<String>,
}

pub fn replay(engine: &Engine, inputs: &[PathBuf], exec: Execution) -> anyhow::Result<Vec<ReplayOutcome>> {
    let paths = log_paths(inputs)?;
    let outcomes = exec.map(&paths, |p| match load_jsonl(p) {
        Ok(events) => ReplayOutcome {
            path: p.clone(),
            events: events.len(),
            error: replay_with(engine, &events).err().map(|d| d.to_string()),
        },
        Err(e) => ReplayOutcome {
            path: p.clone(),
            events: 0,
            error: Some(e.to_string()),
        },
    });
    Ok(outcomes)
}

/// Rolls `expr` once. Without a seed the generator is seeded from the clock.
pub fn roll_once(expr: &str, seed: Option<u64>) -> anyhow::Result<String> {
    let expr = parse_dice(expr)?;
    let seed = seed.unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or_default()
    });
    let mut src = DieSource::seeded(seed);
    Ok(format_roll(&roll(&expr, &mut src)?))
}

/// Writes `sessions` synthetic logs to `out`, one `<combat_id>.jsonl` each.
pub fn synth(engine: &Engine, out: &Path, sessions: u64, commands: usize, seed: u64, exec: Execution) -> anyhow::Result<String> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let seeds: Vec<u64> = (0..sessions).map(|i| seed + i).collect();
    let results = exec.map(&seeds, |s| {
        let session = generate(engine, &SynthConfig::new(*s, commands));
        let path = out.join(format!("{}.jsonl", session.combat_id));
        write_jsonl(&path, &session.events).map(|_| session.events.len())
    });
    let mut total = 0;
    for r in results {
        total += r?;
    }
    Ok(format!("wrote {sessions} sessions ({total} events) to {}", out.display()))
}
