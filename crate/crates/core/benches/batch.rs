use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fireball_core::engine::Engine;
use fireball_core::evalkit::{bundled_items, cycle_items, score_predictions};
use fireball_core::eventlog::replay_with;
use fireball_core::exec::Execution;
use fireball_core::pipeline::{distill_corpus, HeuristicClassifier};
use fireball_core::synth::{generate, SynthConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn batch_eval(c: &mut Criterion) {
    let engine = Engine::default();
    let items = cycle_items(&bundled_items(), 2000);
    let preds: Vec<String> = items.iter().map(|it| it.gold.clone().unwrap_or_default()).collect();
    let mut g = c.benchmark_group("batch_eval");
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::new(name, items.len()), |b| {
            b.iter(|| black_box(score_predictions(&engine, &items, &preds, mode)))
        });
    }
    g.finish();
}

fn fuzzed_distillation(c: &mut Criterion) {
    let engine = Engine::default();
    let logs: Vec<_> = (0..200).map(|seed| generate(&engine, &SynthConfig::new(seed, 60)).events).collect();
    let mut g = c.benchmark_group("fuzzed_distillation");
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::new(name, logs.len()), |b| {
            b.iter(|| black_box(distill_corpus(&logs, &HeuristicClassifier, mode).unwrap()))
        });
    }
    g.finish();
}

fn replay_sweep(c: &mut Criterion) {
    let engine = Engine::default();
    let logs: Vec<_> = (0..100).map(|seed| generate(&engine, &SynthConfig::new(seed, 100)).events).collect();
    let mut g = c.benchmark_group("replay_sweep");
    g.sample_size(20);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::new(name, logs.len()), |b| {
            b.iter(|| black_box(mode.map(&logs, |events| replay_with(&engine, events).is_ok())))
        });
    }
    g.finish();
}

criterion_group!(benches, batch_eval, fuzzed_distillation, replay_sweep);
criterion_main!(benches);
