//! Runtime configuration shared by the CLI and the service.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use fireball_core::content::{load_content, starter_pack};
use fireball_core::engine::Engine;
use fireball_core::evalkit::{bundled_items, CorruptStub, GarbageStub, GoldStub, Predictor};
use fireball_core::promptgen::{PromptRecord, Task};

use crate::batch::read_jsonl;
use crate::gateway::GatewayPredictor;

pub const DATA_DIR_ENV: &str = "FIREBALL_DATA_DIR";

/// Which predictor answers prompts.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictorSpec {
    /// Recorded gold completions.
    StubGold,
    /// Gold, corrupted with probability p.
    StubCorrupt(f64),
    /// Word salad.
    Garbage,
    /// Remote completion endpoint from MODEL_API_URL / MODEL_API_KEY.
    Gateway,
}

impl FromStr for PredictorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stub-gold" => Ok(PredictorSpec::StubGold),
            "garbage" => Ok(PredictorSpec::Garbage),
            "gateway" => Ok(PredictorSpec::Gateway),
            _ => {
                let p = s
                    .strip_prefix("stub-corrupt:")
                    .ok_or_else(|| format!("unknown predictor '{s}' (stub-gold, stub-corrupt:<p>, garbage, gateway)"))?;
                let p: f64 = p.parse().map_err(|_| format!("bad corruption probability '{p}'"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("corruption probability {p} is outside [0, 1]"));
                }
                Ok(PredictorSpec::StubCorrupt(p))
            }
        }
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorSpec::StubGold => f.write_str("stub-gold"),
            PredictorSpec::StubCorrupt(p) => write!(f, "stub-corrupt:{p}"),
            PredictorSpec::Garbage => f.write_str("garbage"),
            PredictorSpec::Gateway => f.write_str("gateway"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AppConfig {
    /// Content pack document; the bundled starter pack when absent.
    pub content: Option<PathBuf>,
    /// Where session logs are written. `None` keeps them in memory.
    pub data_dir: Option<PathBuf>,
    pub port: u16,
    pub seed: u64,
    pub predictor: PredictorSpec,
    /// Extra gold completions for the stubs (`prompts.jsonl` files).
    pub gold: Vec<PathBuf>,
    pub timeout: Duration,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            content: None,
            data_dir: None,
            port: 8080,
            seed: 0,
            predictor: PredictorSpec::StubGold,
            gold: Vec::new(),
            timeout: Duration::from_secs(30),
        }
    }
}

impl AppConfig {
    /// Checks paths and the port. Creates the data directory if needed.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.port == 0 {
            bail!("port must be in 1..=65535");
        }
        if let Some(p) = &self.content {
            if !p.is_file() {
                bail!("content pack {} does not exist", p.display());
            }
        }
        for g in &self.gold {
            if !g.is_file() {
                bail!("gold file {} does not exist", g.display());
            }
        }
        if let Some(d) = &self.data_dir {
            std::fs::create_dir_all(d).with_context(|| format!("creating data dir {}", d.display()))?;
        }
        Ok(())
    }

    pub fn engine(&self) -> anyhow::Result<Engine> {
        load_engine(self.content.as_deref())
    }

    pub fn predictor(&self) -> anyhow::Result<Arc<dyn Predictor + Send + Sync>> {
        build_predictor(&self.predictor, &self.gold, self.seed, self.timeout)
    }
}

pub fn load_engine(content: Option<&Path>) -> anyhow::Result<Engine> {
    let index = match content {
        None => starter_pack(),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let doc: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            load_content(&doc).with_context(|| format!("loading content pack {}", p.display()))?
        }
    };
    Ok(Engine::new(Arc::new(index)))
}

/// Gold table from the bundled evaluation items plus any utt2cmd records in
/// `extra`.
pub fn gold_table(extra: &[PathBuf]) -> anyhow::Result<GoldStub> {
    let mut pairs: Vec<(String, String)> = bundled_items()
        .into_iter()
        .filter_map(|i| Some((i.prompt, i.gold?)))
        .collect();
    for path in extra {
        let recs: Vec<PromptRecord> = read_jsonl(path)?;
        pairs.extend(
            recs.into_iter()
                .filter(|r| r.task == Task::Utt2cmd)
                .filter_map(|r| Some((r.prompt, r.completion?))),
        );
    }
    Ok(GoldStub::new(pairs))
}

pub fn build_predictor(
    spec: &PredictorSpec,
    gold: &[PathBuf],
    seed: u64,
    timeout: Duration,
) -> anyhow::Result<Arc<dyn Predictor + Send + Sync>> {
    Ok(match spec {
        PredictorSpec::StubGold => Arc::new(gold_table(gold)?),
        PredictorSpec::StubCorrupt(p) => Arc::new(CorruptStub {
            gold: gold_table(gold)?,
            p: *p,
            seed,
        }),
        PredictorSpec::Garbage => Arc::new(GarbageStub { seed }),
        PredictorSpec::Gateway => Arc::new(GatewayPredictor::from_env(timeout)?),
    })
}
