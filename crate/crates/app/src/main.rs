use std::io;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use fireball_app::batch::{self, PredictionSource};
use fireball_app::config::{build_predictor, load_engine, AppConfig, PredictorSpec, DATA_DIR_ENV};
use fireball_app::service::{self, AppState, DM_ID};
use fireball_app::{repl, stamp};
use fireball_core::dice::DieSource;
use fireball_core::eventlog::{EventLog, Session};
use fireball_core::exec::Execution;
use fireball_core::fixtures::{combat, combat_names};

#[derive(Parser)]
#[command(name = "fireball", version, about = "Combat engine, distillation pipeline and evaluation harness")]
struct Cli {
    /// Content pack JSON (defaults to the bundled starter pack).
    #[arg(long, global = true)]
    content: Option<PathBuf>,
    /// Run batch work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PredictorArgs {
    /// stub-gold, stub-corrupt:<p>, garbage or gateway.
    #[arg(long, default_value = "stub-gold")]
    predictor: PredictorSpec,
    /// Extra gold completions (prompts.jsonl) for the stub predictors.
    #[arg(long)]
    gold: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gateway request timeout in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Play a combat interactively.
    Repl {
        /// Bundled combat name.
        #[arg(long, default_value = "appendix_f")]
        combat: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where the session log is written.
        #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
        data_dir: PathBuf,
    },
    /// Distill event logs into triples.
    Distill {
        /// Log files or directories of them.
        #[arg(long = "in", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the statistics as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build utt2cmd and sta2nar prompt records from event logs.
    Prompts {
        #[arg(long = "in", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Eval(Eval),
    /// Re-execute event logs and check they reproduce themselves.
    Replay {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
    /// Roll a dice expression.
    Roll {
        expr: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
        data_dir: PathBuf,
        #[command(flatten)]
        predictor: PredictorArgs,
    },
    /// Generate synthetic session logs.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        sessions: u64,
        #[arg(long, default_value_t = 50)]
        commands: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum Eval {
    /// Fraction of predicted commands that execute.
    Passrate {
        /// Predictions ({id, prompt, prediction} per line). Without it the
        /// predictor generates them.
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Evaluation items (defaults to the bundled ones).
        #[arg(long)]
        items: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Print every item.
        #[arg(long)]
        table: bool,
        #[command(flatten)]
        predictor: PredictorArgs,
    },
    /// State-assertion unit scenarios.
    Unittests {
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        samples: u64,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        predictor: PredictorArgs,
    },
    /// Sentence GLEU and ROUGE-L against references.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        /// References ({id, gold} per line; defaults to the bundled gold).
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn predictor(args: &PredictorArgs) -> anyhow::Result<Arc<dyn fireball_core::evalkit::Predictor + Send + Sync>> {
    build_predictor(&args.predictor, &args.gold, args.seed, Duration::from_secs(args.timeout))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let engine = load_engine(cli.content.as_deref())?;
    match cli.command {
        Command::Repl { combat: name, seed, data_dir } => {
            let mut state = combat(&name).with_context(|| {
                format!("no bundled combat '{name}' (have {})", combat_names().collect::<Vec<_>>().join(", "))
            })?;
            state.rng = DieSource::seeded(seed);
            std::fs::create_dir_all(&data_dir).with_context(|| format!("creating {}", data_dir.display()))?;
            let id = format!("repl-{}", chrono::Utc::now().format("%Y%m%dT%H%M%S%.3f"));
            let log = EventLog::open(&data_dir, id)?;
            let at = stamp(&log);
            let mut session = Session::start(engine, log, DM_ID, state, at)?;
            if let Some(p) = session.log.path() {
                eprintln!("logging to {}", p.display());
            }
            repl::run(&mut session, io::stdin().lock(), io::stdout().lock())?;
        }
        Command::Distill { input, out, report } => println!("{}", batch::distill(&input, &out, report.as_deref(), exec)?),
        Command::Prompts { input, out } => println!("{}", batch::prompts(&input, &out, exec)?),
        Command::Eval(Eval::Passrate { pred, items, report, table, predictor: args }) => {
            let p;
            let source = match &pred {
                Some(path) => PredictionSource::File(path),
                None => {
                    p = predictor(&args)?;
                    PredictionSource::Predictor(p.as_ref())
                }
            };
            let rep = batch::passrate(&engine, items.as_deref(), source, report.as_deref(), exec)?;
            if table {
                println!("{rep}");
            } else {
                let passed = rep.items.iter().filter(|r| r.passed).count();
                println!("pass rate {:.3} ({passed}/{})", rep.pass_rate, rep.items.len());
            }
        }
        Command::Eval(Eval::Unittests { scenarios, samples, report, predictor: args }) => {
            let p = predictor(&args)?;
            let rep = batch::unittests(&engine, scenarios.as_deref(), p.as_ref(), samples, report.as_deref(), exec)?;
            println!("{}", batch::format_unit_report(&rep));
        }
        Command::Eval(Eval::Metrics { pred, gold, report }) => {
            let rep = batch::metrics(&pred, gold.as_deref(), report.as_deref())?;
            println!("sgleu {:.4}  rougeL {:.4}  (n={})", rep.sgleu, rep.rouge_l, rep.n);
        }
        Command::Replay { logs } => {
            let outcomes = batch::replay(&engine, &logs, exec)?;
            let mut ok = true;
            for o in &outcomes {
                match &o.error {
                    None => println!("ok {} ({} events)", o.path.display(), o.events),
                    Some(e) => {
                        ok = false;
                        println!("DIVERGED {}: {e}", o.path.display());
                    }
                }
            }
            return Ok(ok);
        }
        Command::Roll { expr, seed } => println!("{}", batch::roll_once(&expr, seed)?),
        Command::Serve { port, data_dir, predictor: args } => {
            let cfg = AppConfig {
                content: cli.content.clone(),
                data_dir: Some(data_dir),
                port,
                seed: args.seed,
                predictor: args.predictor.clone(),
                gold: args.gold.clone(),
                timeout: Duration::from_secs(args.timeout),
            };
            cfg.validate()?;
            let state = Arc::new(AppState::new(engine, cfg.data_dir.clone(), cfg.predictor()?, cfg.seed));
            tokio::runtime::Runtime::new()?.block_on(service::serve(state, cfg.port))?;
        }
        Command::Synth { out, sessions, commands, seed } => {
            println!("{}", batch::synth(&engine, &out, sessions, commands, seed, exec)?)
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
