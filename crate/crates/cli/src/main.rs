use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use gennet_core::engine::{Checkpoint, EvaluatorKind, RunDirectory, RunError, RunOutcome, CHECKPOINT_FILE};
use gennet_core::genome::summarize;
use gennet_core::{Engine, EngineConfig, EngineError, Genome};
use tracing::info;
use tracing_subscriber::layer::SubscriberExt;
use tracing_subscriber::util::SubscriberInitExt;
use tracing_subscriber::{fmt, EnvFilter, Layer};

const LOG_ENV: &str = "GENNET_LOG";
const LOG_FILE: &str = "run.log";

#[derive(Parser, Debug)]
#[command(name = "gennet", version, about = "Genetic search over sequential CNN architectures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Start a new run.
    Run(RunArgs),
    /// Continue a run from its checkpoint.
    Resume(ResumeArgs),
    /// Print a human-readable summary of a genome file.
    Inspect {
        /// Genome JSON file.
        genome: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config file; keys mirror the engine config fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(EvaluatorKind))]
    evaluator: Option<EvaluatorKind>,
    /// Worker command line or host:port; repeatable. Replaces the config's list.
    #[arg(long = "workers", value_name = "CMD_OR_ADDR")]
    workers: Vec<String>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Run directory.
    #[arg(long, default_value = "gennet-run")]
    out: PathBuf,
    /// Stop after this many completed generations (leaves a resumable checkpoint).
    #[arg(long, hide = true)]
    halt_after: Option<usize>,
}

#[derive(Args, Debug)]
struct ResumeArgs {
    /// Checkpoint file, or the run directory holding it.
    checkpoint: PathBuf,
    #[arg(long, hide = true)]
    halt_after: Option<usize>,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let code = match &e {
            RunError::Engine(EngineError::Config(_)) => 2,
            RunError::Engine(EngineError::EvaluatorFailed { .. } | EngineError::EvaluatorContract { .. }) => 3,
            RunError::Checkpoint(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn init_logging(log_dir: Option<&Path>) {
    let filter = || EnvFilter::try_from_env(LOG_ENV).unwrap_or_else(|_| EnvFilter::new("info"));
    let stderr = fmt::layer().with_writer(std::io::stderr).with_target(false).with_filter(filter());
    let file = log_dir
        .and_then(|dir| File::options().create(true).append(true).open(dir.join(LOG_FILE)).ok())
        .map(|f| fmt::layer().with_writer(Mutex::new(f)).with_ansi(false).with_filter(filter()));
    let _ = tracing_subscriber::registry().with(stderr).with(file).try_init();
}

fn load_config(args: &RunArgs) -> Result<EngineConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => EngineConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(t) = args.population {
        config.population_size = t;
    }
    if let Some(g) = args.generations {
        config.generations = g;
    }
    if let Some(kind) = args.evaluator {
        config.evaluator = kind;
    }
    if !args.workers.is_empty() {
        config.workers = args.workers.clone();
    }
    if let Some(p) = args.parallelism {
        config.parallelism = p;
    }
    let errors = config.validate();
    if !errors.is_empty() {
        let lines: Vec<String> = errors.iter().map(|e| format!("  {e}")).collect();
        return Err(Failure::usage(format!("invalid configuration:\n{}", lines.join("\n"))));
    }
    Ok(config)
}

fn finish(outcome: RunOutcome, dir: &RunDirectory) {
    match outcome {
        RunOutcome::Completed(report) => {
            let best = report.best.fitness.unwrap_or(0.0);
            info!(best_fitness = best, "run complete");
            println!("best fitness {best:.6}");
            println!("run directory {}", dir.root().display());
        }
        RunOutcome::Halted { next_generation } => {
            println!("halted before generation {next_generation}");
            println!("run directory {}", dir.root().display());
        }
    }
}

fn engine_for(config: EngineConfig) -> Result<Engine<Box<dyn gennet_core::Evaluator>>, Failure> {
    let evaluator = config
        .build_evaluator()
        .map_err(|e| Failure::usage(format!("invalid configuration:\n  {e}")))?;
    Engine::new(config, evaluator).map_err(|e| Failure::from(RunError::from(e)))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let config = match load_config(&args) {
        Ok(c) => c,
        Err(f) => {
            init_logging(None);
            return Err(f);
        }
    };
    let dir = RunDirectory::create(&args.out)
        .map_err(|e| Failure::runtime(format!("cannot create run directory {}: {e}", args.out.display())))?;
    init_logging(Some(dir.root()));
    info!(
        seed = config.master_seed,
        population = config.population_size,
        generations = config.generations,
        evaluator = ?config.evaluator,
        "starting run"
    );
    let engine = engine_for(config)?;
    let outcome = engine.run_in(&dir, args.halt_after)?;
    finish(outcome, &dir);
    Ok(())
}

fn cmd_resume(args: ResumeArgs) -> Result<(), Failure> {
    let path = if args.checkpoint.is_dir() {
        args.checkpoint.join(CHECKPOINT_FILE)
    } else {
        args.checkpoint.clone()
    };
    let root = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    init_logging(root.is_dir().then_some(root.as_path()));
    let checkpoint = Checkpoint::load(&path).map_err(|e| Failure::usage(e.to_string()))?;
    let dir = RunDirectory::create(&root)
        .map_err(|e| Failure::runtime(format!("cannot open run directory {}: {e}", root.display())))?;
    if checkpoint.state.is_complete(&checkpoint.config) {
        info!("run already complete; nothing to do");
        println!("run already complete");
        return Ok(());
    }
    info!(next_generation = checkpoint.state.generation, "resuming run");
    let engine = engine_for(checkpoint.config)?;
    let outcome = engine.resume_in(&dir, checkpoint.state, args.halt_after)?;
    finish(outcome, &dir);
    Ok(())
}

fn cmd_inspect(path: &Path) -> Result<(), Failure> {
    let genome = Genome::read_file(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    println!("{}", summarize(&genome));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Resume(args) => cmd_resume(args),
        Command::Inspect { genome } => cmd_inspect(&genome),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
