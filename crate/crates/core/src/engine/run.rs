//! On-disk run layout and checkpoint/resume.
//!
//! ```text
//! <run dir>/
//!   config.json         config echo
//!   generations.csv     generation,best_fitness,mean_fitness,median_fitness,evaluations,cache_hits,wall_seconds
//!   best/gen_NNN.json   best genome of each generation
//!   best_genome.json    best genome so far (final once the run completes)
//!   report.json         full report, written on completion
//!   checkpoint.json     state after the last completed generation
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::info;

use super::{Engine, EngineConfig, EngineError, EngineState, EvolutionReport, GenerationStats};
use crate::fitness::Evaluator;
use crate::genome::Genome;

pub const GENERATIONS_CSV: &str = "generations.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
const CONFIG_FILE: &str = "config.json";
const BEST_FILE: &str = "best_genome.json";
const REPORT_FILE: &str = "report.json";
const BEST_DIR: &str = "best";
const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: u32,
    pub master_seed: u64,
    pub config: EngineConfig,
    pub state: EngineState,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("cannot read checkpoint {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("corrupt checkpoint {path}: {reason}")]
    Corrupt { path: String, reason: String },
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("run directory I/O failed: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed(Box<EvolutionReport>),
    /// Stopped early on request; resume from the checkpoint to continue.
    Halted { next_generation: usize },
}

#[derive(Serialize)]
struct CsvRow {
    generation: usize,
    best_fitness: f64,
    mean_fitness: f64,
    median_fitness: f64,
    evaluations: usize,
    cache_hits: usize,
    wall_seconds: f64,
}

impl From<&GenerationStats> for CsvRow {
    fn from(s: &GenerationStats) -> Self {
        CsvRow {
            generation: s.generation,
            best_fitness: s.best_fitness,
            mean_fitness: s.mean_fitness,
            median_fitness: s.median_fitness,
            evaluations: s.evaluations_run,
            cache_hits: s.cache_hits,
            wall_seconds: s.wall_seconds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunDirectory {
    root: PathBuf,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("run artifacts always serialize");
    bytes.push(b'\n');
    bytes
}

impl RunDirectory {
    pub fn create(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join(BEST_DIR))?;
        Ok(RunDirectory { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.root.join(CHECKPOINT_FILE)
    }

    pub fn generations_path(&self) -> PathBuf {
        self.root.join(GENERATIONS_CSV)
    }

    pub fn best_genome_path(&self) -> PathBuf {
        self.root.join(BEST_FILE)
    }

    pub fn generation_best_path(&self, generation: usize) -> PathBuf {
        self.root.join(BEST_DIR).join(format!("gen_{generation:03}.json"))
    }

    pub fn write_config(&self, config: &EngineConfig) -> io::Result<()> {
        write_atomic(&self.root.join(CONFIG_FILE), &pretty(config))
    }

    pub fn write_generations(&self, history: &[GenerationStats]) -> io::Result<()> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        if history.is_empty() {
            writer.write_record([
                "generation",
                "best_fitness",
                "mean_fitness",
                "median_fitness",
                "evaluations",
                "cache_hits",
                "wall_seconds",
            ])?;
        }
        for stats in history {
            writer.serialize(CsvRow::from(stats))?;
        }
        let bytes = writer.into_inner().map_err(|e| e.into_error())?;
        write_atomic(&self.generations_path(), &bytes)
    }

    pub fn write_generation_best(&self, generation: usize, genome: &Genome) -> io::Result<()> {
        write_atomic(&self.generation_best_path(generation), format!("{}\n", genome.to_json()).as_bytes())
    }

    pub fn write_best(&self, genome: &Genome) -> io::Result<()> {
        write_atomic(&self.best_genome_path(), format!("{}\n", genome.to_json()).as_bytes())
    }

    pub fn write_report(&self, report: &EvolutionReport) -> io::Result<()> {
        write_atomic(&self.root.join(REPORT_FILE), &pretty(report))
    }

    pub fn save_checkpoint(&self, checkpoint: &Checkpoint) -> io::Result<()> {
        write_atomic(&self.checkpoint_path(), &pretty(checkpoint))
    }
}

impl Checkpoint {
    pub fn new(config: &EngineConfig, state: &EngineState) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            master_seed: config.master_seed,
            config: config.clone(),
            state: state.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        let shown = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: shown.clone(),
            source,
        })?;
        let corrupt = |reason: String| CheckpointError::Corrupt {
            path: shown.clone(),
            reason,
        };
        let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if cp.format != CHECKPOINT_FORMAT {
            return Err(corrupt(format!("unsupported format {}", cp.format)));
        }
        if cp.master_seed != cp.config.master_seed {
            return Err(corrupt("master_seed disagrees with the config".into()));
        }
        let errors = cp.config.validate();
        if let Some(e) = errors.first() {
            return Err(corrupt(format!("config: {e}")));
        }
        let s = &cp.state;
        if s.history.len() != s.generation {
            return Err(corrupt(format!(
                "{} generations of history for generation index {}",
                s.history.len(),
                s.generation
            )));
        }
        if s.population.len() != cp.config.population_size {
            return Err(corrupt(format!(
                "population has {} individuals, config says {}",
                s.population.len(),
                cp.config.population_size
            )));
        }
        if s.generation > 0 && s.best.is_none() {
            return Err(corrupt("missing best individual".into()));
        }
        Ok(cp)
    }
}

impl<E: Evaluator> Engine<E> {
    /// Fresh run writing every artifact into `dir`. With `halt_after = Some(k)`
    /// the run stops once `k` generations are complete.
    pub fn run_in(&self, dir: &RunDirectory, halt_after: Option<usize>) -> Result<RunOutcome, RunError> {
        dir.write_config(self.config())?;
        dir.write_generations(&[])?;
        let state = self.initial_state();
        dir.save_checkpoint(&Checkpoint::new(self.config(), &state))?;
        self.resume_in(dir, state, halt_after)
    }

    /// Continues `state` until the generation budget (or `halt_after`) is reached,
    /// checkpointing after every generation.
    pub fn resume_in(&self, dir: &RunDirectory, mut state: EngineState, halt_after: Option<usize>) -> Result<RunOutcome, RunError> {
        while !state.is_complete(self.config()) {
            if halt_after.is_some_and(|k| state.generation >= k) {
                info!(next_generation = state.generation, "halting on request");
                return Ok(RunOutcome::Halted {
                    next_generation: state.generation,
                });
            }
            let (stats, best) = self.advance_with_best(&mut state)?;
            dir.write_generation_best(stats.generation, &best.genome)?;
            dir.write_generations(&state.history)?;
            if let Some(best) = &state.best {
                dir.write_best(&best.genome)?;
            }
            dir.save_checkpoint(&Checkpoint::new(self.config(), &state))?;
        }
        let report = self.report(&state);
        dir.write_generations(&state.history)?;
        dir.write_best(&report.best.genome)?;
        dir.write_report(&report)?;
        Ok(RunOutcome::Completed(Box::new(report)))
    }
}
