//! Fitness evaluation: the evaluator contract, the surrogate landscape and the
//! external trainer-worker client.

mod pool;
mod protocol;
mod surrogate;

pub use pool::{dispatch, DispatchError, Endpoint, PoolConfig, PoolError, WorkerPool};
pub use protocol::{EvaluationRequest, EvaluationResult, Status, TrainSettings};
pub use surrogate::{surrogate_fitness, SurrogateEvaluator};

use crate::genome::{canonical_hash, Genome};
use crate::rng::{stream_key, Purpose};

/// Identifies one evaluation batch inside a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchContext {
    pub master_seed: u64,
    pub generation: u64,
}

impl BatchContext {
    pub fn new(master_seed: u64, generation: u64) -> Self {
        BatchContext {
            master_seed,
            generation,
        }
    }

    /// Unique within a run: `(generation, index, attempt)` never repeats.
    pub fn request_id(&self, index: usize, attempt: u32) -> String {
        let run = stream_key(self.master_seed, 0, Purpose::Evaluate, u64::MAX) as u32;
        let base = format!("{run:08x}-g{}-{index}", self.generation);
        if attempt == 0 {
            base
        } else {
            format!("{base}-r{attempt}")
        }
    }

    /// Training seed for `genome`. Depends only on the run seed and the genome,
    /// so retries and re-submissions train under identical randomness.
    pub fn training_seed(&self, genome: &Genome) -> u64 {
        stream_key(self.master_seed, 0, Purpose::Evaluate, canonical_hash(genome))
    }
}

/// Scores a batch of genomes. Results are index-aligned with the input; failures
/// are reported per item with `status = error`.
pub trait Evaluator: Send + Sync {
    fn evaluate_batch(&self, genomes: &[Genome], ctx: &BatchContext) -> Vec<EvaluationResult>;
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate_batch(&self, genomes: &[Genome], ctx: &BatchContext) -> Vec<EvaluationResult> {
        (**self).evaluate_batch(genomes, ctx)
    }
}

/// Sends genomes to trainer workers over the line protocol.
pub struct ExternalEvaluator {
    pool: WorkerPool,
    dataset: String,
    train: TrainSettings,
    parallelism: usize,
}

impl ExternalEvaluator {
    pub fn new(pool: WorkerPool, dataset: impl Into<String>, train: TrainSettings, parallelism: usize) -> Self {
        ExternalEvaluator {
            pool,
            dataset: dataset.into(),
            train,
            parallelism: parallelism.max(1),
        }
    }

    pub fn pool(&self) -> &WorkerPool {
        &self.pool
    }

    pub fn requests(&self, genomes: &[Genome], ctx: &BatchContext) -> Vec<EvaluationRequest> {
        genomes
            .iter()
            .enumerate()
            .map(|(i, g)| EvaluationRequest {
                id: ctx.request_id(i, 0),
                genome: g.clone(),
                dataset: self.dataset.clone(),
                train: TrainSettings {
                    seed: ctx.training_seed(g),
                    ..self.train.clone()
                },
            })
            .collect()
    }
}

impl Evaluator for ExternalEvaluator {
    fn evaluate_batch(&self, genomes: &[Genome], ctx: &BatchContext) -> Vec<EvaluationResult> {
        self.pool.evaluate_batch(self.requests(genomes, ctx), self.parallelism)
    }
}
