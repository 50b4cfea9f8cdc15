//! Genetic search over sequential CNN architectures.
//!
//! - [`genome`]: the integer-vector architecture encoding, search space and codec.
//! - [`operators`]: elitist roulette selection, aligned one-point crossover, per-locus mutation.
//! - [`engine`]: the generation loop with fitness caching, checkpoints and reports.
//! - [`fitness`]: the evaluator contract, a surrogate landscape and the trainer-worker client.

pub mod engine;
pub mod fitness;
pub mod fixtures;
pub mod genome;
pub mod operators;
pub mod rng;

pub use engine::{Engine, EngineConfig, EngineError, EngineState, EvolutionReport, FitnessCache, GenerationStats};
pub use fitness::{EvaluationRequest, EvaluationResult, Evaluator, SurrogateEvaluator};
pub use genome::{Genome, SearchSpace};
pub use operators::Individual;
