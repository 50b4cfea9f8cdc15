//! Selection, crossover and mutation over [`Genome`]s.

mod crossover;
mod mutation;
mod selection;

pub use crossover::{sample_cross_points, splice, Arm, CrossPoint};
pub use mutation::{mutate, mutate_with_rate, mutation_rate_bounds, sample_mutation_rate, MutationOutcome};
pub use selection::{elite_count, parent_count, roulette_draw, select, Selection};

use serde::{Deserialize, Serialize};

use crate::genome::Genome;

/// A genome and, once evaluated, its fitness in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(genome: Genome) -> Self {
        Individual { genome, fitness: None }
    }

    pub fn with_fitness(genome: Genome, fitness: f64) -> Self {
        Individual {
            genome,
            fitness: Some(fitness),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OperatorError {
    #[error("population needs at least 2 individuals, got {0}")]
    PopulationTooSmall(usize),
    #[error("individual {0} has no fitness")]
    MissingFitness(usize),
    #[error("individual {index} has fitness {fitness} outside [0, 1]")]
    FitnessOutOfRange { index: usize, fitness: f64 },
    #[error("parents disagree on class count ({0} vs {1})")]
    ClassMismatch(u32, u32),
    #[error("invalid cross point: {0}")]
    InvalidCrossPoint(String),
}
