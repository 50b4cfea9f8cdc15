//! The generational loop: evaluate, select, cross over, mutate, repeat.

mod cache;
mod config;
mod run;

pub use cache::FitnessCache;
pub use config::{EngineConfig, EvaluatorKind, FieldError};
pub use run::{Checkpoint, CheckpointError, RunDirectory, RunError, RunOutcome, CHECKPOINT_FILE, GENERATIONS_CSV};

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use crate::fitness::{BatchContext, Evaluator};
use crate::genome::{canonical_hash, random_genome, validate, Genome};
use crate::operators::{mutate, mutate_with_rate, sample_cross_points, select, splice, Individual, OperatorError};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub median_fitness: f64,
    pub best_genome_hash: u64,
    pub evaluations_run: usize,
    pub cache_hits: usize,
    /// Training time reported by the evaluator for this generation's fresh evaluations.
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub config: EngineConfig,
    pub generations: Vec<GenerationStats>,
    pub best: Individual,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Config(Vec<FieldError>),
    #[error("generation {generation}: all {count} evaluations failed (first error: {message})")]
    EvaluatorFailed {
        generation: usize,
        count: usize,
        message: String,
    },
    #[error("generation {generation}: evaluator returned {got} results for {expected} genomes")]
    EvaluatorContract {
        generation: usize,
        expected: usize,
        got: usize,
    },
    #[error("generation {generation}: refusing to evaluate invalid genome: {message}")]
    InvalidGenome { generation: usize, message: String },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Mutable state between generations; exactly what a checkpoint stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    /// Index of the next generation to evaluate.
    pub generation: usize,
    pub population: Vec<Individual>,
    pub cache: FitnessCache,
    pub history: Vec<GenerationStats>,
    pub best: Option<Individual>,
}

impl EngineState {
    pub fn is_complete(&self, config: &EngineConfig) -> bool {
        self.generation >= config.generations
    }
}

pub struct Engine<E> {
    config: EngineConfig,
    evaluator: E,
    pinned_mutation_rate: Option<f64>,
}

impl<E: Evaluator> Engine<E> {
    pub fn new(config: EngineConfig, evaluator: E) -> Result<Self, EngineError> {
        let errors = config.validate();
        if !errors.is_empty() {
            return Err(EngineError::Config(errors));
        }
        Ok(Engine {
            config,
            evaluator,
            pinned_mutation_rate: None,
        })
    }

    /// Replaces the per-genome random mutation rate with a fixed one.
    pub fn pin_mutation_rate(mut self, rate: f64) -> Self {
        assert!((0.0..=1.0).contains(&rate));
        self.pinned_mutation_rate = Some(rate);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// `T` fresh random genomes; individual `i` draws from its own stream.
    pub fn initialize_population(&self) -> Vec<Individual> {
        (0..self.config.population_size)
            .map(|i| {
                let mut rng = stream(self.config.master_seed, 0, Purpose::Initialize, i as u64);
                let genome = random_genome(&self.config.search_space, self.config.num_classes, &mut rng)
                    .expect("config validation covers the search space");
                Individual::new(genome)
            })
            .collect()
    }

    pub fn initial_state(&self) -> EngineState {
        EngineState {
            generation: 0,
            population: self.initialize_population(),
            cache: FitnessCache::new(),
            history: Vec::new(),
            best: None,
        }
    }

    /// Fills in every missing fitness, consulting the cache first. Returns
    /// `(evaluations_run, cache_hits, reported_seconds)`.
    fn evaluate(
        &self,
        generation: usize,
        population: &mut [Individual],
        cache: &mut FitnessCache,
    ) -> Result<(usize, usize, f64), EngineError> {
        let mut batch: Vec<Genome> = Vec::new();
        let mut batch_slot: HashMap<u64, usize> = HashMap::new();
        let mut waiting: Vec<(usize, usize)> = Vec::new();
        let mut hits = 0;

        for (i, ind) in population.iter_mut().enumerate() {
            if ind.fitness.is_some() {
                continue;
            }
            let key = canonical_hash(&ind.genome);
            if let Some(f) = cache.get(key) {
                ind.fitness = Some(f);
                hits += 1;
            } else if let Some(&slot) = batch_slot.get(&key) {
                waiting.push((i, slot));
                hits += 1;
            } else {
                if let Some(v) = validate(&ind.genome, &self.config.search_space).first() {
                    return Err(EngineError::InvalidGenome {
                        generation,
                        message: v.to_string(),
                    });
                }
                batch_slot.insert(key, batch.len());
                waiting.push((i, batch.len()));
                batch.push(ind.genome.clone());
            }
        }
        if batch.is_empty() {
            return Ok((0, hits, 0.0));
        }

        let ctx = BatchContext::new(self.config.master_seed, generation as u64);
        let results = self.evaluator.evaluate_batch(&batch, &ctx);
        if results.len() != batch.len() {
            return Err(EngineError::EvaluatorContract {
                generation,
                expected: batch.len(),
                got: results.len(),
            });
        }
        if let Some(first) = results.iter().find(|r| !r.is_ok()).filter(|_| results.iter().all(|r| !r.is_ok())) {
            return Err(EngineError::EvaluatorFailed {
                generation,
                count: results.len(),
                message: first.message.clone().unwrap_or_else(|| "no diagnostic".into()),
            });
        }

        let mut seconds = 0.0;
        for (genome, result) in batch.iter().zip(&results) {
            if !result.is_ok() {
                debug!(id = %result.id, message = ?result.message, "evaluation failed; recording fitness 0");
            }
            cache.put(canonical_hash(genome), result.effective_fitness());
            seconds += result.wall_seconds.unwrap_or(0.0);
        }
        for (i, slot) in waiting {
            population[i].fitness = Some(results[slot].effective_fitness());
        }
        Ok((batch.len(), hits, seconds))
    }

    /// Runs one generation on `population`: evaluation, elitist selection,
    /// pairwise crossover, mutation of every child. Returns the next population
    /// and the statistics of the evaluated one.
    pub fn step_generation(
        &self,
        generation: usize,
        mut population: Vec<Individual>,
        cache: &mut FitnessCache,
    ) -> Result<(Vec<Individual>, GenerationStats, Individual), EngineError> {
        let seed = self.config.master_seed;
        let gen = generation as u64;
        let t = self.config.population_size;
        let (evaluations_run, cache_hits, wall_seconds) = self.evaluate(generation, &mut population, cache)?;
        let (stats, best) = summarize(generation, &population, evaluations_run, cache_hits, wall_seconds);

        let selection = select(&population, &mut stream(seed, gen, Purpose::Select, 0))?;

        let mut children = Vec::with_capacity(selection.parents.len());
        for (pair, parents) in selection.parents.chunks(2).enumerate() {
            match parents {
                [a, b] => {
                    let mut rng = stream(seed, gen, Purpose::Crossover, pair as u64);
                    if rng.gen_bool(self.config.crossover_rate) {
                        let (k1, k2) = sample_cross_points(&a.genome, &b.genome, &mut rng);
                        let (c1, c2) = splice(&a.genome, &b.genome, k1, k2)?;
                        children.push(c1);
                        children.push(c2);
                    } else {
                        children.push(a.genome.clone());
                        children.push(b.genome.clone());
                    }
                }
                [a] => children.push(a.genome.clone()),
                _ => unreachable!("chunks(2) yields one or two parents"),
            }
        }

        let space = &self.config.search_space;
        let mut next = selection.elites;
        next.extend(children.iter().enumerate().map(|(j, child)| {
            let mut rng = stream(seed, gen, Purpose::Mutate, j as u64);
            let mutant = match self.pinned_mutation_rate {
                Some(rate) => mutate_with_rate(child, space, rate, &mut rng).genome,
                None => mutate(child, space, &mut rng),
            };
            Individual::new(mutant)
        }));
        // Elites plus children is exactly T by construction; any surplus would be
        // trailing, unevaluated offspring.
        next.truncate(t);

        info!(
            generation,
            best = stats.best_fitness,
            mean = stats.mean_fitness,
            evaluations = evaluations_run,
            cache_hits,
            "generation complete"
        );
        Ok((next, stats, best))
    }

    /// Advances `state` by one generation.
    pub fn advance(&self, state: &mut EngineState) -> Result<GenerationStats, EngineError> {
        self.advance_with_best(state).map(|(stats, _)| stats)
    }

    /// Like [`Engine::advance`], also returning the generation's best individual.
    pub fn advance_with_best(&self, state: &mut EngineState) -> Result<(GenerationStats, Individual), EngineError> {
        let population = std::mem::take(&mut state.population);
        let (next, stats, best) = match self.step_generation(state.generation, population.clone(), &mut state.cache) {
            Ok(step) => step,
            Err(e) => {
                state.population = population;
                return Err(e);
            }
        };
        let improved = match &state.best {
            None => true,
            Some(current) => best.fitness > current.fitness,
        };
        if improved {
            state.best = Some(best.clone());
        }
        state.population = next;
        state.history.push(stats.clone());
        state.generation += 1;
        Ok((stats, best))
    }

    /// Runs all configured generations in memory.
    pub fn evolve(&self) -> Result<EvolutionReport, EngineError> {
        let mut state = self.initial_state();
        while !state.is_complete(&self.config) {
            self.advance(&mut state)?;
        }
        Ok(self.report(&state))
    }

    pub fn report(&self, state: &EngineState) -> EvolutionReport {
        EvolutionReport {
            config: self.config.clone(),
            generations: state.history.clone(),
            best: state.best.clone().expect("report requested before any generation ran"),
        }
    }
}

fn summarize(
    generation: usize,
    population: &[Individual],
    evaluations_run: usize,
    cache_hits: usize,
    wall_seconds: f64,
) -> (GenerationStats, Individual) {
    let mut fitness: Vec<f64> = population.iter().map(|i| i.fitness.unwrap_or(0.0)).collect();
    let best = population
        .iter()
        .max_by(|a, b| {
            let (fa, fb) = (a.fitness.unwrap_or(0.0), b.fitness.unwrap_or(0.0));
            // Ties go to the lower hash, matching elite ranking.
            fa.total_cmp(&fb)
                .then_with(|| canonical_hash(&b.genome).cmp(&canonical_hash(&a.genome)))
        })
        .expect("population is never empty")
        .clone();
    let mean = fitness.iter().sum::<f64>() / fitness.len() as f64;
    fitness.sort_by(f64::total_cmp);
    let mid = fitness.len() / 2;
    let median = if fitness.len().is_multiple_of(2) {
        (fitness[mid - 1] + fitness[mid]) / 2.0
    } else {
        fitness[mid]
    };
    let stats = GenerationStats {
        generation,
        best_fitness: best.fitness.unwrap_or(0.0),
        mean_fitness: mean,
        median_fitness: median,
        best_genome_hash: canonical_hash(&best.genome),
        evaluations_run,
        cache_hits,
        wall_seconds,
    };
    (stats, best)
}
