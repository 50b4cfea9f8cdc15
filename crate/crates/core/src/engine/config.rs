use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::fitness::{Endpoint, Evaluator, ExternalEvaluator, PoolConfig, SurrogateEvaluator, TrainSettings, WorkerPool};
use crate::genome::SearchSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    #[default]
    Surrogate,
    External,
}

impl std::str::FromStr for EvaluatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "surrogate" => Ok(EvaluatorKind::Surrogate),
            "external" => Ok(EvaluatorKind::External),
            other => Err(format!("unknown evaluator `{other}` (expected surrogate or external)")),
        }
    }
}

/// Everything that determines a run. Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub population_size: usize,
    pub generations: usize,
    pub num_classes: u32,
    pub master_seed: u64,
    pub crossover_rate: f64,
    pub evaluator: EvaluatorKind,
    /// Worker command lines or `host:port` addresses (external evaluator only).
    pub workers: Vec<String>,
    pub parallelism: usize,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight_per_worker: usize,
    pub dataset: String,
    pub train: TrainSettings,
    pub search_space: SearchSpace,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            population_size: 20,
            generations: 10,
            num_classes: 10,
            master_seed: 0,
            crossover_rate: 0.9,
            evaluator: EvaluatorKind::Surrogate,
            workers: Vec::new(),
            parallelism: 1,
            timeout_secs: PoolConfig::default().timeout.as_secs_f64(),
            max_retries: 1,
            max_in_flight_per_worker: 1,
            dataset: "mnist".to_string(),
            train: TrainSettings::default(),
            search_space: SearchSpace::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl EngineConfig {
    /// Every field-level problem, empty when the config is usable.
    pub fn validate(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        let mut bad = |field: &str, message: String| {
            errors.push(FieldError {
                field: field.to_string(),
                message,
            })
        };
        if self.population_size < 2 {
            bad("population_size", format!("must be at least 2, got {}", self.population_size));
        }
        if self.generations < 1 {
            bad("generations", "must be at least 1".into());
        }
        if self.num_classes < 2 {
            bad("num_classes", format!("must be at least 2, got {}", self.num_classes));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            bad("crossover_rate", format!("must lie in [0, 1], got {}", self.crossover_rate));
        }
        if let Err(e) = self.search_space.validate() {
            bad("search_space", e.to_string());
        }
        if self.evaluator == EvaluatorKind::External {
            if self.workers.is_empty() {
                bad("workers", "the external evaluator needs at least one worker".into());
            }
            for (i, w) in self.workers.iter().enumerate() {
                if let Err(e) = w.parse::<Endpoint>() {
                    bad(&format!("workers[{i}]"), e);
                }
            }
        }
        if self.parallelism < 1 {
            bad("parallelism", "must be at least 1".into());
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            bad("timeout_secs", format!("must be positive, got {}", self.timeout_secs));
        }
        if self.max_in_flight_per_worker < 1 {
            bad("max_in_flight_per_worker", "must be at least 1".into());
        }
        let t = &self.train;
        if t.max_epochs < 1 {
            bad("train.max_epochs", "must be at least 1".into());
        }
        if t.batch_size < 1 {
            bad("train.batch_size", "must be at least 1".into());
        }
        if !(t.learning_rate.is_finite() && t.learning_rate > 0.0) {
            bad("train.learning_rate", format!("must be positive, got {}", t.learning_rate));
        }
        if !(t.lr_decay_per_epoch > 0.0 && t.lr_decay_per_epoch <= 1.0) {
            bad("train.lr_decay_per_epoch", format!("must lie in (0, 1], got {}", t.lr_decay_per_epoch));
        }
        if !(t.validation_fraction > 0.0 && t.validation_fraction < 1.0) {
            bad("train.validation_fraction", format!("must lie in (0, 1), got {}", t.validation_fraction));
        }
        errors
    }

    /// Instantiates the configured evaluator.
    pub fn build_evaluator(&self) -> Result<Box<dyn Evaluator>, FieldError> {
        match self.evaluator {
            EvaluatorKind::Surrogate => Ok(Box::new(SurrogateEvaluator)),
            EvaluatorKind::External => {
                let endpoints = self
                    .workers
                    .iter()
                    .map(|w| w.parse::<Endpoint>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|message| FieldError {
                        field: "workers".into(),
                        message,
                    })?;
                let pool = WorkerPool::new(
                    endpoints,
                    PoolConfig {
                        timeout: Duration::from_secs_f64(self.timeout_secs),
                        max_retries: self.max_retries,
                        max_in_flight_per_worker: self.max_in_flight_per_worker,
                    },
                )
                .map_err(|e| FieldError {
                    field: "workers".into(),
                    message: e.to_string(),
                })?;
                Ok(Box::new(ExternalEvaluator::new(
                    pool,
                    self.dataset.clone(),
                    self.train.clone(),
                    self.parallelism,
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = EngineConfig::default();
        assert!(c.validate().is_empty());
        assert_eq!((c.population_size, c.generations, c.crossover_rate), (20, 10, 0.9));
    }

    #[test]
    fn reports_every_bad_field() {
        let c = EngineConfig {
            population_size: 1,
            generations: 0,
            crossover_rate: 1.5,
            evaluator: EvaluatorKind::External,
            ..EngineConfig::default()
        };
        let fields: Vec<String> = c.validate().into_iter().map(|e| e.field).collect();
        assert_eq!(fields, ["population_size", "generations", "crossover_rate", "workers"]);
    }

    #[test]
    fn evaluator_kind_parses() {
        assert_eq!("external".parse(), Ok(EvaluatorKind::External));
        assert!("gpu".parse::<EvaluatorKind>().is_err());
    }
}
