use std::collections::BTreeSet;

use super::{BatchContext, EvaluationResult, Evaluator};
use crate::genome::Genome;

/// Deterministic stand-in for training.
///
/// ```text
/// f = 0.4 * exp(-(N_C - 10)^2 / 18)
///   + 0.2 * bn_frac
///   + 0.2 * (1 - min(|mean_drop - 0.25|, 0.25) / 0.25)
///   + 0.2 * distinct_activations / 5
/// ```
///
/// `bn_frac`, `mean_drop` and `distinct_activations` range over the conv blocks
/// and hidden fc blocks; the output block is fixed and does not take part.
/// The maximum 1.0 is reached by any genome with ten conv blocks, batch norm
/// everywhere, dropout 0.25 everywhere and all five hidden activations present.
pub fn surrogate_fitness(genome: &Genome) -> f64 {
    let depth = genome.conv_count() as f64;
    let depth_term = (-(depth - 10.0).powi(2) / 18.0).exp();

    let hidden = genome.hidden_fc();
    let blocks = genome.conv_count() + hidden.len();
    if blocks == 0 {
        return (0.4 * depth_term).clamp(0.0, 1.0);
    }
    let batch_norm = genome.conv_blocks.iter().filter(|b| b.batch_norm).count()
        + hidden.iter().filter(|b| b.batch_norm).count();
    let bn_frac = batch_norm as f64 / blocks as f64;

    let dropout_sum: f64 = genome
        .conv_blocks
        .iter()
        .map(|b| b.dropout.probability())
        .chain(hidden.iter().map(|b| b.dropout.probability()))
        .sum();
    let mean_drop = dropout_sum / blocks as f64;
    let dropout_term = 1.0 - (mean_drop - 0.25).abs().min(0.25) / 0.25;

    let activations: BTreeSet<_> = genome
        .conv_blocks
        .iter()
        .map(|b| b.activation)
        .chain(hidden.iter().map(|b| b.activation))
        .collect();
    let diversity = activations.len().min(5) as f64 / 5.0;

    (0.4 * depth_term + 0.2 * bn_frac + 0.2 * dropout_term + 0.2 * diversity).clamp(0.0, 1.0)
}

/// Evaluator backed by [`surrogate_fitness`]. Reports zero training time.
#[derive(Debug, Clone, Copy, Default)]
pub struct SurrogateEvaluator;

impl Evaluator for SurrogateEvaluator {
    fn evaluate_batch(&self, genomes: &[Genome], ctx: &BatchContext) -> Vec<EvaluationResult> {
        genomes
            .iter()
            .enumerate()
            .map(|(i, g)| EvaluationResult {
                epochs_run: Some(0),
                wall_seconds: Some(0.0),
                ..EvaluationResult::ok(ctx.request_id(i, 0), surrogate_fitness(g))
            })
            .collect()
    }
}
