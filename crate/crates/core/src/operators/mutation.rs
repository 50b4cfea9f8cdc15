use rand::Rng;

use crate::genome::{code_length, Activation, Dropout, Genome, Optimizer, Pooling, SearchSpace};

/// Range `q_m` is drawn from for a genome of code length `code_length`:
/// `[min(8 / L, 0.5), 0.5]`.
pub fn mutation_rate_bounds(code_length: usize) -> (f64, f64) {
    let lower = if code_length == 0 { 0.5 } else { (8.0 / code_length as f64).min(0.5) };
    (lower, 0.5)
}

pub fn sample_mutation_rate<R: Rng + ?Sized>(genome: &Genome, rng: &mut R) -> f64 {
    let (lo, hi) = mutation_rate_bounds(code_length(genome));
    if lo < hi {
        rng.gen_range(lo..=hi)
    } else {
        hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationOutcome {
    pub genome: Genome,
    pub rate: f64,
    /// Flat code positions that were resampled, whether or not the value changed.
    pub resampled: Vec<usize>,
}

/// Resamples each mutable locus with a per-genome rate drawn by [`sample_mutation_rate`].
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, space: &SearchSpace, rng: &mut R) -> Genome {
    let rate = sample_mutation_rate(genome, rng);
    mutate_with_rate(genome, space, rate, rng).genome
}

/// Resamples every conv locus, hidden fc locus and the optimizer independently
/// with probability `rate`, each uniformly over its range in `space`. Output
/// block loci are never touched and block counts never change.
pub fn mutate_with_rate<R: Rng + ?Sized>(genome: &Genome, space: &SearchSpace, rate: f64, rng: &mut R) -> MutationOutcome {
    assert!((0.0..=1.0).contains(&rate), "mutation rate {rate} outside [0, 1]");
    let mut out = genome.clone();
    let mut resampled = Vec::new();
    let mut pos = 0;
    let mut hit = |rng: &mut R, pos: &mut usize| {
        let fire = rng.gen_bool(rate);
        if fire {
            resampled.push(*pos);
        }
        *pos += 1;
        fire
    };

    for block in &mut out.conv_blocks {
        if hit(rng, &mut pos) {
            block.filters = space.filters.sample(rng);
        }
        if hit(rng, &mut pos) {
            block.kernel = space.sample_kernel(rng);
        }
        if hit(rng, &mut pos) {
            block.pooling = resample(space.pooling, rng, Pooling::from_code);
        }
        if hit(rng, &mut pos) {
            block.batch_norm = space.batch_norm.sample(rng) == 1;
        }
        if hit(rng, &mut pos) {
            block.activation = resample(space.activation, rng, Activation::from_code);
        }
        if hit(rng, &mut pos) {
            block.dropout = Dropout(space.dropout.sample(rng));
        }
    }
    let hidden = out.hidden_fc_count();
    for block in &mut out.fc_blocks[..hidden] {
        if hit(rng, &mut pos) {
            block.units = space.units.sample(rng);
        }
        if hit(rng, &mut pos) {
            block.batch_norm = space.batch_norm.sample(rng) == 1;
        }
        if hit(rng, &mut pos) {
            block.activation = resample(space.activation, rng, Activation::from_code);
        }
        if hit(rng, &mut pos) {
            block.dropout = Dropout(space.dropout.sample(rng));
        }
    }
    // Skip over the output block's loci.
    pos += crate::genome::FC_LOCI;
    if hit(rng, &mut pos) {
        out.optimizer = resample(space.optimizer, rng, Optimizer::from_code);
    }

    MutationOutcome {
        genome: out,
        rate,
        resampled,
    }
}

fn resample<T, R: Rng + ?Sized>(range: crate::genome::CodeRange, rng: &mut R, from_code: fn(u32) -> Option<T>) -> T {
    crate::genome::sample_code(range, rng, from_code)
}
