use rand::Rng;

use super::{Individual, OperatorError};
use crate::genome::canonical_hash;

/// `ceil(0.1 * T)`.
pub fn elite_count(population_size: usize) -> usize {
    population_size.div_ceil(10)
}

/// `floor(0.9 * T)`. Together with [`elite_count`] this always sums to `T`.
pub fn parent_count(population_size: usize) -> usize {
    population_size * 9 / 10
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Top individuals by fitness, best first, copied unaltered.
    pub elites: Vec<Individual>,
    /// Roulette draws in draw order.
    pub parents: Vec<Individual>,
}

/// One fitness-proportional draw. Falls back to a uniform draw when every weight is zero.
pub fn roulette_draw<R: Rng + ?Sized>(fitnesses: &[f64], rng: &mut R) -> usize {
    assert!(!fitnesses.is_empty(), "roulette over an empty population");
    let total: f64 = fitnesses.iter().sum();
    if total <= 0.0 {
        return rng.gen_range(0..fitnesses.len());
    }
    let target = rng.gen::<f64>() * total;
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &f) in fitnesses.iter().enumerate() {
        if f <= 0.0 {
            continue;
        }
        cumulative += f;
        last_positive = i;
        if target < cumulative {
            return i;
        }
    }
    // Rounding can leave `target` a hair above the final cumulative sum.
    last_positive
}

/// Elitist roulette-wheel selection: the `ceil(0.1 T)` fittest survive unchanged
/// (ties go to the lower canonical hash) and `floor(0.9 T)` parents are drawn
/// with replacement proportionally to fitness.
pub fn select<R: Rng + ?Sized>(population: &[Individual], rng: &mut R) -> Result<Selection, OperatorError> {
    if population.len() < 2 {
        return Err(OperatorError::PopulationTooSmall(population.len()));
    }
    let fitnesses = population
        .iter()
        .enumerate()
        .map(|(index, ind)| match ind.fitness {
            None => Err(OperatorError::MissingFitness(index)),
            Some(f) if !(0.0..=1.0).contains(&f) => Err(OperatorError::FitnessOutOfRange { index, fitness: f }),
            Some(f) => Ok(f),
        })
        .collect::<Result<Vec<f64>, _>>()?;

    let hashes: Vec<u64> = population.iter().map(|i| canonical_hash(&i.genome)).collect();
    let mut ranked: Vec<usize> = (0..population.len()).collect();
    ranked.sort_by(|&a, &b| {
        fitnesses[b]
            .total_cmp(&fitnesses[a])
            .then(hashes[a].cmp(&hashes[b]))
            .then(a.cmp(&b))
    });
    let elites = ranked[..elite_count(population.len())]
        .iter()
        .map(|&i| population[i].clone())
        .collect();

    let parents = (0..parent_count(population.len()))
        .map(|_| population[roulette_draw(&fitnesses, rng)].clone())
        .collect();

    Ok(Selection { elites, parents })
}
