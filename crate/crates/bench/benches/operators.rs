use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use gennet_core::fitness::{surrogate_fitness, SurrogateEvaluator};
use gennet_core::genome::{canonical_hash, decode, encode, random_genome, SearchSpace};
use gennet_core::operators::{mutate, sample_cross_points, select, splice, Individual};
use gennet_core::{Engine, EngineConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn population(n: usize, seed: u64) -> Vec<Individual> {
    let space = SearchSpace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let g = random_genome(&space, 10, &mut rng).unwrap();
            let f = surrogate_fitness(&g);
            Individual::with_fitness(g, f)
        })
        .collect()
}

fn codec(c: &mut Criterion) {
    let pop = population(64, 1);
    c.bench_function("encode_decode_64", |b| {
        b.iter(|| {
            for ind in &pop {
                let code = encode(&ind.genome).unwrap();
                std::hint::black_box(decode(&code, ind.genome.conv_count(), 10).unwrap());
            }
        })
    });
    c.bench_function("canonical_hash_64", |b| {
        b.iter(|| pop.iter().map(|i| canonical_hash(&i.genome)).fold(0u64, |a, h| a ^ h))
    });
}

fn operators(c: &mut Criterion) {
    let pop = population(100, 2);
    let space = SearchSpace::default();
    c.bench_function("select_t100", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        b.iter(|| select(&pop, &mut rng).unwrap())
    });
    c.bench_function("crossover_pair", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        b.iter(|| {
            let (k1, k2) = sample_cross_points(&pop[0].genome, &pop[1].genome, &mut rng);
            splice(&pop[0].genome, &pop[1].genome, k1, k2).unwrap()
        })
    });
    c.bench_function("mutate", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        b.iter(|| mutate(&pop[7].genome, &space, &mut rng))
    });
}

fn engine(c: &mut Criterion) {
    let config = EngineConfig {
        population_size: 20,
        generations: 10,
        master_seed: 9,
        ..EngineConfig::default()
    };
    c.bench_function("evolve_surrogate_t20_g10", |b| {
        b.iter_batched(
            || Engine::new(config.clone(), SurrogateEvaluator).unwrap(),
            |engine| engine.evolve().unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, codec, operators, engine);
criterion_main!(benches);
