//! Acceptance suite: one PASS/FAIL line per criterion.

mod support;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gennet_core::engine::{Checkpoint, RunDirectory, RunOutcome};
use gennet_core::fitness::{PoolConfig, Status, WorkerPool};
use gennet_core::fixtures::{mnist_best_genome, vgg19_genome, VGG19_CODE};
use gennet_core::genome::{code_length, encode, random_genome, validate, FcBlock, CONV_LOCI, FC_LOCI};
use gennet_core::operators::{mutate_with_rate, mutation_rate_bounds, roulette_draw, sample_cross_points, sample_mutation_rate, splice, Arm, CrossPoint};
use gennet_core::{Engine, EngineConfig, Genome, SearchSpace, SurrogateEvaluator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use support::{index_of, reply, reply_after, requests, Action, MockWorker};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    1.0 - ChiSquared::new((observed.len() - 1) as f64).unwrap().cdf(stat)
}

fn vgg19_codec_golden() -> Outcome {
    let g = vgg19_genome();
    let code = encode(&g).map_err(|e| e.to_string())?;
    ensure(code == VGG19_CODE, || format!("encoded vector differs: {code:?}"))?;
    ensure(code[..6] == [64, 3, 0, 1, 4, 0], || "first block".into())?;
    ensure(code[104..108] == [1000, 0, 5, 0], || "output block".into())?;
    ensure(code[108] == 0, || "optimizer".into())?;
    ensure(code_length(&g) == 108, || format!("code_length {}", code_length(&g)))?;
    Ok("109 loci, L = 108".into())
}

/// Genome with `conv` conv blocks and `hidden` hidden fc blocks.
fn shaped(conv: usize, hidden: usize, seed: u64) -> Genome {
    let space = SearchSpace {
        init_conv_blocks: gennet_core::genome::CodeRange::single(conv as u32),
        init_hidden_fc_blocks: gennet_core::genome::CodeRange::single(hidden as u32),
        ..SearchSpace::default()
    };
    random_genome(&space, 10, &mut rng(seed)).unwrap()
}

fn layer_count_crossover() -> Outcome {
    let g1 = shaped(5, 2, 1);
    let g2 = shaped(8, 2, 2);
    ensure((g1.learnable_layers(), g2.learnable_layers()) == (8, 11), || "parent layer counts".into())?;
    for offset in 0..CONV_LOCI {
        let k1 = CrossPoint { arm: Arm::Conv, block: 4, offset };
        let k2 = CrossPoint { arm: Arm::Conv, block: 6, offset };
        let (c1, c2) = splice(&g1, &g2, k1, k2).map_err(|e| e.to_string())?;
        let layers = (c1.learnable_layers(), c2.learnable_layers());
        ensure(layers == (9, 10), || format!("offset {offset}: children have {layers:?} layers"))?;
    }
    Ok("8 + 11 layers -> 9 + 10 at every shared offset".into())
}

fn crossover_conservation() -> Outcome {
    let space = SearchSpace::default();
    let mut r = rng(77);
    let draws = 10_000;
    let mut fc_cuts = 0;
    for i in 0..draws {
        let g1 = random_genome(&space, 10, &mut r).unwrap();
        let g2 = random_genome(&space, 10, &mut r).unwrap();
        let (k1, k2) = sample_cross_points(&g1, &g2, &mut r);
        let (c1, c2) = splice(&g1, &g2, k1, k2).map_err(|e| format!("draw {i}: {e}"))?;
        let (l1, l2) = (code_length(&g1) as i64, code_length(&g2) as i64);
        let (lc1, lc2) = (code_length(&c1) as i64, code_length(&c2) as i64);
        ensure(lc1 + lc2 == l1 + l2, || format!("draw {i}: lengths not conserved"))?;
        let (m1, m2) = (k1.block as i64, k2.block as i64);
        let predicted = match k1.arm {
            Arm::Conv => l2 + (m1 - m2) * CONV_LOCI as i64,
            Arm::Fc => {
                fc_cuts += 1;
                l2 + (g1.conv_count() as i64 - g2.conv_count() as i64) * CONV_LOCI as i64 + (m1 - m2) * FC_LOCI as i64
            }
        };
        ensure(lc1 == predicted, || format!("draw {i}: L(c1) = {lc1}, formula gives {predicted}"))?;
        for c in [&c1, &c2] {
            let v = validate(c, &space);
            ensure(v.is_empty(), || format!("draw {i}: child invalid: {v:?}"))?;
        }
    }
    Ok(format!("{draws} draws, {fc_cuts} on the fc arm"))
}

fn roulette_statistics() -> Outcome {
    let n = 100_000;
    let mut r = rng(5);
    let weights = [0.1, 0.2, 0.3, 0.4];
    let mut counts = [0u64; 4];
    for _ in 0..n {
        counts[roulette_draw(&weights, &mut r)] += 1;
    }
    let p = chi_square_p(&counts, &weights);
    ensure(p > 0.01, || format!("weighted p = {p}, counts {counts:?}"))?;

    let mut uniform_p = Vec::new();
    for flat in [[0.0; 4], [0.3; 4]] {
        let mut counts = [0u64; 4];
        for _ in 0..n {
            counts[roulette_draw(&flat, &mut r)] += 1;
        }
        let p = chi_square_p(&counts, &[0.25; 4]);
        ensure(p > 0.01, || format!("uniform {flat:?}: p = {p}"))?;
        uniform_p.push(p);
    }
    Ok(format!("weighted p = {p:.3}, uniform p = {:.3} / {:.3}", uniform_p[0], uniform_p[1]))
}

fn elitism_monotonicity() -> Outcome {
    let seeds = 50;
    let mut improved = 0;
    for seed in 0..seeds {
        let config = EngineConfig {
            population_size: 20,
            generations: 10,
            master_seed: seed,
            ..EngineConfig::default()
        };
        let report = Engine::new(config, SurrogateEvaluator)
            .map_err(|e| e.to_string())?
            .evolve()
            .map_err(|e| e.to_string())?;
        let best: Vec<f64> = report.generations.iter().map(|s| s.best_fitness).collect();
        ensure(best.len() == 10, || format!("seed {seed}: {} generations", best.len()))?;
        ensure(best.windows(2).all(|w| w[1] >= w[0]), || format!("seed {seed}: best fitness decreased: {best:?}"))?;
        if best[9] > best[0] {
            improved += 1;
        }
    }
    ensure(improved * 10 >= seeds * 9, || format!("only {improved}/{seeds} seeds improved"))?;
    Ok(format!("monotone for all {seeds} seeds, {improved}/{seeds} strictly improved"))
}

fn mutation_contract() -> Outcome {
    let space = SearchSpace::default();
    let mut r = rng(9);
    for _ in 0..2_000 {
        let g = random_genome(&space, 10, &mut r).unwrap();
        let (lo, hi) = mutation_rate_bounds(code_length(&g));
        let q = sample_mutation_rate(&g, &mut r);
        ensure(lo <= q && q <= hi && hi == 0.5, || format!("q_m {q} outside [{lo}, {hi}]"))?;
        ensure(lo == (8.0 / code_length(&g) as f64).min(0.5), || "lower bound".into())?;
    }

    let g = mnist_best_genome();
    let l = code_length(&g);
    let output_start = l - FC_LOCI;
    let trials = 100_000;
    let mut hits = vec![0u64; l + 1];
    for _ in 0..trials {
        let out = mutate_with_rate(&g, &space, 0.3, &mut r);
        ensure(out.genome.fc_blocks.last() == Some(&FcBlock::output(10)), || "output block changed".into())?;
        ensure(out.genome.fc_count() == g.fc_count() && out.genome.conv_count() == g.conv_count(), || {
            "structure changed".into()
        })?;
        let v = validate(&out.genome, &space);
        ensure(v.is_empty(), || format!("invalid mutant: {v:?}"))?;
        for p in out.resampled {
            hits[p] += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for (p, &h) in hits.iter().enumerate() {
        let freq = h as f64 / trials as f64;
        if (output_start..l).contains(&p) {
            ensure(h == 0, || format!("output locus {p} resampled {h} times"))?;
        } else {
            worst = worst.max((freq - 0.3).abs());
            ensure((freq - 0.3).abs() <= 0.01, || format!("locus {p} resampled at {freq}"))?;
        }
    }
    Ok(format!("max per-locus deviation {worst:.4} over {trials} trials"))
}

fn determinism_and_resume() -> Outcome {
    let config = EngineConfig {
        population_size: 20,
        generations: 10,
        master_seed: 7,
        ..EngineConfig::default()
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str, halt: Option<usize>| -> Result<RunDirectory, String> {
        let dir = RunDirectory::create(tmp.path().join(name)).map_err(|e| e.to_string())?;
        let engine = Engine::new(config.clone(), SurrogateEvaluator).map_err(|e| e.to_string())?;
        engine.run_in(&dir, halt).map_err(|e| e.to_string())?;
        Ok(dir)
    };
    let read = |dir: &RunDirectory, file: &str| fs::read(dir.root().join(file)).map_err(|e| e.to_string());

    let a = run("a", None)?;
    let b = run("b", None)?;
    let csv = read(&a, "generations.csv")?;
    ensure(csv == read(&b, "generations.csv")?, || "generations.csv differs between identical runs".into())?;
    ensure(csv.iter().filter(|&&c| c == b'\n').count() == 11, || "expected header plus 10 rows".into())?;

    let c = run("c", Some(3))?;
    let checkpoint = Checkpoint::load(&c.checkpoint_path()).map_err(|e| e.to_string())?;
    ensure(checkpoint.state.generation == 3, || format!("halted at {}", checkpoint.state.generation))?;
    let engine = Engine::new(checkpoint.config, SurrogateEvaluator).map_err(|e| e.to_string())?;
    let outcome = engine.resume_in(&c, checkpoint.state, None).map_err(|e| e.to_string())?;
    ensure(matches!(outcome, RunOutcome::Completed(_)), || "resume did not complete".into())?;
    for file in ["generations.csv", "report.json", "best_genome.json"] {
        ensure(read(&a, file)? == read(&c, file)?, || format!("{file} differs after resume"))?;
    }
    Ok("byte-identical csv, resume after generation 3 matches".into())
}

fn pool(endpoints: Vec<gennet_core::fitness::Endpoint>, timeout: Duration, per_worker: usize) -> WorkerPool {
    WorkerPool::new(
        endpoints,
        PoolConfig {
            timeout,
            max_retries: 1,
            max_in_flight_per_worker: per_worker,
        },
    )
    .unwrap()
}

fn protocol_conformance() -> Outcome {
    // Mixed outcomes on one worker.
    let worker = MockWorker::start(|id, attempt| match index_of(id) {
        1 if attempt == 0 => Action::Hang,
        2 => Action::Garbage,
        3 => Action::Fail("diverged".into()),
        4 => Action::Hang,
        i => reply(i as f64 / 10.0),
    });
    let out = pool(vec![worker.endpoint()], Duration::from_millis(200), 1).evaluate_batch(requests(6), 1);
    let statuses: Vec<Status> = out.iter().map(|r| r.status).collect();
    use Status::{Error as E, Ok as K};
    ensure(statuses == [K, K, E, E, E, K], || format!("statuses {statuses:?}"))?;
    ensure(out[1].id == "req-1-r1", || "timeout was not retried under a fresh id".into())?;
    ensure(out[0].fitness == Some(0.0) && out[5].fitness == Some(0.5), || "results misaligned".into())?;

    // Out-of-order completion.
    let worker = MockWorker::start(|id, _| {
        let i = index_of(id);
        reply_after(i as f64 / 10.0, 200 - 50 * i as u64)
    });
    let out = pool(vec![worker.endpoint()], Duration::from_secs(5), 4).evaluate_batch(requests(4), 4);
    ensure(worker.log.completed() == ["req-3", "req-2", "req-1", "req-0"], || "mock did not reorder".into())?;
    for (i, r) in out.iter().enumerate() {
        ensure(r.fitness == Some(i as f64 / 10.0), || format!("slot {i} holds {r:?}"))?;
    }

    // In-flight bound.
    let worker = MockWorker::start(|_, _| reply_after(0.5, 15));
    let endpoints = vec![worker.endpoint(), worker.endpoint(), worker.endpoint(), worker.endpoint()];
    let parallelism = 3;
    let out = pool(endpoints, Duration::from_secs(5), 2).evaluate_batch(requests(30), parallelism);
    ensure(out.iter().all(|r| r.is_ok()), || "in-flight batch had failures".into())?;
    let max = worker.log.max_in_flight();
    ensure(max <= parallelism, || format!("{max} requests in flight, parallelism {parallelism}"))?;
    Ok(format!("ok/timeout/malformed/error/out-of-order aligned, max in flight {max} <= {parallelism}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("vgg19 codec golden", vgg19_codec_golden),
        ("layer-count crossover", layer_count_crossover),
        ("crossover conservation", crossover_conservation),
        ("roulette statistics", roulette_statistics),
        ("elitism monotonicity", elitism_monotonicity),
        ("mutation contract", mutation_contract),
        ("determinism and resume", determinism_and_resume),
        ("protocol conformance", protocol_conformance),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} {secs:>6.2}s  {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name:<24} {secs:>6.2}s  {reason}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
