//! Uniform random search, the reference point for both swarm searches.

use crate::aco::{ant_walk, AcoConfig, PheromoneGraph};
use crate::arch::Shape;
use crate::eval::{evaluate_all, EvalError, EvalRequest, Evaluator, FitnessReport};
use crate::rng::{derive_seed, substream, tag};
use crate::search::SearchContext;
use crate::space::{sample_random, SpaceConfig};
use crate::Architecture;
use rand::Rng;

/// Draws `samples` architectures uniformly from `space`, evaluates each at
/// `epochs`, and returns the most accurate (earliest on ties).
pub fn random_search<E: Evaluator + ?Sized>(
    space: &SpaceConfig,
    samples: usize,
    epochs: u32,
    seed: u64,
    evaluator: &E,
    ctx: &SearchContext,
) -> Result<(Architecture, FitnessReport), EvalError> {
    assert!(samples > 0, "random search needs at least one sample");
    let shape = ctx.dataset.input_shape();
    let classes = ctx.dataset.num_classes();
    let requests: Vec<_> = (0..samples as u64)
        .map(|i| {
            let mut rng = substream(seed, &[tag::INIT, u64::MAX, i]);
            let arch = sample_random(space, shape, classes, &mut rng);
            ctx.request(arch, epochs, derive_seed(seed, &[tag::EVAL, u64::MAX, i]))
        })
        .collect();
    best_of(evaluator, requests, ctx)
}

/// Random search over the ant grammar: each sample walks a fresh pheromone
/// graph with no greediness to a depth drawn uniformly from `1..=max_depth`,
/// so every legal option is equally likely at every step.
pub fn random_walk_search<E: Evaluator + ?Sized>(
    config: &AcoConfig,
    samples: usize,
    seed: u64,
    evaluator: &E,
    ctx: &SearchContext,
) -> Result<(Architecture, FitnessReport), EvalError> {
    assert!(samples > 0, "random search needs at least one sample");
    let requests: Vec<_> = (0..samples as u64)
        .map(|i| {
            let mut rng = substream(seed, &[tag::WALK, u64::MAX, i]);
            let arch = random_walk(config, ctx.dataset.input_shape(), ctx.dataset.num_classes(), &mut rng);
            ctx.request(arch, config.epochs_candidate, derive_seed(seed, &[tag::EVAL, u64::MAX, i]))
        })
        .collect();
    best_of(evaluator, requests, ctx)
}

/// One uniform walk of the ant grammar at a uniformly drawn depth.
pub fn random_walk<R: Rng + ?Sized>(
    config: &AcoConfig,
    input_shape: Shape,
    num_classes: u32,
    rng: &mut R,
) -> Architecture {
    let uniform = AcoConfig {
        greediness: 0.0,
        ..config.clone()
    };
    let depth = rng.gen_range(1..=config.max_depth);
    let graph = PheromoneGraph::new(config.pheromone_start);
    ant_walk(&graph, depth, &uniform, input_shape, num_classes, rng).architecture
}

fn best_of<E: Evaluator + ?Sized>(
    evaluator: &E,
    requests: Vec<EvalRequest>,
    ctx: &SearchContext,
) -> Result<(Architecture, FitnessReport), EvalError> {
    let reports = evaluate_all(evaluator, &requests, ctx.workers)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.val_accuracy > reports[best].val_accuracy {
            best = i;
        }
    }
    Ok((requests[best].architecture.clone(), reports[best].clone()))
}
