//! Particle swarm optimization over variable-length layer sequences.
//!
//! A particle's position is an [`Architecture`]. Velocity is a slot-wise edit
//! plan: [`diff`] compares a position with a reference (pBest or gBest),
//! [`combine_velocity`] mixes the two plans slot by slot with probability
//! `cg` of taking the gBest edit, and [`apply_velocity`] applies the plan and
//! repairs the result back into the space.

use crate::arch::{layer_output, Architecture, LayerKind, LayerSpec, Shape};
use crate::eval::{evaluate_all, Evaluator, FitnessReport};
use crate::rng::{derive_seed, substream, tag};
use crate::search::{mean, History, PsoRow, SearchContext, SearchError, SearchResult};
use crate::space::{sample_random, SlotKind, SpaceConfig, SpaceError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    /// Probability of inheriting a velocity slot from gBest rather than pBest.
    pub cg: f64,
    pub epochs_particle: u32,
    pub epochs_gbest: u32,
    /// Per-slot probability of redrawing a layer after each move; 0 gives
    /// pure gBest/pBest recombination.
    #[serde(default = "default_mutation_rate")]
    pub mutation_rate: f64,
    #[serde(default = "SpaceConfig::pso_default")]
    pub space: SpaceConfig,
    #[serde(default)]
    pub seed: u64,
}

pub const DEFAULT_MUTATION_RATE: f64 = 0.1;

fn default_mutation_rate() -> f64 {
    DEFAULT_MUTATION_RATE
}

impl PsoConfig {
    /// Swarm of 20 for 10 iterations.
    pub fn preset_a() -> Self {
        Self {
            swarm_size: 20,
            iterations: 10,
            cg: 0.5,
            epochs_particle: 5,
            epochs_gbest: 100,
            mutation_rate: DEFAULT_MUTATION_RATE,
            space: SpaceConfig::pso_default(),
            seed: 0,
        }
    }

    /// Swarm of 10 for 20 iterations.
    pub fn preset_b() -> Self {
        Self {
            swarm_size: 10,
            iterations: 20,
            ..Self::preset_a()
        }
    }

    pub fn check(&self) -> Result<(), SpaceError> {
        self.space.check()?;
        if self.swarm_size == 0 {
            return Err(SpaceError("swarm_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.cg) {
            return Err(SpaceError("cg must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(SpaceError("mutation_rate must lie in [0, 1]".into()));
        }
        if self.epochs_particle == 0 || self.epochs_gbest == 0 {
            return Err(SpaceError("epoch budgets must be >= 1".into()));
        }
        Ok(())
    }

    /// Evaluator calls made by a complete run.
    pub fn evaluation_budget(&self) -> usize {
        self.swarm_size * (self.iterations + 1) + 1
    }
}

/// Edit applied to one slot of a position.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotOp {
    Keep,
    Replace(LayerSpec),
    Add(LayerSpec),
    Remove,
}

pub type OpSequence = Vec<SlotOp>;

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub index: usize,
    pub position: Architecture,
    pub pbest: Architecture,
    /// `None` until the particle's first evaluation.
    pub pbest_fitness: Option<FitnessReport>,
}

/// Edits that turn `current` into `reference`, one per slot of the longer list.
pub fn diff(current: &Architecture, reference: &Architecture) -> OpSequence {
    let n = current.len().max(reference.len());
    (0..n)
        .map(|i| match (current.layers.get(i), reference.layers.get(i)) {
            (Some(c), Some(r)) if c == r => SlotOp::Keep,
            (Some(_), Some(r)) => SlotOp::Replace(r.clone()),
            (None, Some(r)) => SlotOp::Add(r.clone()),
            (Some(_), None) => SlotOp::Remove,
            (None, None) => unreachable!(),
        })
        .collect()
}

/// Per slot, takes the gBest edit with probability `cg`, else the pBest edit.
/// The shorter sequence is padded with `Keep`.
pub fn combine_velocity<R: Rng + ?Sized>(
    diff_g: &[SlotOp],
    diff_p: &[SlotOp],
    cg: f64,
    rng: &mut R,
) -> OpSequence {
    let n = diff_g.len().max(diff_p.len());
    (0..n)
        .map(|i| {
            let u: f64 = rng.gen();
            let from = if u < cg { diff_g } else { diff_p };
            from.get(i).cloned().unwrap_or(SlotOp::Keep)
        })
        .collect()
}

/// Applies `velocity` left to right, then repairs the result into `space`.
///
/// Removes are ignored once the running length reaches the minimum and Adds
/// once it reaches the maximum. Repair turns any Conv or pooling layer after
/// an FC into a random FC, forces the first layer to Conv, and turns pooling
/// layers that would underflow into random Convs.
pub fn apply_velocity<R: Rng + ?Sized>(
    position: &Architecture,
    velocity: &[SlotOp],
    space: &SpaceConfig,
    rng: &mut R,
) -> Architecture {
    let (min_len, max_len) = space.layer_bounds;
    let mut len = position.len();
    let mut layers = Vec::with_capacity(len + velocity.len());
    for (i, op) in velocity.iter().enumerate() {
        let existing = position.layers.get(i);
        match op {
            SlotOp::Keep => layers.extend(existing.cloned()),
            SlotOp::Replace(layer) => match existing {
                Some(_) => layers.push(layer.clone()),
                None if len < max_len => {
                    layers.push(layer.clone());
                    len += 1;
                }
                None => {}
            },
            SlotOp::Add(layer) => {
                if len < max_len {
                    layers.push(layer.clone());
                    len += 1;
                }
                layers.extend(existing.cloned());
            }
            SlotOp::Remove => {
                if let Some(layer) = existing {
                    if len > min_len {
                        len -= 1;
                    } else {
                        layers.push(layer.clone());
                    }
                }
            }
        }
    }
    layers.extend(position.layers.iter().skip(velocity.len()).cloned());
    repair(
        Architecture::new(position.input_shape, position.num_classes, layers),
        space,
        rng,
    )
}

/// Makes an architecture satisfy the ordering, first-layer, underflow and
/// length rules of `space`. Valid architectures are returned unchanged.
pub fn repair<R: Rng + ?Sized>(
    mut arch: Architecture,
    space: &SpaceConfig,
    rng: &mut R,
) -> Architecture {
    let (min_len, max_len) = space.layer_bounds;
    arch.layers.truncate(max_len);
    if arch.layers.first().map(LayerSpec::kind) != Some(LayerKind::Conv) {
        let conv = space.random_conv(rng);
        match arch.layers.first_mut() {
            Some(first) => *first = conv,
            None => arch.layers.push(conv),
        }
    }

    let mut seen_fc = false;
    let mut current: Shape = arch.input_shape;
    for layer in arch.layers.iter_mut() {
        let kind = layer.kind();
        if seen_fc && kind.is_spatial() {
            *layer = space.random_fc(rng);
        }
        seen_fc |= layer.kind() == LayerKind::FullyConnected;
        current = match layer_output(layer, current) {
            Some(next) => next,
            None => {
                *layer = space.random_conv(rng);
                layer_output(layer, current).expect("conv fits any input")
            }
        };
    }
    while arch.layers.len() < min_len {
        let layer = if seen_fc {
            space.random_fc(rng)
        } else {
            space.random_conv(rng)
        };
        arch.layers.push(layer);
    }
    arch
}

/// Redraws each slot with probability `rate`, then repairs.
pub fn mutate<R: Rng + ?Sized>(
    position: &Architecture,
    rate: f64,
    space: &SpaceConfig,
    rng: &mut R,
) -> Architecture {
    let mut arch = position.clone();
    let mut changed = false;
    for layer in arch.layers.iter_mut() {
        if rng.gen::<f64>() < rate {
            *layer = match space.layer_type_probabilities.draw(rng) {
                SlotKind::Conv => space.random_conv(rng),
                SlotKind::Pool => space.random_pool(rng),
                SlotKind::Fc => space.random_fc(rng),
            };
            changed = true;
        }
    }
    if changed {
        repair(arch, space, rng)
    } else {
        arch
    }
}

/// Samples `swarm_size` independent positions; pBest starts as the position.
pub fn init_swarm(config: &PsoConfig, input_shape: Shape, num_classes: u32) -> Vec<Particle> {
    (0..config.swarm_size)
        .map(|index| {
            let mut rng = substream(config.seed, &[tag::INIT, index as u64]);
            let position = sample_random(&config.space, input_shape, num_classes, &mut rng);
            Particle {
                index,
                pbest: position.clone(),
                position,
                pbest_fitness: None,
            }
        })
        .collect()
}

struct Best {
    arch: Architecture,
    report: FitnessReport,
}

/// Runs a synchronous particle swarm search and retrains the final gBest.
///
/// Iteration 0 evaluates the initial swarm. Every later iteration moves each
/// particle toward a cg-weighted mix of gBest and its pBest, redraws slots
/// at `mutation_rate`, and re-evaluates it. pBest and gBest only change on a strictly lower validation loss, and
/// gBest is updated once per iteration after the whole swarm is evaluated.
pub fn pso_run<E: Evaluator + ?Sized>(
    config: &PsoConfig,
    evaluator: &E,
    ctx: &SearchContext,
) -> Result<SearchResult, SearchError> {
    let started = Instant::now();
    let shape = ctx.dataset.input_shape();
    let classes = ctx.dataset.num_classes();
    let mut swarm = init_swarm(config, shape, classes);
    let mut rows: Vec<PsoRow> = Vec::with_capacity(config.iterations + 1);
    let mut evaluations = 0usize;
    let mut elapsed = 0.0;
    let mut gbest: Option<Best> = None;

    for iteration in 0..=config.iterations {
        if iteration > 0 {
            let g = &gbest.as_ref().expect("gbest after iteration 0").arch;
            for p in swarm.iter_mut() {
                let mut rng =
                    substream(config.seed, &[tag::MOVE, iteration as u64, p.index as u64]);
                let velocity = combine_velocity(
                    &diff(&p.position, g),
                    &diff(&p.position, &p.pbest),
                    config.cg,
                    &mut rng,
                );
                p.position = apply_velocity(&p.position, &velocity, &config.space, &mut rng);
                if config.mutation_rate > 0.0 {
                    p.position = mutate(&p.position, config.mutation_rate, &config.space, &mut rng);
                }
            }
        }

        let requests: Vec<_> = swarm
            .iter()
            .map(|p| {
                let seed =
                    derive_seed(config.seed, &[tag::EVAL, iteration as u64, p.index as u64]);
                ctx.request(p.position.clone(), config.epochs_particle, seed)
            })
            .collect();
        let results = evaluate_all(evaluator, &requests, ctx.workers);
        evaluations += results.len();
        let mut reports = Vec::with_capacity(results.len());
        for result in results {
            match result {
                Ok(r) => reports.push(r),
                Err(source) => {
                    return Err(SearchError {
                        source,
                        history: History::Pso(rows),
                        evaluations,
                    })
                }
            }
        }

        // Candidate for gBest: lowest loss among improved pBests, earliest index on ties.
        let mut candidate: Option<usize> = None;
        for (p, report) in swarm.iter_mut().zip(&reports) {
            elapsed += report.wall_seconds;
            let improved = match &p.pbest_fitness {
                None => true,
                Some(best) => report.val_loss < best.val_loss,
            };
            if improved {
                p.pbest = p.position.clone();
                p.pbest_fitness = Some(report.clone());
                let better = match candidate {
                    None => true,
                    Some(c) => report.val_loss < reports[c].val_loss,
                };
                if better {
                    candidate = Some(p.index);
                }
            }
        }
        if let Some(c) = candidate {
            let replace = match &gbest {
                None => true,
                Some(g) => reports[c].val_loss < g.report.val_loss,
            };
            if replace {
                gbest = Some(Best {
                    arch: swarm[c].pbest.clone(),
                    report: reports[c].clone(),
                });
            }
        }
        let g = gbest.as_ref().expect("swarm is non-empty");
        rows.push(PsoRow {
            iteration,
            best_loss: g.report.val_loss,
            best_acc: g.report.val_accuracy,
            mean_loss: mean(reports.iter().map(|r| r.val_loss)),
            elapsed_s: elapsed,
        });
    }

    let search_seconds = started.elapsed().as_secs_f64();
    let Best { arch, report } = gbest.expect("swarm is non-empty");
    let retrain_seed = derive_seed(config.seed, &[tag::EVAL, u64::MAX]);
    let retrain = evaluator.evaluate(&ctx.request(arch.clone(), config.epochs_gbest, retrain_seed));
    evaluations += 1;
    let final_report = match retrain {
        Ok(r) => r,
        Err(source) => {
            return Err(SearchError {
                source,
                history: History::Pso(rows),
                evaluations,
            })
        }
    };

    Ok(SearchResult {
        best: arch,
        search_report: report,
        final_report,
        history: History::Pso(rows),
        evaluations,
        search_seconds,
        total_seconds: started.elapsed().as_secs_f64(),
        pheromones: None,
    })
}
