#![allow(dead_code)]

use opennas::arch::{LayerSpec, Shape};
use opennas::space::LayerTypeProbabilities;
use opennas::{AcoConfig, Architecture, EvalError, EvalRequest, Evaluator, FitnessReport, PsoConfig, SpaceConfig};
use std::sync::Mutex;

pub const MNIST: Shape = Shape::new(28, 28, 1);

/// Keeps every request it sees, in call order.
pub struct Recorder<E> {
    inner: E,
    seen: Mutex<Vec<EvalRequest>>,
}

impl<E> Recorder<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<EvalRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl<E: Evaluator> Evaluator for Recorder<E> {
    fn evaluate(&self, request: &EvalRequest) -> Result<FitnessReport, EvalError> {
        self.seen.lock().unwrap().push(request.clone());
        self.inner.evaluate(request)
    }

    fn max_parallelism(&self) -> usize {
        self.inner.max_parallelism()
    }
}

/// Fails every call after the first `ok` calls.
pub struct FailAfter<E> {
    pub inner: E,
    pub ok: usize,
    calls: Mutex<usize>,
}

impl<E> FailAfter<E> {
    pub fn new(inner: E, ok: usize) -> Self {
        Self {
            inner,
            ok,
            calls: Mutex::new(0),
        }
    }
}

impl<E: Evaluator> Evaluator for FailAfter<E> {
    fn evaluate(&self, request: &EvalRequest) -> Result<FitnessReport, EvalError> {
        let mut calls = self.calls.lock().unwrap();
        *calls += 1;
        if *calls > self.ok {
            return Err(EvalError::failure("injected failure"));
        }
        drop(calls);
        self.inner.evaluate(request)
    }
}

pub fn arch(layers: Vec<LayerSpec>) -> Architecture {
    Architecture::new(MNIST, 10, layers)
}

/// Three Conv slots, channels {16, 32}, kernels {3, 5}: 64 architectures.
pub fn tiny_pso_config() -> PsoConfig {
    PsoConfig {
        space: SpaceConfig {
            conv_channels_band: (16, 32),
            conv_channels_set: vec![16, 32],
            kernel_set: vec![3, 5],
            fc_units_max: 8,
            fc_units_set: Vec::new(),
            dropout_set: vec![0.5],
            layer_bounds: (3, 3),
            layer_type_probabilities: LayerTypeProbabilities {
                conv: 1.0,
                pool: 0.0,
                fc: 0.0,
            },
            batch_norm_enabled: false,
            dropout_rate_default: 0.5,
        },
        ..PsoConfig::preset_b()
    }
}

/// Up to three slots of Conv {16, 32}x3 and max/avg pooling: 34 architectures.
pub fn tiny_aco_config() -> AcoConfig {
    AcoConfig {
        max_depth: 3,
        space: SpaceConfig {
            conv_channels_band: (16, 32),
            conv_channels_set: vec![16, 32],
            kernel_set: vec![3],
            fc_units_max: 8,
            fc_units_set: Vec::new(),
            dropout_set: Vec::new(),
            layer_bounds: (1, 3),
            layer_type_probabilities: LayerTypeProbabilities {
                conv: 0.5,
                pool: 0.5,
                fc: 0.0,
            },
            batch_norm_enabled: false,
            dropout_rate_default: 0.5,
        },
        ..AcoConfig::preset_b()
    }
}

fn convs(channels: &[u32], kernels: &[u32]) -> Vec<LayerSpec> {
    let mut out = Vec::new();
    for &c in channels {
        for &k in kernels {
            out.push(LayerSpec::conv(c, k));
        }
    }
    out
}

/// Every architecture of [`tiny_pso_config`], built directly from its
/// definition.
pub fn enumerate_tiny_pso() -> Vec<Architecture> {
    let slots = convs(&[16, 32], &[3, 5]);
    let mut out = Vec::new();
    for a in &slots {
        for b in &slots {
            for c in &slots {
                out.push(arch(vec![a.clone(), b.clone(), c.clone()]));
            }
        }
    }
    out
}

/// Every architecture of [`tiny_aco_config`]: a Conv first, no two pools in
/// a row, one to three slots.
pub fn enumerate_tiny_aco() -> Vec<Architecture> {
    let conv = convs(&[16, 32], &[3]);
    let mut any = conv.clone();
    any.extend([LayerSpec::MaxPool, LayerSpec::AvgPool]);
    let is_pool = |l: &LayerSpec| matches!(l, LayerSpec::MaxPool | LayerSpec::AvgPool);
    let mut frontier: Vec<Vec<LayerSpec>> = conv.iter().map(|c| vec![c.clone()]).collect();
    let mut out: Vec<Architecture> = frontier.iter().cloned().map(arch).collect();
    for _ in 1..3 {
        let mut next = Vec::new();
        for seq in &frontier {
            let options = if is_pool(seq.last().unwrap()) { &conv } else { &any };
            for l in options {
                let mut s = seq.clone();
                s.push(l.clone());
                next.push(s);
            }
        }
        out.extend(next.iter().cloned().map(arch));
        frontier = next;
    }
    out
}

/// Highest-scoring candidates under `score`.
pub fn argmax_all(candidates: &[Architecture], score: impl Fn(&Architecture) -> f64) -> (f64, Vec<Architecture>) {
    let best = candidates.iter().map(&score).fold(f64::NEG_INFINITY, f64::max);
    let winners = candidates.iter().filter(|a| score(a) == best).cloned().collect();
    (best, winners)
}
