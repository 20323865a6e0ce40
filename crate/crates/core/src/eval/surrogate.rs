//! Deterministic stand-in fitness functions. Both ignore the epoch budget.

use super::{EvalError, EvalRequest, Evaluator, FitnessReport};
use crate::arch::{Architecture, LayerSpec};

/// Slot-wise edit distance between two layer lists, normalized by the longer length.
///
/// A slot costs 0 when identical, 0.5 when the kind matches but attributes
/// differ, and 1 when the kind differs or the slot exists in only one list.
pub fn target_distance(candidate: &[LayerSpec], target: &[LayerSpec]) -> f64 {
    let longest = candidate.len().max(target.len());
    if longest == 0 {
        return 0.0;
    }
    let shared: f64 = candidate
        .iter()
        .zip(target)
        .map(|(c, t)| {
            if c == t {
                0.0
            } else if c.kind() == t.kind() {
                0.5
            } else {
                1.0
            }
        })
        .sum();
    let unmatched = (candidate.len() as isize - target.len() as isize).unsigned_abs() as f64;
    (shared + unmatched) / longest as f64
}

fn report(arch: &Architecture, accuracy: f64) -> FitnessReport {
    FitnessReport {
        val_accuracy: accuracy,
        val_loss: 1.0 - accuracy,
        wall_seconds: 0.0,
        param_count: arch.param_count().unwrap_or(0),
    }
}

/// Fitness is closeness to a hidden target architecture.
#[derive(Debug, Clone)]
pub struct TargetSurrogate {
    target: Architecture,
}

impl TargetSurrogate {
    pub fn new(target: Architecture) -> Self {
        Self { target }
    }

    pub fn target(&self) -> &Architecture {
        &self.target
    }

    pub fn fitness(&self, arch: &Architecture) -> f64 {
        1.0 - target_distance(&arch.layers, &self.target.layers)
    }
}

impl Evaluator for TargetSurrogate {
    fn evaluate(&self, request: &EvalRequest) -> Result<FitnessReport, EvalError> {
        if request.epochs == 0 {
            return Err(EvalError::InvalidRequest("epochs must be >= 1".into()));
        }
        let arch = &request.architecture;
        Ok(report(arch, self.fitness(arch)))
    }
}

/// Fitness peaks when the parameter count hits a band center, falling off
/// as a Gaussian in log10 space.
#[derive(Debug, Clone, Copy)]
pub struct ParamBandSurrogate {
    center: f64,
}

impl ParamBandSurrogate {
    pub fn new(center: f64) -> Self {
        assert!(center > 0.0, "band center must be positive");
        Self { center }
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn fitness_for(&self, params: u64) -> f64 {
        let d = (params.max(1) as f64).log10() - self.center.log10();
        (-d * d).exp()
    }
}

impl Evaluator for ParamBandSurrogate {
    fn evaluate(&self, request: &EvalRequest) -> Result<FitnessReport, EvalError> {
        if request.epochs == 0 {
            return Err(EvalError::InvalidRequest("epochs must be >= 1".into()));
        }
        let arch = &request.architecture;
        let params = arch
            .param_count()
            .map_err(|e| EvalError::InvalidRequest(e.to_string()))?;
        Ok(report(arch, self.fitness_for(params)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Shape;
    use crate::eval::Dataset;

    fn arch(layers: Vec<LayerSpec>) -> Architecture {
        Architecture::new(Shape::new(28, 28, 1), 10, layers)
    }

    fn request(a: Architecture) -> EvalRequest {
        EvalRequest {
            architecture: a,
            epochs: 5,
            dataset: Dataset::Synthetic,
            subset_size: None,
            seed: 1,
        }
    }

    #[test]
    fn identical_candidate_scores_one() {
        let t = arch(vec![LayerSpec::conv(32, 3), LayerSpec::MaxPool, LayerSpec::fc(64)]);
        let r = TargetSurrogate::new(t.clone()).evaluate(&request(t)).unwrap();
        assert_eq!((r.val_accuracy, r.val_loss), (1.0, 0.0));
    }

    #[test]
    fn disjoint_kinds_score_zero() {
        let t = arch(vec![
            LayerSpec::conv(32, 3),
            LayerSpec::MaxPool,
            LayerSpec::conv(32, 3),
            LayerSpec::fc(64),
        ]);
        let c = arch(vec![
            LayerSpec::MaxPool,
            LayerSpec::conv(8, 3),
            LayerSpec::AvgPool,
            LayerSpec::BatchNorm,
        ]);
        assert_eq!(TargetSurrogate::new(t).fitness(&c), 0.0);
    }

    #[test]
    fn attribute_mismatch_costs_half_a_slot() {
        let t = arch(vec![LayerSpec::conv(32, 3), LayerSpec::MaxPool, LayerSpec::fc(64)]);
        let c = arch(vec![LayerSpec::conv(32, 5), LayerSpec::MaxPool, LayerSpec::fc(64)]);
        let r = TargetSurrogate::new(t).evaluate(&request(c)).unwrap();
        assert!((r.val_accuracy - (1.0 - 0.5 / 3.0)).abs() < 1e-15);
        assert_eq!(r.val_loss, 1.0 - r.val_accuracy);
    }

    #[test]
    fn length_mismatch_costs_full_slots() {
        let t = arch(vec![LayerSpec::conv(32, 3), LayerSpec::MaxPool]);
        let c = arch(vec![
            LayerSpec::conv(32, 3),
            LayerSpec::MaxPool,
            LayerSpec::fc(4),
            LayerSpec::fc(4),
        ]);
        assert_eq!(target_distance(&c.layers, &t.layers), 0.5);
    }

    #[test]
    fn param_band_shape() {
        let s = ParamBandSurrogate::new(1e5);
        assert_eq!(s.fitness_for(100_000), 1.0);
        assert!((s.fitness_for(1_000_000) - (-1.0f64).exp()).abs() < 1e-12);
        assert!((s.fitness_for(10_000) - 0.36787944117144233).abs() < 1e-12);
        let mut last = 1.0;
        for p in [200_000u64, 500_000, 2_000_000, 10_000_000, 1_000_000_000] {
            let f = s.fitness_for(p);
            assert!(f < last);
            last = f;
        }
    }

    #[test]
    fn surrogates_are_deterministic() {
        let t = arch(vec![LayerSpec::conv(32, 3), LayerSpec::MaxPool, LayerSpec::fc(64)]);
        let c = arch(vec![LayerSpec::conv(16, 3), LayerSpec::AvgPool]);
        let target = TargetSurrogate::new(t);
        let band = ParamBandSurrogate::new(5e4);
        let req = request(c);
        let (a, b) = (target.evaluate(&req).unwrap(), band.evaluate(&req).unwrap());
        for _ in 0..1000 {
            assert_eq!(target.evaluate(&req).unwrap(), a);
            assert_eq!(band.evaluate(&req).unwrap(), b);
        }
    }
}
