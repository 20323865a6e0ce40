//! Search-space bounds, architecture validation and random sampling.

use crate::arch::{layer_output, pool_underflows, Architecture, LayerKind, LayerSpec, Shape};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

const PROBABILITY_TOLERANCE: f64 = 1e-9;
const RATE_TOLERANCE: f64 = 1e-9;

/// Probabilities of drawing each slot kind while sampling a layer sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerTypeProbabilities {
    pub conv: f64,
    pub pool: f64,
    pub fc: f64,
}

impl Default for LayerTypeProbabilities {
    fn default() -> Self {
        Self {
            conv: 0.6,
            pool: 0.3,
            fc: 0.1,
        }
    }
}

/// Coarse kind drawn for one sampled slot; pooling is refined to max/avg afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    Conv,
    Pool,
    Fc,
}

impl LayerTypeProbabilities {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SlotKind {
        let u: f64 = rng.gen::<f64>() * (self.conv + self.pool + self.fc);
        if u < self.conv {
            SlotKind::Conv
        } else if u < self.conv + self.pool {
            SlotKind::Pool
        } else {
            SlotKind::Fc
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// Inclusive band for Conv output channels.
    pub conv_channels_band: (u32, u32),
    /// Discrete channel choices offered by attribute tables; empty means sample the band.
    #[serde(default)]
    pub conv_channels_set: Vec<u32>,
    pub kernel_set: Vec<u32>,
    pub fc_units_max: u32,
    /// Discrete FC width choices offered by attribute tables; empty means sample `1..=fc_units_max`.
    #[serde(default)]
    pub fc_units_set: Vec<u32>,
    pub dropout_set: Vec<f64>,
    /// Inclusive bounds on hidden layer count, excluding the classifier head.
    pub layer_bounds: (usize, usize),
    #[serde(default)]
    pub layer_type_probabilities: LayerTypeProbabilities,
    pub batch_norm_enabled: bool,
    pub dropout_rate_default: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid search space: {0}")]
pub struct SpaceError(pub String);

impl SpaceConfig {
    /// Particle swarm defaults.
    pub fn pso_default() -> Self {
        Self {
            conv_channels_band: (3, 256),
            conv_channels_set: Vec::new(),
            kernel_set: vec![3, 5, 7],
            fc_units_max: 300,
            fc_units_set: Vec::new(),
            dropout_set: vec![0.5],
            layer_bounds: (3, 20),
            layer_type_probabilities: LayerTypeProbabilities::default(),
            batch_norm_enabled: true,
            dropout_rate_default: 0.5,
        }
    }

    /// Ant colony defaults.
    pub fn aco_default() -> Self {
        Self {
            conv_channels_band: (3, 256),
            conv_channels_set: vec![32, 64, 128],
            kernel_set: vec![1, 3, 5],
            fc_units_max: 300,
            fc_units_set: vec![64, 128, 256],
            dropout_set: vec![0.1, 0.3, 0.5],
            layer_bounds: (1, 20),
            layer_type_probabilities: LayerTypeProbabilities::default(),
            batch_norm_enabled: true,
            dropout_rate_default: 0.5,
        }
    }

    pub fn check(&self) -> Result<(), SpaceError> {
        let err = |m: &str| Err(SpaceError(m.to_owned()));
        let p = &self.layer_type_probabilities;
        if [p.conv, p.pool, p.fc].iter().any(|x| !(0.0..=1.0).contains(x)) {
            return err("layer type probabilities must lie in [0, 1]");
        }
        if (p.conv + p.pool + p.fc - 1.0).abs() > PROBABILITY_TOLERANCE {
            return err("layer type probabilities must sum to 1");
        }
        let (cmin, cmax) = self.conv_channels_band;
        if cmin == 0 || cmin > cmax {
            return err("conv_channels_band must be a non-empty positive range");
        }
        if self
            .conv_channels_set
            .iter()
            .any(|c| !(cmin..=cmax).contains(c))
        {
            return err("conv_channels_set must lie within conv_channels_band");
        }
        if self.kernel_set.is_empty() || self.kernel_set.iter().any(|k| k % 2 == 0) {
            return err("kernel_set must be a non-empty set of odd sizes");
        }
        if self.fc_units_max == 0 {
            return err("fc_units_max must be positive");
        }
        if self
            .fc_units_set
            .iter()
            .any(|&u| u == 0 || u > self.fc_units_max)
        {
            return err("fc_units_set must lie within 1..=fc_units_max");
        }
        if self
            .dropout_set
            .iter()
            .chain(std::iter::once(&self.dropout_rate_default))
            .any(|r| !(*r > 0.0 && *r < 1.0))
        {
            return err("dropout rates must lie in (0, 1)");
        }
        let (lmin, lmax) = self.layer_bounds;
        if lmin == 0 || lmin > lmax {
            return err("layer_bounds must be a non-empty range with min >= 1");
        }
        Ok(())
    }

    pub fn conv_channel_choices(&self) -> Vec<u32> {
        if self.conv_channels_set.is_empty() {
            (self.conv_channels_band.0..=self.conv_channels_band.1).collect()
        } else {
            self.conv_channels_set.clone()
        }
    }

    pub fn fc_unit_choices(&self) -> Vec<u32> {
        if self.fc_units_set.is_empty() {
            (1..=self.fc_units_max).collect()
        } else {
            self.fc_units_set.clone()
        }
    }

    pub fn random_conv<R: Rng + ?Sized>(&self, rng: &mut R) -> LayerSpec {
        let out_channels = if self.conv_channels_set.is_empty() {
            rng.gen_range(self.conv_channels_band.0..=self.conv_channels_band.1)
        } else {
            self.conv_channels_set[rng.gen_range(0..self.conv_channels_set.len())]
        };
        let kernel = self.kernel_set[rng.gen_range(0..self.kernel_set.len())];
        LayerSpec::conv(out_channels, kernel)
    }

    pub fn random_fc<R: Rng + ?Sized>(&self, rng: &mut R) -> LayerSpec {
        let units = if self.fc_units_set.is_empty() {
            rng.gen_range(1..=self.fc_units_max)
        } else {
            self.fc_units_set[rng.gen_range(0..self.fc_units_set.len())]
        };
        LayerSpec::fc(units)
    }

    pub fn random_pool<R: Rng + ?Sized>(&self, rng: &mut R) -> LayerSpec {
        if rng.gen_bool(0.5) {
            LayerSpec::MaxPool
        } else {
            LayerSpec::AvgPool
        }
    }

    /// The materialized layer stack for this space's expansion settings.
    pub fn materialize(&self, arch: &Architecture) -> Architecture {
        arch.materialize(self.batch_norm_enabled, Some(self.dropout_rate_default))
    }
}

/// Identifier of a broken architecture rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    InputShape,
    NumClasses,
    LayerCount,
    FirstLayerConv,
    OrderingViolation,
    ConvChannels,
    ConvKernel,
    FcUnits,
    DropoutRate,
    PoolUnderflow,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("rule id");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub layer_index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.layer_index {
            Some(i) => write!(f, "[{}] layer {}: {}", self.rule, i, self.message),
            None => write!(f, "[{}] {}", self.rule, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, rule: Rule, layer_index: Option<usize>) -> bool {
        self.violations
            .iter()
            .any(|v| v.rule == rule && v.layer_index == layer_index)
    }
}

/// Checks every architecture and layer rule, collecting all violations.
pub fn validate(arch: &Architecture, space: &SpaceConfig) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |rule, layer_index, message: String| {
        violations.push(Violation {
            rule,
            layer_index,
            message,
        })
    };

    let input = arch.input_shape;
    if input.height == 0 || input.width == 0 || input.channels == 0 {
        push(Rule::InputShape, None, format!("input shape {input} has a zero dimension"));
    }
    if arch.num_classes == 0 {
        push(Rule::NumClasses, None, "num_classes must be positive".into());
    }
    let (lmin, lmax) = space.layer_bounds;
    if !(lmin..=lmax).contains(&arch.len()) {
        push(
            Rule::LayerCount,
            None,
            format!("{} layers outside [{lmin}, {lmax}]", arch.len()),
        );
    }
    if let Some(first) = arch.layers.first() {
        if first.kind() != LayerKind::Conv {
            push(Rule::FirstLayerConv, Some(0), format!("first layer is {}", first.kind()));
        }
    }

    let (cmin, cmax) = space.conv_channels_band;
    let mut seen_fc = false;
    let mut current = input;
    for (i, layer) in arch.layers.iter().enumerate() {
        let kind = layer.kind();
        if seen_fc && kind.is_spatial() {
            push(
                Rule::OrderingViolation,
                Some(i),
                format!("{kind} after a fully connected layer"),
            );
        }
        seen_fc |= kind == LayerKind::FullyConnected;
        match *layer {
            LayerSpec::Conv {
                out_channels,
                kernel,
            } => {
                if !(cmin..=cmax).contains(&out_channels) {
                    push(
                        Rule::ConvChannels,
                        Some(i),
                        format!("{out_channels} channels outside [{cmin}, {cmax}]"),
                    );
                }
                if !space.kernel_set.contains(&kernel) {
                    push(
                        Rule::ConvKernel,
                        Some(i),
                        format!("kernel {kernel} not in {:?}", space.kernel_set),
                    );
                }
            }
            LayerSpec::FullyConnected { units } => {
                if units == 0 || units > space.fc_units_max {
                    push(
                        Rule::FcUnits,
                        Some(i),
                        format!("{units} units outside [1, {}]", space.fc_units_max),
                    );
                }
            }
            LayerSpec::Dropout { rate }
                if !space
                    .dropout_set
                    .iter()
                    .any(|r| (r - rate).abs() <= RATE_TOLERANCE) =>
            {
                push(
                    Rule::DropoutRate,
                    Some(i),
                    format!("rate {rate} not in {:?}", space.dropout_set),
                );
            }
            _ => {}
        }
        match layer_output(layer, current) {
            Some(next) => current = next,
            None => push(
                Rule::PoolUnderflow,
                Some(i),
                format!("pooling a {}x{} feature map", current.height, current.width),
            ),
        }
    }

    ValidationReport {
        valid: violations.is_empty(),
        violations,
    }
}

/// Draws a random valid architecture from `space`.
///
/// Depth is uniform over the layer bounds and slot kinds follow the layer
/// type probabilities. The first slot is always Conv, every slot after the
/// first FC is FC, and a pooling draw that would underflow becomes a Conv.
pub fn sample_random<R: Rng + ?Sized>(
    space: &SpaceConfig,
    input_shape: Shape,
    num_classes: u32,
    rng: &mut R,
) -> Architecture {
    let depth = rng.gen_range(space.layer_bounds.0..=space.layer_bounds.1);
    let mut layers = Vec::with_capacity(depth);
    let mut current = input_shape;
    let mut seen_fc = false;
    for slot in 0..depth {
        let kind = if slot == 0 {
            SlotKind::Conv
        } else if seen_fc {
            SlotKind::Fc
        } else {
            space.layer_type_probabilities.draw(rng)
        };
        let layer = match kind {
            SlotKind::Pool if !pool_underflows(current) => space.random_pool(rng),
            SlotKind::Conv | SlotKind::Pool => space.random_conv(rng),
            SlotKind::Fc => {
                seen_fc = true;
                space.random_fc(rng)
            }
        };
        current = layer_output(&layer, current).expect("sampled layer fits its input");
        layers.push(layer);
    }
    Architecture::new(input_shape, num_classes, layers)
}
