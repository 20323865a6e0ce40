//! Sequential CNN architecture representation.
//!
//! An [`Architecture`] is an ordered list of hidden layers over a fixed input
//! shape. A classifier head (flatten + dense softmax over `num_classes`) is
//! implied and never stored in `layers`.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Height, width and channel count of a feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 3]", into = "[u32; 3]")]
pub struct Shape {
    pub height: u32,
    pub width: u32,
    pub channels: u32,
}

impl Shape {
    pub const fn new(height: u32, width: u32, channels: u32) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub fn flat_width(&self) -> u64 {
        self.height as u64 * self.width as u64 * self.channels as u64
    }
}

impl From<[u32; 3]> for Shape {
    fn from([height, width, channels]: [u32; 3]) -> Self {
        Self::new(height, width, channels)
    }
}

impl From<Shape> for [u32; 3] {
    fn from(s: Shape) -> Self {
        [s.height, s.width, s.channels]
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.height, self.width, self.channels)
    }
}

impl std::str::FromStr for Shape {
    type Err = String;

    /// Parses `HxWxC`, e.g. `28x28x1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let dims: Vec<&str> = s.split(['x', 'X']).collect();
        if dims.len() != 3 {
            return Err(format!("expected HxWxC, got `{s}`"));
        }
        let mut out = [0u32; 3];
        for (slot, dim) in out.iter_mut().zip(&dims) {
            *slot = dim
                .trim()
                .parse()
                .map_err(|_| format!("invalid dimension `{dim}` in `{s}`"))?;
        }
        Ok(out.into())
    }
}

/// Layer kind tag, without attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    MaxPool,
    AvgPool,
    #[serde(rename = "fc")]
    FullyConnected,
    Dropout,
    BatchNorm,
}

impl LayerKind {
    pub const ALL: [LayerKind; 6] = [
        LayerKind::Conv,
        LayerKind::MaxPool,
        LayerKind::AvgPool,
        LayerKind::FullyConnected,
        LayerKind::Dropout,
        LayerKind::BatchNorm,
    ];

    pub fn is_pool(self) -> bool {
        matches!(self, LayerKind::MaxPool | LayerKind::AvgPool)
    }

    /// Conv and pooling layers need a spatial input.
    pub fn is_spatial(self) -> bool {
        self == LayerKind::Conv || self.is_pool()
    }

    pub fn tag(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::MaxPool => "maxpool",
            LayerKind::AvgPool => "avgpool",
            LayerKind::FullyConnected => "fc",
            LayerKind::Dropout => "dropout",
            LayerKind::BatchNorm => "batchnorm",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One hidden layer. Field order of each variant is the canonical document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerSpec {
    Conv { out_channels: u32, kernel: u32 },
    #[serde(rename = "maxpool")]
    MaxPool,
    #[serde(rename = "avgpool")]
    AvgPool,
    #[serde(rename = "fc")]
    FullyConnected { units: u32 },
    Dropout { rate: f64 },
    #[serde(rename = "batchnorm")]
    BatchNorm,
}

impl LayerSpec {
    pub fn conv(out_channels: u32, kernel: u32) -> Self {
        LayerSpec::Conv {
            out_channels,
            kernel,
        }
    }

    pub fn fc(units: u32) -> Self {
        LayerSpec::FullyConnected { units }
    }

    pub fn dropout(rate: f64) -> Self {
        LayerSpec::Dropout { rate }
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Conv { .. } => LayerKind::Conv,
            LayerSpec::MaxPool => LayerKind::MaxPool,
            LayerSpec::AvgPool => LayerKind::AvgPool,
            LayerSpec::FullyConnected { .. } => LayerKind::FullyConnected,
            LayerSpec::Dropout { .. } => LayerKind::Dropout,
            LayerSpec::BatchNorm => LayerKind::BatchNorm,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv {
                out_channels,
                kernel,
            } => write!(f, "Conv({out_channels}, {kernel}x{kernel})"),
            LayerSpec::MaxPool => f.write_str("MaxPool"),
            LayerSpec::AvgPool => f.write_str("AvgPool"),
            LayerSpec::FullyConnected { units } => write!(f, "FC({units})"),
            LayerSpec::Dropout { rate } => write!(f, "Dropout({rate})"),
            LayerSpec::BatchNorm => f.write_str("BatchNorm"),
        }
    }
}

/// A candidate network: hidden layers over an input shape, plus an implicit head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input_shape: Shape,
    pub num_classes: u32,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("pooling at layer {index} underflows a {height}x{width} feature map")]
    PoolUnderflow { index: usize, height: u32, width: u32 },
    #[error("{kind} at layer {index} follows a fully connected layer")]
    OrderingViolation { index: usize, kind: LayerKind },
}

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
}

/// Per-layer output shapes plus the flattened width fed to the classifier head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTrace {
    pub layers: Vec<Shape>,
    pub head_input: u64,
}

/// Output shape of one layer given its input. Conv uses stride 1 with
/// size-preserving padding; pooling is a 2x2 window with stride 2.
pub(crate) fn layer_output(layer: &LayerSpec, input: Shape) -> Option<Shape> {
    Some(match *layer {
        LayerSpec::Conv { out_channels, .. } => Shape::new(input.height, input.width, out_channels),
        LayerSpec::MaxPool | LayerSpec::AvgPool => {
            let (h, w) = (input.height / 2, input.width / 2);
            if h == 0 || w == 0 {
                return None;
            }
            Shape::new(h, w, input.channels)
        }
        LayerSpec::FullyConnected { units } => Shape::new(1, 1, units),
        LayerSpec::Dropout { .. } | LayerSpec::BatchNorm => input,
    })
}

/// Would a pooling layer on `input` leave a zero spatial dimension?
pub fn pool_underflows(input: Shape) -> bool {
    input.height / 2 == 0 || input.width / 2 == 0
}

impl Architecture {
    pub fn new(input_shape: Shape, num_classes: u32, layers: Vec<LayerSpec>) -> Self {
        Self {
            input_shape,
            num_classes,
            layers,
        }
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Infers the output shape of every hidden layer.
    pub fn shape_infer(&self) -> Result<ShapeTrace, ShapeError> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut current = self.input_shape;
        let mut seen_fc = false;
        for (index, layer) in self.layers.iter().enumerate() {
            let kind = layer.kind();
            if seen_fc && kind.is_spatial() {
                return Err(ShapeError::OrderingViolation { index, kind });
            }
            seen_fc |= kind == LayerKind::FullyConnected;
            current = layer_output(layer, current).ok_or(ShapeError::PoolUnderflow {
                index,
                height: current.height,
                width: current.width,
            })?;
            shapes.push(current);
        }
        Ok(ShapeTrace {
            layers: shapes,
            head_input: current.flat_width(),
        })
    }

    /// Trainable parameters, including the classifier head.
    pub fn param_count(&self) -> Result<u64, ShapeError> {
        let trace = self.shape_infer()?;
        let mut total = 0u64;
        let mut input = self.input_shape;
        for (layer, &output) in self.layers.iter().zip(&trace.layers) {
            total += match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                } => {
                    let k = kernel as u64;
                    (k * k * input.channels as u64 + 1) * out_channels as u64
                }
                LayerSpec::FullyConnected { units } => (input.flat_width() + 1) * units as u64,
                LayerSpec::BatchNorm => 2 * input.channels as u64,
                LayerSpec::MaxPool | LayerSpec::AvgPool | LayerSpec::Dropout { .. } => 0,
            };
            input = output;
        }
        Ok(total + (trace.head_input + 1) * self.num_classes as u64)
    }

    /// Expands the stored layers into the trained layer stack: a BatchNorm
    /// after every Conv (when enabled) and a Dropout after every FC, unless
    /// the next stored layer already is one.
    pub fn materialize(&self, batch_norm: bool, dropout_rate: Option<f64>) -> Architecture {
        let mut layers = Vec::with_capacity(self.layers.len() * 2);
        for (i, layer) in self.layers.iter().enumerate() {
            layers.push(layer.clone());
            let next = self.layers.get(i + 1).map(LayerSpec::kind);
            match layer.kind() {
                LayerKind::Conv if batch_norm && next != Some(LayerKind::BatchNorm) => {
                    layers.push(LayerSpec::BatchNorm)
                }
                LayerKind::FullyConnected if next != Some(LayerKind::Dropout) => {
                    if let Some(rate) = dropout_rate {
                        layers.push(LayerSpec::dropout(rate));
                    }
                }
                _ => {}
            }
        }
        Architecture::new(self.input_shape, self.num_classes, layers)
    }

    /// Canonical document: fixed key order, no whitespace, UTF-8.
    pub fn to_document(&self) -> String {
        serde_json::to_string(self).expect("architecture serialization is infallible")
    }

    pub fn from_document(doc: &str) -> Result<Self, DocumentError> {
        serde_json::from_str(doc).map_err(|e| {
            use serde_json::error::Category;
            match e.classify() {
                Category::Data => DocumentError::Schema(e.to_string()),
                _ => DocumentError::Parse {
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                },
            }
        })
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "]")
    }
}
