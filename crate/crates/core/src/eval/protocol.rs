//! Newline-delimited JSON messages exchanged with an external trainer.

use super::{Dataset, EvalError, EvalRequest, FitnessReport};
use crate::arch::Architecture;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// `{"id":n,"op":"evaluate","architecture":{..},"epochs":e,"dataset":"..","subset_size":s,"seed":k}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: u64,
    pub op: String,
    pub architecture: Architecture,
    pub epochs: u32,
    pub dataset: Dataset,
    pub subset_size: Option<u32>,
    pub seed: u64,
}

impl WireRequest {
    pub fn evaluate(id: u64, request: &EvalRequest) -> Self {
        Self {
            id,
            op: "evaluate".into(),
            architecture: request.architecture.clone(),
            epochs: request.epochs,
            dataset: request.dataset,
            subset_size: request.subset_size,
            seed: request.seed,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serialization is infallible")
    }
}

/// One trainer reply, either a report or an error message.
#[derive(Debug, Clone, PartialEq)]
pub enum WireResponse {
    Ok { id: u64, report: FitnessReport },
    Err { id: u64, error: String },
}

#[derive(Serialize, Deserialize)]
struct RawResponse {
    id: u64,
    ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    val_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    val_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wall_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    param_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl WireResponse {
    pub fn id(&self) -> u64 {
        match self {
            WireResponse::Ok { id, .. } | WireResponse::Err { id, .. } => *id,
        }
    }

    pub fn to_line(&self) -> String {
        let raw = match self {
            WireResponse::Ok { id, report } => RawResponse {
                id: *id,
                ok: true,
                val_accuracy: Some(report.val_accuracy),
                val_loss: Some(report.val_loss),
                wall_seconds: Some(report.wall_seconds),
                param_count: Some(report.param_count),
                error: None,
            },
            WireResponse::Err { id, error } => RawResponse {
                id: *id,
                ok: false,
                val_accuracy: None,
                val_loss: None,
                wall_seconds: None,
                param_count: None,
                error: Some(error.clone()),
            },
        };
        serde_json::to_string(&raw).expect("response serialization is infallible")
    }

    pub fn parse(line: &str) -> Result<Self, EvalError> {
        let raw: RawResponse = serde_json::from_str(line)
            .map_err(|e| EvalError::failure(format!("malformed trainer response: {e}")))?;
        if !raw.ok {
            return Ok(WireResponse::Err {
                id: raw.id,
                error: raw.error.unwrap_or_else(|| "unspecified trainer error".into()),
            });
        }
        let missing = |field: &str| {
            EvalError::failure(format!("trainer response {} lacks `{field}`", raw.id))
        };
        let report = FitnessReport {
            val_accuracy: raw.val_accuracy.ok_or_else(|| missing("val_accuracy"))?,
            val_loss: raw.val_loss.ok_or_else(|| missing("val_loss"))?,
            wall_seconds: raw.wall_seconds.ok_or_else(|| missing("wall_seconds"))?,
            param_count: raw.param_count.ok_or_else(|| missing("param_count"))?,
        };
        Ok(WireResponse::Ok { id: raw.id, report })
    }
}

/// Backend handshake: `{"op":"hello","max_parallelism":m,...}`. Any further
/// fields (validation split, optimizer defaults) are kept verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub op: String,
    #[serde(default = "one")]
    pub max_parallelism: usize,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

fn one() -> usize {
    1
}

impl Hello {
    pub fn parse(line: &str) -> Result<Self, EvalError> {
        let hello: Hello = serde_json::from_str(line)
            .map_err(|e| EvalError::failure(format!("malformed trainer handshake: {e}")))?;
        if hello.op != "hello" {
            return Err(EvalError::failure(format!(
                "expected hello handshake, got op `{}`",
                hello.op
            )));
        }
        Ok(hello)
    }
}
