//! JSON bodies of the HTTP estimate protocol.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{EstimateSet, EXPRESSION_DIM, SHAPE_DIM};
use crate::scalar::Real;

pub const ESTIMATE_PATH: &str = "/v1/estimate";
pub const HEALTH_PATH: &str = "/v1/health";
pub const SESSION_HEADER: &str = "X-Session-Token";

/// `POST /v1/estimate` body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateRequest {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    /// Base64 of little-endian f32 pixels, row-major, channel-interleaved.
    pub pixels_b64: String,
}

/// 200 response body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResponse {
    pub alpha: Vec<[f64; 3]>,
    pub beta: [f64; SHAPE_DIM],
    pub gamma: [f64; EXPRESSION_DIM],
    pub query_count: u64,
}

impl EstimateResponse {
    pub fn new(est: &EstimateSet<f64>, query_count: u64) -> Self {
        Self {
            alpha: est.alpha.rows().to_vec(),
            beta: est.beta.0,
            gamma: est.gamma.0,
            query_count,
        }
    }

    pub fn estimate<T: Real>(&self) -> Result<EstimateSet<T>> {
        let mut flat: Vec<f64> = self.alpha.iter().flatten().copied().collect();
        if self.alpha.len() != crate::pose::POSE_ROWS {
            return Err(Error::Protocol(format!(
                "expected 53 pose rows, got {}",
                self.alpha.len()
            )));
        }
        flat.extend_from_slice(&self.beta);
        flat.extend_from_slice(&self.gamma);
        let lifted: Vec<T> = flat.into_iter().map(T::lit).collect();
        EstimateSet::from_flat(&lifted).map_err(|e| Error::Protocol(e.to_string()))
    }
}

/// Body of every non-200 response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub count: Option<u64>,
}

impl ErrorBody {
    pub fn budget_exhausted(count: u64) -> Self {
        Self {
            error: "budget_exhausted".into(),
            count: Some(count),
        }
    }

    pub fn plain(kind: &str) -> Self {
        Self {
            error: kind.into(),
            count: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthBody {
    pub status: String,
    pub model: String,
    pub latent_free: bool,
}

pub fn encode_pixels<T: Real>(pixels: &[T]) -> String {
    let mut bytes = Vec::with_capacity(pixels.len() * 4);
    for p in pixels {
        bytes.extend_from_slice(&(p.to_f64_lossy() as f32).to_le_bytes());
    }
    STANDARD.encode(bytes)
}

/// Decode base64 f32 pixels; `None` on malformed base64 or a byte count
/// that is not a multiple of four.
pub fn decode_pixels(b64: &str) -> Option<Vec<f32>> {
    let bytes = STANDARD.decode(b64).ok()?;
    if bytes.len() % 4 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    )
}
