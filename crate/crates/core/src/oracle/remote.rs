//! HTTP client side of the estimate protocol.

use std::time::Duration;

use ureq::Agent;

use super::wire::{
    encode_pixels, ErrorBody, EstimateRequest, EstimateResponse, HealthBody, ESTIMATE_PATH, HEALTH_PATH, SESSION_HEADER,
};
use super::{Oracle, QueryLedger};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::pose::EstimateSet;
use crate::scalar::Real;

/// Oracle reached over HTTP. Never retries: a retried request may already
/// have been counted by the server.
pub struct RemoteOracle {
    base_url: String,
    session: String,
    ledger: QueryLedger,
    agent: Agent,
}

impl std::fmt::Debug for RemoteOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteOracle")
            .field("base_url", &self.base_url)
            .field("session", &self.session)
            .field("ledger", &self.ledger)
            .finish()
    }
}

impl RemoteOracle {
    pub fn new(
        base_url: impl Into<String>,
        session: impl Into<String>,
        budget: Option<u64>,
        timeout: Duration,
    ) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            session: session.into(),
            ledger: QueryLedger::with_budget(budget),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn health(&self) -> Result<HealthBody> {
        let mut resp = self
            .agent
            .get(format!("{}{}", self.base_url, HEALTH_PATH))
            .call()
            .map_err(|e| Error::Transport(e.to_string()))?;
        if resp.status() != 200 {
            return Err(Error::Protocol(format!("health returned {}", resp.status())));
        }
        resp.body_mut()
            .read_json::<HealthBody>()
            .map_err(|e| Error::Protocol(e.to_string()))
    }
}

impl<T: Real> Oracle<T> for RemoteOracle {
    fn query(&self, x: &Image<T>) -> Result<EstimateSet<T>> {
        self.ledger.reserve()?;
        let req = EstimateRequest {
            width: x.width() as u32,
            height: x.height() as u32,
            channels: x.channels() as u32,
            pixels_b64: encode_pixels(x.as_slice()),
        };
        let sent = self
            .agent
            .post(format!("{}{}", self.base_url, ESTIMATE_PATH))
            .header(SESSION_HEADER, &self.session)
            .send_json(&req);
        let mut resp = match sent {
            Ok(r) => r,
            Err(e) => {
                self.ledger.release();
                return Err(Error::Transport(e.to_string()));
            }
        };
        let status = resp.status().as_u16();
        let body = match resp.body_mut().read_to_string() {
            Ok(b) => b,
            Err(e) => {
                // the server may have counted this query; keep the charge
                return Err(Error::Transport(e.to_string()));
            }
        };
        match status {
            200 => {
                let parsed: EstimateResponse =
                    serde_json::from_str(&body).map_err(|e| Error::Protocol(e.to_string()))?;
                parsed.estimate()
            }
            429 => {
                self.ledger.release();
                let err: Option<ErrorBody> = serde_json::from_str(&body).ok();
                let count = err.and_then(|e| e.count).unwrap_or(0);
                Err(Error::Budget { count, budget: count })
            }
            _ => {
                self.ledger.release();
                Err(Error::Protocol(format!("server returned {status}: {body}")))
            }
        }
    }

    fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }
}
