use std::path::Path;

use serde::{Deserialize, Serialize};

use super::batch::{jacobian_mode, FailureKind, RecordStatus};
use super::config::{CodecSpec, ExperimentConfig, OracleSpec};
use super::io::{input_id, load_image};
use crate::codec::LatentVector;
use crate::error::{Error, Result};
use crate::oracle::{LocalOracle, Oracle};
use crate::sensitivity::{combined_jacobian, oracle_jacobian, JacobianMode, SensitivityReport, DEFAULT_FD_STEP};

pub const SENSITIVITY_JSON: &str = "sensitivity.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEntry {
    pub id: String,
    pub status: RecordStatus,
    pub failure: Option<FailureKind>,
    pub reason: Option<String>,
    pub queries_used: u64,
    pub report: Option<SensitivityReport<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRun {
    pub oracle: OracleSpec,
    pub codec: CodecSpec,
    pub jacobian: JacobianMode,
    pub eta: f64,
    pub delta: f64,
    pub entries: Vec<SensitivityEntry>,
}

impl SensitivityRun {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn failure(&self) -> Option<FailureKind> {
        self.entries.iter().find_map(|e| e.failure)
    }
}

/// Composed-Jacobian analysis at every input, at the encoder mean.
///
/// In-process oracles use their exact Jacobian; remote ones use central
/// differences, two charged queries per pixel, against the configured budget.
pub fn analyze_inputs(cfg: &ExperimentConfig) -> Result<SensitivityRun> {
    cfg.validate()?;
    let mode = jacobian_mode(&cfg.oracle);
    let mut entries = Vec::new();
    for path in &cfg.inputs {
        let id = input_id(path);
        let x = match load_image(path) {
            Ok(x) => x,
            Err(e) => {
                entries.push(SensitivityEntry {
                    id,
                    status: RecordStatus::Skipped,
                    failure: None,
                    reason: Some(format!("unreadable input: {e}")),
                    queries_used: 0,
                    report: None,
                });
                continue;
            }
        };
        let codec = cfg.codec.build(x.width(), x.height(), x.channels())?;
        let oracle: Box<dyn Oracle<f64>> = if cfg.oracle.is_local() {
            Box::new(LocalOracle::new(
                cfg.oracle.local_estimator(x.len())?,
                cfg.oracle.budget(),
            ))
        } else {
            Box::new(cfg.oracle.remote_client(&format!("sens-{id}"), cfg.oracle.budget())?)
        };
        let analysis = (|| -> Result<SensitivityReport<f64>> {
            let jp = oracle_jacobian(oracle.as_ref(), &x, DEFAULT_FD_STEP, mode)?;
            let mu = LatentVector::new(codec.encode(&x)?.mu);
            let jg = codec.decoder_jacobian(&mu)?;
            SensitivityReport::analyze(&combined_jacobian(&jp, &jg)?, cfg.attack.eta, cfg.attack.delta)
        })();
        let queries_used = oracle.queries_used();
        entries.push(match analysis {
            Ok(report) => SensitivityEntry {
                id,
                status: RecordStatus::Ok,
                failure: None,
                reason: None,
                queries_used,
                report: Some(report),
            },
            Err(e) => SensitivityEntry {
                id,
                status: RecordStatus::Partial,
                failure: Some(FailureKind::of(&e)),
                reason: Some(e.to_string()),
                queries_used,
                report: None,
            },
        });
    }
    Ok(SensitivityRun {
        oracle: cfg.oracle.clone(),
        codec: cfg.codec.clone(),
        jacobian: mode,
        eta: cfg.attack.eta,
        delta: cfg.attack.delta,
        entries,
    })
}

/// [`analyze_inputs`], then writes `sensitivity.json` into the output directory.
pub fn run_sensitivity(cfg: &ExperimentConfig) -> Result<SensitivityRun> {
    let run = analyze_inputs(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(
        cfg.out_dir.join(SENSITIVITY_JSON),
        serde_json::to_string_pretty(&run)? + "\n",
    )?;
    Ok(run)
}
