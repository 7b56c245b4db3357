use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::DirectionMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Exact chain rule through the oracle's known Jacobian.
    #[default]
    Analytic,
    /// SPSA with Rademacher probes; only uses oracle outputs.
    #[serde(alias = "spsa")]
    ZerothOrder,
}

/// Which parts of the two-stage attack run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AblationMode {
    /// Latent injection, then pixel-space refinement.
    #[default]
    #[serde(rename = "UBA", alias = "uba")]
    Uba,
    /// Pixel-space Gaussian start, then pixel-space refinement.
    #[serde(rename = "A_pixel_random", alias = "a", alias = "A")]
    PixelRandom,
    /// Latent injection only.
    #[serde(rename = "B_inject_only", alias = "b", alias = "B")]
    InjectOnly,
    /// Latent injection, then refinement in latent space.
    #[serde(rename = "C_latent_refine", alias = "c", alias = "C")]
    LatentRefine,
}

impl AblationMode {
    pub fn label(self) -> &'static str {
        match self {
            AblationMode::Uba => "UBA",
            AblationMode::PixelRandom => "A_pixel_random",
            AblationMode::InjectOnly => "B_inject_only",
            AblationMode::LatentRefine => "C_latent_refine",
        }
    }
}

impl std::str::FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::arg(format!("unknown ablation mode {s:?}")))
    }
}

impl std::str::FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::arg(format!("unknown gradient mode {s:?}")))
    }
}

/// Attack hyper-parameters. Defaults: η = 0.05, t = 3 queries, λ = 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// Latent (or pixel, mode A) noise scale.
    pub eta: f64,
    /// Refinement iterations; each costs one objective query, plus
    /// `2·spsa_probes` in zeroth-order mode.
    pub budget: u64,
    /// Weight of the pixel-MSE penalty.
    pub lambda: f64,
    pub step_x: f64,
    pub step_z: f64,
    pub delta: f64,
    pub seed: u64,
    pub gradient_mode: GradientMode,
    pub direction_mode: DirectionMode,
    pub ablation_mode: AblationMode,
    pub spsa_probes: u32,
    pub spsa_step: f64,
    /// Optional L∞ bound on the perturbation; penalty-only when `None`.
    pub linf_cap: Option<f64>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            eta: 0.05,
            budget: 3,
            lambda: 0.5,
            step_x: 0.01,
            step_z: 0.01,
            delta: 1.0,
            seed: 0,
            gradient_mode: GradientMode::Analytic,
            direction_mode: DirectionMode::Random,
            ablation_mode: AblationMode::Uba,
            spsa_probes: 8,
            spsa_step: 1e-3,
            linf_cap: None,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.eta,
            self.lambda,
            self.step_x,
            self.step_z,
            self.delta,
            self.spsa_step,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("attack scalars must be finite".into()));
        }
        if self.eta < 0.0 {
            return Err(Error::Config("eta must be non-negative".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if self.step_x <= 0.0 || self.step_z < 0.0 {
            return Err(Error::Config("step sizes must be positive".into()));
        }
        if self.delta <= 0.0 {
            return Err(Error::Config("delta must be positive".into()));
        }
        if self.budget == 0 && self.ablation_mode != AblationMode::InjectOnly {
            return Err(Error::Config("query budget must be at least 1".into()));
        }
        if self.gradient_mode == GradientMode::ZerothOrder && (self.spsa_probes == 0 || self.spsa_step <= 0.0) {
            return Err(Error::Config(
                "SPSA needs at least one probe and a positive step".into(),
            ));
        }
        if self.linf_cap.is_some_and(|c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::Config("L∞ cap must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Oracle queries one refinement run consumes.
    pub fn queries_per_run(&self) -> u64 {
        if self.ablation_mode == AblationMode::InjectOnly {
            return 0;
        }
        match self.gradient_mode {
            GradientMode::Analytic => self.budget,
            GradientMode::ZerothOrder => self.budget * (1 + 2 * self.spsa_probes as u64),
        }
    }
}
