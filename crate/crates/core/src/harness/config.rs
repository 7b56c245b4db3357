use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::codec::{Codec, Nonlinearity};
use crate::enhancement::{AblationMode, AttackConfig, GradientMode};
use crate::error::{Error, Result};
use crate::oracle::{Estimator, RemoteOracle, ToyLinearOracle, ToyMlpOracle};

/// Which oracle an experiment attacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleSpec {
    ToyLinear {
        seed: u64,
        #[serde(default)]
        budget: Option<u64>,
    },
    ToyMlp {
        seed: u64,
        #[serde(default = "default_hidden")]
        hidden: usize,
        #[serde(default)]
        budget: Option<u64>,
    },
    Remote {
        url: String,
        #[serde(default = "default_session")]
        session: String,
        #[serde(default)]
        budget: Option<u64>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_hidden() -> usize {
    32
}

fn default_session() -> String {
    "latent-probe".into()
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec::ToyLinear { seed: 0, budget: None }
    }
}

impl OracleSpec {
    pub fn budget(&self) -> Option<u64> {
        match self {
            OracleSpec::ToyLinear { budget, .. }
            | OracleSpec::ToyMlp { budget, .. }
            | OracleSpec::Remote { budget, .. } => *budget,
        }
    }

    pub fn is_local(&self) -> bool {
        !matches!(self, OracleSpec::Remote { .. })
    }

    /// In-process estimator for `input_dim` pixels.
    pub fn local_estimator(&self, input_dim: usize) -> Result<Arc<dyn Estimator<f64>>> {
        match *self {
            OracleSpec::ToyLinear { seed, .. } => Ok(Arc::new(ToyLinearOracle::<f64>::seeded(seed, input_dim))),
            OracleSpec::ToyMlp { seed, hidden, .. } => {
                Ok(Arc::new(ToyMlpOracle::<f64>::seeded(seed, input_dim, hidden)?))
            }
            OracleSpec::Remote { .. } => Err(Error::Unsupported("remote oracle has no in-process estimator".into())),
        }
    }

    /// Client for a remote spec, on its own session `"{session}-{suffix}"`.
    pub fn remote_client(&self, suffix: &str, budget: Option<u64>) -> Result<RemoteOracle> {
        match self {
            OracleSpec::Remote {
                url,
                session,
                timeout_ms,
                ..
            } => Ok(RemoteOracle::new(
                url.clone(),
                format!("{session}-{suffix}"),
                budget,
                Duration::from_millis(*timeout_ms),
            )),
            _ => Err(Error::Unsupported("not a remote oracle".into())),
        }
    }
}

/// Where the codec comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CodecSpec {
    File { path: PathBuf },
    Seeded(SeededCodec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeededCodec {
    /// `affine` (identity link) or `tanh`.
    pub kind: CodecKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default)]
    pub sigma0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecKind {
    Affine,
    Tanh,
}

fn default_latent_dim() -> usize {
    64
}

impl Default for CodecSpec {
    fn default() -> Self {
        CodecSpec::Seeded(SeededCodec {
            kind: CodecKind::Affine,
            seed: 0,
            latent_dim: default_latent_dim(),
            sigma0: 0.0,
        })
    }
}

impl CodecSpec {
    /// Codec for images of the given shape.
    pub fn build(&self, width: usize, height: usize, channels: usize) -> Result<Codec<f64>> {
        match self {
            CodecSpec::File { path } => {
                let codec = Codec::<f64>::load(path)?;
                if codec.image_shape() != (width, height, channels) {
                    if codec.pixel_dim() != width * height * channels {
                        return Err(Error::dim(
                            "codec pixel dimension",
                            codec.pixel_dim(),
                            width * height * channels,
                        ));
                    }
                    return codec.with_image_shape(width, height, channels);
                }
                Ok(codec)
            }
            CodecSpec::Seeded(s) => {
                let nl = match s.kind {
                    CodecKind::Affine => Nonlinearity::Identity,
                    CodecKind::Tanh => Nonlinearity::Tanh,
                };
                Codec::seeded_with(width, height, channels, s.latent_dim, nl, s.sigma0, s.seed)
            }
        }
    }
}

/// Report file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Classical baseline run in place of the two-stage attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BaselineSpec {
    Fgsm { epsilon: f64 },
    Pgd { epsilon: f64, steps: usize, alpha: f64 },
}

/// One experiment, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub oracle: OracleSpec,
    pub codec: CodecSpec,
    pub attack: AttackConfig,
    pub baseline: Option<BaselineSpec>,
    pub inputs: Vec<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    /// Seed of the toy body model used for pose metrics.
    pub body_seed: u64,
    /// Also write adversarial images (raw-float) next to the reports.
    pub write_images: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            oracle: OracleSpec::default(),
            codec: CodecSpec::default(),
            attack: AttackConfig::default(),
            baseline: None,
            inputs: Vec::new(),
            ground_truth: None,
            out_dir: PathBuf::from("out"),
            formats: vec![ReportFormat::Json],
            body_seed: 0,
            write_images: true,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative_to(base);
        }
        Ok(cfg)
    }

    /// Make relative paths relative to `base` (the config file's directory).
    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.inputs.iter_mut().for_each(fix);
        fix(&mut self.out_dir);
        if let Some(gt) = self.ground_truth.as_mut() {
            fix(gt);
        }
        if let CodecSpec::File { path } = &mut self.codec {
            fix(path);
        }
    }

    /// Scalar checks plus existence of every referenced file.
    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        if let Some(b) = &self.baseline {
            let ok = match *b {
                BaselineSpec::Fgsm { epsilon } => epsilon.is_finite() && epsilon >= 0.0,
                BaselineSpec::Pgd { epsilon, steps, alpha } => {
                    epsilon.is_finite() && epsilon >= 0.0 && alpha.is_finite() && alpha >= 0.0 && steps > 0
                }
            };
            if !ok {
                return Err(Error::Config(
                    "baseline epsilon/alpha must be non-negative and steps positive".into(),
                ));
            }
        }
        if let OracleSpec::Remote { url, .. } = &self.oracle {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(Error::Config(format!("oracle url must be http(s), got {url:?}")));
            }
            // a remote oracle exposes estimates only, so every gradient must be estimated
            let needs_jacobian = self.baseline.is_some()
                || self.attack.ablation_mode == AblationMode::LatentRefine
                || (self.attack.ablation_mode != AblationMode::InjectOnly
                    && self.attack.gradient_mode == GradientMode::Analytic);
            if needs_jacobian {
                return Err(Error::Config(
                    "remote oracles have no Jacobian: use zeroth-order gradients (--grad spsa), \
                     and neither baselines nor latent refinement"
                        .into(),
                ));
            }
        }
        if let CodecSpec::Seeded(s) = &self.codec {
            if s.latent_dim == 0 || !s.sigma0.is_finite() || s.sigma0 < 0.0 {
                return Err(Error::Config(
                    "codec latent_dim must be positive and sigma0 non-negative".into(),
                ));
            }
        }
        let mut paths: Vec<&Path> = self.inputs.iter().map(PathBuf::as_path).collect();
        if let Some(gt) = &self.ground_truth {
            paths.push(gt);
        }
        if let CodecSpec::File { path } = &self.codec {
            paths.push(path);
        }
        for p in paths {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        if !self.inputs.is_empty() && self.ground_truth.is_none() {
            return Err(Error::Config("ground_truth is required when inputs are given".into()));
        }
        Ok(())
    }
}
