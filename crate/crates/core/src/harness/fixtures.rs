use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{CodecSpec, ExperimentConfig, OracleSpec};
use super::io::{save_ground_truth, save_raw_image, GroundTruth};
use crate::codec::LatentVector;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::noise::GaussianSource;
use crate::oracle::Estimator;
use crate::pose::EstimateSet;

/// Synthetic (image, ground truth) generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub seed: u64,
    /// Std-dev of the non-constant codec-span coefficients.
    pub spread: f64,
    /// Std-dev of the Gaussian offset added to the oracle's clean estimate;
    /// zero makes clean errors exactly zero.
    pub gt_offset: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            count: 8,
            width: 16,
            height: 16,
            channels: 3,
            seed: 42,
            spread: 0.5,
            gt_offset: 0.5,
        }
    }
}

pub struct Fixture {
    pub id: String,
    pub image: Image<f64>,
    pub ground_truth: EstimateSet<f64>,
}

/// In-span images around mid-gray, scaled into [0.05, 0.95] and rounded to
/// `f32` so that they survive the raw-float format unchanged. Ground truth
/// is the local oracle's estimate plus an optional seeded offset.
pub fn synthetic_fixtures(oracle: &OracleSpec, codec: &CodecSpec, spec: &FixtureSpec) -> Result<Vec<Fixture>> {
    if spec.count > 0 && spec.width * spec.height * spec.channels == 0 {
        return Err(Error::Config("fixture images need positive dimensions".into()));
    }
    let n = spec.width * spec.height * spec.channels;
    let codec = codec.build(spec.width, spec.height, spec.channels)?;
    let estimator = oracle.local_estimator(n)?;
    let mut noise = GaussianSource::new(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let mut w = codec.mid_gray_latent().into_vec();
        for v in w.iter_mut().skip(1) {
            *v += spec.spread * noise.next_gaussian();
        }
        // shrink the variation instead of clamping so the image stays in span
        let span = codec.span_image(&LatentVector::new(w.clone()))?;
        let worst = span.as_slice().iter().fold(0.0f64, |m, &v| m.max((v - 0.5).abs()));
        let span = if worst > 0.45 {
            let s = 0.45 / worst;
            let base = w[0];
            let scaled = w
                .iter()
                .enumerate()
                .map(|(k, &v)| if k == 0 { base } else { v * s })
                .collect();
            codec.span_image(&LatentVector::new(scaled))?
        } else {
            span
        };
        let data = span
            .as_slice()
            .iter()
            .map(|&v| v.clamp(0.05, 0.95) as f32 as f64)
            .collect();
        let image = span.with_data(data)?;
        let mut flat = estimator.estimate(&image)?.flatten();
        for v in &mut flat {
            *v += spec.gt_offset * noise.next_gaussian();
        }
        out.push(Fixture {
            id: format!("img_{i:03}"),
            image,
            ground_truth: EstimateSet::from_flat(&flat)?,
        });
    }
    Ok(out)
}

/// Writes fixtures under `dir` (`images/*.imgf`, `ground_truth.json`,
/// `experiment.json`) and returns the experiment config pointing at them.
pub fn write_fixtures(
    dir: impl AsRef<Path>,
    oracle: &OracleSpec,
    codec: &CodecSpec,
    spec: &FixtureSpec,
) -> Result<ExperimentConfig> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("images"))?;
    let fixtures = synthetic_fixtures(oracle, codec, spec)?;
    let mut gt = GroundTruth::new();
    let mut inputs = Vec::new();
    for f in fixtures {
        let rel = PathBuf::from("images").join(format!("{}.imgf", f.id));
        save_raw_image(&f.image, dir.join(&rel))?;
        inputs.push(rel);
        gt.insert(f.id, f.ground_truth);
    }
    save_ground_truth(&gt, dir.join("ground_truth.json"))?;
    let cfg = ExperimentConfig {
        oracle: oracle.clone(),
        codec: codec.clone(),
        inputs,
        ground_truth: Some(PathBuf::from("ground_truth.json")),
        out_dir: PathBuf::from("out"),
        ..Default::default()
    };
    // attack settings stay unset so flags and LATENT_PROBE_SEED apply
    let mut value = serde_json::to_value(&cfg)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("attack");
    }
    let text = serde_json::to_string_pretty(&value)?;
    std::fs::write(dir.join("experiment.json"), text + "\n")?;
    ExperimentConfig::load(dir.join("experiment.json"))
}
