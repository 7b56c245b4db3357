use serde::{Deserialize, Serialize};

use super::config::{AblationMode, AttackConfig};
use super::refine::{refine_latent, refine_pixel, AdversarialResult, AttackAbort};
use crate::codec::{Codec, LatentVector};
use crate::error::Error;
use crate::image::Image;
use crate::noise::{initial_perturbation, pixel_random_perturbation, GaussianSource};
use crate::oracle::Oracle;
use crate::pose::EstimateSet;
use crate::scalar::Real;

/// Stream offset for refinement noise, kept apart from the stage-one stream
/// so that switching the initializer leaves refinement randomness unchanged.
const REFINE_STREAM: u64 = 0xA5A5_5A5A_C3C3_3C3C;

/// Initial perturbation and the latents that produced it (latent modes only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct StageOne<T: Real> {
    pub delta0: Vec<T>,
    /// `clamp(x + delta0)`.
    pub image: Image<T>,
    pub latent_before: Option<Vec<T>>,
    pub latent_after: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct AttackOutcome<T: Real> {
    pub mode: AblationMode,
    pub stage_one: StageOne<T>,
    pub result: AdversarialResult<T>,
}

/// Stage one for the configured ablation mode.
pub fn stage_one<T: Real>(
    codec: &Codec<T>,
    x: &Image<T>,
    cfg: &AttackConfig,
    direction: Option<&[T]>,
) -> crate::Result<StageOne<T>> {
    let mut noise = GaussianSource::new(cfg.seed);
    let eta = T::lit(cfg.eta);
    if cfg.ablation_mode == AblationMode::PixelRandom {
        let delta0 = pixel_random_perturbation(x, eta, &mut noise)?;
        let image = x.perturbed(&delta0)?;
        return Ok(StageOne {
            delta0,
            image,
            latent_before: None,
            latent_after: None,
        });
    }
    let init = initial_perturbation(codec, x, eta, &mut noise, direction)?;
    let image = init.perturbed_image(x)?;
    Ok(StageOne {
        delta0: init.delta0,
        image,
        latent_before: Some(init.latent_before.into_vec()),
        latent_after: Some(init.latent_after.into_vec()),
    })
}

/// Full attack for one input under `cfg.ablation_mode`.
///
/// * `Uba`: latent injection, then pixel refinement.
/// * `PixelRandom`: pixel Gaussian start, then pixel refinement.
/// * `InjectOnly`: latent injection only; no queries.
/// * `LatentRefine`: latent injection, then refinement of ẑ.
pub fn run_attack<T: Real>(
    oracle: &dyn Oracle<T>,
    codec: &Codec<T>,
    x: &Image<T>,
    gt: &EstimateSet<T>,
    cfg: &AttackConfig,
    direction: Option<&[T]>,
) -> Result<AttackOutcome<T>, AttackAbort<T>> {
    let fail = |error: Error| AttackAbort {
        error,
        partial: Box::new(AdversarialResult {
            x_adv: x.clone(),
            delta_final: vec![T::zero(); x.len()],
            objective_history: Vec::new(),
            queries_used: 0,
            last_deviation: None,
            update_ops_per_step: 0,
            valid: false,
        }),
    };
    cfg.validate().map_err(fail)?;
    if x.len() != codec.pixel_dim() {
        return Err(fail(Error::dim("input image", codec.pixel_dim(), x.len())));
    }
    let stage = stage_one(codec, x, cfg, direction).map_err(fail)?;
    let result = refine_from_stage(oracle, codec, x, gt, cfg, &stage)?;
    Ok(AttackOutcome {
        mode: cfg.ablation_mode,
        stage_one: stage,
        result,
    })
}

/// Stage two of [`run_attack`] from a given stage-one result. Refinement
/// noise depends only on `cfg.seed`, never on how `stage` was produced.
pub fn refine_from_stage<T: Real>(
    oracle: &dyn Oracle<T>,
    codec: &Codec<T>,
    x: &Image<T>,
    gt: &EstimateSet<T>,
    cfg: &AttackConfig,
    stage: &StageOne<T>,
) -> Result<AdversarialResult<T>, AttackAbort<T>> {
    let fail = |error: Error| AttackAbort {
        error,
        partial: Box::new(AdversarialResult {
            x_adv: x.clone(),
            delta_final: vec![T::zero(); x.len()],
            objective_history: Vec::new(),
            queries_used: 0,
            last_deviation: None,
            update_ops_per_step: 0,
            valid: false,
        }),
    };
    let mut noise = GaussianSource::new(cfg.seed ^ REFINE_STREAM);
    Ok(match cfg.ablation_mode {
        AblationMode::InjectOnly => AdversarialResult {
            x_adv: stage.image.clone(),
            delta_final: stage.image.diff(x).map_err(fail)?,
            objective_history: Vec::new(),
            queries_used: 0,
            last_deviation: None,
            update_ops_per_step: 0,
            valid: true,
        },
        AblationMode::Uba | AblationMode::PixelRandom => {
            let delta0 = stage.image.diff(x).map_err(fail)?;
            refine_pixel(oracle, x, gt, &delta0, cfg, &mut noise)?
        }
        AblationMode::LatentRefine => {
            let Some(z) = stage.latent_after.clone() else {
                return Err(fail(Error::arg("latent refinement needs a latent stage-one result")));
            };
            refine_latent(oracle, codec, x, gt, &LatentVector::new(z), cfg)?
        }
    })
}
