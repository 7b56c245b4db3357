//! Budgeted refinement of the stage-one perturbation (attack stage two),
//! its latent-space variant, the ablation pipeline and classical baselines.

mod baseline;
mod config;
mod gradient;
mod objective;
mod pipeline;
mod refine;

pub use baseline::{fgsm_baseline, pgd_baseline};
pub use config::{AblationMode, AttackConfig, GradientMode};
pub use gradient::{estimate_pixel_gradient, pixel_gradient_at};
pub use objective::{attack_objective, pixel_mse};
pub use pipeline::{refine_from_stage, run_attack, stage_one, AttackOutcome, StageOne};
pub use refine::{refine_latent, refine_pixel, AdversarialResult, AttackAbort};
