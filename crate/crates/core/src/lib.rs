//! Latent-space black-box attacks on pose-and-shape estimators.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the crate
//! root re-exports `f64` aliases for the common case.

// `!(a >= b)` comparisons are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod enhancement;
pub mod error;
pub mod harness;
pub mod image;
pub mod metrics;
pub mod noise;
pub mod oracle;
pub mod pose;
pub mod scalar;
pub mod sensitivity;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Image = image::Image<f64>;
pub type Image32 = image::Image<f32>;
pub type Codec = codec::Codec<f64>;
pub type Codec32 = codec::Codec<f32>;
pub type LatentVector = codec::LatentVector<f64>;
pub type EstimateSet = pose::EstimateSet<f64>;
pub type JointSet = pose::JointSet<f64>;
pub type ToyBodyModel = pose::ToyBodyModel<f64>;
pub type ToyLinearOracle = oracle::ToyLinearOracle<f64>;
pub type ToyMlpOracle = oracle::ToyMlpOracle<f64>;
pub type AdversarialResult = enhancement::AdversarialResult<f64>;
pub type ExperimentConfig = harness::ExperimentConfig;
pub type RunRecord = harness::RunRecord;
