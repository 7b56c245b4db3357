use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{AttackConfig, GradientMode};
use super::gradient::pixel_gradient_at;
use super::objective::attack_objective;
use crate::codec::{Codec, LatentVector};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::noise::GaussianSource;
use crate::oracle::Oracle;
use crate::pose::{BlockDeviation, EstimateSet};
use crate::scalar::Real;

/// Outcome of one attack run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct AdversarialResult<T: Real> {
    pub x_adv: Image<T>,
    /// `x_adv − x`.
    pub delta_final: Vec<T>,
    /// Objective at each queried iterate, in order.
    pub objective_history: Vec<T>,
    pub queries_used: u64,
    /// Block deviation observed at the last queried iterate.
    pub last_deviation: Option<BlockDeviation<T>>,
    /// Multiply-adds spent in the perturbation update of one iteration,
    /// excluding the shared oracle-gradient work.
    pub update_ops_per_step: u64,
    /// `false` when the run was cut short.
    pub valid: bool,
}

impl<T: Real> AdversarialResult<T> {
    pub fn iterations(&self) -> usize {
        self.objective_history.len()
    }

    /// Result for an unrefined perturbation (no queries).
    pub fn unrefined(x: &Image<T>, delta: &[T]) -> Result<Self> {
        let x_adv = x.perturbed(delta)?;
        let delta_final = x_adv.diff(x)?;
        Ok(Self {
            x_adv,
            delta_final,
            objective_history: Vec::new(),
            queries_used: 0,
            last_deviation: None,
            update_ops_per_step: 0,
            valid: true,
        })
    }
}

/// A run that stopped early; `partial` holds everything up to the failure.
#[derive(Debug, Error)]
#[error("attack aborted: {error}")]
pub struct AttackAbort<T: Real> {
    #[source]
    pub error: Error,
    pub partial: Box<AdversarialResult<T>>,
}

impl<T: Real> From<AttackAbort<T>> for Error {
    fn from(a: AttackAbort<T>) -> Self {
        a.error
    }
}

fn cap_linf<T: Real>(delta: &mut [T], cap: Option<f64>) {
    if let Some(c) = cap {
        let c = T::lit(c);
        for d in delta {
            *d = d.clamp(-c, c);
        }
    }
}

struct Progress<T: Real> {
    history: Vec<T>,
    last_deviation: Option<BlockDeviation<T>>,
    start_count: u64,
}

impl<T: Real> Progress<T> {
    fn new(oracle: &dyn Oracle<T>) -> Self {
        Self {
            history: Vec::new(),
            last_deviation: None,
            start_count: oracle.queries_used(),
        }
    }

    fn finish(
        self,
        oracle: &dyn Oracle<T>,
        x: &Image<T>,
        x_adv: Image<T>,
        ops: u64,
        valid: bool,
    ) -> AdversarialResult<T> {
        let delta_final = x_adv.diff(x).unwrap_or_else(|_| vec![T::zero(); x.len()]);
        AdversarialResult {
            x_adv,
            delta_final,
            objective_history: self.history,
            queries_used: oracle.queries_used() - self.start_count,
            last_deviation: self.last_deviation,
            update_ops_per_step: ops,
            valid,
        }
    }
}

/// Projected gradient ascent on the attack objective in pixel space.
///
/// Runs exactly `cfg.budget` iterations. Each queries the oracle once at
/// the current iterate (recording the objective there), ascends by
/// `step_x · gradient`, and clamps `x + Δx` back into [0, 1].
pub fn refine_pixel<T: Real>(
    oracle: &dyn Oracle<T>,
    x: &Image<T>,
    gt: &EstimateSet<T>,
    delta0: &[T],
    cfg: &AttackConfig,
    noise: &mut GaussianSource,
) -> std::result::Result<AdversarialResult<T>, AttackAbort<T>> {
    let n = x.len() as u64;
    let abort_early = |error: Error| AttackAbort {
        partial: Box::new(AdversarialResult {
            x_adv: x.clone(),
            delta_final: vec![T::zero(); x.len()],
            objective_history: Vec::new(),
            queries_used: 0,
            last_deviation: None,
            update_ops_per_step: 0,
            valid: false,
        }),
        error,
    };
    if let Err(e) = cfg.validate() {
        return Err(abort_early(e));
    }
    let mut x_hat = match x.perturbed(delta0) {
        Ok(v) => v,
        Err(e) => return Err(abort_early(e)),
    };
    let step = T::lit(cfg.step_x);
    let mut progress = Progress::new(oracle);

    for _ in 0..cfg.budget {
        let iteration = (|| -> Result<(Image<T>, T, BlockDeviation<T>)> {
            let est = oracle.query(&x_hat)?;
            let objective = attack_objective(&est, gt, &x_hat, x, T::lit(cfg.lambda))?;
            let grad = pixel_gradient_at(oracle, x, &x_hat, gt, Some(&est), cfg, noise)?;
            let mut delta = x_hat.diff(x)?;
            for (d, g) in delta.iter_mut().zip(&grad) {
                *d += step * *g;
            }
            cap_linf(&mut delta, cfg.linf_cap);
            Ok((x.perturbed(&delta)?, objective, est.deviation(gt)))
        })();
        match iteration {
            Ok((next, objective, dev)) => {
                progress.history.push(objective);
                progress.last_deviation = Some(dev);
                x_hat = next;
            }
            Err(error) => {
                let partial = progress.finish(oracle, x, x_hat, n, false);
                return Err(AttackAbort {
                    error,
                    partial: Box::new(partial),
                });
            }
        }
    }
    Ok(progress.finish(oracle, x, x_hat, n, true))
}

/// Gradient ascent in latent space, decoding every iterate.
///
/// The pixel gradient is pulled back through the decoder Jacobian, so each
/// step costs Θ(n·d) on top of the oracle gradient. Analytic mode only.
pub fn refine_latent<T: Real>(
    oracle: &dyn Oracle<T>,
    codec: &Codec<T>,
    x: &Image<T>,
    gt: &EstimateSet<T>,
    z_hat0: &LatentVector<T>,
    cfg: &AttackConfig,
) -> std::result::Result<AdversarialResult<T>, AttackAbort<T>> {
    let (n, d) = (codec.pixel_dim() as u64, codec.latent_dim() as u64);
    // decode (n·d) + Jacobian pull-back (n·d) + latent update (d)
    let ops = 2 * n * d + d;
    let abort_early = |error: Error| AttackAbort {
        partial: Box::new(AdversarialResult {
            x_adv: x.clone(),
            delta_final: vec![T::zero(); x.len()],
            objective_history: Vec::new(),
            queries_used: 0,
            last_deviation: None,
            update_ops_per_step: ops,
            valid: false,
        }),
        error,
    };
    if cfg.gradient_mode == GradientMode::ZerothOrder {
        return Err(abort_early(Error::Unsupported(
            "latent refinement requires analytic gradients".into(),
        )));
    }
    if let Err(e) = cfg.validate() {
        return Err(abort_early(e));
    }
    let step = T::lit(cfg.step_z);
    let mut z = z_hat0.clone();
    let mut progress = Progress::new(oracle);
    let mut scratch = GaussianSource::new(cfg.seed);

    for _ in 0..cfg.budget {
        let iteration = (|| -> Result<(LatentVector<T>, T, BlockDeviation<T>)> {
            let x_hat = codec.decode(&z)?;
            let est = oracle.query(&x_hat)?;
            let objective = attack_objective(&est, gt, &x_hat, x, T::lit(cfg.lambda))?;
            let grad_x = pixel_gradient_at(oracle, x, &x_hat, gt, Some(&est), cfg, &mut scratch)?;
            let jac = codec.decoder_jacobian(&z)?;
            let grad_z = jac.tr_mul(&DVector::from_vec(grad_x));
            let next = z
                .as_slice()
                .iter()
                .zip(grad_z.iter())
                .map(|(&zi, &gi)| zi + step * gi)
                .collect();
            Ok((LatentVector::new(next), objective, est.deviation(gt)))
        })();
        match iteration {
            Ok((next, objective, dev)) => {
                progress.history.push(objective);
                progress.last_deviation = Some(dev);
                z = next;
            }
            Err(error) => {
                let x_adv = codec.decode(&z).unwrap_or_else(|_| x.clone());
                let partial = progress.finish(oracle, x, x_adv, ops, false);
                return Err(AttackAbort {
                    error,
                    partial: Box::new(partial),
                });
            }
        }
    }
    match codec.decode(&z) {
        Ok(x_adv) => Ok(progress.finish(oracle, x, x_adv, ops, true)),
        Err(error) => {
            let partial = progress.finish(oracle, x, x.clone(), ops, false);
            Err(AttackAbort {
                error,
                partial: Box::new(partial),
            })
        }
    }
}
