//! Sign-gradient baselines on the estimate deviation alone.

use super::config::{AttackConfig, GradientMode};
use super::gradient::pixel_gradient_at;
use super::refine::{AdversarialResult, AttackAbort};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::noise::GaussianSource;
use crate::oracle::Oracle;
use crate::pose::EstimateSet;
use crate::scalar::Real;

fn sign<T: Real>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// One signed step of size `epsilon`.
pub fn fgsm_baseline<T: Real>(
    oracle: &dyn Oracle<T>,
    x: &Image<T>,
    gt: &EstimateSet<T>,
    epsilon: T,
) -> std::result::Result<AdversarialResult<T>, AttackAbort<T>> {
    pgd_baseline(oracle, x, gt, epsilon, 1, epsilon)
}

/// `steps` signed steps of size `alpha`, each projected onto the L∞ ball of
/// radius `epsilon` around `x` and clamped to [0, 1]. Starts at `x`.
pub fn pgd_baseline<T: Real>(
    oracle: &dyn Oracle<T>,
    x: &Image<T>,
    gt: &EstimateSet<T>,
    epsilon: T,
    steps: usize,
    alpha: T,
) -> std::result::Result<AdversarialResult<T>, AttackAbort<T>> {
    let start = oracle.queries_used();
    let n = x.len() as u64;
    let cfg = AttackConfig {
        lambda: 0.0,
        gradient_mode: GradientMode::Analytic,
        ..Default::default()
    };
    let mut noise = GaussianSource::new(0);
    let mut x_adv = x.clone();
    let mut history = Vec::with_capacity(steps);
    let mut last_deviation = None;
    let bad = !(epsilon >= T::zero()) || !(alpha >= T::zero());
    for _ in 0..steps {
        let step = (|| -> Result<(Image<T>, T, _)> {
            if bad {
                return Err(Error::arg("epsilon and alpha must be non-negative"));
            }
            let est = oracle.query(&x_adv)?;
            let dev = est.deviation(gt);
            let grad = pixel_gradient_at(oracle, x, &x_adv, gt, Some(&est), &cfg, &mut noise)?;
            let delta: Vec<T> = x_adv
                .as_slice()
                .iter()
                .zip(x.as_slice())
                .zip(&grad)
                .map(|((&a, &b), &g)| (a - b + alpha * sign(g)).clamp(-epsilon, epsilon))
                .collect();
            Ok((x.perturbed(&delta)?, dev.total(), dev))
        })();
        match step {
            Ok((next, objective, dev)) => {
                history.push(objective);
                last_deviation = Some(dev);
                x_adv = next;
            }
            Err(error) => {
                let delta_final = x_adv.diff(x).unwrap_or_default();
                return Err(AttackAbort {
                    error,
                    partial: Box::new(AdversarialResult {
                        x_adv,
                        delta_final,
                        objective_history: history,
                        queries_used: oracle.queries_used() - start,
                        last_deviation,
                        update_ops_per_step: n,
                        valid: false,
                    }),
                });
            }
        }
    }
    let delta_final = x_adv.diff(x).map_err(|error| AttackAbort {
        error,
        partial: Box::new(AdversarialResult::unrefined(x, &vec![T::zero(); x.len()]).expect("same shape")),
    })?;
    Ok(AdversarialResult {
        x_adv,
        delta_final,
        objective_history: history,
        queries_used: oracle.queries_used() - start,
        last_deviation,
        update_ops_per_step: n,
        valid: true,
    })
}
