use nalgebra::DVector;

use super::config::{AttackConfig, GradientMode};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::noise::GaussianSource;
use crate::oracle::Oracle;
use crate::pose::EstimateSet;
use crate::scalar::Real;

/// Gradient of the attack objective with respect to the perturbation.
///
/// Analytic mode spends one query at `x + delta`; zeroth-order mode spends
/// `2·spsa_probes` probe queries. Use [`pixel_gradient_at`] when the
/// estimate at `x + delta` is already known.
pub fn estimate_pixel_gradient<T: Real>(
    oracle: &dyn Oracle<T>,
    x: &Image<T>,
    delta: &[T],
    gt: &EstimateSet<T>,
    cfg: &AttackConfig,
    noise: &mut GaussianSource,
) -> Result<Vec<T>> {
    let x_hat = x.perturbed(delta)?;
    let est = match cfg.gradient_mode {
        GradientMode::Analytic => Some(oracle.query(&x_hat)?),
        GradientMode::ZerothOrder => None,
    };
    pixel_gradient_at(oracle, x, &x_hat, gt, est.as_ref(), cfg, noise)
}

/// Gradient at `x_hat`, with `est_at_point` the oracle's answer there
/// (required in analytic mode).
///
/// Analytic: `2·J_Pᵀ(P(x̂) − gt) − (2λ/N)·(x̂ − x)`.
/// SPSA: the deviation term is estimated from `spsa_probes` Rademacher
/// probe pairs at scale `spsa_step` (probe images clamped to [0, 1]); the
/// penalty term is the attacker's own and enters exactly.
pub fn pixel_gradient_at<T: Real>(
    oracle: &dyn Oracle<T>,
    x: &Image<T>,
    x_hat: &Image<T>,
    gt: &EstimateSet<T>,
    est_at_point: Option<&EstimateSet<T>>,
    cfg: &AttackConfig,
    noise: &mut GaussianSource,
) -> Result<Vec<T>> {
    x_hat.check_shape(x, "gradient point")?;
    let n = x.len();
    let lambda = T::lit(cfg.lambda);
    let penalty_scale = T::lit(2.0) * lambda / T::lit(n as f64);
    let mut grad = match cfg.gradient_mode {
        GradientMode::Analytic => {
            let est =
                est_at_point.ok_or_else(|| Error::arg("analytic gradient needs the estimate at the current point"))?;
            let residual: Vec<T> = est.flatten().iter().zip(gt.flatten()).map(|(&p, g)| p - g).collect();
            let jac = oracle.analytic_jacobian(x_hat)?;
            let g = jac.tr_mul(&DVector::from_vec(residual)) * T::lit(2.0);
            g.as_slice().to_vec()
        }
        GradientMode::ZerothOrder => spsa_deviation_gradient(oracle, x_hat, gt, cfg, noise)?,
    };
    for ((g, &xh), &x0) in grad.iter_mut().zip(x_hat.as_slice()).zip(x.as_slice()) {
        *g -= penalty_scale * (xh - x0);
    }
    Ok(grad)
}

fn spsa_deviation_gradient<T: Real>(
    oracle: &dyn Oracle<T>,
    x_hat: &Image<T>,
    gt: &EstimateSet<T>,
    cfg: &AttackConfig,
    noise: &mut GaussianSource,
) -> Result<Vec<T>> {
    let n = x_hat.len();
    let h = T::lit(cfg.spsa_step);
    let probes = cfg.spsa_probes.max(1);
    let mut acc = vec![T::zero(); n];
    for _ in 0..probes {
        let signs: Vec<T> = (0..n).map(|_| T::lit(noise.next_sign())).collect();
        let step: Vec<T> = signs.iter().map(|&s| s * h).collect();
        let back: Vec<T> = step.iter().map(|&s| -s).collect();
        let plus = oracle.query(&x_hat.perturbed(&step)?)?.deviation(gt).total();
        let minus = oracle.query(&x_hat.perturbed(&back)?)?.deviation(gt).total();
        let slope = (plus - minus) / (h + h);
        for (a, &s) in acc.iter_mut().zip(&signs) {
            *a += slope * s;
        }
    }
    let k = T::lit(probes as f64);
    Ok(acc.into_iter().map(|v| v / k).collect())
}
