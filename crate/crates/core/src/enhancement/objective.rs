use crate::error::{Error, Result};
use crate::image::Image;
use crate::pose::EstimateSet;
use crate::scalar::Real;

/// Mean squared pixel difference `(1/(w·h·c)) Σ (x̂ − x)²`.
pub fn pixel_mse<T: Real>(x_hat: &Image<T>, x: &Image<T>) -> Result<T> {
    x_hat.check_shape(x, "pixel penalty")?;
    let n = T::lit(x.len() as f64);
    Ok(x_hat
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
        / n)
}

/// Quantity the attack ascends:
/// `‖α̂−α‖²_F + ‖β̂−β‖² + ‖γ̂−γ‖² − λ·mse(x̂, x)`.
pub fn attack_objective<T: Real>(
    est: &EstimateSet<T>,
    gt: &EstimateSet<T>,
    x_hat: &Image<T>,
    x: &Image<T>,
    lambda: T,
) -> Result<T> {
    if !lambda.is_finite() || lambda < T::zero() {
        return Err(Error::arg("lambda must be finite and non-negative"));
    }
    Ok(est.deviation(gt).total() - lambda * pixel_mse(x_hat, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::ESTIMATE_DIM;

    #[test]
    fn no_deviation_no_penalty() {
        let gt = EstimateSet::<f64>::zeros();
        let x = Image::filled(2, 1, 1, 0.5);
        assert_eq!(attack_objective(&gt, &gt, &x, &x, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn pure_penalty_is_negative() {
        let gt = EstimateSet::<f64>::zeros();
        let x = Image::filled(2, 1, 1, 0.5);
        let xh = Image::new(2, 1, 1, vec![0.6, 0.5]).unwrap();
        assert!(attack_objective(&gt, &gt, &xh, &x, 0.5).unwrap() < 0.0);
    }

    #[test]
    fn handcrafted_value() {
        // α row 0 off by (3, 4, 0): ‖Δα‖² = 25; β[2] off by 2: 4; γ[9] off by 1: 1.
        // two pixels, diffs (0.2, −0.4): mse = (0.04 + 0.16)/2 = 0.1; λ = 0.5
        // O = 25 + 4 + 1 − 0.05 = 29.95
        let gt = EstimateSet::<f64>::zeros();
        let mut flat = vec![0.0; ESTIMATE_DIM];
        flat[0] = 3.0;
        flat[1] = 4.0;
        flat[159 + 2] = 2.0;
        flat[178] = -1.0;
        let est = EstimateSet::from_flat(&flat).unwrap();
        let x = Image::new(2, 1, 1, vec![0.5, 0.5]).unwrap();
        let xh = Image::new(2, 1, 1, vec![0.7, 0.1]).unwrap();
        let o = attack_objective(&est, &gt, &xh, &x, 0.5).unwrap();
        assert!((o - 29.95).abs() < 1e-12, "{o}");
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let gt = EstimateSet::<f64>::zeros();
        let x = Image::filled(2, 1, 1, 0.5);
        let y = Image::filled(1, 2, 1, 0.5);
        assert!(matches!(
            attack_objective(&gt, &gt, &x, &y, 0.5),
            Err(Error::Dimension { .. })
        ));
    }
}
