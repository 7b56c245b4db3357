use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Real;

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;
/// Side of the square Gaussian SSIM window.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Peak signal-to-noise ratio on the [0, 1] scale, capped at 99 dB.
pub fn psnr<T: Real>(x: &Image<T>, y: &Image<T>) -> Result<T> {
    x.check_shape(y, "psnr")?;
    let n = T::lit(x.len() as f64);
    let mse = x
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
        / n;
    let cap = T::lit(PSNR_CAP_DB);
    if mse == T::zero() {
        return Ok(cap);
    }
    Ok((T::lit(10.0) * (T::one() / mse).log10()).min(cap))
}

fn gaussian_window<T: Real>() -> Vec<T> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = g.iter().sum::<f64>().powi(2);
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for a in &g {
        for b in &g {
            w.push(T::lit(a * b / total));
        }
    }
    w
}

/// Mean structural similarity over every fully-contained 11×11 Gaussian
/// window (σ = 1.5, K1 = 0.01, K2 = 0.03, L = 1) and every channel.
pub fn ssim<T: Real>(x: &Image<T>, y: &Image<T>) -> Result<T> {
    x.check_shape(y, "ssim")?;
    if x.width() < SSIM_WINDOW || x.height() < SSIM_WINDOW {
        return Err(Error::arg(format!(
            "ssim needs images of at least {SSIM_WINDOW}×{SSIM_WINDOW}, got {}×{}",
            x.width(),
            x.height()
        )));
    }
    let w = gaussian_window::<T>();
    let c1 = T::lit(K1 * K1);
    let c2 = T::lit(K2 * K2);
    let two = T::lit(2.0);
    let mut total = T::zero();
    let mut count = 0usize;
    for c in 0..x.channels() {
        for oy in 0..=x.height() - SSIM_WINDOW {
            for ox in 0..=x.width() - SSIM_WINDOW {
                let (mut mx, mut my) = (T::zero(), T::zero());
                let (mut xx, mut yy, mut xy) = (T::zero(), T::zero(), T::zero());
                for dy in 0..SSIM_WINDOW {
                    for dx in 0..SSIM_WINDOW {
                        let wt = w[dy * SSIM_WINDOW + dx];
                        let a = x.get(ox + dx, oy + dy, c);
                        let b = y.get(ox + dx, oy + dy, c);
                        mx += wt * a;
                        my += wt * b;
                        xx += wt * a * a;
                        yy += wt * b * b;
                        xy += wt * a * b;
                    }
                }
                let vx = xx - mx * mx;
                let vy = yy - my * my;
                let cov = xy - mx * my;
                let num = (two * mx * my + c1) * (two * cov + c2);
                let den = (mx * mx + my * my + c1) * (vx + vy + c2);
                total += num / den;
                count += 1;
            }
        }
    }
    Ok(total / T::lit(count as f64))
}
