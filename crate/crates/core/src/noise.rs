//! Seeded Gaussian noise and latent-space noise injection (attack stage one).

use serde::{Deserialize, Serialize};

use crate::codec::{Codec, LatentVector};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Real;

/// Deterministic i.i.d. standard-normal stream.
///
/// Recipe (kept stable so other implementations can reproduce it):
/// SplitMix64 over a 64-bit state, uniforms `u = ((x >> 11) + 1) · 2⁻⁵³`
/// in (0, 1], and Box–Muller on consecutive pairs `(u1, u2)` emitting
/// `√(−2 ln u1)·cos(2π u2)` then `√(−2 ln u1)·sin(2π u2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSource {
    seed: u64,
    state: u64,
    spare: Option<f64>,
    position: u64,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            state: seed,
            spare: None,
            position: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of Gaussian draws consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in (0, 1].
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_gaussian(&mut self) -> f64 {
        self.position += 1;
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// ±1 with equal probability.
    pub fn next_sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn gaussian_vec<T: Real>(&mut self, len: usize) -> Vec<T> {
        (0..len).map(|_| T::lit(self.next_gaussian())).collect()
    }
}

/// Where the latent injection direction comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionMode {
    /// Fresh Gaussian draw.
    #[default]
    Random,
    /// Top right singular vector of the composed Jacobian.
    Svd,
}

/// `z + eta·ε` with a fresh standard Gaussian ε.
pub fn inject<T: Real>(z: &LatentVector<T>, eta: T, noise: &mut GaussianSource) -> Result<LatentVector<T>> {
    let eps = noise.gaussian_vec::<T>(z.len());
    inject_along(z, eta, &eps)
}

/// `z + eta·direction` for a caller-supplied direction.
pub fn inject_along<T: Real>(z: &LatentVector<T>, eta: T, direction: &[T]) -> Result<LatentVector<T>> {
    if !eta.is_finite() || eta < T::zero() {
        return Err(Error::arg(format!("eta must be finite and non-negative, got {eta}")));
    }
    Error::check_len("injection direction", z.len(), direction.len())?;
    if eta == T::zero() {
        return Ok(z.clone());
    }
    Ok(LatentVector::new(
        z.as_slice().iter().zip(direction).map(|(&v, &e)| v + eta * e).collect(),
    ))
}

/// Stage-one output: the decoded pixel perturbation and the latents it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPerturbation<T: Real> {
    /// `clamp(decode(ẑ)) − x`, already range-valid when added to `x`.
    pub delta0: Vec<T>,
    pub eta_used: T,
    pub latent_before: LatentVector<T>,
    pub latent_after: LatentVector<T>,
    /// Direction that was scaled by `eta_used`.
    pub direction: Vec<T>,
}

impl<T: Real> InitialPerturbation<T> {
    pub fn perturbed_image(&self, x: &Image<T>) -> Result<Image<T>> {
        x.perturbed(&self.delta0)
    }
}

/// Encode, reparameterize, inject and decode; returns the pixel perturbation.
///
/// With `direction = Some(v)` the latent moves along `v` instead of a
/// random draw. The posterior noise ε₁ is always drawn first from `noise`.
pub fn initial_perturbation<T: Real>(
    codec: &Codec<T>,
    x: &Image<T>,
    eta: T,
    noise: &mut GaussianSource,
    direction: Option<&[T]>,
) -> Result<InitialPerturbation<T>> {
    let posterior = codec.encode(x)?;
    let z = posterior.reparameterize(noise);
    let dir = match direction {
        Some(v) => v.to_vec(),
        None => noise.gaussian_vec::<T>(z.len()),
    };
    let z_hat = inject_along(&z, eta, &dir)?;
    let decoded = codec.decode(&z_hat)?;
    let delta0 = decoded.diff(x)?;
    Ok(InitialPerturbation {
        delta0,
        eta_used: eta,
        latent_before: z,
        latent_after: z_hat,
        direction: dir,
    })
}

/// Pixel-space Gaussian start `clamp(x + eta·ε) − x`, used by the
/// random-init ablation.
pub fn pixel_random_perturbation<T: Real>(x: &Image<T>, eta: T, noise: &mut GaussianSource) -> Result<Vec<T>> {
    if !eta.is_finite() || eta < T::zero() {
        return Err(Error::arg(format!("eta must be finite and non-negative, got {eta}")));
    }
    let eps = noise.gaussian_vec::<T>(x.len());
    let step: Vec<T> = eps.iter().map(|&e| eta * e).collect();
    x.perturbed(&step)?.diff(x)
}
