//! Gaussian-latent codec: encoder posterior, reparameterization, decoder and
//! its Jacobian, plus the binary on-disk format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::noise::GaussianSource;
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"LCDC";
const VERSION: u32 = 1;

/// A point in latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct LatentVector<T: Real>(Vec<T>);

impl<T: Real> LatentVector<T> {
    pub fn new(z: Vec<T>) -> Self {
        Self(z)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![T::zero(); d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

/// Diagonal Gaussian posterior over the latent.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLatent<T: Real> {
    pub mu: Vec<T>,
    pub sigma: Vec<T>,
}

impl<T: Real> GaussianLatent<T> {
    pub fn new(mu: Vec<T>, sigma: Vec<T>) -> Result<Self> {
        Error::check_len("posterior sigma", mu.len(), sigma.len())?;
        if sigma.iter().any(|&s| s < T::zero() || !s.is_finite()) {
            return Err(Error::arg("posterior sigma must be finite and non-negative"));
        }
        Ok(Self { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `mu + sigma ⊙ ε` with ε drawn from `noise`. Always consumes `d` draws,
    /// even when sigma is zero, so downstream draws stay aligned.
    pub fn reparameterize(&self, noise: &mut GaussianSource) -> LatentVector<T> {
        LatentVector(
            self.mu
                .iter()
                .zip(&self.sigma)
                .map(|(&m, &s)| {
                    let e = T::lit(noise.next_gaussian());
                    if s == T::zero() {
                        m
                    } else {
                        m + s * e
                    }
                })
                .collect(),
        )
    }
}

/// Free-function form of [`GaussianLatent::reparameterize`].
pub fn reparameterize<T: Real>(g: &GaussianLatent<T>, noise: &mut GaussianSource) -> LatentVector<T> {
    g.reparameterize(noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    /// `clamp(D·z, 0, 1)`
    Identity,
    /// `0.5·(tanh(D·z) + 1)`
    Tanh,
}

impl Nonlinearity {
    fn tag(self) -> u8 {
        match self {
            Nonlinearity::Identity => 0,
            Nonlinearity::Tanh => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Nonlinearity::Identity),
            1 => Ok(Nonlinearity::Tanh),
            t => Err(Error::Format(format!("unknown codec nonlinearity tag {t}"))),
        }
    }
}

/// Encoder/decoder pair with orthonormal decoder columns; the encoder is the
/// decoder's transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct Codec<T: Real> {
    decoder: DMatrix<T>,
    nonlinearity: Nonlinearity,
    sigma0: T,
    shape: (usize, usize, usize),
    seed: u64,
}

impl<T: Real> Codec<T> {
    /// Seeded reference codec for `width×height×channels` images and latent
    /// dimension `latent_dim`.
    ///
    /// The pre-QR matrix has an all-ones first column, so the constant image
    /// direction lies in the decoder span; remaining columns are filled
    /// row-major from a [`GaussianSource`] seeded with `seed`. Columns of the
    /// thin Q factor are sign-fixed so R has a positive diagonal.
    pub fn seeded(
        width: usize,
        height: usize,
        channels: usize,
        latent_dim: usize,
        nonlinearity: Nonlinearity,
        sigma0: f64,
    ) -> Result<Self> {
        Self::seeded_with(width, height, channels, latent_dim, nonlinearity, sigma0, 0)
    }

    pub fn seeded_with(
        width: usize,
        height: usize,
        channels: usize,
        latent_dim: usize,
        nonlinearity: Nonlinearity,
        sigma0: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = width * height * channels;
        if latent_dim == 0 || n == 0 {
            return Err(Error::arg("codec dimensions must be positive"));
        }
        if latent_dim > n {
            return Err(Error::arg(format!(
                "latent dimension {latent_dim} exceeds pixel count {n}"
            )));
        }
        let mut rng = GaussianSource::new(seed);
        let mut raw = DMatrix::<f64>::zeros(n, latent_dim);
        for i in 0..n {
            raw[(i, 0)] = 1.0;
            for j in 1..latent_dim {
                raw[(i, j)] = rng.next_gaussian();
            }
        }
        let qr = raw.qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..latent_dim {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        let mut codec = Self::from_decoder(q.map(T::lit), nonlinearity, T::lit(sigma0))?;
        codec.shape = (width, height, channels);
        codec.seed = seed;
        Ok(codec)
    }

    /// Wrap an explicit decoder matrix (n×d); columns must be orthonormal.
    pub fn from_decoder(decoder: DMatrix<T>, nonlinearity: Nonlinearity, sigma0: T) -> Result<Self> {
        if !sigma0.is_finite() || sigma0 < T::zero() {
            return Err(Error::arg("sigma0 must be finite and non-negative"));
        }
        let (n, d) = decoder.shape();
        if n == 0 || d == 0 {
            return Err(Error::arg("codec dimensions must be positive"));
        }
        let gram = decoder.transpose() * &decoder;
        let tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e3));
        let off = (gram - DMatrix::<T>::identity(d, d)).amax();
        if off > tol {
            return Err(Error::arg(format!(
                "decoder columns are not orthonormal (max |DᵀD − I| = {off})"
            )));
        }
        Ok(Self {
            decoder,
            nonlinearity,
            sigma0,
            shape: (n, 1, 1),
            seed: 0,
        })
    }

    /// Attach an image shape; `w·h·c` must equal the pixel dimension.
    pub fn with_image_shape(mut self, width: usize, height: usize, channels: usize) -> Result<Self> {
        Error::check_len("codec image shape", self.pixel_dim(), width * height * channels)?;
        self.shape = (width, height, channels);
        Ok(self)
    }

    pub fn pixel_dim(&self) -> usize {
        self.decoder.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.decoder.ncols()
    }

    pub fn image_shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn sigma0(&self) -> T {
        self.sigma0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn decoder(&self) -> &DMatrix<T> {
        &self.decoder
    }

    /// Posterior at `x`: `mu = Dᵀ·x` for the identity codec and
    /// `mu = Dᵀ·atanh(2x − 1)` for the tanh codec, so decode∘encode is the
    /// span projection in either case.
    pub fn encode(&self, x: &Image<T>) -> Result<GaussianLatent<T>> {
        Error::check_len("codec input", self.pixel_dim(), x.len())?;
        let input = match self.nonlinearity {
            Nonlinearity::Identity => DVector::from_column_slice(x.as_slice()),
            Nonlinearity::Tanh => {
                // keep atanh finite at saturated pixels
                let edge = T::one() - T::lit(1e-6).max(T::epsilon() * T::lit(16.0));
                DVector::from_iterator(
                    x.len(),
                    x.as_slice().iter().map(|&v| {
                        let s = (T::lit(2.0) * v - T::one()).clamp(-edge, edge);
                        s.atanh()
                    }),
                )
            }
        };
        let mu = self.decoder.tr_mul(&input);
        Ok(GaussianLatent {
            mu: mu.as_slice().to_vec(),
            sigma: vec![self.sigma0; self.latent_dim()],
        })
    }

    fn pre_activation(&self, z: &LatentVector<T>) -> Result<DVector<T>> {
        Error::check_len("latent", self.latent_dim(), z.len())?;
        Ok(&self.decoder * DVector::from_column_slice(z.as_slice()))
    }

    pub fn decode(&self, z: &LatentVector<T>) -> Result<Image<T>> {
        let half = T::lit(0.5);
        let pre = self.pre_activation(z)?;
        let pixels = match self.nonlinearity {
            Nonlinearity::Identity => pre.iter().map(|v| v.clamp(T::zero(), T::one())).collect(),
            Nonlinearity::Tanh => pre.iter().map(|v| half * (v.tanh() + T::one())).collect(),
        };
        let (w, h, c) = self.shape;
        Image::new(w, h, c, pixels)
    }

    /// Pre-clamp decoder Jacobian at `z` (n×d).
    pub fn decoder_jacobian(&self, z: &LatentVector<T>) -> Result<DMatrix<T>> {
        match self.nonlinearity {
            Nonlinearity::Identity => {
                Error::check_len("latent", self.latent_dim(), z.len())?;
                Ok(self.decoder.clone())
            }
            Nonlinearity::Tanh => {
                let pre = self.pre_activation(z)?;
                let half = T::lit(0.5);
                let mut jac = self.decoder.clone();
                for (i, v) in pre.iter().enumerate() {
                    let t = v.tanh();
                    let s = half * (T::one() - t * t);
                    jac.row_mut(i).scale_mut(s);
                }
                Ok(jac)
            }
        }
    }

    /// Latent that decodes (identity codec) to the uniform 0.5 image.
    pub fn mid_gray_latent(&self) -> LatentVector<T> {
        // column 0 is the normalized constant direction for seeded codecs
        let n = T::lit(self.pixel_dim() as f64);
        let mut z = vec![T::zero(); self.latent_dim()];
        z[0] = T::lit(0.5) * n.sqrt();
        LatentVector(z)
    }

    /// Unclamped `D·w`, an image exactly in the decoder span.
    pub fn span_image(&self, w: &LatentVector<T>) -> Result<Image<T>> {
        let pre = self.pre_activation(w)?;
        let (width, height, c) = self.shape;
        Image::new(width, height, c, pre.as_slice().to_vec())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.pixel_dim() as u32).to_le_bytes())?;
        w.write_all(&(self.latent_dim() as u32).to_le_bytes())?;
        w.write_all(&[self.nonlinearity.tag()])?;
        w.write_all(&self.sigma0.to_f64_lossy().to_le_bytes())?;
        for i in 0..self.pixel_dim() {
            for j in 0..self.latent_dim() {
                w.write_all(&self.decoder[(i, j)].to_f64_lossy().to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Load a codec; the image shape is `(n, 1, 1)` until
    /// [`Codec::with_image_shape`] is applied.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a codec file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported codec version {version}")));
        }
        let n = read_u32(&mut r)? as usize;
        let d = read_u32(&mut r)? as usize;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let nonlinearity = Nonlinearity::from_tag(tag[0])?;
        let sigma0 = read_f64(&mut r)?;
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n * d {
            data.push(T::lit(read_f64(&mut r)?));
        }
        let decoder = DMatrix::from_row_slice(n, d, &data);
        Self::from_decoder(decoder, nonlinearity, T::lit(sigma0))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
