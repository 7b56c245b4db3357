//! Dense pixel tensors on the [0, 1] scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// H×W×C image, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::arg("image dimensions must be positive"));
        }
        Error::check_len("image pixels", width * height * channels, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("image pixels must be finite"));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, T::zero())
    }

    /// New image with this image's shape and the given pixels.
    pub fn with_data(&self, data: Vec<T>) -> Result<Self> {
        Self::new(self.width, self.height, self.channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Total number of scalar entries (w·h·c).
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_shape(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::dim(context, self.len(), other.len()))
        }
    }

    /// Clamp every pixel into [0, 1].
    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(T::zero(), T::one());
        }
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|&v| v >= T::zero() && v <= T::one())
    }

    /// `clamp(self + delta)`; `delta` must have the same length.
    pub fn perturbed(&self, delta: &[T]) -> Result<Self> {
        Error::check_len("perturbation", self.len(), delta.len())?;
        let mut out = self.clone();
        for (v, &d) in out.data.iter_mut().zip(delta) {
            *v = (*v + d).clamp(T::zero(), T::one());
        }
        Ok(out)
    }

    /// Elementwise `self - other`.
    pub fn diff(&self, other: &Self) -> Result<Vec<T>> {
        self.check_shape(other, "image difference")?;
        Ok(self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect())
    }

    /// Convert the scalar type.
    pub fn cast<U: Real>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}
