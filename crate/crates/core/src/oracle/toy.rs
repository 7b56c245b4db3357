//! In-process oracles with known Jacobians.

use nalgebra::{DMatrix, DVector};

use super::Estimator;
use crate::error::{Error, Result};
use crate::noise::GaussianSource;
use crate::pose::{EstimateSet, ESTIMATE_DIM};
use crate::scalar::Real;

/// `P(x) = A·x + b`.
///
/// Seeded recipe: a [`GaussianSource`] with the given seed fills `A`
/// (179×n) row-major with draws scaled by 1/√n, then `b` with unscaled draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyLinearOracle<T: Real> {
    a: DMatrix<T>,
    b: DVector<T>,
    seed: u64,
}

impl<T: Real> ToyLinearOracle<T> {
    pub fn seeded(seed: u64, input_dim: usize) -> Self {
        let mut rng = GaussianSource::new(seed);
        let scale = 1.0 / (input_dim as f64).sqrt();
        let mut a = DMatrix::<T>::zeros(ESTIMATE_DIM, input_dim);
        for i in 0..ESTIMATE_DIM {
            for j in 0..input_dim {
                a[(i, j)] = T::lit(rng.next_gaussian() * scale);
            }
        }
        let b = DVector::from_iterator(ESTIMATE_DIM, (0..ESTIMATE_DIM).map(|_| T::lit(rng.next_gaussian())));
        Self { a, b, seed }
    }

    pub fn from_parts(a: DMatrix<T>, b: DVector<T>) -> Result<Self> {
        Error::check_len("linear oracle rows", ESTIMATE_DIM, a.nrows())?;
        Error::check_len("linear oracle bias", ESTIMATE_DIM, b.len())?;
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::arg("linear oracle entries must be finite"));
        }
        Ok(Self { a, b, seed: 0 })
    }

    /// Oracle that ignores its input and always answers `est`.
    pub fn constant(est: &EstimateSet<T>, input_dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(ESTIMATE_DIM, input_dim),
            b: DVector::from_vec(est.flatten()),
            seed: 0,
        }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn bias(&self) -> &DVector<T> {
        &self.b
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl<T: Real> Estimator<T> for ToyLinearOracle<T> {
    fn name(&self) -> &str {
        "toy-linear"
    }

    fn input_dim(&self) -> usize {
        self.a.ncols()
    }

    fn estimate_flat(&self, x: &[T]) -> Result<Vec<T>> {
        Error::check_len("oracle input", self.input_dim(), x.len())?;
        let out = &self.a * DVector::from_column_slice(x) + &self.b;
        Ok(out.as_slice().to_vec())
    }

    fn jacobian(&self, x: &[T]) -> Result<DMatrix<T>> {
        Error::check_len("oracle input", self.input_dim(), x.len())?;
        Ok(self.a.clone())
    }
}

/// `P(x) = W2·tanh(W1·x + b1) + b2`.
///
/// Seeded recipe: W1 (k×n, scaled 1/√n), b1 (scaled 0.1), W2 (179×k, scaled
/// 1/√k), b2 (unscaled), each row-major, drawn in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyMlpOracle<T: Real> {
    w1: DMatrix<T>,
    b1: DVector<T>,
    w2: DMatrix<T>,
    b2: DVector<T>,
    seed: u64,
}

impl<T: Real> ToyMlpOracle<T> {
    pub fn seeded(seed: u64, input_dim: usize, hidden: usize) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::arg("MLP oracle needs at least one hidden unit"));
        }
        let mut rng = GaussianSource::new(seed);
        let mut fill = |rows: usize, cols: usize, scale: f64| {
            let mut m = DMatrix::<T>::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    m[(i, j)] = T::lit(rng.next_gaussian() * scale);
                }
            }
            m
        };
        let w1 = fill(hidden, input_dim, 1.0 / (input_dim as f64).sqrt());
        let b1 = fill(hidden, 1, 0.1).column(0).into_owned();
        let w2 = fill(ESTIMATE_DIM, hidden, 1.0 / (hidden as f64).sqrt());
        let b2 = fill(ESTIMATE_DIM, 1, 1.0).column(0).into_owned();
        Ok(Self { w1, b1, w2, b2, seed })
    }

    pub fn from_parts(w1: DMatrix<T>, b1: DVector<T>, w2: DMatrix<T>, b2: DVector<T>) -> Result<Self> {
        if w1.nrows() == 0 {
            return Err(Error::arg("MLP oracle needs at least one hidden unit"));
        }
        Error::check_len("MLP hidden bias", w1.nrows(), b1.len())?;
        Error::check_len("MLP output width", w1.nrows(), w2.ncols())?;
        Error::check_len("MLP output rows", ESTIMATE_DIM, w2.nrows())?;
        Error::check_len("MLP output bias", ESTIMATE_DIM, b2.len())?;
        Ok(Self {
            w1,
            b1,
            w2,
            b2,
            seed: 0,
        })
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn first_layer(&self) -> (&DMatrix<T>, &DVector<T>) {
        (&self.w1, &self.b1)
    }

    pub fn second_layer(&self) -> (&DMatrix<T>, &DVector<T>) {
        (&self.w2, &self.b2)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn pre_activation(&self, x: &[T]) -> Result<DVector<T>> {
        Error::check_len("oracle input", self.input_dim(), x.len())?;
        Ok(&self.w1 * DVector::from_column_slice(x) + &self.b1)
    }
}

impl<T: Real> Estimator<T> for ToyMlpOracle<T> {
    fn name(&self) -> &str {
        "toy-mlp"
    }

    fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    fn estimate_flat(&self, x: &[T]) -> Result<Vec<T>> {
        let h = self.pre_activation(x)?.map(|v| v.tanh());
        Ok((&self.w2 * h + &self.b2).as_slice().to_vec())
    }

    fn jacobian(&self, x: &[T]) -> Result<DMatrix<T>> {
        let pre = self.pre_activation(x)?;
        let mut scaled = self.w1.clone();
        for (i, v) in pre.iter().enumerate() {
            let t = v.tanh();
            scaled.row_mut(i).scale_mut(T::one() - t * t);
        }
        Ok(&self.w2 * scaled)
    }
}
