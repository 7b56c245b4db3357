//! Black-box pose oracles and their query budget.
//!
//! An [`Estimator`] is the bare model. An [`Oracle`] is what an attacker
//! sees: every call goes through a [`QueryLedger`]. In-process oracles also
//! expose their exact Jacobian for verification; remote ones do not.

mod ledger;
pub mod remote;
pub mod server;
mod toy;
pub mod wire;

use std::sync::Arc;

use nalgebra::DMatrix;

pub use ledger::QueryLedger;
pub use remote::RemoteOracle;
pub use server::{serve_toy_oracle, ServerHandle};
pub use toy::{ToyLinearOracle, ToyMlpOracle};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::pose::EstimateSet;
use crate::scalar::Real;

/// Unmetered image → flattened estimate map.
pub trait Estimator<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    /// Flattened pixel count the model accepts.
    fn input_dim(&self) -> usize;

    /// Flattened (179-long) estimate for flattened pixels.
    fn estimate_flat(&self, x: &[T]) -> Result<Vec<T>>;

    /// Exact 179×n Jacobian, if the model knows it.
    fn jacobian(&self, _x: &[T]) -> Result<DMatrix<T>> {
        Err(Error::Unsupported(format!("{} has no analytic Jacobian", self.name())))
    }

    fn estimate(&self, x: &Image<T>) -> Result<EstimateSet<T>> {
        EstimateSet::from_flat(&self.estimate_flat(x.as_slice())?)
    }
}

impl<T: Real, E: Estimator<T> + ?Sized> Estimator<T> for Arc<E> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn estimate_flat(&self, x: &[T]) -> Result<Vec<T>> {
        (**self).estimate_flat(x)
    }

    fn jacobian(&self, x: &[T]) -> Result<DMatrix<T>> {
        (**self).jacobian(x)
    }
}

/// Budgeted query interface an attack runs against.
pub trait Oracle<T: Real>: Send + Sync {
    /// One charged query.
    fn query(&self, x: &Image<T>) -> Result<EstimateSet<T>>;

    fn ledger(&self) -> &QueryLedger;

    /// Exact Jacobian at `x`; not charged. Only in-process oracles have one.
    fn analytic_jacobian(&self, _x: &Image<T>) -> Result<DMatrix<T>> {
        Err(Error::Unsupported("oracle has no analytic Jacobian".into()))
    }

    fn queries_used(&self) -> u64 {
        self.ledger().count()
    }
}

/// Free-function form of [`Oracle::query`].
pub fn query<T: Real>(oracle: &dyn Oracle<T>, x: &Image<T>) -> Result<EstimateSet<T>> {
    oracle.query(x)
}

/// An in-process estimator behind a query ledger.
#[derive(Debug)]
pub struct LocalOracle<E> {
    estimator: E,
    ledger: QueryLedger,
}

impl<E> LocalOracle<E> {
    pub fn new(estimator: E, budget: Option<u64>) -> Self {
        Self {
            estimator,
            ledger: QueryLedger::with_budget(budget),
        }
    }

    pub fn unlimited(estimator: E) -> Self {
        Self::new(estimator, None)
    }

    pub fn estimator(&self) -> &E {
        &self.estimator
    }
}

impl<T: Real, E: Estimator<T>> Oracle<T> for LocalOracle<E> {
    fn query(&self, x: &Image<T>) -> Result<EstimateSet<T>> {
        self.ledger.reserve()?;
        match self.estimator.estimate(x) {
            Ok(est) => Ok(est),
            Err(e) => {
                self.ledger.release();
                Err(e)
            }
        }
    }

    fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    fn analytic_jacobian(&self, x: &Image<T>) -> Result<DMatrix<T>> {
        self.estimator.jacobian(x.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_query_on_budget_three_fails() {
        let o = LocalOracle::new(ToyLinearOracle::<f64>::seeded(1, 4), Some(3));
        let x = Image::filled(2, 2, 1, 0.5);
        for _ in 0..3 {
            o.query(&x).unwrap();
        }
        assert!(matches!(o.query(&x), Err(Error::Budget { count: 3, .. })));
        assert_eq!(o.queries_used(), 3);
    }

    #[test]
    fn failed_estimate_does_not_consume_budget() {
        let o = LocalOracle::new(ToyLinearOracle::<f64>::seeded(1, 4), Some(3));
        assert!(o.query(&Image::filled(3, 1, 1, 0.5)).is_err());
        assert_eq!(o.queries_used(), 0);
    }

    #[test]
    fn analytic_jacobian_is_free() {
        let o = LocalOracle::new(ToyLinearOracle::<f64>::seeded(1, 4), Some(1));
        let x = Image::filled(2, 2, 1, 0.5);
        let j = o.analytic_jacobian(&x).unwrap();
        assert_eq!(&j, o.estimator().matrix());
        assert_eq!(o.queries_used(), 0);
    }
}
