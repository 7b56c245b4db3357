//! First-order sensitivity of the oracle output to latent perturbations.
//!
//! The composed Jacobian `J = J_P · J_G` maps a latent step to a change in
//! the flattened estimate. Its top right singular vector is the latent
//! direction that moves the estimate most per unit step, and `δ / σ₁` is the
//! smallest step along it that moves the estimate by `δ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::oracle::Oracle;
use crate::scalar::Real;

/// Default central-difference step on the [0, 1] pixel scale.
pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Default significance threshold δ, in estimate units.
pub const DEFAULT_DELTA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// Ask the oracle for its exact Jacobian (in-process oracles only).
    Analytic,
    /// Central differences, two charged queries per pixel.
    #[default]
    FiniteDifference,
}

/// Oracle Jacobian at `x` (179×n).
///
/// Finite-difference probes are not clamped to [0, 1]; a probe that exhausts
/// the budget aborts with [`Error::Budget`] carrying the count so far.
pub fn oracle_jacobian<T: Real>(
    oracle: &dyn Oracle<T>,
    x: &Image<T>,
    step: T,
    mode: JacobianMode,
) -> Result<DMatrix<T>> {
    if mode == JacobianMode::Analytic {
        return oracle.analytic_jacobian(x);
    }
    if !(step > T::zero()) || !step.is_finite() {
        return Err(Error::arg("finite-difference step must be positive"));
    }
    let n = x.len();
    let mut jac: Option<DMatrix<T>> = None;
    let mut probe = x.clone();
    let two_h = step + step;
    for j in 0..n {
        let orig = x.as_slice()[j];
        probe.as_mut_slice()[j] = orig + step;
        let plus = oracle.query(&probe)?.flatten();
        probe.as_mut_slice()[j] = orig - step;
        let minus = oracle.query(&probe)?.flatten();
        probe.as_mut_slice()[j] = orig;
        let m = jac.get_or_insert_with(|| DMatrix::zeros(plus.len(), n));
        for (i, (p, q)) in plus.iter().zip(&minus).enumerate() {
            m[(i, j)] = (*p - *q) / two_h;
        }
    }
    jac.ok_or_else(|| Error::arg("empty image"))
}

/// `J_P · J_G`.
pub fn combined_jacobian<T: Real>(oracle_jac: &DMatrix<T>, decoder_jac: &DMatrix<T>) -> Result<DMatrix<T>> {
    Error::check_len(
        "combined Jacobian inner dimension",
        oracle_jac.ncols(),
        decoder_jac.nrows(),
    )?;
    Ok(oracle_jac * decoder_jac)
}

/// Singular values, largest first.
pub fn singular_values<T: Real>(jac: &DMatrix<T>) -> Vec<T> {
    if jac.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<T> = jac.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Flip `v` so its first non-negligible component is positive.
fn fix_sign<T: Real>(v: &mut DVector<T>) {
    let tiny = T::epsilon() * T::lit(16.0);
    if let Some(first) = v.iter().find(|c| c.abs() > tiny).copied() {
        if first < T::zero() {
            v.neg_mut();
        }
    }
}

/// Largest singular value and its right singular vector, via a full SVD.
/// A zero matrix yields `(0, e₀)`.
pub fn top_singular_direction<T: Real>(jac: &DMatrix<T>) -> (T, DVector<T>) {
    let d = jac.ncols();
    let e0 = || {
        let mut e = DVector::zeros(d);
        if d > 0 {
            e[0] = T::one();
        }
        e
    };
    if jac.is_empty() || jac.amax() == T::zero() {
        return (T::zero(), e0());
    }
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (best, sigma) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::zero()), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    let mut v = v_t.row(best).transpose();
    v.normalize_mut();
    fix_sign(&mut v);
    (sigma, v)
}

/// Power iteration on `JᵀJ` for the top singular pair; suited to wide
/// Jacobians where a full SVD is wasteful. Starts from the all-ones vector.
pub fn power_iteration<T: Real>(jac: &DMatrix<T>, tol: T, max_iter: usize) -> (T, DVector<T>) {
    let d = jac.ncols();
    let mut v = DVector::from_element(d, T::one());
    if d == 0 || jac.amax() == T::zero() {
        let mut e = DVector::zeros(d);
        if d > 0 {
            e[0] = T::one();
        }
        return (T::zero(), e);
    }
    v.normalize_mut();
    let mut lambda = T::zero();
    for _ in 0..max_iter {
        let mut next = jac.tr_mul(&(jac * &v));
        let norm = next.norm();
        if norm == T::zero() {
            break;
        }
        next /= norm;
        let done = (norm - lambda).abs() <= tol * norm;
        lambda = norm;
        v = next;
        if done {
            break;
        }
    }
    fix_sign(&mut v);
    ((jac * &v).norm(), v)
}

/// Outcome of `δ / σ₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold<T> {
    Reachable(T),
    /// σ₁ = 0: no finite step crosses the threshold.
    Unreachable,
}

impl<T: Real> Threshold<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Threshold::Reachable(v) => Some(*v),
            Threshold::Unreachable => None,
        }
    }
}

pub fn min_perturbation_magnitude<T: Real>(sigma1: T, delta: T) -> Result<Threshold<T>> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(Error::arg(format!("delta must be positive, got {delta}")));
    }
    if sigma1 < T::zero() || !sigma1.is_finite() {
        return Err(Error::arg(format!(
            "sigma1 must be finite and non-negative, got {sigma1}"
        )));
    }
    if sigma1 == T::zero() {
        Ok(Threshold::Unreachable)
    } else {
        Ok(Threshold::Reachable(delta / sigma1))
    }
}

/// `η² · tr(JᵀJ)`, the expected squared response to `η·ε`, ε ~ N(0, I).
pub fn expected_response_energy<T: Real>(jac: &DMatrix<T>, eta: T) -> T {
    eta * eta * jac.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

/// Serialized summary of one sensitivity analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SensitivityReport<T: Real> {
    pub singular_values: Vec<T>,
    pub v1: Vec<T>,
    /// `None` (JSON `null`) when σ₁ = 0.
    pub eta_min: Option<T>,
    pub trace_energy: T,
    pub delta: T,
}

impl<T: Real> SensitivityReport<T> {
    /// Analyze a composed Jacobian at perturbation scale `eta`.
    pub fn analyze(jac: &DMatrix<T>, eta: T, delta: T) -> Result<Self> {
        let singular_values = singular_values(jac);
        let (sigma1, v1) = top_singular_direction(jac);
        let eta_min = min_perturbation_magnitude(sigma1, delta)?.value();
        Ok(Self {
            singular_values,
            v1: v1.as_slice().to_vec(),
            eta_min,
            trace_energy: expected_response_energy(jac, eta),
            delta,
        })
    }

    pub fn sigma1(&self) -> T {
        self.singular_values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn is_reachable(&self) -> bool {
        self.eta_min.is_some()
    }
}
