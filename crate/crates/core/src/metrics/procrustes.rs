use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::JointSet;
use crate::scalar::Real;

/// Which transforms the alignment may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMode {
    /// Scale, rotation and translation.
    #[default]
    Similarity,
    /// Rotation and translation only (diagnostics).
    Rotation,
}

/// `p ↦ s·R·p + t` with `R` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform<T: Real> {
    pub scale: T,
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> SimilarityTransform<T> {
    pub fn identity() -> Self {
        Self {
            scale: T::one(),
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply_point(&self, p: &[T; 3]) -> [T; 3] {
        let v = self.rotation * Vector3::new(p[0], p[1], p[2]) * self.scale + self.translation;
        [v[0], v[1], v[2]]
    }

    pub fn apply(&self, set: &JointSet<T>) -> Result<JointSet<T>> {
        JointSet::new(set.positions().iter().map(|p| self.apply_point(p)).collect())
    }
}

fn centroid<T: Real>(pts: &[[T; 3]]) -> Vector3<T> {
    let n = T::lit(pts.len() as f64);
    pts.iter()
        .fold(Vector3::zeros(), |acc, p| acc + Vector3::new(p[0], p[1], p[2]))
        / n
}

/// Singular values of the centered point cloud, descending.
fn spread<T: Real>(pts: &[[T; 3]], c: &Vector3<T>) -> Vector3<T> {
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = Vector3::new(p[0], p[1], p[2]) - c;
        cov += d * d.transpose();
    }
    let mut s = cov.symmetric_eigenvalues().map(|v| v.max(T::zero()).sqrt());
    s.as_mut_slice()
        .sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Least-squares alignment of `pred` onto `gt`.
///
/// Centers both sets, takes the SVD of the cross-covariance, flips the
/// smallest singular axis if the rotation would be a reflection, and sets
/// the scale to `tr(ΣS) / Σ‖pred_c‖²`.
pub fn procrustes_align<T: Real>(
    pred: &JointSet<T>,
    gt: &JointSet<T>,
    mode: AlignMode,
) -> Result<(JointSet<T>, SimilarityTransform<T>)> {
    Error::check_len("alignment point count", gt.len(), pred.len())?;
    if gt.len() < 3 {
        return Err(Error::Degenerate(format!(
            "alignment needs at least 3 points, got {}",
            gt.len()
        )));
    }
    let (p, g) = (pred.positions(), gt.positions());
    let (cp, cg) = (centroid(p), centroid(g));
    let tol = T::lit(1e-9);
    let gs = spread(g, &cg);
    if gs[0] == T::zero() || gs[1] <= tol * gs[0] {
        return Err(Error::Degenerate("ground-truth points are collinear".into()));
    }

    let mut cross = Matrix3::zeros();
    let mut pred_var = T::zero();
    for (pp, gg) in p.iter().zip(g) {
        let dp = Vector3::new(pp[0], pp[1], pp[2]) - cp;
        let dg = Vector3::new(gg[0], gg[1], gg[2]) - cg;
        cross += dg * dp.transpose();
        pred_var += dp.norm_squared();
    }
    if pred_var == T::zero() {
        return Err(Error::Degenerate("predicted points coincide".into()));
    }
    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let sigma = svd.singular_values;
    // flip the axis of the smallest singular value when det(U Vᵀ) < 0
    let smallest = (0..3)
        .min_by(|&a, &b| sigma[a].partial_cmp(&sigma[b]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(2);
    let mut signs = Vector3::repeat(T::one());
    if (u * v_t).determinant() < T::zero() {
        signs[smallest] = -T::one();
    }
    let rotation = u * Matrix3::from_diagonal(&signs) * v_t;
    let scale = match mode {
        AlignMode::Similarity => sigma.component_mul(&signs).sum() / pred_var,
        AlignMode::Rotation => T::one(),
    };
    let translation = cg - rotation * cp * scale;
    let transform = SimilarityTransform {
        scale,
        rotation,
        translation,
    };
    Ok((transform.apply(pred)?, transform))
}
