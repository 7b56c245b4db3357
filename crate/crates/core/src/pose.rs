//! Pose, shape and expression parameter spaces and the seeded linear body
//! model that maps them to 3D joints and vertices.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::GaussianSource;
use crate::scalar::Real;

/// Rows of the axis-angle pose block.
pub const POSE_ROWS: usize = 53;
pub const SHAPE_DIM: usize = 10;
pub const EXPRESSION_DIM: usize = 10;
/// Length of a flattened [`EstimateSet`]: 53·3 + 10 + 10.
pub const ESTIMATE_DIM: usize = POSE_ROWS * 3 + SHAPE_DIM + EXPRESSION_DIM;

pub const BODY_ROWS: Range<usize> = 0..22;
pub const LHAND_ROWS: Range<usize> = 22..37;
pub const RHAND_ROWS: Range<usize> = 37..52;
pub const JAW_ROWS: Range<usize> = 52..53;

/// 53×3 axis-angle pose; values are plain reals, never wrapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[T; 3]>", into = "Vec<[T; 3]>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PoseParams<T: Real>(Vec<[T; 3]>);

impl<T: Real> PoseParams<T> {
    pub fn zeros() -> Self {
        Self(vec![[T::zero(); 3]; POSE_ROWS])
    }

    pub fn rows(&self) -> &[[T; 3]] {
        &self.0
    }

    pub fn rows_mut(&mut self) -> &mut [[T; 3]] {
        &mut self.0
    }

    pub fn body(&self) -> &[[T; 3]] {
        &self.0[BODY_ROWS]
    }

    pub fn left_hand(&self) -> &[[T; 3]] {
        &self.0[LHAND_ROWS]
    }

    pub fn right_hand(&self) -> &[[T; 3]] {
        &self.0[RHAND_ROWS]
    }

    pub fn jaw(&self) -> &[[T; 3]] {
        &self.0[JAW_ROWS]
    }
}

impl<T: Real> TryFrom<Vec<[T; 3]>> for PoseParams<T> {
    type Error = Error;

    fn try_from(rows: Vec<[T; 3]>) -> Result<Self> {
        Error::check_len("pose rows", POSE_ROWS, rows.len())?;
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::arg("pose entries must be finite"));
        }
        Ok(Self(rows))
    }
}

impl<T: Real> From<PoseParams<T>> for Vec<[T; 3]> {
    fn from(p: PoseParams<T>) -> Self {
        p.0
    }
}

/// Body shape coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ShapeVector<T: Real>(pub [T; SHAPE_DIM]);

/// Facial expression coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ExpressionVector<T: Real>(pub [T; EXPRESSION_DIM]);

/// One estimate (or ground truth) of pose, shape and expression.
///
/// Flattening order is fixed: `alpha` row-major, then `beta`, then `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct EstimateSet<T: Real> {
    pub alpha: PoseParams<T>,
    pub beta: ShapeVector<T>,
    pub gamma: ExpressionVector<T>,
}

/// Squared deviation of each parameter block between two estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockDeviation<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Real> BlockDeviation<T> {
    pub fn total(&self) -> T {
        self.alpha + self.beta + self.gamma
    }
}

impl<T: Real> EstimateSet<T> {
    pub fn zeros() -> Self {
        Self {
            alpha: PoseParams::zeros(),
            beta: ShapeVector([T::zero(); SHAPE_DIM]),
            gamma: ExpressionVector([T::zero(); EXPRESSION_DIM]),
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(ESTIMATE_DIM);
        out.extend(self.alpha.rows().iter().flatten().copied());
        out.extend_from_slice(&self.beta.0);
        out.extend_from_slice(&self.gamma.0);
        out
    }

    pub fn from_flat(v: &[T]) -> Result<Self> {
        Error::check_len("flattened estimate", ESTIMATE_DIM, v.len())?;
        let rows = v[..POSE_ROWS * 3]
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect::<Vec<_>>();
        let mut beta = [T::zero(); SHAPE_DIM];
        beta.copy_from_slice(&v[POSE_ROWS * 3..POSE_ROWS * 3 + SHAPE_DIM]);
        let mut gamma = [T::zero(); EXPRESSION_DIM];
        gamma.copy_from_slice(&v[POSE_ROWS * 3 + SHAPE_DIM..]);
        Ok(Self {
            alpha: PoseParams::try_from(rows)?,
            beta: ShapeVector(beta),
            gamma: ExpressionVector(gamma),
        })
    }

    /// Per-block squared deviation from `other`.
    pub fn deviation(&self, other: &Self) -> BlockDeviation<T> {
        let sq = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
        let alpha = self
            .alpha
            .rows()
            .iter()
            .zip(other.alpha.rows())
            .fold(T::zero(), |acc, (a, b)| acc + sq(a, b));
        BlockDeviation {
            alpha,
            beta: sq(&self.beta.0, &other.beta.0),
            gamma: sq(&self.gamma.0, &other.gamma.0),
        }
    }

    pub fn cast<U: Real>(&self) -> EstimateSet<U> {
        let flat: Vec<U> = self.flatten().into_iter().map(|v| U::lit(v.to_f64_lossy())).collect();
        EstimateSet::from_flat(&flat).expect("cast preserves dimension")
    }
}

/// J×3 point positions in millimetres. Used for joints and vertices alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct JointSet<T: Real> {
    positions: Vec<[T; 3]>,
}

pub type VertexSet<T> = JointSet<T>;

impl<T: Real> JointSet<T> {
    pub fn new(positions: Vec<[T; 3]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::arg("point set needs at least one point"));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::arg("point coordinates must be finite"));
        }
        Ok(Self { positions })
    }

    pub(crate) fn from_flat(v: &[T]) -> Result<Self> {
        if !v.len().is_multiple_of(3) {
            return Err(Error::dim("point set", v.len() - v.len() % 3, v.len()));
        }
        Self::new(v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[T; 3]] {
        &self.positions
    }

    /// Points whose indices fall in `range`.
    pub fn subset(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.is_empty() {
            return Err(Error::arg(format!(
                "subset {range:?} out of bounds for {} points",
                self.len()
            )));
        }
        Self::new(self.positions[range].to_vec())
    }
}

/// Anatomical region a block of joints or vertices belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Body,
    Hands,
    Face,
}

impl Part {
    /// Estimate columns that drive this part. Shape drives every part.
    fn drives(self, col: usize) -> bool {
        let shape = POSE_ROWS * 3..POSE_ROWS * 3 + SHAPE_DIM;
        let expr = POSE_ROWS * 3 + SHAPE_DIM..ESTIMATE_DIM;
        let pose_row = (col < POSE_ROWS * 3).then_some(col / 3);
        if shape.contains(&col) {
            return true;
        }
        match (self, pose_row) {
            (Part::Body, Some(r)) => BODY_ROWS.contains(&r),
            (Part::Hands, Some(r)) => LHAND_ROWS.contains(&r) || RHAND_ROWS.contains(&r),
            (Part::Face, Some(r)) => JAW_ROWS.contains(&r),
            (Part::Face, None) => expr.contains(&col),
            _ => false,
        }
    }
}

/// Point counts per part for [`ToyBodyModel::with_parts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartLayout {
    pub body_joints: usize,
    pub hand_joints: usize,
    pub body_vertices: usize,
    pub hand_vertices: usize,
    pub face_vertices: usize,
}

impl Default for PartLayout {
    fn default() -> Self {
        Self {
            body_joints: 22,
            hand_joints: 30,
            body_vertices: 60,
            hand_vertices: 40,
            face_vertices: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartRange {
    pub part: Part,
    pub range: Range<usize>,
}

/// Linear stand-in for the parametric body mesh and joint regressor.
///
/// Generation recipe for seed `s`: a [`GaussianSource`] seeded with `s`
/// fills `joint_map` row-major, then `vertex_map` row-major, each entry
/// scaled by 1/√179; then `joint_offset` and `vertex_offset` in order,
/// unscaled. Columns a part does not depend on are zeroed after drawing.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyBodyModel<T: Real> {
    joint_map: DMatrix<T>,
    vertex_map: DMatrix<T>,
    joint_offset: DVector<T>,
    vertex_offset: DVector<T>,
    joint_parts: Vec<PartRange>,
    vertex_parts: Vec<PartRange>,
    seed: u64,
}

impl<T: Real> ToyBodyModel<T> {
    /// Dense model with `joints` body joints and `vertices` vertices.
    pub fn new(seed: u64, joints: usize, vertices: usize) -> Result<Self> {
        if joints == 0 || vertices == 0 {
            return Err(Error::arg("body model needs at least one joint and vertex"));
        }
        let joint_parts = vec![PartRange {
            part: Part::Body,
            range: 0..joints,
        }];
        let vertex_parts = vec![PartRange {
            part: Part::Body,
            range: 0..vertices,
        }];
        Ok(Self::generate(seed, joint_parts, vertex_parts, false))
    }

    /// Block-structured model: hand joints depend only on hand pose rows and
    /// shape, face vertices only on the jaw, shape and expression.
    pub fn with_parts(seed: u64, layout: PartLayout) -> Result<Self> {
        let mut joint_parts = Vec::new();
        let mut at = 0;
        for (part, count) in [(Part::Body, layout.body_joints), (Part::Hands, layout.hand_joints)] {
            if count > 0 {
                joint_parts.push(PartRange {
                    part,
                    range: at..at + count,
                });
                at += count;
            }
        }
        let mut vertex_parts = Vec::new();
        let mut vat = 0;
        for (part, count) in [
            (Part::Body, layout.body_vertices),
            (Part::Hands, layout.hand_vertices),
            (Part::Face, layout.face_vertices),
        ] {
            if count > 0 {
                vertex_parts.push(PartRange {
                    part,
                    range: vat..vat + count,
                });
                vat += count;
            }
        }
        if at == 0 || vat == 0 {
            return Err(Error::arg("body model needs at least one joint and vertex"));
        }
        Ok(Self::generate(seed, joint_parts, vertex_parts, true))
    }

    fn generate(seed: u64, joint_parts: Vec<PartRange>, vertex_parts: Vec<PartRange>, masked: bool) -> Self {
        let joints = joint_parts.last().map_or(0, |p| p.range.end);
        let vertices = vertex_parts.last().map_or(0, |p| p.range.end);
        let mut rng = GaussianSource::new(seed);
        let scale = 1.0 / (ESTIMATE_DIM as f64).sqrt();
        let mut fill_map = |rows: usize, parts: &[PartRange]| {
            let mut m = DMatrix::<T>::zeros(rows, ESTIMATE_DIM);
            for r in 0..rows {
                let part = parts
                    .iter()
                    .find(|p| p.range.contains(&(r / 3)))
                    .map(|p| p.part)
                    .unwrap_or(Part::Body);
                for c in 0..ESTIMATE_DIM {
                    let v = rng.next_gaussian() * scale;
                    if !masked || part.drives(c) {
                        m[(r, c)] = T::lit(v);
                    }
                }
            }
            m
        };
        let joint_map = fill_map(3 * joints, &joint_parts);
        let vertex_map = fill_map(3 * vertices, &vertex_parts);
        let joint_offset = DVector::from_iterator(3 * joints, (0..3 * joints).map(|_| T::lit(rng.next_gaussian())));
        let vertex_offset =
            DVector::from_iterator(3 * vertices, (0..3 * vertices).map(|_| T::lit(rng.next_gaussian())));
        Self {
            joint_map,
            vertex_map,
            joint_offset,
            vertex_offset,
            joint_parts,
            vertex_parts,
            seed,
        }
    }

    /// Build from explicit matrices (one body part each).
    pub fn from_matrices(
        joint_map: DMatrix<T>,
        vertex_map: DMatrix<T>,
        joint_offset: DVector<T>,
        vertex_offset: DVector<T>,
    ) -> Result<Self> {
        Error::check_len("joint map columns", ESTIMATE_DIM, joint_map.ncols())?;
        Error::check_len("vertex map columns", ESTIMATE_DIM, vertex_map.ncols())?;
        Error::check_len("joint offset", joint_map.nrows(), joint_offset.len())?;
        Error::check_len("vertex offset", vertex_map.nrows(), vertex_offset.len())?;
        if joint_map.nrows() == 0 || !joint_map.nrows().is_multiple_of(3) {
            return Err(Error::arg("joint map rows must be a positive multiple of 3"));
        }
        if vertex_map.nrows() == 0 || !vertex_map.nrows().is_multiple_of(3) {
            return Err(Error::arg("vertex map rows must be a positive multiple of 3"));
        }
        let joints = joint_map.nrows() / 3;
        let vertices = vertex_map.nrows() / 3;
        Ok(Self {
            joint_map,
            vertex_map,
            joint_offset,
            vertex_offset,
            joint_parts: vec![PartRange {
                part: Part::Body,
                range: 0..joints,
            }],
            vertex_parts: vec![PartRange {
                part: Part::Body,
                range: 0..vertices,
            }],
            seed: 0,
        })
    }

    /// Same maps with both offsets set to zero.
    pub fn without_offsets(mut self) -> Self {
        self.joint_offset.fill(T::zero());
        self.vertex_offset.fill(T::zero());
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn joint_map(&self) -> &DMatrix<T> {
        &self.joint_map
    }

    pub fn vertex_map(&self) -> &DMatrix<T> {
        &self.vertex_map
    }

    pub fn joint_offset(&self) -> &DVector<T> {
        &self.joint_offset
    }

    pub fn vertex_offset(&self) -> &DVector<T> {
        &self.vertex_offset
    }

    pub fn num_joints(&self) -> usize {
        self.joint_map.nrows() / 3
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_map.nrows() / 3
    }

    pub fn joint_parts(&self) -> &[PartRange] {
        &self.joint_parts
    }

    pub fn vertex_parts(&self) -> &[PartRange] {
        &self.vertex_parts
    }

    /// Joints and vertices for one estimate.
    pub fn forward(&self, est: &EstimateSet<T>) -> Result<(JointSet<T>, VertexSet<T>)> {
        let p = DVector::from_vec(est.flatten());
        Error::check_len("body model input", self.joint_map.ncols(), p.len())?;
        let joints = &self.joint_map * &p + &self.joint_offset;
        let vertices = &self.vertex_map * &p + &self.vertex_offset;
        Ok((
            JointSet::from_flat(joints.as_slice())?,
            JointSet::from_flat(vertices.as_slice())?,
        ))
    }
}

/// Convenience wrapper over [`ToyBodyModel::new`].
pub fn make_toy_body_model<T: Real>(seed: u64, joints: usize, vertices: usize) -> Result<ToyBodyModel<T>> {
    ToyBodyModel::new(seed, joints, vertices)
}

/// Convenience wrapper over [`ToyBodyModel::forward`].
pub fn toy_body_forward<T: Real>(model: &ToyBodyModel<T>, est: &EstimateSet<T>) -> Result<(JointSet<T>, VertexSet<T>)> {
    model.forward(est)
}
