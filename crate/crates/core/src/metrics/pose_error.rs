use super::procrustes::{procrustes_align, AlignMode};
use crate::error::{Error, Result};
use crate::pose::{EstimateSet, JointSet, Part, ToyBodyModel, VertexSet};
use crate::scalar::Real;

/// Mean per-joint Euclidean distance.
pub fn mpjpe<T: Real>(pred: &JointSet<T>, gt: &JointSet<T>) -> Result<T> {
    Error::check_len("joint count", gt.len(), pred.len())?;
    let total = pred
        .positions()
        .iter()
        .zip(gt.positions())
        .fold(T::zero(), |acc, (p, g)| {
            let d = (0..3).fold(T::zero(), |s, k| s + (p[k] - g[k]) * (p[k] - g[k]));
            acc + d.sqrt()
        });
    Ok(total / T::lit(pred.len() as f64))
}

/// Same formula as [`mpjpe`], over vertices.
pub fn mpvpe<T: Real>(pred: &VertexSet<T>, gt: &VertexSet<T>) -> Result<T> {
    mpjpe(pred, gt)
}

/// MPJPE after similarity alignment of `pred` onto `gt`.
pub fn pa_mpjpe<T: Real>(pred: &JointSet<T>, gt: &JointSet<T>) -> Result<T> {
    let (aligned, _) = procrustes_align(pred, gt, AlignMode::Similarity)?;
    mpjpe(&aligned, gt)
}

pub fn pa_mpvpe<T: Real>(pred: &VertexSet<T>, gt: &VertexSet<T>) -> Result<T> {
    pa_mpjpe(pred, gt)
}

fn part_label(part: Part) -> &'static str {
    match part {
        Part::Body => "body",
        Part::Hands => "hands",
        Part::Face => "face",
    }
}

/// Every pose metric the body model's part layout supports, as
/// `(name, millimetres)` in a fixed order: MPJPE and PA-MPJPE per joint
/// part, then MPVPE and PA-MPVPE for all vertices and per vertex part
/// (single-part vertex layouts report only `all`).
pub fn pose_errors<T: Real>(
    model: &ToyBodyModel<T>,
    pred: &EstimateSet<T>,
    gt: &EstimateSet<T>,
) -> Result<Vec<(String, T)>> {
    let (pj, pv) = model.forward(pred)?;
    let (gj, gv) = model.forward(gt)?;
    let mut out = Vec::new();
    for pr in model.joint_parts() {
        let (p, g) = (pj.subset(pr.range.clone())?, gj.subset(pr.range.clone())?);
        let label = part_label(pr.part);
        out.push((format!("MPJPE_{label}"), mpjpe(&p, &g)?));
        out.push((format!("PA_MPJPE_{label}"), pa_mpjpe(&p, &g)?));
    }
    out.push(("MPVPE_all".to_string(), mpvpe(&pv, &gv)?));
    out.push(("PA_MPVPE_all".to_string(), pa_mpvpe(&pv, &gv)?));
    if model.vertex_parts().len() > 1 {
        for pr in model.vertex_parts().iter().filter(|p| p.part != Part::Body) {
            let (p, g) = (pv.subset(pr.range.clone())?, gv.subset(pr.range.clone())?);
            let label = part_label(pr.part);
            out.push((format!("MPVPE_{label}"), mpvpe(&p, &g)?));
            out.push((format!("PA_MPVPE_{label}"), pa_mpvpe(&p, &g)?));
        }
    }
    Ok(out)
}
