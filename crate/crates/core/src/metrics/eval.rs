use serde::{Deserialize, Serialize};

use super::surface_distance;
use crate::mesh::{AnchorSet2D, AnchorSet3D, TriMesh};
use crate::pose::CameraPose;
use crate::{Error, Result};

/// Reconstruction output under evaluation.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub pose: CameraPose,
    pub mesh: TriMesh,
    pub anchors: AnchorSet3D,
}

/// Reference data for one image.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub pose: CameraPose,
    pub mesh: TriMesh,
    pub anchors: AnchorSet2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalErrors {
    /// Mean pixel distance between projected estimated anchors and the
    /// visible reference anchors.
    pub e_rp: f64,
    /// `‖s R - s' R'‖_F` between estimated and reference scaled rotations.
    pub e_pose: f64,
    /// Surface distance between the two meshes after each is normalized to a
    /// unit bounding-box diagonal.
    pub e_3d: f64,
}

/// Orthographic projection fixes shape only up to scale, so `e_3d` compares
/// bbox-normalized meshes; `theta` applies in that normalized frame.
pub fn eval_errors(
    est: &Estimate,
    gt: &GroundTruth,
    theta: f64,
    samples_per_area: f64,
) -> Result<EvalErrors> {
    let pairs = gt.anchors.visible_pairs(&est.anchors)?;
    let e_rp = pairs
        .iter()
        .map(|&(j, w)| (est.pose.project(&est.anchors.points()[j]) - w).norm())
        .sum::<f64>()
        / pairs.len() as f64;
    let e_pose = (est.pose.scaled_rotation() - gt.pose.scaled_rotation()).norm();

    let na = est.mesh.normalization()?;
    let nb = gt.mesh.normalization()?;
    let e_3d = surface_distance(
        &est.mesh.transformed(&na),
        &gt.mesh.transformed(&nb),
        theta,
        samples_per_area,
    )?;
    if !(e_rp.is_finite() && e_pose.is_finite()) {
        return Err(Error::NonFinite("evaluation errors".into()));
    }
    Ok(EvalErrors { e_rp, e_pose, e_3d })
}
