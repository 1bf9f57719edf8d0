//! Shape similarity and evaluation metrics.

mod chamfer;
mod eval;
mod surface;
mod voxel;

pub use chamfer::{chamfer_map, ChamferMap};
pub use eval::{eval_errors, Estimate, EvalErrors, GroundTruth};
pub use surface::{surface_distance, surface_samples};
pub use voxel::{voxel_iou, voxelize, VoxelFrame, VoxelGrid};

use crate::mesh::Silhouette;
use crate::{Error, Result};

/// Pixel-set intersection over union.
pub fn mask_iou(a: &Silhouette, b: &Silhouette) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "masks {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.mask().iter().zip(b.mask()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        return Err(Error::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}
