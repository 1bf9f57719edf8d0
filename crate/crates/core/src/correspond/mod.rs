//! Dense correspondence between two meshes: an anchor-driven FFD fit brings
//! the source close to the target, then locally affine nonrigid ICP slides it
//! onto the target surface.

mod nricp;

pub use nricp::{nonrigid_icp, NricpParams, WarpedModel};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ffd::{vectorize, DeformationMatrix, FfdLattice, SymmetryOperator};
use crate::mesh::{AnchorSet3D, TriMesh};
use crate::optim::{steepest_descent, DescentOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FfdFitParams {
    pub gamma: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for FfdFitParams {
    fn default() -> Self {
        Self {
            gamma: 1e-2,
            max_iters: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FfdFitResult {
    /// Free parameters `q`; the applied displacement is `Φ q`.
    pub dp: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Anchor-only FFD registration. Minimizes
/// `½‖y − (B_A ⊗ I₃)(p + Φ q)‖² + (γ/2)‖Φ q‖²` over `q` by steepest descent,
/// where `y` holds the target anchors in source-anchor order.
pub fn ffd_fit_3d(
    lattice: &FfdLattice,
    source_anchors: &AnchorSet3D,
    phi: &SymmetryOperator,
    target_anchors: &AnchorSet3D,
    params: &FfdFitParams,
) -> Result<FfdFitResult> {
    if !(params.gamma >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "gamma must be >= 0, got {}",
            params.gamma
        )));
    }
    if source_anchors.len() != target_anchors.len() {
        return Err(Error::AnchorMismatch(format!(
            "{} source anchors vs {} target anchors",
            source_anchors.len(),
            target_anchors.len()
        )));
    }
    if phi.dim() != 3 * lattice.num_control_points() {
        return Err(Error::DimensionMismatch(
            "symmetry operator does not fit lattice".into(),
        ));
    }
    let order = target_anchors.match_ids(source_anchors)?;
    let y: Vec<_> = order.iter().map(|&j| target_anchors.points()[j]).collect();
    let y = vectorize(&y);
    let a = lattice
        .bernstein_basis(source_anchors.points())?
        .kron_identity();
    let p = lattice.vectorized();
    let r0 = &y - &a * &p;
    let gamma = params.gamma;

    let objective = |q: &DVector<f64>| {
        let d = phi.apply(q);
        let r = &r0 - &a * &d;
        let value = 0.5 * r.norm_squared() + 0.5 * gamma * d.norm_squared();
        let g = phi.apply_transpose(&(-(a.tr_mul(&r)) + gamma * &d));
        (value, g)
    };
    let opts = DescentOptions {
        max_iters: params.max_iters,
        grad_tol: params.tol,
        ..DescentOptions::default()
    };
    let res = steepest_descent(DVector::zeros(phi.dim()), objective, &opts)?;
    Ok(FfdFitResult {
        dp: res.x,
        residual: res.value,
        iterations: res.iterations,
        converged: res.converged,
        history: res.history,
    })
}

/// Source vertices after moving the control points by `Φ q`.
pub fn apply_fit(
    lattice: &FfdLattice,
    basis: &DeformationMatrix,
    phi: &SymmetryOperator,
    q: &DVector<f64>,
) -> Result<Vec<crate::Vec3>> {
    basis.deform_vectorized(&(lattice.vectorized() + phi.apply(q)))
}

/// One side of a correspondence problem.
#[derive(Debug, Clone, Copy)]
pub struct CorrespondInput<'a> {
    pub id: &'a str,
    pub mesh: &'a TriMesh,
    pub anchors: &'a AnchorSet3D,
    pub lattice: &'a FfdLattice,
}

#[derive(Debug, Clone)]
pub struct CorrespondResult {
    pub warped: WarpedModel,
    pub fit: FfdFitResult,
    /// Mean anchor distance before and after the FFD step.
    pub anchor_dist_before: f64,
    pub anchor_dist_after: f64,
}

/// FFD anchor fit, deformation of every source vertex, then nonrigid ICP
/// from the deformed source onto the target.
pub fn dense_correspond(
    source: CorrespondInput<'_>,
    target: CorrespondInput<'_>,
    phi: &SymmetryOperator,
    fit_params: &FfdFitParams,
    nricp_params: &NricpParams,
) -> Result<CorrespondResult> {
    let fit = ffd_fit_3d(
        source.lattice,
        source.anchors,
        phi,
        target.anchors,
        fit_params,
    )?;
    let basis = source.lattice.bernstein_basis(source.mesh.vertices())?;
    let deformed = apply_fit(source.lattice, &basis, phi, &fit.dp)?;
    let deformed_mesh = source.mesh.with_vertices(deformed)?;

    let anchor_basis = source.lattice.bernstein_basis(source.anchors.points())?;
    let moved = apply_fit(source.lattice, &anchor_basis, phi, &fit.dp)?;
    let order = target.anchors.match_ids(source.anchors)?;
    let mean_dist = |pts: &[crate::Vec3]| {
        pts.iter()
            .zip(&order)
            .map(|(p, &j)| (p - target.anchors.points()[j]).norm())
            .sum::<f64>()
            / pts.len() as f64
    };
    let anchor_dist_before = mean_dist(source.anchors.points());
    let anchor_dist_after = mean_dist(&moved);

    let landmarks = if nricp_params.landmark_weight > 0.0 {
        let moved_set = AnchorSet3D::new(source.anchors.ids().to_vec(), moved)?;
        Some((moved_set, target.anchors.clone()))
    } else {
        None
    };
    let mut warped = nonrigid_icp(
        &deformed_mesh,
        target.mesh,
        nricp_params,
        landmarks.as_ref().map(|(a, b)| (a, b)),
    )?;
    warped.source_id = source.id.to_string();
    warped.target_id = target.id.to_string();
    Ok(CorrespondResult {
        warped,
        fit,
        anchor_dist_before,
        anchor_dist_after,
    })
}
