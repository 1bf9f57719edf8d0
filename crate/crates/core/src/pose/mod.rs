//! Orthographic camera fitting against 2D anchors and model selection by
//! silhouette overlap.

mod admm;
mod camera;
mod render;

pub use admm::{
    admm_ffd_pnp, update_dp, update_m, update_t, update_z, AdmmParams, AdmmProblem, AdmmResult,
    AdmmState,
};
pub use camera::{init_pose, CameraPose};
pub use render::render_silhouette;

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ffd::symmetry_operator;
use crate::graph::{ModelGraph, ModelNode};
use crate::mesh::{AnchorSet2D, Silhouette, TriMesh};
use crate::metrics::mask_iou;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub node_id: String,
    pub pose: CameraPose,
    pub dp: Vec<f64>,
    pub iou: f64,
    pub residual: f64,
}

/// Outcome of one node's solve during selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDiagnostic {
    pub node_id: String,
    pub iou: Option<f64>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub error: Option<String>,
}

/// Pose, deformation and rendered silhouette of one node fitted to an image.
#[derive(Debug, Clone)]
pub struct NodeFit {
    pub admm: AdmmResult,
    pub mesh: TriMesh,
    pub iou: f64,
}

/// Fits `node` to the anchors and scores the deformed model's silhouette.
pub fn fit_node(
    node: &ModelNode,
    w: &AnchorSet2D,
    sil: &Silhouette,
    params: &AdmmParams,
) -> Result<NodeFit> {
    let phi = symmetry_operator(node.lattice(), params.symmetry);
    let prob = AdmmProblem::new(node.lattice(), node.anchors(), w, phi.clone(), params.gamma)?;
    let init = init_pose(node.anchors(), w)?;
    let admm = admm_ffd_pnp(&prob, &init, params)?;
    let basis = node.lattice().bernstein_basis(node.mesh().vertices())?;
    let verts = basis.deform_vectorized(&(node.lattice().vectorized() + phi.apply(&admm.dp)))?;
    let mesh = node.mesh().with_vertices(verts)?;
    let iou = match render_silhouette(&mesh, &admm.pose, sil.width(), sil.height()) {
        Ok(r) => mask_iou(&r, sil)?,
        Err(Error::EmptySilhouette) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(NodeFit { admm, mesh, iou })
}

/// Solves every node and keeps the highest silhouette IoU; ties go to the
/// lower reprojection residual, then to the lower node id.
pub fn select_model(
    graph: &ModelGraph,
    w: &AnchorSet2D,
    sil: &Silhouette,
    params: &AdmmParams,
) -> Result<(SelectionResult, Vec<NodeDiagnostic>)> {
    if graph.nodes().is_empty() {
        return Err(Error::InvalidParam("graph has no nodes".into()));
    }
    let fits: Vec<(String, Result<NodeFit>)> = graph
        .nodes()
        .par_iter()
        .map(|n| (n.id().to_string(), fit_node(n, w, sil, params)))
        .collect();

    let mut diags = Vec::with_capacity(fits.len());
    let mut best: Option<SelectionResult> = None;
    for (id, fit) in fits {
        match fit {
            Ok(f) => {
                diags.push(NodeDiagnostic {
                    node_id: id.clone(),
                    iou: Some(f.iou),
                    residual: Some(f.admm.residual),
                    iterations: Some(f.admm.iterations),
                    converged: f.admm.converged,
                    error: None,
                });
                let cand = SelectionResult {
                    node_id: id,
                    pose: f.admm.pose,
                    dp: f.admm.dp.as_slice().to_vec(),
                    iou: f.iou,
                    residual: f.admm.residual,
                };
                if best.as_ref().is_none_or(|b| better(&cand, b)) {
                    best = Some(cand);
                }
            }
            Err(e) => {
                log::warn!("node {id}: {e}");
                diags.push(NodeDiagnostic {
                    node_id: id,
                    iou: None,
                    residual: None,
                    iterations: None,
                    converged: false,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    match best {
        Some(b) => Ok((b, diags)),
        None => Err(Error::AllNodesFailed(
            diags
                .into_iter()
                .map(|d| (d.node_id, d.error.unwrap_or_default()))
                .collect(),
        )),
    }
}

fn better(a: &SelectionResult, b: &SelectionResult) -> bool {
    let ord = b
        .iou
        .total_cmp(&a.iou)
        .then(a.residual.total_cmp(&b.residual))
        .then(a.node_id.cmp(&b.node_id));
    ord == Ordering::Less
}
