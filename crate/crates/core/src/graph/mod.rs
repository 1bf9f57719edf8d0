//! Directed class graph: nodes are normalized models with their lattices,
//! edges carry a source mesh warped onto a target together with the two
//! similarity scores that admitted it.

mod io;

pub use io::{load_graph, save_graph, SCHEMA_VERSION};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspond::{
    dense_correspond, nonrigid_icp, CorrespondInput, FfdFitParams, NricpParams,
};
use crate::ffd::{build_lattice, symmetry_operator, FfdLattice, SymmetryMode};
use crate::geom::TriangleGrid;
use crate::mesh::{AnchorSet3D, TriMesh};
use crate::metrics::{surface_distance, voxel_iou, voxelize, VoxelFrame};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelNode {
    id: String,
    mesh: TriMesh,
    anchors: AnchorSet3D,
    lattice: FfdLattice,
}

impl ModelNode {
    /// Normalizes `mesh` and `anchors` together (bounding box centered at the
    /// origin, unit diagonal) and embeds the result in a lattice.
    pub fn new(
        id: &str,
        mesh: &TriMesh,
        anchors: &AnchorSet3D,
        degrees: [usize; 3],
        margin: f64,
    ) -> Result<Self> {
        let norm = mesh.normalization()?;
        let mesh = mesh.transformed(&norm);
        let anchors = anchors.transformed(&norm);
        let lattice = build_lattice(&mesh, degrees, margin)?;
        if let Some(grid) = TriangleGrid::new(&mesh) {
            for (aid, p) in anchors.ids().iter().zip(anchors.points()) {
                let d = grid.distance(p);
                if d > 1e-3 {
                    log::warn!("node {id}: anchor {aid} is {d:.2e} from the surface");
                }
            }
        }
        Self::from_parts(id, mesh, anchors, lattice)
    }

    /// Wraps already-normalized parts without further processing.
    pub fn from_parts(
        id: &str,
        mesh: TriMesh,
        anchors: AnchorSet3D,
        lattice: FfdLattice,
    ) -> Result<Self> {
        validate_id(id)?;
        Ok(Self {
            id: id.to_string(),
            mesh,
            anchors,
            lattice,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn anchors(&self) -> &AnchorSet3D {
        &self.anchors
    }

    pub fn lattice(&self) -> &FfdLattice {
        &self.lattice
    }

    /// Borrowed view for [`crate::correspond::dense_correspond`].
    pub fn as_input(&self) -> CorrespondInput<'_> {
        CorrespondInput {
            id: &self.id,
            mesh: &self.mesh,
            anchors: &self.anchors,
            lattice: &self.lattice,
        }
    }
}

/// Ids double as file names in saved graphs.
fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && !id.contains("__")
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "node id {id:?} must be ASCII alphanumerics, '-', '_' or '.', without '__' or a leading '.'"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEdge {
    pub source: String,
    pub target: String,
    /// Source topology, target shape.
    pub warped: Vec<Vec3>,
    pub s_dist: f64,
    pub s_iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    nodes: Vec<ModelNode>,
    edges: Vec<ModelEdge>,
    pub theta_dist: f64,
    pub theta_iou: f64,
}

impl ModelGraph {
    /// Nodes are kept sorted by id and edges by `(source, target)`.
    pub fn new(
        mut nodes: Vec<ModelNode>,
        mut edges: Vec<ModelEdge>,
        theta_dist: f64,
        theta_iou: f64,
    ) -> Result<Self> {
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = nodes.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidParam(format!(
                "duplicate node id {}",
                w[0].id
            )));
        }
        edges.sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));
        let g = Self {
            nodes,
            edges,
            theta_dist,
            theta_iou,
        };
        for e in &g.edges {
            if e.source == e.target {
                return Err(Error::InvalidParam(format!("self edge on {}", e.source)));
            }
            let src = g.node(&e.source)?;
            g.node(&e.target)?;
            if e.warped.len() != src.mesh.num_vertices() {
                return Err(Error::DimensionMismatch(format!(
                    "edge {} -> {} has {} vertices, source has {}",
                    e.source,
                    e.target,
                    e.warped.len(),
                    src.mesh.num_vertices()
                )));
            }
        }
        if g.edges
            .windows(2)
            .any(|w| w[0].source == w[1].source && w[0].target == w[1].target)
        {
            return Err(Error::InvalidParam("duplicate edge".into()));
        }
        Ok(g)
    }

    pub fn nodes(&self) -> &[ModelNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[ModelEdge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Result<&ModelNode> {
        self.nodes
            .binary_search_by(|n| n.id.as_str().cmp(id))
            .map(|i| &self.nodes[i])
            .map_err(|_| Error::UnknownNode(id.to_string()))
    }

    pub fn edge(&self, source: &str, target: &str) -> Option<&ModelEdge> {
        self.edges
            .binary_search_by(|e| (e.source.as_str(), e.target.as_str()).cmp(&(source, target)))
            .ok()
            .map(|i| &self.edges[i])
    }

    /// Out-edges of `center`, ordered by target id.
    pub fn out_edges(&self, center: &str) -> Vec<&ModelEdge> {
        self.edges.iter().filter(|e| e.source == center).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphParams {
    pub theta_dist: f64,
    pub theta_iou: f64,
    /// Distance threshold inside the surface metric.
    pub theta: f64,
    pub samples_per_area: f64,
    pub voxel_resolution: usize,
    pub symmetry: SymmetryMode,
    /// Skip the FFD anchor fit and run nonrigid ICP directly.
    pub nricp_only: bool,
    pub fit: FfdFitParams,
    pub nricp: NricpParams,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            theta_dist: 1e-3,
            theta_iou: 0.25,
            theta: 1e-3,
            samples_per_area: 2000.0,
            voxel_resolution: 128,
            symmetry: SymmetryMode::MirrorX,
            nricp_only: false,
            fit: FfdFitParams::default(),
            nricp: NricpParams::default(),
        }
    }
}

/// Scores and gate decision for one ordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub source: String,
    pub target: String,
    pub s_dist: Option<f64>,
    pub s_iou: Option<f64>,
    pub accepted: bool,
    pub error: Option<String>,
}

/// Stored scores keep 12 significant digits so that they survive a decimal
/// round trip unchanged.
pub(crate) fn canonical_score(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Warps `source` onto `target` and scores the result.
pub fn correspond_pair(
    source: &ModelNode,
    target: &ModelNode,
    params: &GraphParams,
) -> Result<(Vec<Vec3>, f64, f64)> {
    let warped = if params.nricp_only {
        nonrigid_icp(&source.mesh, &target.mesh, &params.nricp, None)?.vertices
    } else {
        let phi = symmetry_operator(&source.lattice, params.symmetry);
        dense_correspond(
            source.as_input(),
            target.as_input(),
            &phi,
            &params.fit,
            &params.nricp,
        )?
        .warped
        .vertices
    };
    let (s_dist, s_iou) = score_pair(
        &source.mesh.with_vertices(warped.clone())?,
        &target.mesh,
        params,
    )?;
    Ok((warped, s_dist, s_iou))
}

/// `(s_dist, s_IoU)` of a warped mesh against its target, voxelized in the
/// union bounding box of the two.
pub fn score_pair(warped: &TriMesh, target: &TriMesh, params: &GraphParams) -> Result<(f64, f64)> {
    let s_dist = surface_distance(warped, target, params.theta, params.samples_per_area)?;
    let frame = VoxelFrame::enclosing(&[warped, target], params.voxel_resolution)?;
    let s_iou = voxel_iou(&voxelize(warped, &frame)?, &voxelize(target, &frame)?)?;
    Ok((canonical_score(s_dist), canonical_score(s_iou)))
}

/// Runs every ordered pair, keeping edges with `s_dist < θ_dist` and
/// `s_IoU > θ_IoU`. Failed pairs are reported and skipped.
pub fn build_graph(
    models: Vec<ModelNode>,
    params: &GraphParams,
) -> Result<(ModelGraph, Vec<PairReport>)> {
    if models.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 models, got {}",
            models.len()
        )));
    }
    if !(params.theta_dist > 0.0 && params.theta_iou > 0.0 && params.theta > 0.0) {
        return Err(Error::InvalidParam("thresholds must be positive".into()));
    }
    let graph = ModelGraph::new(models, Vec::new(), params.theta_dist, params.theta_iou)?;
    let nodes = graph.nodes();
    let pairs: Vec<(usize, usize)> = (0..nodes.len())
        .flat_map(|i| {
            (0..nodes.len())
                .filter(move |&j| j != i)
                .map(move |j| (i, j))
        })
        .collect();
    let results: Vec<_> = pairs
        .par_iter()
        .map(|&(i, j)| correspond_pair(&nodes[i], &nodes[j], params))
        .collect();

    let mut edges = Vec::new();
    let mut reports = Vec::with_capacity(pairs.len());
    for (&(i, j), res) in pairs.iter().zip(results) {
        let (source, target) = (nodes[i].id.clone(), nodes[j].id.clone());
        match res {
            Ok((warped, s_dist, s_iou)) => {
                let accepted = s_dist < params.theta_dist && s_iou > params.theta_iou;
                reports.push(PairReport {
                    source: source.clone(),
                    target: target.clone(),
                    s_dist: Some(s_dist),
                    s_iou: Some(s_iou),
                    accepted,
                    error: None,
                });
                if accepted {
                    edges.push(ModelEdge {
                        source,
                        target,
                        warped,
                        s_dist,
                        s_iou,
                    });
                }
            }
            Err(e) => {
                log::warn!("pair {source} -> {target} skipped: {e}");
                reports.push(PairReport {
                    source,
                    target,
                    s_dist: None,
                    s_iou: None,
                    accepted: false,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let ModelGraph { nodes, .. } = graph;
    Ok((
        ModelGraph::new(nodes, edges, params.theta_dist, params.theta_iou)?,
        reports,
    ))
}

/// `α_c V_c + Σ α_i V′_{c→i}` on the center's faces. A missing weight counts
/// as zero; every non-center weight needs an edge `c → i`.
pub fn linear_combine(
    graph: &ModelGraph,
    center: &str,
    weights: &BTreeMap<String, f64>,
) -> Result<TriMesh> {
    let c = graph.node(center)?;
    let mut verts: Vec<Vec3> = vec![Vec3::zeros(); c.mesh.num_vertices()];
    for (id, &a) in weights {
        if !a.is_finite() {
            return Err(Error::NonFinite(format!("weight of {id}")));
        }
        let src: &[Vec3] = if id == center {
            c.mesh.vertices()
        } else {
            &graph
                .edge(center, id)
                .ok_or_else(|| Error::MissingEdge {
                    source_id: center.to_string(),
                    target_id: id.clone(),
                })?
                .warped
        };
        for (v, s) in verts.iter_mut().zip(src) {
            *v += s * a;
        }
    }
    c.mesh.with_vertices(verts)
}
