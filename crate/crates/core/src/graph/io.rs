//! `graph.json` manifest plus OBJ/CSV sidecars next to it:
//!
//! ```text
//! graph.json
//! meshes/<id>.obj
//! anchors/<id>.csv
//! warps/<source>__<target>.obj
//! ```
//!
//! Scores are written as decimal strings with 12 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{canonical_score, ModelEdge, ModelGraph, ModelNode};
use crate::ffd::FfdLattice;
use crate::mesh::{load_anchors_3d, load_mesh, save_anchors_3d, save_mesh};
use crate::{Error, Result, Vec3};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    theta_dist: String,
    theta_iou: String,
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: String,
    mesh: String,
    anchors: String,
    lattice: LatticeRecord,
}

#[derive(Serialize, Deserialize)]
struct LatticeRecord {
    degrees: [usize; 3],
    origin: [f64; 3],
    axes: [[f64; 3]; 3],
    control_points: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    source: String,
    target: String,
    warped: String,
    s_dist: String,
    s_iou: String,
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn vec3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn score_text(x: f64) -> String {
    format!("{x:.11e}")
}

fn parse_score(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map(canonical_score)
        .map_err(|_| Error::Manifest(format!("bad {what} {s:?}")))
}

/// Writes the manifest at `path` and sidecars beside it.
pub fn save_graph(graph: &ModelGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    for sub in ["meshes", "anchors", "warps"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut nodes = Vec::new();
    for n in graph.nodes() {
        let mesh = format!("meshes/{}.obj", n.id());
        let anchors = format!("anchors/{}.csv", n.id());
        save_mesh(n.mesh(), dir.join(&mesh))?;
        save_anchors_3d(n.anchors(), dir.join(&anchors))?;
        let l = n.lattice();
        let ax = l.axes();
        nodes.push(NodeRecord {
            id: n.id().to_string(),
            mesh,
            anchors,
            lattice: LatticeRecord {
                degrees: l.degrees(),
                origin: arr(&l.origin()),
                axes: [arr(&ax[0]), arr(&ax[1]), arr(&ax[2])],
                control_points: l.control_points().iter().map(arr).collect(),
            },
        });
    }
    let mut edges = Vec::new();
    for e in graph.edges() {
        let warped = format!("warps/{}__{}.obj", e.source, e.target);
        let src = graph.node(&e.source)?;
        save_mesh(
            &src.mesh().with_vertices(e.warped.clone())?,
            dir.join(&warped),
        )?;
        edges.push(EdgeRecord {
            source: e.source.clone(),
            target: e.target.clone(),
            warped,
            s_dist: score_text(e.s_dist),
            s_iou: score_text(e.s_iou),
        });
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        theta_dist: score_text(graph.theta_dist),
        theta_iou: score_text(graph.theta_iou),
        nodes,
        edges,
    };
    let mut text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Manifest(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<ModelGraph> {
    let path = path.as_ref();
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(Error::Manifest(format!(
            "schema version {} (expected {SCHEMA_VERSION})",
            m.schema_version
        )));
    }
    let sidecar = |rel: &str| -> Result<PathBuf> {
        let p = dir.join(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::Manifest(format!("missing sidecar {}", p.display())))
        }
    };

    let mut nodes = Vec::new();
    for r in &m.nodes {
        let mesh = load_mesh(sidecar(&r.mesh)?)?;
        let anchors = load_anchors_3d(sidecar(&r.anchors)?)?;
        let l = &r.lattice;
        let lattice = FfdLattice::new(vec3(&l.origin), l.axes.each_ref().map(vec3), l.degrees)?
            .with_control_points(l.control_points.iter().map(vec3).collect())?;
        nodes.push(ModelNode::from_parts(&r.id, mesh, anchors, lattice)?);
    }
    let mut edges = Vec::new();
    for r in &m.edges {
        let warped = load_mesh(sidecar(&r.warped)?)?;
        edges.push(ModelEdge {
            source: r.source.clone(),
            target: r.target.clone(),
            warped: warped.vertices().to_vec(),
            s_dist: parse_score(&r.s_dist, "s_dist")?,
            s_iou: parse_score(&r.s_iou, "s_iou")?,
        });
    }
    ModelGraph::new(
        nodes,
        edges,
        parse_score(&m.theta_dist, "theta_dist")?,
        parse_score(&m.theta_iou, "theta_iou")?,
    )
}
