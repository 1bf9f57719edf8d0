//! Silhouette-driven refinement of the selected node: combination weights,
//! rotation and translation are optimized jointly against the 2D anchors and
//! a distance-map penalty on vertices projecting outside the silhouette.
//!
//! The selection-stage scale is folded into the model data, so the camera
//! used here has unit scale. The rotation is updated as `R ← R exp([ξ]×)` and
//! gradients in `ξ` are taken at `ξ = 0`.

use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix2x3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geom::{barycentric, TriangleGrid};
use crate::graph::ModelGraph;
use crate::mesh::{AnchorSet2D, AnchorSet3D, Silhouette, TriMesh};
use crate::metrics::{chamfer_map, ChamferMap};
use crate::optim::{descend_on, DescentOptions};
use crate::pose::{CameraPose, SelectionResult};
use crate::{Error, Result, Vec2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineParams {
    pub mu: f64,
    pub gamma: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Keep `R` and `t` at their initial values and optimize weights only.
    pub fix_pose: bool,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            mu: 0.1,
            gamma: 1e-2,
            max_iters: 300,
            tol: 1e-6,
            fix_pose: false,
        }
    }
}

/// Weights follow [`RefineProblem::ids`]: center first, then neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineState {
    pub alpha: Vec<f64>,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec2,
}

impl RefineState {
    /// `α_c = 1`, neighbors `0`, pose from `pose` (its scale is ignored).
    pub fn initial(pose: &CameraPose, num_bases: usize) -> Self {
        let mut alpha = vec![0.0; num_bases];
        alpha[0] = 1.0;
        Self {
            alpha,
            rotation: rotation_from_rows(&pose.rotation()),
            translation: pose.translation(),
        }
    }

    /// The 2×3 camera rotation.
    pub fn r(&self) -> Matrix2x3<f64> {
        self.rotation
            .to_rotation_matrix()
            .matrix()
            .fixed_rows::<2>(0)
            .into_owned()
    }

    /// `R exp([ξ]×)`, `α + dα`, `t + dt`.
    pub fn stepped(&self, d_alpha: &[f64], xi: &Vector3<f64>, dt: &Vec2) -> Self {
        Self {
            alpha: self.alpha.iter().zip(d_alpha).map(|(a, d)| a + d).collect(),
            rotation: self.rotation * UnitQuaternion::from_rotation_matrix(&rodrigues(xi)),
            translation: self.translation + dt,
        }
    }
}

/// Completes two orthonormal rows to a rotation.
pub fn rotation_from_rows(r: &Matrix2x3<f64>) -> UnitQuaternion<f64> {
    let a = r.row(0).transpose();
    let b = r.row(1).transpose();
    let m = nalgebra::Matrix3::from_rows(&[a.transpose(), b.transpose(), a.cross(&b).transpose()]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix(&m))
}

/// `exp([ξ]×)` in closed form.
pub fn rodrigues(xi: &Vector3<f64>) -> Rotation3<f64> {
    let theta = xi.norm();
    let k = xi.cross_matrix();
    let (a, b) = if theta < 1e-8 {
        (1.0 - theta * theta / 6.0, 0.5 - theta * theta / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    Rotation3::from_matrix_unchecked(nalgebra::Matrix3::identity() + k * a + k * k * b)
}

/// Model data and image evidence for one refinement.
#[derive(Debug, Clone)]
pub struct RefineProblem {
    ids: Vec<String>,
    /// Scaled vertices of each basis shape.
    bases: Vec<Vec<Vec3>>,
    /// Scaled visible anchors of each basis shape, in the order of `w`.
    anchors: Vec<Vec<Vec3>>,
    /// Every center anchor, scaled, on each basis shape.
    all_anchors: Vec<Vec<Vec3>>,
    anchor_ids: Vec<String>,
    w: Vec<Vec2>,
    faces: Vec<[usize; 3]>,
    chamfer: ChamferMap,
    scale: f64,
    pub mu: f64,
    pub gamma: f64,
}

impl RefineProblem {
    /// Bases are `center` and the targets of its out-edges. Anchors of the
    /// center are located on its surface by barycentric coordinates, and the
    /// same coordinates give them on every warped neighbor.
    pub fn new(
        graph: &ModelGraph,
        center: &str,
        scale: f64,
        w: &AnchorSet2D,
        sil: &Silhouette,
        mu: f64,
        gamma: f64,
    ) -> Result<Self> {
        if !(scale > 0.0 && mu >= 0.0 && gamma >= 0.0) {
            return Err(Error::InvalidParam(
                "scale must be > 0, mu and gamma >= 0".into(),
            ));
        }
        let node = graph.node(center)?;
        let mesh = node.mesh();
        let mut ids = vec![center.to_string()];
        let mut raw: Vec<&[Vec3]> = vec![mesh.vertices()];
        for e in graph.out_edges(center) {
            ids.push(e.target.clone());
            raw.push(&e.warped);
        }
        let pairs = w.visible_pairs(node.anchors())?;
        let grid = TriangleGrid::new(mesh)
            .ok_or_else(|| Error::InvalidMesh("center mesh has no faces".into()))?;
        let embed: Vec<([usize; 3], [f64; 3])> = node
            .anchors()
            .points()
            .iter()
            .map(|p| {
                let sp = grid.closest(p);
                let f = mesh.faces()[sp.face];
                let [a, b, c] = mesh.triangle(sp.face);
                (f, barycentric(&sp.point, &a, &b, &c))
            })
            .collect();
        let bases: Vec<Vec<Vec3>> = raw
            .iter()
            .map(|vs| vs.iter().map(|v| v * scale).collect())
            .collect();
        let all_anchors: Vec<Vec<Vec3>> = bases
            .iter()
            .map(|vs| {
                embed
                    .iter()
                    .map(|(f, b)| vs[f[0]] * b[0] + vs[f[1]] * b[1] + vs[f[2]] * b[2])
                    .collect()
            })
            .collect();
        let anchors = all_anchors
            .iter()
            .map(|pts| pairs.iter().map(|&(j, _)| pts[j]).collect())
            .collect();
        Ok(Self {
            ids,
            bases,
            anchors,
            all_anchors,
            anchor_ids: node.anchors().ids().to_vec(),
            w: pairs.iter().map(|&(_, p)| p).collect(),
            faces: mesh.faces().to_vec(),
            chamfer: chamfer_map(sil),
            scale,
            mu,
            gamma,
        })
    }

    /// Center id followed by neighbor ids.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn chamfer(&self) -> &ChamferMap {
        &self.chamfer
    }

    fn combine(pts: &[Vec<Vec3>], alpha: &[f64], i: usize) -> Vec3 {
        pts.iter().zip(alpha).map(|(b, a)| b[i] * *a).sum()
    }

    /// Combined scaled vertices for `alpha`.
    pub fn vertices(&self, alpha: &[f64]) -> Vec<Vec3> {
        (0..self.bases[0].len())
            .map(|i| Self::combine(&self.bases, alpha, i))
            .collect()
    }

    /// Combined mesh in node units, to be viewed with scale `s`.
    pub fn mesh(&self, alpha: &[f64]) -> Result<TriMesh> {
        let v = self
            .vertices(alpha)
            .into_iter()
            .map(|p| p / self.scale)
            .collect();
        TriMesh::new(v, self.faces.clone())
    }

    /// Every center anchor carried along by the combination, in node units.
    pub fn anchors(&self, alpha: &[f64]) -> Result<AnchorSet3D> {
        let pts = (0..self.anchor_ids.len())
            .map(|l| Self::combine(&self.all_anchors, alpha, l) / self.scale)
            .collect();
        AnchorSet3D::new(self.anchor_ids.clone(), pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub total: f64,
    pub reprojection: f64,
    pub silhouette: f64,
    pub regularizer: f64,
}

/// `½Σ‖w_l − (R Y_l + t)‖² + μ Σ_v C(R U_v + t) + (γ/2) Σ_{i≠c} α_i²`.
pub fn refine_objective(prob: &RefineProblem, st: &RefineState) -> ObjectiveTerms {
    let r = st.r();
    let t = st.translation;
    let reprojection = 0.5
        * (0..prob.w.len())
            .map(|l| {
                (prob.w[l] - (r * RefineProblem::combine(&prob.anchors, &st.alpha, l) + t))
                    .norm_squared()
            })
            .sum::<f64>();
    let silhouette = if prob.mu > 0.0 {
        prob.mu
            * prob
                .vertices(&st.alpha)
                .iter()
                .map(|u| prob.chamfer.sample(r * u + t))
                .sum::<f64>()
    } else {
        0.0
    };
    let regularizer = 0.5 * prob.gamma * st.alpha[1..].iter().map(|a| a * a).sum::<f64>();
    ObjectiveTerms {
        total: reprojection + silhouette + regularizer,
        reprojection,
        silhouette,
        regularizer,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub alpha: DVector<f64>,
    /// At `ξ = 0`, for `R ← R exp([ξ]×)`.
    pub xi: Vector3<f64>,
    pub t: Vec2,
}

/// Exact gradients of [`refine_objective`], with the distance-map gradient
/// taken from its bilinear interpolant.
pub fn analytic_gradients(prob: &RefineProblem, st: &RefineState) -> Gradients {
    let r = st.r();
    let rt = r.transpose();
    let t = st.translation;
    let k = prob.num_bases();
    let mut ga = DVector::zeros(k);
    let mut gxi = Vector3::zeros();
    let mut gt = Vec2::zeros();

    for l in 0..prob.w.len() {
        let y = RefineProblem::combine(&prob.anchors, &st.alpha, l);
        let res = prob.w[l] - (r * y + t);
        let back = rt * res;
        for b in 0..k {
            ga[b] -= back.dot(&prob.anchors[b][l]);
        }
        gxi -= y.cross(&back);
        gt -= res;
    }
    if prob.mu > 0.0 {
        for (i, u) in prob.vertices(&st.alpha).iter().enumerate() {
            let (_, g) = prob.chamfer.sample_with_gradient(r * u + t);
            let back = rt * g * prob.mu;
            for b in 0..k {
                ga[b] += back.dot(&prob.bases[b][i]);
            }
            gxi += u.cross(&back);
            gt += g * prob.mu;
        }
    }
    for b in 1..k {
        ga[b] += prob.gamma * st.alpha[b];
    }
    Gradients {
        alpha: ga,
        xi: gxi,
        t: gt,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub initial: ObjectiveTerms,
    pub last: ObjectiveTerms,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct RefineOutput {
    pub state: RefineState,
    /// Weights by node id.
    pub weights: BTreeMap<String, f64>,
    /// Combination in node units; view it with [`RefineOutput::pose`].
    pub mesh: TriMesh,
    pub anchors: AnchorSet3D,
    /// Final rotation and translation with the selection-stage scale.
    pub pose: CameraPose,
    pub report: RefineReport,
}

/// Steepest descent over `(α, ξ, t)` from the selection result, `α_c = 1` and
/// all other weights zero. With no out-edges only the pose moves.
pub fn refine(
    selection: &SelectionResult,
    graph: &ModelGraph,
    w: &AnchorSet2D,
    sil: &Silhouette,
    params: &RefineParams,
) -> Result<RefineOutput> {
    let prob = RefineProblem::new(
        graph,
        &selection.node_id,
        selection.pose.scale(),
        w,
        sil,
        params.mu,
        params.gamma,
    )?;
    let init = RefineState::initial(&selection.pose, prob.num_bases());
    refine_from(&prob, init, selection.pose.scale(), params)
}

/// Runs the descent for an explicit problem and start state. `scale` is
/// reported in the output pose only.
pub fn refine_from(
    prob: &RefineProblem,
    init: RefineState,
    scale: f64,
    params: &RefineParams,
) -> Result<RefineOutput> {
    let k = prob.num_bases();
    let alpha_free = k > 1;
    if !alpha_free && params.fix_pose {
        return Err(Error::InvalidParam(
            "nothing to optimize: no neighbors and pose fixed".into(),
        ));
    }
    if !alpha_free {
        log::warn!("node {} has no out-edges; refining pose only", prob.ids[0]);
    }
    // translation is optimized in units of the model's RMS radius so that all
    // blocks of the problem have comparable curvature
    let lever = (prob.bases[0].iter().map(|v| v.norm_squared()).sum::<f64>()
        / prob.bases[0].len() as f64)
        .sqrt()
        .max(1e-12);

    let eval = |st: &RefineState| {
        let f = refine_objective(prob, st).total;
        let g = analytic_gradients(prob, st);
        let mut v = DVector::zeros(k + 5);
        if alpha_free {
            v.rows_mut(0, k).copy_from(&g.alpha);
        }
        if !params.fix_pose {
            v.fixed_rows_mut::<3>(k).copy_from(&g.xi);
            v.fixed_rows_mut::<2>(k + 3).copy_from(&(g.t * lever));
        }
        (f, v)
    };
    let retract = |st: &RefineState, d: &DVector<f64>| {
        let xi = Vector3::new(d[k], d[k + 1], d[k + 2]);
        let dt = Vec2::new(d[k + 3], d[k + 4]) * lever;
        st.stepped(&d.as_slice()[..k], &xi, &dt)
    };
    let opts = DescentOptions {
        max_iters: params.max_iters,
        grad_tol: params.tol,
        ..DescentOptions::default()
    };
    let initial = refine_objective(prob, &init);
    let res = descend_on(init, eval, retract, &opts)?;
    let state = res.x;
    let last = refine_objective(prob, &state);
    let pose = CameraPose::new(state.r(), scale, state.translation)?;
    Ok(RefineOutput {
        weights: prob
            .ids
            .iter()
            .cloned()
            .zip(state.alpha.iter().copied())
            .collect(),
        mesh: prob.mesh(&state.alpha)?,
        anchors: prob.anchors(&state.alpha)?,
        pose,
        report: RefineReport {
            initial,
            last,
            iterations: res.iterations,
            converged: res.converged,
            grad_norm: res.grad_norm,
        },
        state,
    })
}
