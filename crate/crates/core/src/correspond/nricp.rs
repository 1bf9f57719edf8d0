//! Optimal-step nonrigid ICP: one affine transform per source vertex, with a
//! stiffness term on the difference of transforms across mesh edges.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::Matrix4x3;
use serde::{Deserialize, Serialize};

use crate::geom::TriangleGrid;
use crate::mesh::{AnchorSet3D, TriMesh};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NricpParams {
    /// Strictly decreasing stiffness weights, one outer stage each.
    pub stiffness: Vec<f64>,
    /// Weight of the landmark term; `0` disables it.
    pub landmark_weight: f64,
    /// Closest-point/solve rounds per stiffness value.
    pub max_iters: usize,
    /// Stage stops once the Frobenius change of all transforms drops below this.
    pub tol: f64,
}

impl Default for NricpParams {
    fn default() -> Self {
        Self {
            stiffness: vec![50.0, 20.0, 5.0, 2.0, 0.8, 0.5, 0.35, 0.2],
            landmark_weight: 0.0,
            max_iters: 30,
            tol: 1e-6,
        }
    }
}

impl NricpParams {
    pub fn validate(&self) -> Result<()> {
        if self.stiffness.is_empty() || self.stiffness.iter().any(|&a| !(a > 0.0 && a.is_finite()))
        {
            return Err(Error::InvalidParam(
                "stiffness schedule must be non-empty and positive".into(),
            ));
        }
        if self.stiffness.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParam(
                "stiffness schedule must be strictly decreasing".into(),
            ));
        }
        if !(self.landmark_weight >= 0.0) || !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidParam(
                "landmark weight, tol or max_iters out of range".into(),
            ));
        }
        Ok(())
    }
}

/// Source topology carried onto the target shape.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedModel {
    pub vertices: Vec<Vec3>,
    pub source_id: String,
    pub target_id: String,
    /// False when some stage hit `max_iters` before the change fell below
    /// `tol`; the vertices are then the last iterate.
    pub converged: bool,
}

/// Warps `source` onto `target`. `landmarks` pairs source-side anchors (each
/// snapped to its nearest source vertex) with target anchors by id.
pub fn nonrigid_icp(
    source: &TriMesh,
    target: &TriMesh,
    params: &NricpParams,
    landmarks: Option<(&AnchorSet3D, &AnchorSet3D)>,
) -> Result<WarpedModel> {
    params.validate()?;
    let grid = TriangleGrid::new(target)
        .ok_or_else(|| Error::InvalidMesh("nonrigid ICP target has no faces".into()))?;
    let verts = source.vertices();
    let n = verts.len();
    let edges = source.edges();

    let lm: Vec<(usize, Vec3)> = match landmarks {
        Some((src, dst)) if params.landmark_weight > 0.0 => {
            let order = dst.match_ids(src)?;
            src.points()
                .iter()
                .zip(order)
                .map(|(p, j)| (nearest_vertex(verts, p), dst.points()[j]))
                .collect()
        }
        _ => Vec::new(),
    };
    let beta2 = params.landmark_weight * params.landmark_weight;

    let hom = |v: &Vec3| [v.x, v.y, v.z, 1.0];
    let mut x: Vec<Matrix4x3<f64>> = vec![Matrix4x3::identity(); n];
    let mut converged = true;

    for &alpha in &params.stiffness {
        let a2 = alpha * alpha;
        let mut stage_done = false;
        for _ in 0..params.max_iters {
            let targets: Vec<Vec3> = verts
                .iter()
                .zip(&x)
                .map(|(v, xi)| grid.closest(&transform(xi, v)).point)
                .collect();

            let mut trip = Vec::with_capacity(16 * n + 8 * 4 * edges.len());
            let mut rhs = Mat::<f64>::zeros(4 * n, 3);
            for &(i, j) in &edges {
                for d in 0..4 {
                    trip.push(Triplet::new(4 * i + d, 4 * i + d, a2));
                    trip.push(Triplet::new(4 * j + d, 4 * j + d, a2));
                    trip.push(Triplet::new(4 * i + d, 4 * j + d, -a2));
                    trip.push(Triplet::new(4 * j + d, 4 * i + d, -a2));
                }
            }
            let mut data =
                |i: usize, u: &Vec3, w2: f64, trip: &mut Vec<Triplet<usize, usize, f64>>| {
                    let h = hom(&verts[i]);
                    for r in 0..4 {
                        for c in 0..4 {
                            trip.push(Triplet::new(4 * i + r, 4 * i + c, w2 * h[r] * h[c]));
                        }
                        for c in 0..3 {
                            rhs[(4 * i + r, c)] += w2 * h[r] * u[c];
                        }
                    }
                };
            for (i, u) in targets.iter().enumerate() {
                data(i, u, 1.0, &mut trip);
            }
            for (i, u) in &lm {
                data(*i, u, beta2, &mut trip);
            }

            let a = SparseColMat::<usize, f64>::try_new_from_triplets(4 * n, 4 * n, &trip)
                .map_err(|e| Error::InvalidParam(format!("normal system assembly: {e:?}")))?;
            let llt = a
                .sp_cholesky(faer::Side::Lower)
                .map_err(|_| Error::SingularSystem { stiffness: alpha })?;
            let sol = llt.solve(&rhs);
            if !(0..4 * n).all(|r| (0..3).all(|c| sol[(r, c)].is_finite())) {
                return Err(Error::SingularSystem { stiffness: alpha });
            }

            let mut change = 0.0_f64;
            for (i, xi) in x.iter_mut().enumerate() {
                let next = Matrix4x3::from_fn(|r, c| sol[(4 * i + r, c)]);
                change += (next - *xi).norm_squared();
                *xi = next;
            }
            if change.sqrt() < params.tol {
                stage_done = true;
                break;
            }
        }
        converged &= stage_done;
    }

    Ok(WarpedModel {
        vertices: verts
            .iter()
            .zip(&x)
            .map(|(v, xi)| transform(xi, v))
            .collect(),
        source_id: String::new(),
        target_id: String::new(),
        converged,
    })
}

fn transform(x: &Matrix4x3<f64>, v: &Vec3) -> Vec3 {
    let h = nalgebra::RowVector4::new(v.x, v.y, v.z, 1.0);
    (h * x).transpose()
}

fn nearest_vertex(verts: &[Vec3], p: &Vec3) -> usize {
    verts
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - p)
                .norm_squared()
                .total_cmp(&(b.1 - p).norm_squared())
        })
        .map(|(i, _)| i)
        .unwrap_or(0)
}
