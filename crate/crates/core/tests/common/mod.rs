#![allow(dead_code)]

use ffd_recon::ffd::{symmetry_operator, SymmetryMode};
use ffd_recon::mesh::{synth_shape, ShapeFamily};
use ffd_recon::pose::render_silhouette;
use ffd_recon::{AnchorSet2D, CameraPose, ModelNode, Silhouette, TriMesh, Vec2};
use nalgebra::{DVector, Matrix2x3, Rotation3, Unit, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_pose(rng: &mut ChaCha8Rng, scale: f64, center: Vec2) -> CameraPose {
    let axis = Unit::new_normalize(Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ));
    let r = Rotation3::from_axis_angle(&axis, rng.gen_range(0.2..1.2));
    let rows: Matrix2x3<f64> = r.matrix().fixed_rows::<2>(0).into_owned();
    CameraPose::new(rows, scale, center).unwrap()
}

pub fn box_node(id: &str, dims: [f64; 3], degrees: [usize; 3]) -> ModelNode {
    let (m, a) = synth_shape(ShapeFamily::Box, &dims, 4).unwrap();
    ModelNode::new(id, &m, &a, degrees, 0.05).unwrap()
}

/// Image evidence of a node deformed by a random mirror-symmetric
/// displacement `Φ q` and seen from a random camera.
pub struct Instance {
    pub pose: CameraPose,
    pub mesh: TriMesh,
    pub anchors: AnchorSet2D,
    pub silhouette: Silhouette,
}

pub fn deformed_instance(
    node: &ModelNode,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
    size: usize,
) -> Instance {
    let lat = node.lattice();
    let phi = symmetry_operator(lat, SymmetryMode::MirrorX);
    let q = if amplitude > 0.0 {
        DVector::from_fn(phi.dim(), |_, _| rng.gen_range(-amplitude..amplitude))
    } else {
        DVector::zeros(phi.dim())
    };
    let p = lat.vectorized() + phi.apply(&q);
    let verts = lat
        .bernstein_basis(node.mesh().vertices())
        .unwrap()
        .deform_vectorized(&p)
        .unwrap();
    let anchors3 = lat
        .bernstein_basis(node.anchors().points())
        .unwrap()
        .deform_vectorized(&p)
        .unwrap();
    let c = size as f64 / 2.0;
    let center = Vec2::new(c + rng.gen_range(-3.0..3.0), c + rng.gen_range(-3.0..3.0));
    let pose = random_pose(rng, 0.6 * size as f64, center);
    let pts = anchors3.iter().map(|x| pose.project(x)).collect();
    let anchors = AnchorSet2D::new(
        node.anchors().ids().to_vec(),
        pts,
        vec![true; anchors3.len()],
    )
    .unwrap();
    let mesh = node.mesh().with_vertices(verts).unwrap();
    let silhouette = render_silhouette(&mesh, &pose, size, size).unwrap();
    Instance {
        pose,
        mesh,
        anchors,
        silhouette,
    }
}
