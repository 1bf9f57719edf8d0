use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ffd_recon::correspond::{nonrigid_icp, NricpParams};
use ffd_recon::ffd::{symmetry_operator, SymmetryMode};
use ffd_recon::mesh::{synth_shape, ShapeFamily};
use ffd_recon::metrics::{chamfer_map, voxelize, VoxelFrame};
use ffd_recon::pose::{admm_ffd_pnp, init_pose, render_silhouette, AdmmParams, AdmmProblem};
use ffd_recon::{AnchorSet2D, CameraPose, ModelNode, Vec2};
use nalgebra::Matrix2x3;

/// Fixed oblique camera for a 128 px image.
fn pose() -> CameraPose {
    let (s, c) = 0.6f64.sin_cos();
    CameraPose::new(
        Matrix2x3::new(c, 0.0, s, 0.0, 1.0, 0.0),
        76.8,
        Vec2::new(64.0, 64.0),
    )
    .unwrap()
}

fn node(degree: usize) -> ModelNode {
    let (m, a) = synth_shape(ShapeFamily::Ellipsoid, &[0.5, 0.4, 0.3], 12).unwrap();
    ModelNode::new("e", &m, &a, [degree; 3], 0.05).unwrap()
}

fn ffd_basis(c: &mut Criterion) {
    let n = node(3);
    c.bench_function("bernstein_basis/ellipsoid_res12_deg3", |b| {
        b.iter(|| {
            n.lattice()
                .bernstein_basis(black_box(n.mesh().vertices()))
                .unwrap()
        })
    });
}

fn voxel(c: &mut Criterion) {
    let n = node(3);
    let frame = VoxelFrame::enclosing(&[n.mesh()], 128).unwrap();
    c.bench_function("voxelize/ellipsoid_128", |b| {
        b.iter(|| voxelize(black_box(n.mesh()), &frame).unwrap())
    });
}

fn chamfer(c: &mut Criterion) {
    let n = node(3);
    let sil = render_silhouette(n.mesh(), &pose(), 128, 128).unwrap();
    c.bench_function("chamfer_map/128", |b| {
        b.iter(|| chamfer_map(black_box(&sil)))
    });
}

fn admm(c: &mut Criterion) {
    let n = node(3);
    let p = pose();
    let pts = n.anchors().points().iter().map(|x| p.project(x)).collect();
    let w = AnchorSet2D::new(
        n.anchors().ids().to_vec(),
        pts,
        vec![true; n.anchors().len()],
    )
    .unwrap();
    let phi = symmetry_operator(n.lattice(), SymmetryMode::MirrorX);
    let prob = AdmmProblem::new(n.lattice(), n.anchors(), &w, phi, 1e-2).unwrap();
    let init = init_pose(n.anchors(), &w).unwrap();
    c.bench_function("admm_ffd_pnp/ellipsoid_deg3", |b| {
        b.iter(|| admm_ffd_pnp(&prob, black_box(&init), &AdmmParams::default()).unwrap())
    });
}

fn nricp(c: &mut Criterion) {
    let (a, _) = synth_shape(ShapeFamily::Ellipsoid, &[0.5, 0.4, 0.3], 8).unwrap();
    let (b, _) = synth_shape(ShapeFamily::Ellipsoid, &[0.55, 0.35, 0.3], 8).unwrap();
    let mut g = c.benchmark_group("nonrigid_icp");
    g.sample_size(10);
    g.bench_function("ellipsoid_res8", |bn| {
        bn.iter(|| nonrigid_icp(black_box(&a), &b, &NricpParams::default(), None).unwrap())
    });
    g.finish();
}

criterion_group!(benches, ffd_basis, voxel, chamfer, admm, nricp);
criterion_main!(benches);
