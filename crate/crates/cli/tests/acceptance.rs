//! Acceptance criteria 1 to 8. Every criterion runs in sequence inside one
//! test so that its wall-clock budget is measured without other tests
//! competing for the CPU, and prints exactly one PASS or FAIL line.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ffd_recon::correspond::{dense_correspond, FfdFitParams, NricpParams};
use ffd_recon::ffd::{symmetry_operator, SymmetryMode};
use ffd_recon::graph::{correspond_pair, linear_combine, load_graph, GraphParams};
use ffd_recon::mesh::{save_anchors_2d, save_mesh, save_silhouette, synth_shape, ShapeFamily};
use ffd_recon::metrics::{chamfer_map, surface_distance, voxel_iou, voxelize, VoxelFrame};
use ffd_recon::pose::{
    fit_node, render_silhouette, update_dp, update_m, update_t, update_z, AdmmParams, AdmmProblem,
    AdmmState,
};
use ffd_recon::refine::{analytic_gradients, refine_objective, RefineProblem, RefineState};
use ffd_recon::{
    AnchorSet2D, AnchorSet3D, CameraPose, FfdLattice, ModelEdge, ModelGraph, ModelNode, Silhouette,
    TriMesh, Vec2, Vec3,
};
use ffd_recon_cli::commands::{self, write_json, EvalReport};
use ffd_recon_cli::PipelineConfig;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x3, Matrix3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// shared fixtures

fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Rotation3<f64> {
    let axis = Unit::new_normalize(Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ));
    Rotation3::from_axis_angle(&axis, rng.gen_range(0.0..max_angle))
}

fn random_pose(rng: &mut ChaCha8Rng, size: usize) -> CameraPose {
    let rows: Matrix2x3<f64> = random_rotation(rng, 1.2)
        .matrix()
        .fixed_rows::<2>(0)
        .into_owned();
    let c = size as f64 / 2.0;
    let t = Vec2::new(c + rng.gen_range(-3.0..3.0), c + rng.gen_range(-3.0..3.0));
    CameraPose::new(rows, 0.6 * size as f64, t).unwrap()
}

fn node(id: &str, family: ShapeFamily, params: &[f64], res: usize, degree: usize) -> ModelNode {
    let (m, a) = synth_shape(family, params, res).unwrap();
    ModelNode::new(id, &m, &a, [degree; 3], 0.05).unwrap()
}

/// Anchors and silhouette of `node` deformed by a mirror-symmetric `Φ q`.
struct Instance {
    anchors: AnchorSet2D,
    silhouette: Silhouette,
}

fn deformed_instance(
    node: &ModelNode,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
    size: usize,
) -> Instance {
    let lat = node.lattice();
    let phi = symmetry_operator(lat, SymmetryMode::MirrorX);
    let q = DVector::from_fn(phi.dim(), |_, _| rng.gen_range(-amplitude..amplitude));
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
    let pose = random_pose(rng, size);
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
        anchors,
        silhouette,
    }
}

fn normalized(m: &TriMesh) -> TriMesh {
    m.transformed(&m.normalization().unwrap())
}

// ---------------------------------------------------------------------------
// 1. FFD

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn bern(n: usize, i: usize, x: f64) -> f64 {
    binomial(n, i) * x.powi(i as i32) * (1.0 - x).powi((n - i) as i32)
}

fn random_lattice(rng: &mut ChaCha8Rng) -> FfdLattice {
    let rot = random_rotation(rng, std::f64::consts::PI);
    let origin = Vec3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
    let axes = [0, 1, 2].map(|c| rot.matrix().column(c) * rng.gen_range(0.3..3.0));
    let degrees = [0; 3].map(|_| rng.gen_range(1..=4));
    FfdLattice::new(origin, axes, degrees).unwrap()
}

/// World point at lattice coordinates `stu`.
fn at(lat: &FfdLattice, stu: &Vec3) -> Vec3 {
    let [s, t, u] = lat.axes();
    lat.origin() + s * stu.x + t * stu.y + u * stu.z
}

/// Trivariate Bernstein sum evaluated directly, with lattice coordinates
/// recovered by the triple-product formula.
fn triple_sum(lat: &FfdLattice, p: &Vec3) -> Vec3 {
    let [sa, ta, ua] = lat.axes();
    let d = p - lat.origin();
    let s = ta.cross(&ua).dot(&d) / ta.cross(&ua).dot(&sa);
    let t = sa.cross(&ua).dot(&d) / sa.cross(&ua).dot(&ta);
    let u = sa.cross(&ta).dot(&d) / sa.cross(&ta).dot(&ua);
    let [l, m, n] = lat.degrees();
    let mut acc = Vec3::zeros();
    for i in 0..=l {
        for j in 0..=m {
            for k in 0..=n {
                acc += lat.control_points()[lat.index(i, j, k)]
                    * (bern(l, i, s) * bern(m, j, t) * bern(n, k, u));
            }
        }
    }
    acc
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    let lat = random_lattice(&mut rng);
    let pts: Vec<Vec3> = (0..100_000)
        .map(|_| at(&lat, &Vec3::from_fn(|_, _| rng.gen_range(0.0..1.0))))
        .collect();
    let basis = lat.bernstein_basis(&pts).unwrap();
    let pou = basis
        .matrix()
        .row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);

    let mut identity = 0.0f64;
    let mut affine = 0.0f64;
    let mut matrix_vs_sum = 0.0f64;
    for _ in 0..100 {
        let lat = random_lattice(&mut rng);
        let pts: Vec<Vec3> = (0..50)
            .map(|_| at(&lat, &Vec3::from_fn(|_, _| rng.gen_range(0.0..1.0))))
            .collect();
        let b = lat.bernstein_basis(&pts).unwrap();
        let rest = b.deform(lat.control_points()).unwrap();
        identity = pts
            .iter()
            .zip(&rest)
            .map(|(a, b)| (a - b).amax())
            .fold(identity, f64::max);

        let a = Matrix3::from_fn(|_, _| rng.gen_range(-1.5..1.5));
        let c = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let moved: Vec<Vec3> = lat.control_points().iter().map(|p| a * p + c).collect();
        let out = b.deform(&moved).unwrap();
        affine = pts
            .iter()
            .zip(&out)
            .map(|(p, o)| (a * p + c - o).amax())
            .fold(affine, f64::max);

        let jitter: Vec<Vec3> = lat
            .control_points()
            .iter()
            .map(|p| p + Vec3::from_fn(|_, _| rng.gen_range(-0.3..0.3)))
            .collect();
        let lat = lat.with_control_points(jitter).unwrap();
        let ours = lat
            .bernstein_basis(&pts)
            .unwrap()
            .deform(lat.control_points())
            .unwrap();
        matrix_vs_sum = pts
            .iter()
            .zip(&ours)
            .map(|(p, o)| (triple_sum(&lat, p) - o).amax())
            .fold(matrix_vs_sum, f64::max);
    }
    check(
        pou < 1e-12 && identity < 1e-9 && affine < 1e-9 && matrix_vs_sum < 1e-12,
        format!(
            "partition {pou:.1e}, identity {identity:.1e}, affine {affine:.1e}, matrix vs sum {matrix_vs_sum:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. ADMM subproblems

/// Conjugate gradients driven only by a gradient oracle. Each restricted
/// Lagrangian is quadratic, so Hessian-vector products come from gradient
/// differences and `n` steps reach the minimizer up to rounding.
fn cg_minimize(x0: DVector<f64>, grad: impl Fn(&DVector<f64>) -> DVector<f64>) -> DVector<f64> {
    let n = x0.len();
    let mut x = x0;
    let mut g = grad(&x);
    let stop = 1e-14 * (1.0 + g.norm());
    let mut d = -&g;
    for _ in 0..3 * n {
        if g.norm() <= stop {
            break;
        }
        let len = d.norm();
        let hd = (grad(&(&x + &d / len)) - &g) * len;
        let curv = d.dot(&hd);
        if !(curv > 0.0) {
            break;
        }
        x += &d * (-g.dot(&d) / curv);
        let next = grad(&x);
        let beta = (next.dot(&next) / g.dot(&g)).min(1e3);
        d = -&next + d * beta;
        g = next;
    }
    x
}

fn rand_mat(rng: &mut ChaCha8Rng) -> Matrix2x3<f64> {
    Matrix2x3::from_fn(|_, _| rng.gen_range(-2.0..2.0))
}

fn random_case(
    rng: &mut ChaCha8Rng,
    base: &ModelNode,
    mode: SymmetryMode,
    gamma: f64,
) -> (AdmmProblem, AdmmState) {
    let inst = deformed_instance(base, rng, 0.03, 64);
    let phi = symmetry_operator(base.lattice(), mode);
    let prob = AdmmProblem::new(base.lattice(), base.anchors(), &inst.anchors, phi, gamma).unwrap();
    let dim = prob.phi.dim();
    let st = AdmmState {
        m: rand_mat(rng),
        z: rand_mat(rng),
        lambda: rand_mat(rng),
        dp: DVector::from_fn(dim, |_, _| rng.gen_range(-0.05..0.05)),
        t: Vec2::new(rng.gen_range(0.0..64.0), rng.gen_range(0.0..64.0)),
        rho: rng.gen_range(0.5..2.0),
    };
    (prob, st)
}

/// The augmented Lagrangian, written out term by term.
fn lagrangian(prob: &AdmmProblem, st: &AdmmState) -> f64 {
    let s = prob.deformed_anchors(&st.dp);
    let data: f64 = (0..prob.w.ncols())
        .map(|l| (prob.w.column(l) - st.z * s.column(l) - st.t).norm_squared())
        .sum();
    let d = prob.phi.apply(&st.dp);
    0.5 * data
        + 0.5 * prob.gamma * d.norm_squared()
        + st.lambda.component_mul(&(st.m - st.z)).sum()
        + 0.5 * st.rho * (st.m - st.z).norm_squared()
}

/// Minimizes `‖A − sR‖²` over scaled rotations by a grid over rotation
/// vectors refined with pattern search; for fixed `R` the best scale is
/// `⟨A, R⟩ / 2`.
fn brute_force_sr(a: &Matrix2x3<f64>) -> Matrix2x3<f64> {
    let cost = |v: &Vector3<f64>| {
        let r: Matrix2x3<f64> = Rotation3::new(*v).matrix().fixed_rows::<2>(0).into_owned();
        let s = (a.component_mul(&r).sum() / 2.0).max(0.0);
        ((a - r * s).norm_squared(), r * s)
    };
    let pi = std::f64::consts::PI;
    let n = 12;
    let mut best = Vector3::zeros();
    let mut bc = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = Vector3::new(i as f64, j as f64, k as f64) * (2.0 * pi / n as f64)
                    - Vector3::repeat(pi);
                let c = cost(&v).0;
                if c < bc {
                    bc = c;
                    best = v;
                }
            }
        }
    }
    let mut h = 0.3;
    while h > 1e-12 {
        let mut improved = false;
        for d in 0..3 {
            for sgn in [-1.0, 1.0] {
                let mut v = best;
                v[d] += sgn * h;
                let c = cost(&v).0;
                if c < bc {
                    bc = c;
                    best = v;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    cost(&best).1
}

/// Guards the oracle's hand-written gradients: no random probe around `x`
/// may lower the Lagrangian itself.
fn is_local_min(
    prob: &AdmmProblem,
    st: &AdmmState,
    set: impl Fn(&mut AdmmState, &DVector<f64>),
    x: DVector<f64>,
) -> bool {
    let f = |v: &DVector<f64>| {
        let mut trial = st.clone();
        set(&mut trial, v);
        lagrangian(prob, &trial)
    };
    let f0 = f(&x);
    let mut rng = ChaCha8Rng::seed_from_u64(x.len() as u64);
    (0..20).all(|_| {
        let dir = DVector::from_fn(x.len(), |_, _| rng.gen_range(-1e-3..1e-3));
        f(&(&x + &dir)) >= f0 - 1e-12 * f0.abs().max(1.0)
    })
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let base = node("n", ShapeFamily::Box, &[1.0, 0.7, 0.5], 4, 2);
    let (mut em, mut ez, mut edp, mut et) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut at_minimum = true;
    for i in 0..50 {
        let mode = if i % 2 == 0 {
            SymmetryMode::MirrorX
        } else {
            SymmetryMode::Identity
        };
        let (prob, st) = random_case(&mut rng, &base, mode, 0.5);
        let s = prob.deformed_anchors(&st.dp);

        em = em.max((update_m(&st) - brute_force_sr(&(st.z - st.lambda / st.rho))).amax());

        let z_grad = |v: &DVector<f64>| {
            let z = Matrix2x3::from_column_slice(v.as_slice());
            let mut g = -(st.lambda + (st.m - z) * st.rho);
            for l in 0..prob.w.ncols() {
                g -= (prob.w.column(l) - z * s.column(l) - st.t) * s.column(l).transpose();
            }
            DVector::from_column_slice(g.as_slice())
        };
        let z = Matrix2x3::from_column_slice(
            cg_minimize(DVector::from_column_slice(st.z.as_slice()), z_grad).as_slice(),
        );
        ez = ez.max((update_z(&st, &prob) - z).amax());
        at_minimum &= is_local_min(
            &prob,
            &st,
            |t, v| t.z = Matrix2x3::from_column_slice(v.as_slice()),
            DVector::from_column_slice(z.as_slice()),
        );

        // data term of Δp as a dense linear map, assembled from the anchor
        // basis rows and the current Z
        let nl = prob.w.ncols();
        let mut k = DMatrix::zeros(2 * nl, prob.a.ncols());
        for l in 0..nl {
            for c in 0..prob.a.ncols() {
                let v = st.z * prob.a.view((3 * l, c), (3, 1));
                k[(2 * l, c)] = v[0];
                k[(2 * l + 1, c)] = v[1];
            }
        }
        let phi = prob.phi.to_dense();
        let dp_grad = |v: &DVector<f64>| {
            let sv = prob.deformed_anchors(v);
            let mut r = DVector::zeros(2 * nl);
            for l in 0..nl {
                let e = prob.w.column(l) - st.z * sv.column(l) - st.t;
                r[2 * l] = e.x;
                r[2 * l + 1] = e.y;
            }
            -(phi.transpose() * k.transpose() * r) + phi.transpose() * &phi * v * prob.gamma
        };
        let dp = cg_minimize(DVector::zeros(prob.phi.dim()), dp_grad);
        edp = edp.max((prob.phi.apply(&update_dp(&st, &prob)) - prob.phi.apply(&dp)).amax());
        at_minimum &= is_local_min(&prob, &st, |t, v| t.dp = v.clone(), dp);

        let t_grad = |v: &DVector<f64>| {
            let t = Vec2::new(v[0], v[1]);
            let mut g = Vec2::zeros();
            for l in 0..nl {
                g -= prob.w.column(l) - st.z * s.column(l) - t;
            }
            DVector::from_vec(vec![g.x, g.y])
        };
        let t = cg_minimize(DVector::zeros(2), t_grad);
        let tu = update_t(&st, &prob);
        et = et.max((tu.x - t[0]).abs().max((tu.y - t[1]).abs()));
        at_minimum &= is_local_min(&prob, &st, |tr, v| tr.t = Vec2::new(v[0], v[1]), t);
    }
    check(
        em < 1e-6 && ez < 1e-6 && edp < 1e-6 && et < 1e-6 && at_minimum,
        format!("max deviation M {em:.1e}, Z {ez:.1e}, dp {edp:.1e}, t {et:.1e} over 50 instances"),
    )
}

// ---------------------------------------------------------------------------
// 3. FFD-PnP recovery

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let base = node("n", ShapeFamily::Box, &[1.0, 0.7, 0.5], 4, 3);
    assert_eq!(base.lattice().num_control_points(), 64);
    let params = AdmmParams {
        gamma: 1e-6,
        ..AdmmParams::default()
    };
    let (mut res, mut ortho, mut iou) = (0.0f64, 0.0f64, 1.0f64);
    for _ in 0..20 {
        let inst = deformed_instance(&base, &mut rng, 0.03, 128);
        let fit =
            fit_node(&base, &inst.anchors, &inst.silhouette, &params).map_err(|e| e.to_string())?;
        let m = fit.admm.state.m;
        let s2 = fit.admm.pose.scale().powi(2);
        res = res.max(fit.admm.residual);
        ortho = ortho.max((m * m.transpose() - Matrix2::identity() * s2).norm());
        iou = iou.min(fit.iou);
    }
    check(
        res < 1e-4 && ortho < 1e-6 && iou > 0.95,
        format!("worst residual {res:.1e}, worst |MMᵀ - s²I| {ortho:.1e}, worst IoU {iou:.4} over 20 instances"),
    )
}

// ---------------------------------------------------------------------------
// 4. refinement gradients

/// Center box with two exact neighbors.
fn three_box_graph() -> ModelGraph {
    let c = node("c", ShapeFamily::Box, &[1.0, 0.7, 0.5], 4, 2);
    let a = node("n1", ShapeFamily::Box, &[0.6, 1.0, 0.5], 4, 2);
    let b = node("n2", ShapeFamily::Box, &[1.0, 0.5, 0.9], 4, 2);
    let edge = |t: &ModelNode| ModelEdge {
        source: "c".into(),
        target: t.id().into(),
        warped: t.mesh().vertices().to_vec(),
        s_dist: 0.0,
        s_iou: 1.0,
    };
    let edges = vec![edge(&a), edge(&b)];
    ModelGraph::new(vec![c, a, b], edges, 1e-3, 0.25).unwrap()
}

/// Index of the center mesh vertex under each center anchor.
fn anchor_vertices(node: &ModelNode) -> Vec<usize> {
    let verts = node.mesh().vertices();
    node.anchors()
        .points()
        .iter()
        .map(|p| {
            (0..verts.len())
                .min_by(|&i, &j| (verts[i] - p).norm().total_cmp(&(verts[j] - p).norm()))
                .unwrap()
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let graph = three_box_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let weights: BTreeMap<String, f64> = [("c", 0.6), ("n1", 0.3), ("n2", 0.1)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let mesh = linear_combine(&graph, "c", &weights).unwrap();
    let pose = random_pose(&mut rng, 128);
    let center = graph.node("c").unwrap();
    let pts = anchor_vertices(center)
        .iter()
        .map(|&i| pose.project(&mesh.vertices()[i]))
        .collect();
    let w = AnchorSet2D::new(center.anchors().ids().to_vec(), pts, vec![true; 8]).unwrap();
    let sil = render_silhouette(&mesh, &pose, 128, 128).unwrap();
    let prob = RefineProblem::new(&graph, "c", pose.scale(), &w, &sil, 0.1, 0.05).unwrap();
    let start = RefineState::initial(&pose, prob.num_bases());
    let k = prob.num_bases();

    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d_alpha: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let xi = Vector3::from_fn(|_, _| rng.gen_range(-0.2..0.2));
        let dt = Vec2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
        let st = start.stepped(&d_alpha, &xi, &dt);
        let g = analytic_gradients(&prob, &st);
        let ours: Vec<f64> = g
            .alpha
            .iter()
            .chain(g.xi.iter())
            .chain(g.t.iter())
            .copied()
            .collect();
        let f = |d: &DVector<f64>| {
            let xi = Vector3::new(d[k], d[k + 1], d[k + 2]);
            let dt = Vec2::new(d[k + 3], d[k + 4]);
            refine_objective(&prob, &st.stepped(&d.as_slice()[..k], &xi, &dt)).total
        };
        for (i, a) in ours.iter().enumerate() {
            let mut e = DVector::zeros(k + 5);
            e[i] = h;
            let fd = (f(&e) - f(&-&e)) / (2.0 * h);
            worst = worst.max((a - fd).abs() / fd.abs().max(1e-6));
        }
    }
    check(
        worst < 1e-4,
        format!("worst componentwise relative error {worst:.1e} at 20 states"),
    )
}

// ---------------------------------------------------------------------------
// 5. metrics

fn brute_force_edt(sil: &Silhouette) -> Vec<f64> {
    let (w, h) = (sil.width(), sil.height());
    let fg: Vec<(i64, i64)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| sil.get(r, c))
        .map(|(r, c)| (r as i64, c as i64))
        .collect();
    (0..h)
        .flat_map(|r| (0..w).map(move |c| (r as i64, c as i64)))
        .map(|(r, c)| {
            let d2 = fg
                .iter()
                .map(|&(a, b)| (a - r).pow(2) + (b - c).pow(2))
                .min()
                .unwrap();
            (d2 as f64).sqrt()
        })
        .collect()
}

fn plate(z: f64) -> TriMesh {
    TriMesh::new(
        vec![
            Vec3::new(0.0, 0.0, z),
            Vec3::new(1.0, 0.0, z),
            Vec3::new(1.0, 1.0, z),
            Vec3::new(0.0, 1.0, z),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut mismatched = 0;
    for _ in 0..20 {
        let w = rng.gen_range(1..=64);
        let h = rng.gen_range(1..=64);
        let density = rng.gen_range(0.01..0.5);
        let mut mask: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
        let seed = rng.gen_range(0..w * h);
        mask[seed] = true;
        let sil = Silhouette::new(w, h, mask).unwrap();
        if chamfer_map(&sil).distances() != brute_force_edt(&sil).as_slice() {
            mismatched += 1;
        }
    }

    let (unit, _) = synth_shape(ShapeFamily::Box, &[1.0, 1.0, 1.0], 2).unwrap();
    let shifted = unit
        .with_vertices(
            unit.vertices()
                .iter()
                .map(|v| v + Vec3::new(0.5, 0.0, 0.0))
                .collect(),
        )
        .unwrap();
    let frame = VoxelFrame::enclosing(&[&unit, &shifted], 128).unwrap();
    let iou = voxel_iou(
        &voxelize(&unit, &frame).unwrap(),
        &voxelize(&shifted, &frame).unwrap(),
    )
    .unwrap();

    let (bracket, _) = synth_shape(ShapeFamily::LBracket, &[1.0, 0.7, 0.5, 0.2], 4).unwrap();
    let same = surface_distance(&bracket, &bracket, 1e-3, 2000.0).unwrap();
    let apart = surface_distance(&plate(0.0), &plate(0.5), 1e-3, 2000.0).unwrap();
    check(
        mismatched == 0 && (iou - 1.0 / 3.0).abs() < 0.02 && same == 0.0 && apart == 2.0,
        format!("chamfer mismatches {mismatched}/20, half-offset IoU {iou:.4}, identical {same}, plates {apart}"),
    )
}

// ---------------------------------------------------------------------------
// 6. correspondence

/// Bracket swept back by `y += k z`.
fn swept(id: &str, params: &[f64], k: f64) -> ModelNode {
    let (m, a) = synth_shape(ShapeFamily::LBracket, params, 4).unwrap();
    let shear = |p: &Vec3| Vec3::new(p.x, p.y + k * p.z, p.z);
    let m = m
        .with_vertices(m.vertices().iter().map(shear).collect())
        .unwrap();
    let a = AnchorSet3D::new(a.ids().to_vec(), a.points().iter().map(shear).collect()).unwrap();
    ModelNode::new(id, &m, &a, [1, 1, 1], 0.05).unwrap()
}

fn criterion_6() -> Outcome {
    let pairs: [(ShapeFamily, &[f64], &[f64], usize); 4] = [
        (ShapeFamily::Box, &[1.0, 1.0, 1.0], &[2.0, 0.8, 0.6], 4),
        (ShapeFamily::Box, &[1.0, 0.7, 0.5], &[0.7, 1.1, 0.4], 4),
        (
            ShapeFamily::Ellipsoid,
            &[0.5, 0.4, 0.3],
            &[0.6, 0.3, 0.35],
            6,
        ),
        (
            ShapeFamily::LBracket,
            &[1.0, 1.0, 0.6, 0.15],
            &[1.4, 0.8, 0.48, 0.12],
            4,
        ),
    ];
    let mut worst = 0.0f64;
    for (family, a, b, res) in pairs {
        let src = node("s", family, a, res, 1);
        let dst = node("t", family, b, res, 1);
        let phi = symmetry_operator(src.lattice(), SymmetryMode::MirrorX);
        let out = dense_correspond(
            src.as_input(),
            dst.as_input(),
            &phi,
            &FfdFitParams::default(),
            &NricpParams::default(),
        )
        .map_err(|e| e.to_string())?;
        let err = out
            .warped
            .vertices
            .iter()
            .zip(dst.mesh().vertices())
            .map(|(p, q)| (p - q).norm())
            .sum::<f64>()
            / out.warped.vertices.len() as f64;
        worst = worst.max(err / dst.mesh().bbox_diagonal());
    }

    let bracket = [1.0, 1.0, 0.6, 0.15];
    let src = node("wing", ShapeFamily::LBracket, &bracket, 4, 1);
    let dst = swept("swept", &bracket, 1.5);
    let params = GraphParams {
        voxel_resolution: 64,
        ..GraphParams::default()
    };
    let (_, with_ffd, _) = correspond_pair(&src, &dst, &params).map_err(|e| e.to_string())?;
    let plain = GraphParams {
        nricp_only: true,
        ..params
    };
    let (_, without, _) = correspond_pair(&src, &dst, &plain).map_err(|e| e.to_string())?;
    check(
        worst < 0.01 && with_ffd < without,
        format!("worst mean vertex error {worst:.2e} of diagonal; swept wing s_dist {with_ffd:.3} with FFD vs {without:.3} without"),
    )
}

// ---------------------------------------------------------------------------
// 7. end to end

/// Box class on trilinear lattices, with the refinement tuned for exact
/// evidence: a light silhouette weight and a long descent.
fn box_class_config(root: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(
        None,
        &[
            "lattice.degrees=[1,1,1]".into(),
            "refine.mu=1e-3".into(),
            "refine.gamma=1e-6".into(),
            "refine.max_iters=20000".into(),
            "refine.tol=1e-9".into(),
        ],
    )
    .unwrap();
    cfg.paths.models = root.join("models");
    cfg.paths.graph = root.join("graph/graph.json");
    cfg.paths.instances = root.join("instances");
    cfg.paths.out = root.join("out");
    cfg
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = box_class_config(dir.path());
    cfg.synth.instances = 0;
    commands::synth(&cfg).map_err(|e| e.to_string())?;
    commands::build_graph(&cfg).map_err(|e| e.to_string())?;
    let graph = load_graph(&cfg.paths.graph).map_err(|e| e.to_string())?;
    if graph.nodes().len() != 6 {
        return Err(format!("graph has {} nodes", graph.nodes().len()));
    }

    // held-out member: a known combination around one node
    let center = graph.nodes()[0].id().to_string();
    let out_edges = graph.out_edges(&center);
    if out_edges.len() < 2 {
        return Err(format!("{center} has {} out-edges", out_edges.len()));
    }
    let mut weights = BTreeMap::from([(center.clone(), 0.5)]);
    weights.insert(out_edges[0].target.clone(), 0.3);
    weights.insert(out_edges[1].target.clone(), 0.2);
    let truth = normalized(&linear_combine(&graph, &center, &weights).map_err(|e| e.to_string())?);
    let cnode = graph.node(&center).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let size = cfg.synth.image_size;
    let pose = random_pose(&mut rng, size);
    let pts = anchor_vertices(cnode)
        .iter()
        .map(|&i| pose.project(&truth.vertices()[i]))
        .collect();
    let w = AnchorSet2D::new(
        cnode.anchors().ids().to_vec(),
        pts,
        vec![true; cnode.anchors().len()],
    )
    .unwrap();
    let sil = render_silhouette(&truth, &pose, size, size).unwrap();
    let inst = cfg.paths.instances.join("held-out");
    std::fs::create_dir_all(&inst).unwrap();
    save_anchors_2d(&w, inst.join("anchors.csv")).unwrap();
    save_silhouette(&sil, inst.join("silhouette.pgm")).unwrap();
    save_mesh(&truth, inst.join("truth_mesh.obj")).unwrap();
    write_json(&inst.join("truth_pose.json"), &pose).unwrap();

    commands::select(&cfg, None).map_err(|e| e.to_string())?;
    commands::reconstruct(&cfg, None).map_err(|e| e.to_string())?;
    commands::eval(&cfg, None).map_err(|e| e.to_string())?;
    let report: EvalReport = commands::read_json(&cfg.paths.out.join("eval.json")).unwrap();
    let refined = report.instances[0].errors.e_3d;

    let theta = cfg.graph.theta;
    let spa = cfg.graph.samples_per_area;
    let unrefined = graph
        .nodes()
        .iter()
        .map(|n| surface_distance(n.mesh(), &truth, theta, spa).unwrap())
        .fold(f64::INFINITY, f64::min);
    check(
        refined < 0.05 && refined < unrefined,
        format!("refined e_3D {refined:.4} vs best unrefined node {unrefined:.4}"),
    )
}

// ---------------------------------------------------------------------------
// 8. determinism

fn run_pipeline(root: &Path) -> Result<(), String> {
    let mut cfg = box_class_config(root);
    cfg.refine.max_iters = 2000;
    commands::synth(&cfg).map_err(|e| e.to_string())?;
    commands::build_graph(&cfg).map_err(|e| e.to_string())?;
    commands::select(&cfg, None).map_err(|e| e.to_string())?;
    commands::reconstruct(&cfg, None).map_err(|e| e.to_string())?;
    commands::eval(&cfg, None).map_err(|e| e.to_string())?;
    Ok(())
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_8() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path())?;
    run_pipeline(b.path())?;
    let fa = files_under(a.path());
    let fb = files_under(b.path());
    if fa != fb {
        return Err(format!(
            "file lists differ: {} vs {} files",
            fa.len(),
            fb.len()
        ));
    }
    let differing: Vec<_> = fa
        .iter()
        .filter(|f| {
            std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).unwrap()
        })
        .collect();
    check(
        differing.is_empty(),
        format!(
            "{} artifacts compared, {} differ {:?}",
            fa.len(),
            differing.len(),
            differing
        ),
    )
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance_criteria() {
    let criteria: [(u32, &str, fn() -> Outcome, Option<Duration>); 8] = [
        (
            1,
            "FFD correctness",
            criterion_1,
            Some(Duration::from_secs(10)),
        ),
        (
            2,
            "ADMM subproblem oracles",
            criterion_2,
            Some(Duration::from_secs(60)),
        ),
        (
            3,
            "FFD-PnP recovery",
            criterion_3,
            Some(Duration::from_secs(300)),
        ),
        (
            4,
            "refinement gradients",
            criterion_4,
            Some(Duration::from_secs(30)),
        ),
        (
            5,
            "metric oracles",
            criterion_5,
            Some(Duration::from_secs(120)),
        ),
        (
            6,
            "correspondence pipeline",
            criterion_6,
            Some(Duration::from_secs(300)),
        ),
        (
            7,
            "end-to-end reconstruction",
            criterion_7,
            Some(Duration::from_secs(600)),
        ),
        (8, "determinism", criterion_8, None),
    ];
    // e.g. ACCEPTANCE_ONLY=2,7 to rerun a subset
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (n, name, run, budget) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(d), Some(b)) if elapsed > b => {
                Err(format!("{d}; over the {}s budget", b.as_secs()))
            }
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        // written around the test harness capture so the lines always show
        let _ = writeln!(
            std::io::stdout().lock(),
            "criterion {n} ({name}): {tag} [{:.1}s] {detail}",
            elapsed.as_secs_f64()
        );
        if outcome.is_err() {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
