//! ADMM for joint orthographic pose and FFD registration against 2D anchors.
//!
//! The scaled rotation `M = sR` is split from an unconstrained copy `Z` that
//! carries the data term. Each sweep updates `M`, `Z`, `Δp`, `t` and the dual
//! `Λ` in that order.

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, SVD};
use serde::{Deserialize, Serialize};

use super::camera::project_scaled_rotation;
use super::CameraPose;
use crate::ffd::{FfdLattice, SymmetryMode, SymmetryOperator};
use crate::mesh::{AnchorSet2D, AnchorSet3D};
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmParams {
    pub gamma: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub symmetry: SymmetryMode,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            gamma: 1e-2,
            rho: 1.0,
            max_iters: 500,
            tol: 1e-8,
            symmetry: SymmetryMode::MirrorX,
        }
    }
}

/// Fixed data of one ADMM solve.
#[derive(Debug, Clone)]
pub struct AdmmProblem {
    /// Visible 2D anchors as columns.
    pub w: nalgebra::Matrix2xX<f64>,
    /// `B_L ⊗ I₃`, rows in the column order of `w`.
    pub a: DMatrix<f64>,
    /// Rest control points `vec(Pᵀ)`.
    pub p: DVector<f64>,
    pub phi: SymmetryOperator,
    /// Orthonormal basis of the range of `Φ`.
    q: DMatrix<f64>,
    pub gamma: f64,
}

impl AdmmProblem {
    pub fn new(
        lattice: &FfdLattice,
        anchors3d: &AnchorSet3D,
        anchors2d: &AnchorSet2D,
        phi: SymmetryOperator,
        gamma: f64,
    ) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "gamma must be >= 0, got {gamma}"
            )));
        }
        if phi.dim() != 3 * lattice.num_control_points() {
            return Err(Error::DimensionMismatch(
                "symmetry operator does not fit lattice".into(),
            ));
        }
        let pairs = anchors2d.visible_pairs(anchors3d)?;
        let rows: Vec<usize> = pairs.iter().map(|&(j, _)| j).collect();
        let basis = lattice
            .bernstein_basis(anchors3d.points())?
            .select_rows(&rows);
        let w = nalgebra::Matrix2xX::from_iterator(
            pairs.len(),
            pairs.iter().flat_map(|(_, v)| [v.x, v.y]),
        );
        Ok(Self {
            w,
            a: basis.kron_identity(),
            p: lattice.vectorized(),
            q: phi.range_basis(),
            phi,
            gamma,
        })
    }

    pub fn num_visible(&self) -> usize {
        self.w.ncols()
    }

    /// Deformed 3D anchors `S` (3×|L|) for displacement parameters `dp`.
    pub fn deformed_anchors(&self, dp: &DVector<f64>) -> nalgebra::Matrix3xX<f64> {
        let x = &self.a * (&self.p + self.phi.apply(dp));
        nalgebra::Matrix3xX::from_column_slice(x.as_slice())
    }

    /// `½‖W − (M S + t)‖²`.
    pub fn reprojection_residual(&self, m: &Matrix2x3<f64>, t: &Vec2, dp: &DVector<f64>) -> f64 {
        let s = self.deformed_anchors(dp);
        let mut r = &self.w - m * s;
        for mut c in r.column_iter_mut() {
            c -= t;
        }
        0.5 * r.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub m: Matrix2x3<f64>,
    pub z: Matrix2x3<f64>,
    pub lambda: Matrix2x3<f64>,
    pub dp: DVector<f64>,
    pub t: Vec2,
    pub rho: f64,
}

impl AdmmState {
    /// `M = Z = sR` of `pose`, `Λ = 0`, `Δp = 0`.
    pub fn from_pose(pose: &CameraPose, dim: usize, rho: f64) -> Self {
        let m = pose.scaled_rotation();
        Self {
            m,
            z: m,
            lambda: Matrix2x3::zeros(),
            dp: DVector::zeros(dim),
            t: pose.translation(),
            rho,
        }
    }
}

/// Nearest scaled rotation to `Z − Λ/ρ`: both singular values replaced by
/// their mean.
pub fn update_m(state: &AdmmState) -> Matrix2x3<f64> {
    let target = state.z - state.lambda / state.rho;
    match project_scaled_rotation(&target) {
        Ok((s, r)) => r * s,
        Err(_) => state.m,
    }
}

/// `Z = ((W − t)Sᵀ + Λ + ρM)(SSᵀ + ρI)⁻¹`.
pub fn update_z(state: &AdmmState, prob: &AdmmProblem) -> Matrix2x3<f64> {
    let s = prob.deformed_anchors(&state.dp);
    let mut wt = prob.w.clone();
    for mut c in wt.column_iter_mut() {
        c -= state.t;
    }
    let lhs = &wt * s.transpose() + state.lambda + state.m * state.rho;
    let g = &s * s.transpose() + Matrix3::identity() * state.rho;
    let inv = g
        .try_inverse()
        .unwrap_or_else(|| g.pseudo_inverse(1e-14).unwrap_or_else(|_| Matrix3::zeros()));
    lhs * inv
}

/// Minimizes `½‖W − Z S(Δp) − t‖² + (γ/2)‖ΦΔp‖²` over `Δp` in the range of
/// `Φ`. Falls back to a pseudo-inverse when the reduced system is singular.
pub fn update_dp(state: &AdmmState, prob: &AdmmProblem) -> DVector<f64> {
    let l = prob.num_visible();
    // K = (I_L ⊗ Z)(B_L ⊗ I₃), 2L × 3M
    let mut k = DMatrix::zeros(2 * l, prob.a.ncols());
    for i in 0..l {
        let rows = prob.a.rows(3 * i, 3);
        k.rows_mut(2 * i, 2).copy_from(&(state.z * rows));
    }
    let mut r0 = DVector::zeros(2 * l);
    for i in 0..l {
        let c = prob.w.column(i) - state.t;
        r0[2 * i] = c.x;
        r0[2 * i + 1] = c.y;
    }
    r0 -= &k * &prob.p;
    let kq = &k * &prob.q;
    let n = kq.ncols();
    let normal = kq.tr_mul(&kq) + DMatrix::identity(n, n) * prob.gamma;
    let rhs = kq.tr_mul(&r0);
    let z = match normal.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            let svd = SVD::new(normal, true, true);
            let eps = svd.singular_values.max() * 1e-12;
            svd.solve(&rhs, eps).unwrap_or_else(|_| DVector::zeros(n))
        }
    };
    &prob.q * z
}

/// Mean of `W_l − Z S_l` over visible anchors.
pub fn update_t(state: &AdmmState, prob: &AdmmProblem) -> Vec2 {
    let s = prob.deformed_anchors(&state.dp);
    let r = &prob.w - state.z * s;
    r.column_sum() / prob.num_visible() as f64
}

#[derive(Debug, Clone)]
pub struct AdmmResult {
    pub pose: CameraPose,
    pub dp: DVector<f64>,
    /// `½‖w_L − ((B_L ⊗ sR)(p + ΦΔp) + t)‖²` with the returned pose.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub state: AdmmState,
}

/// Runs the ADMM sweeps from `init` until `max(‖M − Z‖, ρ‖ΔZ‖) ≤ tol`.
pub fn admm_ffd_pnp(
    prob: &AdmmProblem,
    init: &CameraPose,
    params: &AdmmParams,
) -> Result<AdmmResult> {
    if !(params.rho > 0.0) {
        return Err(Error::InvalidParam(format!(
            "rho must be > 0, got {}",
            params.rho
        )));
    }
    if prob.num_visible() < 4 {
        return Err(Error::RankDeficient(format!(
            "{} visible anchors, need at least 4",
            prob.num_visible()
        )));
    }
    let mut st = AdmmState::from_pose(init, prob.phi.dim(), params.rho);
    let mut history = Vec::with_capacity(params.max_iters);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iters {
        iterations += 1;
        let z_prev = st.z;
        st.m = update_m(&st);
        st.z = update_z(&st, prob);
        st.dp = update_dp(&st, prob);
        st.t = update_t(&st, prob);
        st.lambda += (st.m - st.z) * st.rho;

        let res = prob.reprojection_residual(&st.m, &st.t, &st.dp);
        if !res.is_finite() {
            return Err(Error::NonFinite("ADMM residual".into()));
        }
        history.push(res);
        if history.len() > 50 {
            let old = history[history.len() - 51];
            if res > 10.0 * old && res > 1e-9 {
                return Err(Error::Divergence {
                    iterations,
                    residual: res,
                });
            }
        }
        let primal = (st.m - st.z).norm();
        let dual = st.rho * (st.z - z_prev).norm();
        if primal.max(dual) <= params.tol {
            converged = true;
            break;
        }
    }
    let pose = CameraPose::from_scaled_rotation(&st.m, st.t)?;
    let residual = prob.reprojection_residual(&pose.scaled_rotation(), &st.t, &st.dp);
    Ok(AdmmResult {
        pose,
        dp: st.dp.clone(),
        residual,
        iterations,
        converged,
        state: st,
    })
}
