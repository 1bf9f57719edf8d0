//! Symmetry constraints on control-point displacements.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FfdLattice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryMode {
    #[default]
    Identity,
    /// Mirror about the lattice mid-plane `i <-> l - i`.
    MirrorX,
}

impl std::str::FromStr for SymmetryMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "identity" => Ok(SymmetryMode::Identity),
            "mirror_x" => Ok(SymmetryMode::MirrorX),
            _ => Err(crate::Error::InvalidParam(format!(
                "unknown symmetry mode {s:?}"
            ))),
        }
    }
}

/// Linear map `Φ` on `3M` displacement parameters.
///
/// In mirror mode, `Φ` averages each control point's displacement with the
/// reflection of its mirror partner's, so any input maps to a field with
/// `Δ[l-i,j,k] = diag(-1, 1, 1) Δ[i,j,k]`. This `Φ` is an orthogonal
/// projector: symmetric and idempotent, hence `ΦᵀΦ = Φ`.
///
/// The lattice x-axis must be the model's symmetry axis for the constraint to
/// mean anything; that is not checked.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryOperator {
    mode: SymmetryMode,
    /// Mirror partner of every control point.
    partner: Vec<usize>,
}

impl SymmetryOperator {
    pub fn new(lattice: &FfdLattice, mode: SymmetryMode) -> Self {
        let [l, _, _] = lattice.degrees();
        let partner = (0..lattice.num_control_points())
            .map(|c| match mode {
                SymmetryMode::Identity => c,
                SymmetryMode::MirrorX => {
                    let [i, j, k] = lattice.ijk(c);
                    lattice.index(l - i, j, k)
                }
            })
            .collect();
        Self { mode, partner }
    }

    pub fn mode(&self) -> SymmetryMode {
        self.mode
    }

    /// `3M`.
    pub fn dim(&self) -> usize {
        3 * self.partner.len()
    }

    pub fn partner(&self, c: usize) -> usize {
        self.partner[c]
    }

    /// `Φ q`.
    pub fn apply(&self, q: &DVector<f64>) -> DVector<f64> {
        assert_eq!(q.len(), self.dim(), "parameter length");
        match self.mode {
            SymmetryMode::Identity => q.clone(),
            SymmetryMode::MirrorX => {
                let mut out = DVector::zeros(q.len());
                for (c, &pc) in self.partner.iter().enumerate() {
                    out[3 * c] = 0.5 * (q[3 * c] - q[3 * pc]);
                    out[3 * c + 1] = 0.5 * (q[3 * c + 1] + q[3 * pc + 1]);
                    out[3 * c + 2] = 0.5 * (q[3 * c + 2] + q[3 * pc + 2]);
                }
                out
            }
        }
    }

    /// `Φᵀ q`; equal to [`SymmetryOperator::apply`] since `Φ` is symmetric.
    pub fn apply_transpose(&self, q: &DVector<f64>) -> DVector<f64> {
        self.apply(q)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut e = DVector::zeros(n);
            e[col] = 1.0;
            out.set_column(col, &self.apply(&e));
        }
        out
    }

    /// Orthonormal basis `Q` of the range of `Φ`, so that `Φ = Q Qᵀ`.
    pub fn range_basis(&self) -> DMatrix<f64> {
        let n = self.dim();
        if self.mode == SymmetryMode::Identity {
            return DMatrix::identity(n, n);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for (c, &pc) in self.partner.iter().enumerate() {
            if pc < c {
                continue;
            }
            for d in 0..3 {
                let mut v = DVector::zeros(n);
                if pc == c {
                    // self-mirrored points cannot move in x
                    if d == 0 {
                        continue;
                    }
                    v[3 * c + d] = 1.0;
                } else {
                    let sign = if d == 0 { -1.0 } else { 1.0 };
                    v[3 * c + d] = h;
                    v[3 * pc + d] = sign * h;
                }
                cols.push(v);
            }
        }
        DMatrix::from_columns(&cols)
    }

    /// Whether a displacement field satisfies this operator's symmetry.
    pub fn is_symmetric(&self, field: &DVector<f64>, tol: f64) -> bool {
        if self.mode == SymmetryMode::Identity {
            return true;
        }
        self.partner.iter().enumerate().all(|(c, &pc)| {
            (field[3 * pc] + field[3 * c]).abs() <= tol
                && (field[3 * pc + 1] - field[3 * c + 1]).abs() <= tol
                && (field[3 * pc + 2] - field[3 * c + 2]).abs() <= tol
        })
    }
}

/// Builds `Φ` for a lattice.
pub fn symmetry_operator(lattice: &FfdLattice, mode: SymmetryMode) -> SymmetryOperator {
    SymmetryOperator::new(lattice, mode)
}
