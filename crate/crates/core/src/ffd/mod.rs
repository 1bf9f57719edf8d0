//! Free-form deformation over a parallelepiped lattice of control points.
//!
//! Control points are stored in `(i, j, k)` lexicographic order with `k`
//! fastest, and flattened parameter vectors use `p = vec(Pᵀ)`: the x, y, z of
//! control point `c` sit at `3c`, `3c + 1`, `3c + 2`.

mod symmetry;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::mesh::TriMesh;
use crate::{Error, Result, Vec3};

pub use symmetry::{symmetry_operator, SymmetryMode, SymmetryOperator};

const ORTHO_TOL: f64 = 1e-9;

/// Control-point lattice spanned by three orthogonal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct FfdLattice {
    origin: Vec3,
    axes: [Vec3; 3],
    degrees: [usize; 3],
    control_points: Vec<Vec3>,
}

impl FfdLattice {
    /// Lattice with control points at their rest positions.
    pub fn new(origin: Vec3, axes: [Vec3; 3], degrees: [usize; 3]) -> Result<Self> {
        if degrees.contains(&0) {
            return Err(Error::InvalidParam(format!(
                "lattice degrees must be >= 1, got {degrees:?}"
            )));
        }
        let lens = axes.map(|a| a.norm());
        if lens.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Degenerate("lattice axis has zero length".into()));
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            if axes[a].dot(&axes[b]).abs() > ORTHO_TOL * lens[a] * lens[b] {
                return Err(Error::InvalidParam(
                    "lattice axes are not orthogonal".into(),
                ));
            }
        }
        let mut lattice = Self {
            origin,
            axes,
            degrees,
            control_points: Vec::new(),
        };
        lattice.control_points = lattice.rest_points();
        Ok(lattice)
    }

    /// Replaces the control points, e.g. after deserializing a deformed lattice.
    pub fn with_control_points(&self, points: Vec<Vec3>) -> Result<Self> {
        if points.len() != self.num_control_points() {
            return Err(Error::DimensionMismatch(format!(
                "lattice has {} control points, got {}",
                self.num_control_points(),
                points.len()
            )));
        }
        Ok(Self {
            control_points: points,
            ..self.clone()
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn axes(&self) -> [Vec3; 3] {
        self.axes
    }

    /// `(l, m, n)`.
    pub fn degrees(&self) -> [usize; 3] {
        self.degrees
    }

    pub fn num_control_points(&self) -> usize {
        let [l, m, n] = self.degrees;
        (l + 1) * (m + 1) * (n + 1)
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control_points
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let [_, m, n] = self.degrees;
        (i * (m + 1) + j) * (n + 1) + k
    }

    /// Inverse of [`FfdLattice::index`].
    pub fn ijk(&self, c: usize) -> [usize; 3] {
        let [_, m, n] = self.degrees;
        let k = c % (n + 1);
        let j = (c / (n + 1)) % (m + 1);
        let i = c / ((n + 1) * (m + 1));
        [i, j, k]
    }

    /// `X0 + (i/l) S + (j/m) T + (k/n) U` for every control point.
    pub fn rest_points(&self) -> Vec<Vec3> {
        let [l, m, n] = self.degrees;
        let mut out = Vec::with_capacity(self.num_control_points());
        for i in 0..=l {
            for j in 0..=m {
                for k in 0..=n {
                    out.push(
                        self.origin
                            + self.axes[0] * (i as f64 / l as f64)
                            + self.axes[1] * (j as f64 / m as f64)
                            + self.axes[2] * (k as f64 / n as f64),
                    );
                }
            }
        }
        out
    }

    /// Control points flattened as `vec(Pᵀ)`.
    pub fn vectorized(&self) -> DVector<f64> {
        vectorize(&self.control_points)
    }

    /// `(s, t, u)` with `x = X0 + s S + t T + u U`.
    pub fn local_coords(&self, points: &[Vec3]) -> Result<Vec<Vec3>> {
        let inv = self.axes.map(|a| {
            let l2 = a.norm_squared();
            (l2 > 0.0).then(|| a / l2)
        });
        let [Some(s), Some(t), Some(u)] = inv else {
            return Err(Error::Degenerate("lattice axis has zero length".into()));
        };
        Ok(points
            .iter()
            .map(|p| {
                let d = p - self.origin;
                Vec3::new(d.dot(&s), d.dot(&t), d.dot(&u))
            })
            .collect())
    }

    /// Deformation matrix for `points`: row `r`, column `(i, j, k)` holds
    /// `B_{i,l}(s_r) B_{j,m}(t_r) B_{k,n}(u_r)`. Points outside the unit cube
    /// are extrapolated, not clamped.
    pub fn bernstein_basis(&self, points: &[Vec3]) -> Result<DeformationMatrix> {
        let local = self.local_coords(points)?;
        let [l, m, n] = self.degrees;
        let cols = self.num_control_points();
        let row = |stu: &Vec3| {
            let bs = bernstein_all(l, stu.x);
            let bt = bernstein_all(m, stu.y);
            let bu = bernstein_all(n, stu.z);
            let mut r = Vec::with_capacity(cols);
            for wi in &bs {
                for wj in &bt {
                    for wk in &bu {
                        r.push(wi * wj * wk);
                    }
                }
            }
            r
        };
        let rows: Vec<Vec<f64>> = if local.len() > 2048 {
            local.par_iter().map(row).collect()
        } else {
            local.iter().map(row).collect()
        };
        let matrix = DMatrix::from_fn(points.len(), cols, |r, c| rows[r][c]);
        Ok(DeformationMatrix { matrix })
    }
}

/// Axis-aligned lattice around `mesh`'s bounding box, grown by `margin` times
/// the extent on each side. Zero-extent axes are padded to `1e-6`.
pub fn build_lattice(mesh: &TriMesh, degrees: [usize; 3], margin: f64) -> Result<FfdLattice> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "margin must be >= 0, got {margin}"
        )));
    }
    let (lo, hi) = mesh.bounding_box();
    let mut origin = Vec3::zeros();
    let mut ext = Vec3::zeros();
    for a in 0..3 {
        let mut e = hi[a] - lo[a];
        let mut start = lo[a];
        if e <= 0.0 {
            start -= 0.5e-6;
            e = 1e-6;
        }
        origin[a] = start - margin * e;
        ext[a] = e * (1.0 + 2.0 * margin);
    }
    FfdLattice::new(
        origin,
        [
            Vec3::new(ext.x, 0.0, 0.0),
            Vec3::new(0.0, ext.y, 0.0),
            Vec3::new(0.0, 0.0, ext.z),
        ],
        degrees,
    )
}

pub fn vectorize(points: &[Vec3]) -> DVector<f64> {
    DVector::from_iterator(
        points.len() * 3,
        points.iter().flat_map(|p| [p.x, p.y, p.z]),
    )
}

pub fn unvectorize(p: &DVector<f64>) -> Vec<Vec3> {
    p.as_slice()
        .chunks_exact(3)
        .map(|c| Vec3::new(c[0], c[1], c[2]))
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `C(n, i) x^i (1 - x)^(n - i)`.
pub fn bernstein(n: usize, i: usize, x: f64) -> f64 {
    binomial(n, i) * x.powi(i as i32) * (1.0 - x).powi((n - i) as i32)
}

fn bernstein_all(n: usize, x: f64) -> Vec<f64> {
    (0..=n).map(|i| bernstein(n, i, x)).collect()
}

/// Bernstein weights of a point set against a lattice, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationMatrix {
    matrix: DMatrix<f64>,
}

impl DeformationMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Rows for a subset of the embedded points, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            matrix: self.matrix.select_rows(rows),
        }
    }

    /// `X = B P`.
    pub fn deform(&self, control_points: &[Vec3]) -> Result<Vec<Vec3>> {
        if control_points.len() != self.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "deformation matrix has {} columns, got {} control points",
                self.ncols(),
                control_points.len()
            )));
        }
        let p = DMatrix::from_fn(control_points.len(), 3, |r, c| control_points[r][c]);
        let x = &self.matrix * p;
        Ok((0..x.nrows())
            .map(|r| Vec3::new(x[(r, 0)], x[(r, 1)], x[(r, 2)]))
            .collect())
    }

    /// `X = B P` with `P` given as `vec(Pᵀ)`.
    pub fn deform_vectorized(&self, p: &DVector<f64>) -> Result<Vec<Vec3>> {
        if p.len() != 3 * self.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                3 * self.ncols(),
                p.len()
            )));
        }
        self.deform(&unvectorize(p))
    }

    /// Dense `B ⊗ I₃`, mapping `vec(Pᵀ)` to stacked point coordinates.
    pub fn kron_identity(&self) -> DMatrix<f64> {
        let (r, c) = self.matrix.shape();
        let mut out = DMatrix::zeros(3 * r, 3 * c);
        for i in 0..r {
            for j in 0..c {
                let w = self.matrix[(i, j)];
                if w != 0.0 {
                    for d in 0..3 {
                        out[(3 * i + d, 3 * j + d)] = w;
                    }
                }
            }
        }
        out
    }
}
