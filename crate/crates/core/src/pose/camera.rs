use nalgebra::{Matrix2, Matrix2x3, Matrix3};
use serde::{Deserialize, Serialize};

use crate::mesh::{AnchorSet2D, AnchorSet3D};
use crate::{Error, Result, Vec2, Vec3};

/// Orthographic camera `x = s R X + t`, with `R` the first two rows of a
/// rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRecord", into = "PoseRecord")]
pub struct CameraPose {
    rotation: Matrix2x3<f64>,
    scale: f64,
    translation: Vec2,
}

impl CameraPose {
    pub fn new(rotation: Matrix2x3<f64>, scale: f64, translation: Vec2) -> Result<Self> {
        let err = (rotation * rotation.transpose() - Matrix2::identity()).norm();
        if !(err <= 1e-8) {
            return Err(Error::InvalidParam(format!(
                "R is not row-orthonormal (|RRᵀ - I| = {err:e})"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "invalid scale {scale} or translation"
            )));
        }
        Ok(Self {
            rotation,
            scale,
            translation,
        })
    }

    /// Splits a scaled rotation `M = U Σ Vᵀ` into `s = (σ₁ + σ₂)/2` and
    /// `R = U Vᵀ`.
    pub fn from_scaled_rotation(m: &Matrix2x3<f64>, translation: Vec2) -> Result<Self> {
        let (s, r) = project_scaled_rotation(m)?;
        Self::new(r, s, translation)
    }

    pub fn rotation(&self) -> Matrix2x3<f64> {
        self.rotation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn translation(&self) -> Vec2 {
        self.translation
    }

    /// `s R`.
    pub fn scaled_rotation(&self) -> Matrix2x3<f64> {
        self.rotation * self.scale
    }

    pub fn project(&self, p: &Vec3) -> Vec2 {
        self.scaled_rotation() * p + self.translation
    }

    /// Same camera with the image shifted by `v`.
    pub fn translated(&self, v: Vec2) -> Self {
        Self {
            translation: self.translation + v,
            ..*self
        }
    }
}

/// Nearest `s R` to `m` in the Frobenius sense, returned as `(s, R)`.
pub(crate) fn project_scaled_rotation(m: &Matrix2x3<f64>) -> Result<(f64, Matrix2x3<f64>)> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("scaled rotation".into()));
    }
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let s = 0.5 * (svd.singular_values[0] + svd.singular_values[1]);
    Ok((s, u * vt))
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    rotation: [[f64; 3]; 2],
    scale: f64,
    translation: [f64; 2],
}

impl From<CameraPose> for PoseRecord {
    fn from(p: CameraPose) -> Self {
        let r = p.rotation;
        Self {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            ],
            scale: p.scale,
            translation: [p.translation.x, p.translation.y],
        }
    }
}

impl TryFrom<PoseRecord> for CameraPose {
    type Error = Error;

    fn try_from(r: PoseRecord) -> Result<Self> {
        let [a, b] = r.rotation;
        CameraPose::new(
            Matrix2x3::new(a[0], a[1], a[2], b[0], b[1], b[2]),
            r.scale,
            Vec2::new(r.translation[0], r.translation[1]),
        )
    }
}

/// Weak-perspective fit from at least four visible, non-collinear anchors:
/// centered least squares for the 2×3 map, projected onto scaled rotations.
pub fn init_pose(anchors3d: &AnchorSet3D, anchors2d: &AnchorSet2D) -> Result<CameraPose> {
    let pairs = anchors2d.visible_pairs(anchors3d)?;
    if pairs.len() < 4 {
        return Err(Error::RankDeficient(format!(
            "{} visible anchors, need at least 4",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let x: Vec<Vec3> = pairs.iter().map(|&(j, _)| anchors3d.points()[j]).collect();
    let xbar = x.iter().sum::<Vec3>() / n;
    let wbar = pairs.iter().map(|&(_, w)| w).sum::<Vec2>() / n;

    let mut sxx = Matrix3::zeros();
    let mut swx = Matrix2x3::zeros();
    for (xi, &(_, w)) in x.iter().zip(&pairs) {
        let xc = xi - xbar;
        sxx += xc * xc.transpose();
        swx += (w - wbar) * xc.transpose();
    }
    let sv = sxx.singular_values();
    if !(sv[0] > 0.0) || sv[1] / sv[0] < 1e-9 {
        return Err(Error::RankDeficient("3D anchors are collinear".into()));
    }
    let pinv = sxx
        .pseudo_inverse(sv[0] * 1e-12)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let a = swx * pinv;
    let (s, r) = project_scaled_rotation(&a)?;
    if !(s > 0.0) {
        return Err(Error::RankDeficient(
            "2D anchors do not span an image region".into(),
        ));
    }
    CameraPose::new(r, s, wbar - r * xbar * s)
}
