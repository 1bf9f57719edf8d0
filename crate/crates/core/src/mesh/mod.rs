//! Geometry carriers and their file formats.

mod anchors;
mod obj;
mod pgm;
pub mod synth;

use std::collections::{BTreeSet, HashMap};

use crate::{Error, Result, Vec2, Vec3};

pub use anchors::{load_anchors_2d, load_anchors_3d, save_anchors_2d, save_anchors_3d};
pub use obj::{load_mesh, save_mesh, write_obj};
pub use pgm::{load_silhouette, save_silhouette};
pub use synth::{synth_shape, ShapeFamily};

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidMesh("mesh has no vertices".into()));
        }
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidMesh(format!(
                "face {f:?} references a vertex outside [0, {n})"
            )));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("mesh vertices".into()));
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Same connectivity, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Self::new(vertices, self.faces.clone())
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        bounding_box(&self.vertices)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Unique undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a != b {
                    set.insert((a.min(b), a.max(b)));
                }
            }
        }
        set.into_iter().collect()
    }

    /// Applies `v -> (v - center) * scale` to every vertex.
    pub fn transformed(&self, t: &Normalization) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| t.apply(v)).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Transform that centers the bounding box at the origin and scales its
    /// diagonal to 1.
    pub fn normalization(&self) -> Result<Normalization> {
        Normalization::for_points(&self.vertices)
    }
}

pub(crate) fn bounding_box(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Similarity transform `v -> (v - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub center: Vec3,
    pub scale: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            center: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn for_points(points: &[Vec3]) -> Result<Self> {
        let (lo, hi) = bounding_box(points);
        let diag = (hi - lo).norm();
        if !(diag > 0.0 && diag.is_finite()) {
            return Err(Error::Degenerate("bounding box has zero diagonal".into()));
        }
        Ok(Self {
            center: 0.5 * (lo + hi),
            scale: 1.0 / diag,
        })
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        (v - self.center) * self.scale
    }
}

/// Semantically labelled 3D landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet3D {
    ids: Vec<String>,
    points: Vec<Vec3>,
}

impl AnchorSet3D {
    pub fn new(ids: Vec<String>, points: Vec<Vec3>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::InvalidParam("anchor set is empty".into()));
        }
        if ids.len() != points.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} anchor ids for {} points",
                ids.len(),
                points.len()
            )));
        }
        check_unique(&ids)?;
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("3D anchors".into()));
        }
        Ok(Self { ids, points })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<Vec3> {
        self.ids
            .iter()
            .position(|x| x == id)
            .map(|i| self.points[i])
    }

    pub fn transformed(&self, t: &Normalization) -> Self {
        Self {
            ids: self.ids.clone(),
            points: self.points.iter().map(|p| t.apply(p)).collect(),
        }
    }

    /// For each of `other`'s ids, the index of the same id here.
    pub fn match_ids(&self, other: &AnchorSet3D) -> Result<Vec<usize>> {
        if self.len() != other.len() {
            return Err(Error::AnchorMismatch(format!(
                "{} anchors vs {}",
                self.len(),
                other.len()
            )));
        }
        let index: HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        other
            .ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::AnchorMismatch(format!("id {id} has no counterpart")))
            })
            .collect()
    }
}

/// Image landmarks in pixels with a visibility flag per anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet2D {
    ids: Vec<String>,
    points: Vec<Vec2>,
    visible: Vec<bool>,
}

impl AnchorSet2D {
    pub fn new(ids: Vec<String>, points: Vec<Vec2>, visible: Vec<bool>) -> Result<Self> {
        if ids.len() != points.len() || ids.len() != visible.len() {
            return Err(Error::DimensionMismatch(
                "2D anchor ids, points and visibility differ in length".into(),
            ));
        }
        check_unique(&ids)?;
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("2D anchors".into()));
        }
        Ok(Self {
            ids,
            points,
            visible,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn visible(&self) -> &[bool] {
        &self.visible
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Shifts every point by `v`.
    pub fn translated(&self, v: Vec2) -> Self {
        Self {
            ids: self.ids.clone(),
            points: self.points.iter().map(|p| p + v).collect(),
            visible: self.visible.clone(),
        }
    }

    /// Visible anchors paired with their 3D counterparts: `(index into the 3D
    /// set, 2D point)`. Visible ids missing from the 3D set are an error.
    pub fn visible_pairs(&self, anchors3d: &AnchorSet3D) -> Result<Vec<(usize, Vec2)>> {
        let mut out = Vec::new();
        for ((id, p), &vis) in self.ids.iter().zip(&self.points).zip(&self.visible) {
            if !vis {
                continue;
            }
            let j = anchors3d
                .ids()
                .iter()
                .position(|x| x == id)
                .ok_or_else(|| Error::AnchorMismatch(format!("2D anchor {id} has no 3D match")))?;
            out.push((j, *p));
        }
        if out.is_empty() {
            return Err(Error::NoVisibleAnchors);
        }
        Ok(out)
    }
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidParam(format!("duplicate anchor id {id}")));
        }
    }
    Ok(())
}

/// Binary mask, row-major, `(row, col) = (y, x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Silhouette {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl Silhouette {
    /// Fails with [`Error::EmptySilhouette`] when no pixel is set.
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask of {} pixels for {width}x{height}",
                mask.len()
            )));
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::EmptySilhouette);
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}
