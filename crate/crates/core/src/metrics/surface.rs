use rayon::prelude::*;

use crate::geom::TriangleGrid;
use crate::mesh::TriMesh;
use crate::{Error, Result, Vec3};

/// Mesh vertices followed by deterministic area-weighted face samples.
///
/// Face `f` receives `max(1, round(area * samples_per_area))` points, taken as
/// evenly spaced centroids of a uniform barycentric subdivision of the face.
pub fn surface_samples(mesh: &TriMesh, samples_per_area: f64) -> Vec<Vec3> {
    let mut out = mesh.vertices().to_vec();
    for f in 0..mesh.num_faces() {
        let [a, b, c] = mesh.triangle(f);
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        let k = ((area * samples_per_area).round() as usize).max(1);
        let n = (k as f64).sqrt().ceil() as usize;
        let cells = subdivision_centroids(n);
        let total = cells.len();
        for s in 0..k {
            let idx = ((s as f64 + 0.5) * total as f64 / k as f64) as usize;
            let (u, v) = cells[idx.min(total - 1)];
            out.push(a + (b - a) * u + (c - a) * v);
        }
    }
    out
}

/// Centroids of the `n²` sub-triangles of a uniformly subdivided triangle, in
/// barycentric `(u, v)` relative to edges `ab`, `ac`.
fn subdivision_centroids(n: usize) -> Vec<(f64, f64)> {
    let nf = n as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n - i {
            out.push(((i as f64 + 1.0 / 3.0) / nf, (j as f64 + 1.0 / 3.0) / nf));
            if i + j + 2 <= n {
                out.push(((i as f64 + 2.0 / 3.0) / nf, (j as f64 + 2.0 / 3.0) / nf));
            }
        }
    }
    out
}

/// Symmetric thresholded surface distance in `[0, 2]`: the fraction of `a`'s
/// samples farther than `theta` from `b`'s surface plus the same fraction
/// from `b` to `a`.
pub fn surface_distance(
    a: &TriMesh,
    b: &TriMesh,
    theta: f64,
    samples_per_area: f64,
) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParam(format!(
            "theta must be > 0, got {theta}"
        )));
    }
    if !(samples_per_area >= 0.0) {
        return Err(Error::InvalidParam("samples_per_area must be >= 0".into()));
    }
    let ga =
        TriangleGrid::new(a).ok_or_else(|| Error::InvalidMesh("first mesh has no faces".into()))?;
    let gb = TriangleGrid::new(b)
        .ok_or_else(|| Error::InvalidMesh("second mesh has no faces".into()))?;
    let frac = |samples: Vec<Vec3>, grid: &TriangleGrid| {
        let far = samples
            .par_iter()
            .filter(|p| grid.closest(p).dist_sq > theta * theta)
            .count();
        far as f64 / samples.len() as f64
    };
    Ok(frac(surface_samples(a, samples_per_area), &gb)
        + frac(surface_samples(b, samples_per_area), &ga))
}
