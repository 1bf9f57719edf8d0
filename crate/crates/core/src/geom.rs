//! Closest-point queries against triangle meshes.

use crate::mesh::{bounding_box, TriMesh};
use crate::Vec3;

/// Closest point to `p` on triangle `(a, b, c)`, including degenerate
/// triangles. Region tests follow the Voronoi-region walk of Ericson,
/// *Real-Time Collision Detection*, 5.1.5.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = va + vb + vc;
    if denom.abs() <= f64::MIN_POSITIVE {
        // zero-area triangle that slipped past the edge tests
        return [*a, *b, *c]
            .into_iter()
            .min_by(|x, y| (p - x).norm_squared().total_cmp(&(p - y).norm_squared()))
            .unwrap();
    }
    let v = vb / denom;
    let w = vc / denom;
    a + ab * v + ac * w
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub point: Vec3,
    pub face: usize,
    pub dist_sq: f64,
}

/// Uniform grid of triangle buckets over a mesh's bounding box.
#[derive(Debug, Clone)]
pub struct TriangleGrid {
    tris: Vec<[Vec3; 3]>,
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
}

impl TriangleGrid {
    /// Returns `None` when the mesh has no faces.
    pub fn new(mesh: &TriMesh) -> Option<Self> {
        if mesh.num_faces() == 0 {
            return None;
        }
        let tris: Vec<[Vec3; 3]> = (0..mesh.num_faces()).map(|f| mesh.triangle(f)).collect();
        let (lo, hi) = bounding_box(mesh.vertices());
        let ext = hi - lo;
        let max_ext = ext.max().max(1e-12);
        // surface meshes fill ~dims^2 cells, so sqrt(#tris) cells per axis
        // keeps buckets small
        let per_axis = (tris.len() as f64).sqrt().round().clamp(1.0, 128.0);
        let cell = max_ext / per_axis;
        let dims = [0, 1, 2].map(|a| (ext[a] / cell).floor() as usize + 1);
        let origin = lo;
        let mut grid = Self {
            tris,
            origin,
            cell,
            dims,
            buckets: vec![Vec::new(); dims[0] * dims[1] * dims[2]],
        };
        for (t, tri) in grid.tris.iter().enumerate() {
            let (tlo, thi) = bounding_box(tri);
            let a = grid.cell_of(&tlo);
            let b = grid.cell_of(&thi);
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    for k in a[2]..=b[2] {
                        let idx = grid.flat([i, j, k]);
                        grid.buckets[idx].push(t as u32);
                    }
                }
            }
        }
        Some(grid)
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    fn cell_of(&self, p: &Vec3) -> [usize; 3] {
        [0, 1, 2].map(|a| {
            let f = ((p[a] - self.origin[a]) / self.cell).floor();
            (f.max(0.0) as usize).min(self.dims[a] - 1)
        })
    }

    /// Exact closest point on the mesh surface.
    pub fn closest(&self, p: &Vec3) -> SurfacePoint {
        let center = self.cell_of(p);
        let mut best = SurfacePoint {
            point: Vec3::zeros(),
            face: usize::MAX,
            dist_sq: f64::INFINITY,
        };
        let max_ring = *self.dims.iter().max().unwrap();
        for ring in 0..=max_ring {
            let lo = center.map(|c| c.saturating_sub(ring));
            let hi = [0, 1, 2].map(|a| (center[a] + ring).min(self.dims[a] - 1));
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for k in lo[2]..=hi[2] {
                        let on_shell = [i, j, k]
                            .iter()
                            .zip(&center)
                            .any(|(&x, &c)| x.abs_diff(c) == ring);
                        if !on_shell {
                            continue;
                        }
                        for &t in &self.buckets[self.flat([i, j, k])] {
                            let [a, b, c] = &self.tris[t as usize];
                            let q = closest_point_on_triangle(p, a, b, c);
                            let d = (q - p).norm_squared();
                            if d < best.dist_sq || (d == best.dist_sq && (t as usize) < best.face) {
                                best = SurfacePoint {
                                    point: q,
                                    face: t as usize,
                                    dist_sq: d,
                                };
                            }
                        }
                    }
                }
            }
            // distance from p to the unexplored region beyond this ring
            let mut bound = f64::INFINITY;
            for a in 0..3 {
                if lo[a] > 0 {
                    let wall = self.origin[a] + lo[a] as f64 * self.cell;
                    bound = bound.min(p[a] - wall);
                }
                if hi[a] + 1 < self.dims[a] {
                    let wall = self.origin[a] + (hi[a] + 1) as f64 * self.cell;
                    bound = bound.min(wall - p[a]);
                }
            }
            if bound == f64::INFINITY {
                break;
            }
            if best.face != usize::MAX && best.dist_sq <= bound.max(0.0).powi(2) {
                break;
            }
        }
        best
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.closest(p).dist_sq.sqrt()
    }
}

/// Brute-force reference over every triangle.
pub fn closest_point_brute_force(mesh: &TriMesh, p: &Vec3) -> Option<SurfacePoint> {
    (0..mesh.num_faces())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            let q = closest_point_on_triangle(p, &a, &b, &c);
            SurfacePoint {
                point: q,
                face: f,
                dist_sq: (q - p).norm_squared(),
            }
        })
        .min_by(|x, y| x.dist_sq.total_cmp(&y.dist_sq))
}

/// Barycentric coordinates of `p` with respect to triangle `(a, b, c)`.
pub fn barycentric(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> [f64; 3] {
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let denom = d00 * d11 - d01 * d01;
    if denom.abs() <= f64::MIN_POSITIVE {
        return [1.0, 0.0, 0.0];
    }
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    [1.0 - v - w, v, w]
}
