use std::collections::{HashMap, VecDeque};

use bitvec::prelude::*;

use crate::mesh::{bounding_box, TriMesh};
use crate::{Error, Result, Vec3};

/// Cubic voxel lattice placement shared by every grid in a comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelFrame {
    origin: Vec3,
    voxel: f64,
    resolution: usize,
}

impl VoxelFrame {
    /// Frame around the union bounding box of `meshes`. Voxels are cubes; the
    /// longest extent spans `resolution - 2` voxels, leaving one empty layer
    /// on each side so the exterior flood can reach around the shape.
    pub fn enclosing(meshes: &[&TriMesh], resolution: usize) -> Result<Self> {
        if resolution < 8 {
            return Err(Error::InvalidParam(format!(
                "voxel resolution must be >= 8, got {resolution}"
            )));
        }
        let pts: Vec<Vec3> = meshes
            .iter()
            .flat_map(|m| m.vertices().iter().copied())
            .collect();
        if pts.is_empty() {
            return Err(Error::Degenerate("no points to frame".into()));
        }
        let (lo, hi) = bounding_box(&pts);
        let ext = (hi - lo).max();
        if !(ext > 0.0 && ext.is_finite()) {
            return Err(Error::Degenerate("voxel frame has zero extent".into()));
        }
        let voxel = ext / (resolution - 2) as f64;
        let center = 0.5 * (lo + hi);
        Ok(Self {
            origin: center - Vec3::repeat(0.5 * voxel * resolution as f64),
            voxel,
            resolution,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    /// Center of voxel `(i, j, k)` in world units.
    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.voxel
    }
}

/// `r³` occupancy bits in a [`VoxelFrame`], x-major then y then z.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    frame: VoxelFrame,
    occupancy: BitVec,
}

impl VoxelGrid {
    pub fn frame(&self) -> &VoxelFrame {
        &self.frame
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        let r = self.frame.resolution;
        self.occupancy[(i * r + j) * r + k]
    }

    pub fn count(&self) -> usize {
        self.occupancy.count_ones()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.occupancy.len() as f64
    }
}

/// Solid occupancy of `mesh` in `frame`.
///
/// Closed meshes (every edge shared by exactly two faces) mark the voxels
/// whose centers are inside, by ray parity along x. Other meshes mark every
/// voxel a triangle touches plus whatever the exterior flood from the grid
/// boundary cannot reach, so open surfaces keep only their surface voxels.
pub fn voxelize(mesh: &TriMesh, frame: &VoxelFrame) -> Result<VoxelGrid> {
    if frame.resolution < 8 || !(frame.voxel > 0.0) {
        return Err(Error::Degenerate("invalid voxel frame".into()));
    }
    let occupancy = if is_closed(mesh) {
        scanline_fill(mesh, frame)
    } else {
        flood_fill(mesh, frame)
    };
    Ok(VoxelGrid {
        frame: *frame,
        occupancy,
    })
}

fn is_closed(mesh: &TriMesh) -> bool {
    if mesh.num_faces() == 0 {
        return false;
    }
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for f in mesh.faces() {
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    count.values().all(|&c| c == 2)
}

/// 2D edge function and ownership rule shared with the rasterizer: samples
/// exactly on an edge belong to one side only, so each ray crosses a closed
/// surface an even number of times. The value is computed from the
/// lexicographically smaller endpoint so a shared edge gives its two
/// triangles exactly opposite signs.
fn edge2(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    if (b[0], b[1]) < (a[0], a[1]) {
        return -edge2(b, a, p);
    }
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn owns_edge2(a: [f64; 2], b: [f64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dx > 0.0 || (dx == 0.0 && dy < 0.0)
}

fn scanline_fill(mesh: &TriMesh, frame: &VoxelFrame) -> BitVec {
    let r = frame.resolution;
    // voxel coordinates with centers at integers
    let to_grid = |p: &Vec3| (p - frame.origin) / frame.voxel - Vec3::repeat(0.5);
    let mut hits: Vec<Vec<f64>> = vec![Vec::new(); r * r];
    for f in 0..mesh.num_faces() {
        let t = mesh.triangle(f).map(|p| to_grid(&p));
        let mut q = t.map(|p| [p.y, p.z]);
        let mut xs = t.map(|p| p.x);
        let area = edge2(q[0], q[1], q[2]);
        if !(area.abs() > 0.0) {
            continue;
        }
        if area < 0.0 {
            q.swap(0, 1);
            xs.swap(0, 1);
        }
        let area = area.abs();
        let lo = |a: usize| {
            q.iter()
                .map(|p| p[a])
                .fold(f64::INFINITY, f64::min)
                .ceil()
                .max(0.0)
        };
        let hi = |a: usize| {
            q.iter()
                .map(|p| p[a])
                .fold(f64::NEG_INFINITY, f64::max)
                .floor()
                .min(r as f64 - 1.0)
        };
        let (j0, j1, k0, k1) = (lo(0), hi(0), lo(1), hi(1));
        if j0 > j1 || k0 > k1 {
            continue;
        }
        let own = [
            owns_edge2(q[1], q[2]),
            owns_edge2(q[2], q[0]),
            owns_edge2(q[0], q[1]),
        ];
        for j in j0 as usize..=j1 as usize {
            for k in k0 as usize..=k1 as usize {
                let p = [j as f64, k as f64];
                let e = [
                    edge2(q[1], q[2], p),
                    edge2(q[2], q[0], p),
                    edge2(q[0], q[1], p),
                ];
                let inside = e
                    .iter()
                    .zip(&own)
                    .all(|(&v, &o)| v > 0.0 || (v == 0.0 && o));
                if inside {
                    let x = (e[0] * xs[0] + e[1] * xs[1] + e[2] * xs[2]) / area;
                    hits[j * r + k].push(x);
                }
            }
        }
    }
    let mut occ = bitvec![0; r * r * r];
    for j in 0..r {
        for k in 0..r {
            let h = &mut hits[j * r + k];
            if h.is_empty() {
                continue;
            }
            h.sort_by(f64::total_cmp);
            let mut n = 0;
            for i in 0..r {
                while n < h.len() && h[n] < i as f64 {
                    n += 1;
                }
                if n % 2 == 1 {
                    occ.set((i * r + j) * r + k, true);
                }
            }
        }
    }
    occ
}

fn flood_fill(mesh: &TriMesh, frame: &VoxelFrame) -> BitVec {
    let r = frame.resolution;
    let idx = |i: usize, j: usize, k: usize| (i * r + j) * r + k;
    let mut surface = bitvec![0; r * r * r];
    let half = Vec3::repeat(0.5 * frame.voxel);

    for f in 0..mesh.num_faces() {
        let tri = mesh.triangle(f);
        let (lo, hi) = bounding_box(&tri);
        let cell = |p: f64, a: usize| -> Option<usize> {
            let x = ((p - frame.origin[a]) / frame.voxel).floor();
            if x < -1.0 || x > r as f64 {
                None
            } else {
                Some((x.max(0.0) as usize).min(r - 1))
            }
        };
        let (Some(i0), Some(j0), Some(k0), Some(i1), Some(j1), Some(k1)) = (
            cell(lo.x, 0),
            cell(lo.y, 1),
            cell(lo.z, 2),
            cell(hi.x, 0),
            cell(hi.y, 1),
            cell(hi.z, 2),
        ) else {
            continue;
        };
        for i in i0..=i1 {
            for j in j0..=j1 {
                for k in k0..=k1 {
                    if !surface[idx(i, j, k)]
                        && tri_box_overlap(&frame.center(i, j, k), &half, &tri)
                    {
                        surface.set(idx(i, j, k), true);
                    }
                }
            }
        }
    }

    let mut outside = bitvec![0; r * r * r];
    let mut queue = VecDeque::new();
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                let on_boundary = [i, j, k].iter().any(|&c| c == 0 || c == r - 1);
                if on_boundary && !surface[idx(i, j, k)] {
                    outside.set(idx(i, j, k), true);
                    queue.push_back([i, j, k]);
                }
            }
        }
    }
    while let Some([i, j, k]) = queue.pop_front() {
        for (a, d) in [(0, -1i64), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1)] {
            let mut n = [i as i64, j as i64, k as i64];
            n[a] += d;
            if n[a] < 0 || n[a] >= r as i64 {
                continue;
            }
            let id = idx(n[0] as usize, n[1] as usize, n[2] as usize);
            if !surface[id] && !outside[id] {
                outside.set(id, true);
                queue.push_back([n[0] as usize, n[1] as usize, n[2] as usize]);
            }
        }
    }
    !outside
}

/// `|a ∩ b| / |a ∪ b|`.
pub fn voxel_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    if a.frame != b.frame {
        return Err(Error::FrameMismatch);
    }
    let inter = (a.occupancy.clone() & &b.occupancy).count_ones();
    let union = (a.occupancy.clone() | &b.occupancy).count_ones();
    if union == 0 {
        return Err(Error::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}

/// Separating-axis triangle/box test (Akenine-Möller). Touching counts as
/// overlap.
fn tri_box_overlap(center: &Vec3, half: &Vec3, tri: &[Vec3; 3]) -> bool {
    let v = tri.map(|p| p - center);
    let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];

    // cross products of box axes with triangle edges
    for edge in &e {
        for axis in 0..3 {
            let mut a = Vec3::zeros();
            a[axis] = 1.0;
            let ax = a.cross(edge);
            if ax.norm_squared() == 0.0 {
                continue;
            }
            let p = v.map(|x| x.dot(&ax));
            let rad = half.x * ax.x.abs() + half.y * ax.y.abs() + half.z * ax.z.abs();
            let (mn, mx) = (p[0].min(p[1]).min(p[2]), p[0].max(p[1]).max(p[2]));
            if mn > rad || mx < -rad {
                return false;
            }
        }
    }
    // box face normals
    for a in 0..3 {
        let (mn, mx) = (
            v[0][a].min(v[1][a]).min(v[2][a]),
            v[0][a].max(v[1][a]).max(v[2][a]),
        );
        if mn > half[a] || mx < -half[a] {
            return false;
        }
    }
    // triangle plane
    let n = e[0].cross(&e[1]);
    let d = n.dot(&v[0]);
    let rad = half.x * n.x.abs() + half.y * n.y.abs() + half.z * n.z.abs();
    d.abs() <= rad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{synth_shape, ShapeFamily};

    #[test]
    fn watertight_cube_is_solid_block() {
        let (m, _) = synth_shape(ShapeFamily::Box, &[1.0, 1.0, 1.0], 2).unwrap();
        let frame = VoxelFrame::enclosing(&[&m], 32).unwrap();
        let g = voxelize(&m, &frame).unwrap();
        // occupied voxels form one axis-aligned block with no holes
        let r = 32;
        let (mut lo, mut hi) = ([r; 3], [0; 3]);
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    if g.get(i, j, k) {
                        for (a, c) in [i, j, k].into_iter().enumerate() {
                            lo[a] = lo[a].min(c);
                            hi[a] = hi[a].max(c);
                        }
                    }
                }
            }
        }
        let block: usize = (0..3).map(|a| hi[a] - lo[a] + 1).product();
        assert_eq!(g.count(), block);
        assert!(block >= 30 * 30 * 30);
    }

    #[test]
    fn open_plane_not_filled() {
        let m = TriMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.3),
                Vec3::new(1.0, 0.0, 0.3),
                Vec3::new(1.0, 1.0, 0.3),
                Vec3::new(0.0, 1.0, 0.3),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let frame = VoxelFrame::enclosing(&[&m], 16).unwrap();
        let g = voxelize(&m, &frame).unwrap();
        // only the slab(s) touching the plane, nothing filled around it
        let n = g.count();
        assert!((14 * 14..=2 * 16 * 16).contains(&n), "{n}");
        let z = ((0.3 - frame.origin().z) / frame.voxel_size()).round() as usize;
        for i in 0..16 {
            for j in 0..16 {
                for k in 0..16 {
                    if g.get(i, j, k) {
                        assert!(k + 1 == z || k == z, "{k} vs {z}");
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_volume_fraction() {
        let (m, _) = synth_shape(ShapeFamily::Ellipsoid, &[0.5, 0.5, 0.5], 40).unwrap();
        let frame = VoxelFrame::enclosing(&[&m], 128).unwrap();
        let g = voxelize(&m, &frame).unwrap();
        let extent = frame.voxel_size() * 128.0;
        let analytic = std::f64::consts::PI / 6.0 * (1.0 / extent).powi(3);
        let rel = (g.fraction() - analytic).abs() / analytic;
        assert!(
            rel < 0.03,
            "fraction {} vs {analytic} (rel {rel})",
            g.fraction()
        );
    }

    #[test]
    fn offset_cubes_third() {
        let (a, _) = synth_shape(ShapeFamily::Box, &[1.0, 1.0, 1.0], 1).unwrap();
        let shifted: Vec<Vec3> = a
            .vertices()
            .iter()
            .map(|v| v + Vec3::new(0.5, 0.0, 0.0))
            .collect();
        let b = a.with_vertices(shifted).unwrap();
        let frame = VoxelFrame::enclosing(&[&a, &b], 128).unwrap();
        let iou = voxel_iou(
            &voxelize(&a, &frame).unwrap(),
            &voxelize(&b, &frame).unwrap(),
        )
        .unwrap();
        assert!((iou - 1.0 / 3.0).abs() < 0.02, "{iou}");
    }

    #[test]
    fn identical_grids_and_frame_mismatch() {
        let (a, _) = synth_shape(ShapeFamily::Box, &[1.0, 0.5, 0.5], 1).unwrap();
        let f1 = VoxelFrame::enclosing(&[&a], 16).unwrap();
        let g = voxelize(&a, &f1).unwrap();
        assert_eq!(voxel_iou(&g, &g).unwrap(), 1.0);
        let f2 = VoxelFrame::enclosing(&[&a], 17).unwrap();
        let h = voxelize(&a, &f2).unwrap();
        assert!(matches!(voxel_iou(&g, &h), Err(Error::FrameMismatch)));
        assert!(VoxelFrame::enclosing(&[&a], 4).is_err());
    }

    #[test]
    fn empty_union() {
        let m = TriMesh::new(vec![Vec3::zeros(), Vec3::repeat(1.0)], vec![]).unwrap();
        let frame = VoxelFrame::enclosing(&[&m], 8).unwrap();
        let g = voxelize(&m, &frame).unwrap();
        assert_eq!(g.count(), 0);
        assert!(matches!(voxel_iou(&g, &g), Err(Error::EmptyUnion)));
    }
}
