//! Parametric shape families with stable topology and anchor ids.
//!
//! Every family builds its surface as the boundary of a union of grid cells,
//! so two members generated at the same resolution share vertex order and
//! faces. Vertex positions are linear in the family parameters, which makes
//! within-family correspondence exact.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{AnchorSet3D, TriMesh};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    /// `[sx, sy, sz]`, edge lengths, centered at the origin.
    Box,
    /// `[a, b, c]`, semi-axes. Resolution must be even.
    Ellipsoid,
    /// `[width, depth, height, thickness]`: an L profile in the y-z plane
    /// extruded along x. Requires `thickness < depth` and `thickness < height`.
    LBracket,
}

impl ShapeFamily {
    pub fn param_count(self) -> usize {
        match self {
            ShapeFamily::Box | ShapeFamily::Ellipsoid => 3,
            ShapeFamily::LBracket => 4,
        }
    }
}

impl std::str::FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(ShapeFamily::Box),
            "ellipsoid" => Ok(ShapeFamily::Ellipsoid),
            "l_bracket" => Ok(ShapeFamily::LBracket),
            _ => Err(Error::InvalidParam(format!("unknown shape family {s:?}"))),
        }
    }
}

const MAX_EXTENT: f64 = 1e3;
const MAX_RESOLUTION: usize = 64;

/// Builds a watertight family member plus its anchors.
///
/// Box anchors are the 8 corners (`x+y+z+`, ...), ellipsoid anchors the 6
/// axis extrema (`x+`, ...) plus 4 equatorial diagonals (`x+y+`, ...), and
/// L-bracket anchors the 12 corners of the extruded profile. All anchors are
/// mesh vertices.
pub fn synth_shape(
    family: ShapeFamily,
    params: &[f64],
    resolution: usize,
) -> Result<(TriMesh, AnchorSet3D)> {
    if params.len() != family.param_count() {
        return Err(Error::InvalidParam(format!(
            "{family:?} takes {} parameters, got {}",
            family.param_count(),
            params.len()
        )));
    }
    if params.iter().any(|&p| !(p > 0.0 && p <= MAX_EXTENT)) {
        return Err(Error::InvalidParam(format!(
            "parameters must lie in (0, {MAX_EXTENT}], got {params:?}"
        )));
    }
    if resolution == 0 || resolution > MAX_RESOLUTION {
        return Err(Error::InvalidParam(format!(
            "resolution must lie in [1, {MAX_RESOLUTION}], got {resolution}"
        )));
    }
    match family {
        ShapeFamily::Box => Ok(make_box(params[0], params[1], params[2], resolution)),
        ShapeFamily::Ellipsoid => {
            if !resolution.is_multiple_of(2) {
                return Err(Error::InvalidParam(
                    "ellipsoid resolution must be even".into(),
                ));
            }
            Ok(make_ellipsoid(params[0], params[1], params[2], resolution))
        }
        ShapeFamily::LBracket => {
            let (w, d, h, t) = (params[0], params[1], params[2], params[3]);
            if !(t < d && t < h) {
                return Err(Error::InvalidParam(
                    "l_bracket thickness must be below depth and height".into(),
                ));
            }
            if resolution < 2 {
                return Err(Error::InvalidParam(
                    "l_bracket resolution must be at least 2".into(),
                ));
            }
            Ok(make_l_bracket(w, d, h, t, resolution))
        }
    }
}

fn linspace(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    (0..=cells)
        .map(|i| lo + (hi - lo) * i as f64 / cells as f64)
        .collect()
}

/// Node coordinates along one axis made of consecutive segments.
fn segments(breaks: &[f64], cells: &[usize]) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for (w, &n) in breaks.windows(2).zip(cells) {
        out.extend(linspace(w[0], w[1], n).into_iter().skip(1));
    }
    out
}

/// Boundary of the occupied cells of a rectilinear grid. Returns vertices,
/// outward-oriented triangles and the grid node of every vertex.
fn cell_boundary(
    axes: [&[f64]; 3],
    occupied: impl Fn([usize; 3]) -> bool,
) -> (Vec<Vec3>, Vec<[usize; 3]>, HashMap<[usize; 3], usize>) {
    let dims = [axes[0].len() - 1, axes[1].len() - 1, axes[2].len() - 1];
    let inside = |c: [i64; 3]| {
        (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < dims[a])
            && occupied([c[0] as usize, c[1] as usize, c[2] as usize])
    };

    let mut nodes: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut node_index = |n: [usize; 3], vertices: &mut Vec<Vec3>| {
        *nodes.entry(n).or_insert_with(|| {
            vertices.push(Vec3::new(axes[0][n[0]], axes[1][n[1]], axes[2][n[2]]));
            vertices.len() - 1
        })
    };

    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let cell = [i, j, k];
                if !occupied(cell) {
                    continue;
                }
                for a in 0..3 {
                    for positive in [false, true] {
                        let mut nb = [i as i64, j as i64, k as i64];
                        nb[a] += if positive { 1 } else { -1 };
                        if inside(nb) {
                            continue;
                        }
                        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                        let corner = |db: usize, dc: usize| {
                            let mut n = cell;
                            n[a] += positive as usize;
                            n[b] += db;
                            n[c] += dc;
                            n
                        };
                        // (b, c) counter-clockwise seen from +a
                        let mut quad = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                        if !positive {
                            quad.reverse();
                        }
                        let q = quad.map(|n| node_index(n, &mut vertices));
                        faces.push([q[0], q[1], q[2]]);
                        faces.push([q[0], q[2], q[3]]);
                    }
                }
            }
        }
    }
    (vertices, faces, nodes)
}

fn sign_char(positive: bool) -> char {
    if positive {
        '+'
    } else {
        '-'
    }
}

fn make_box(sx: f64, sy: f64, sz: f64, r: usize) -> (TriMesh, AnchorSet3D) {
    let xs = linspace(-sx / 2.0, sx / 2.0, r);
    let ys = linspace(-sy / 2.0, sy / 2.0, r);
    let zs = linspace(-sz / 2.0, sz / 2.0, r);
    let (vertices, faces, _) = cell_boundary([&xs, &ys, &zs], |_| true);

    let mut ids = Vec::new();
    let mut pts = Vec::new();
    for px in [true, false] {
        for py in [true, false] {
            for pz in [true, false] {
                ids.push(format!(
                    "x{}y{}z{}",
                    sign_char(px),
                    sign_char(py),
                    sign_char(pz)
                ));
                let s = |p: bool| if p { 0.5 } else { -0.5 };
                pts.push(Vec3::new(s(px) * sx, s(py) * sy, s(pz) * sz));
            }
        }
    }
    let mesh = TriMesh::new(vertices, faces).expect("box mesh is valid by construction");
    let anchors = AnchorSet3D::new(ids, pts).expect("box anchors are valid");
    (mesh, anchors)
}

fn make_ellipsoid(a: f64, b: f64, c: f64, r: usize) -> (TriMesh, AnchorSet3D) {
    let g = linspace(-1.0, 1.0, r);
    let (cube, faces, _) = cell_boundary([&g, &g, &g], |_| true);
    let scale = Vec3::new(a, b, c);
    let vertices = cube
        .iter()
        .map(|v| v.normalize().component_mul(&scale))
        .collect();

    let mut ids = Vec::new();
    let mut pts = Vec::new();
    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
        for positive in [true, false] {
            ids.push(format!("{name}{}", sign_char(positive)));
            let mut p = Vec3::zeros();
            p[axis] = if positive { scale[axis] } else { -scale[axis] };
            pts.push(p);
        }
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for px in [true, false] {
        for py in [true, false] {
            ids.push(format!("x{}y{}", sign_char(px), sign_char(py)));
            let sx = if px { h } else { -h };
            let sy = if py { h } else { -h };
            pts.push(Vec3::new(sx * a, sy * b, 0.0));
        }
    }
    let mesh = TriMesh::new(vertices, faces).expect("ellipsoid mesh is valid by construction");
    let anchors = AnchorSet3D::new(ids, pts).expect("ellipsoid anchors are valid");
    (mesh, anchors)
}

fn make_l_bracket(w: f64, d: f64, h: f64, t: f64, r: usize) -> (TriMesh, AnchorSet3D) {
    let thin = (r / 3).max(1);
    let xs = linspace(-w / 2.0, w / 2.0, r);
    let ys = segments(&[-d / 2.0, t - d / 2.0, d / 2.0], &[thin, r]);
    let zs = segments(&[-h / 2.0, t - h / 2.0, h / 2.0], &[thin, r]);
    let (vertices, faces, _) = cell_boundary([&xs, &ys, &zs], |[_, j, k]| j < thin || k < thin);

    // profile corners in (y, z), walking around the L
    let profile = [
        ("heel", 0.0, 0.0),
        ("toe_lo", d, 0.0),
        ("toe_hi", d, t),
        ("inner", t, t),
        ("top_front", t, h),
        ("top_back", 0.0, h),
    ];
    let mut ids = Vec::new();
    let mut pts = Vec::new();
    for px in [true, false] {
        for (name, y, z) in profile {
            ids.push(format!("x{}{name}", sign_char(px)));
            let x = if px { w / 2.0 } else { -w / 2.0 };
            pts.push(Vec3::new(x, y - d / 2.0, z - h / 2.0));
        }
    }
    let mesh = TriMesh::new(vertices, faces).expect("bracket mesh is valid by construction");
    let anchors = AnchorSet3D::new(ids, pts).expect("bracket anchors are valid");
    (mesh, anchors)
}
