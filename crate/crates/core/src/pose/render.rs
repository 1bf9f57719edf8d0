use super::CameraPose;
use crate::mesh::{Silhouette, TriMesh};
use crate::{Error, Result, Vec2};

/// Orthographic silhouette of `mesh` as the union of its projected
/// triangles. Pixel `(row, col)` is sampled at image point `(x, y) = (col,
/// row)`; samples on a shared edge go to exactly one triangle (top-left rule).
pub fn render_silhouette(
    mesh: &TriMesh,
    pose: &CameraPose,
    width: usize,
    height: usize,
) -> Result<Silhouette> {
    let pts: Vec<Vec2> = mesh.vertices().iter().map(|v| pose.project(v)).collect();
    let mut mask = vec![false; width * height];
    for f in mesh.faces() {
        rasterize(&[pts[f[0]], pts[f[1]], pts[f[2]]], width, height, &mut mask);
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptySilhouette);
    }
    Silhouette::new(width, height, mask)
}

fn edge(a: &Vec2, b: &Vec2, p: &Vec2) -> f64 {
    // canonical endpoint order keeps shared edges exactly antisymmetric
    if (b.x, b.y) < (a.x, a.y) {
        return -edge(b, a, p);
    }
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Whether samples exactly on edge `a -> b` belong to the triangle, given
/// that its interior lies where `edge(a, b, ·) > 0`. The inward normal is
/// `(-dy, dx)`; edges whose normal points down (+y), or right when
/// horizontal, win.
fn owns_edge(a: &Vec2, b: &Vec2) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    dx > 0.0 || (dx == 0.0 && dy < 0.0)
}

pub(crate) fn rasterize(tri: &[Vec2; 3], width: usize, height: usize, mask: &mut [bool]) {
    let [mut a, mut b, c] = *tri;
    let area = edge(&a, &b, &c);
    if !(area.abs() > 0.0) {
        return;
    }
    if area < 0.0 {
        std::mem::swap(&mut a, &mut b);
    }
    let lo_x = a.x.min(b.x).min(c.x).ceil().max(0.0);
    let hi_x = a.x.max(b.x).max(c.x).floor().min(width as f64 - 1.0);
    let lo_y = a.y.min(b.y).min(c.y).ceil().max(0.0);
    let hi_y = a.y.max(b.y).max(c.y).floor().min(height as f64 - 1.0);
    if lo_x > hi_x || lo_y > hi_y {
        return;
    }
    let edges = [(a, b), (b, c), (c, a)];
    let own = edges.map(|(p, q)| owns_edge(&p, &q));
    for row in lo_y as usize..=hi_y as usize {
        for col in lo_x as usize..=hi_x as usize {
            let p = Vec2::new(col as f64, row as f64);
            let inside = edges.iter().zip(&own).all(|((u, v), &o)| {
                let e = edge(u, v, &p);
                e > 0.0 || (e == 0.0 && o)
            });
            if inside {
                mask[row * width + col] = true;
            }
        }
    }
}
