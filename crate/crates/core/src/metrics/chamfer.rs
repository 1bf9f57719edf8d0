use rayon::prelude::*;

use crate::mesh::Silhouette;
use crate::Vec2;

/// Euclidean distance from every pixel to the nearest foreground pixel, with
/// a central-difference gradient field.
///
/// Pixel `(row, col)` sits at image point `(x, y) = (col, row)`. Continuous
/// queries ([`ChamferMap::sample`]) interpolate bilinearly inside
/// `[0, W-1] x [0, H-1]`; outside, the value keeps growing as the border value
/// plus the Euclidean distance to the nearest in-range point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChamferMap {
    width: usize,
    height: usize,
    dist: Vec<f64>,
    grad: Vec<[f64; 2]>,
}

const FAR: f64 = 1e20;

/// Lower envelope of parabolas rooted at `(i, f[i])`.
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        let mut s;
        loop {
            let vk = v[k] as f64;
            s = ((f[q] + qf * qf) - (f[v[k]] + vk * vk)) / (2.0 * qf - 2.0 * vk);
            // z[0] is -inf, so this stops at k == 0
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance transform of a silhouette.
pub fn chamfer_map(sil: &Silhouette) -> ChamferMap {
    let (w, h) = (sil.width(), sil.height());
    let mut sq: Vec<f64> = sil
        .mask()
        .iter()
        .map(|&b| if b { 0.0 } else { FAR })
        .collect();

    // columns
    let cols: Vec<Vec<f64>> = (0..w)
        .into_par_iter()
        .map(|c| {
            let f: Vec<f64> = (0..h).map(|r| sq[r * w + c]).collect();
            let mut out = vec![0.0; h];
            edt_1d(&f, &mut out);
            out
        })
        .collect();
    for (c, col) in cols.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            sq[r * w + c] = v;
        }
    }
    // rows
    sq.par_chunks_mut(w).for_each(|row| {
        let f = row.to_vec();
        edt_1d(&f, row);
    });

    let dist: Vec<f64> = sq.iter().map(|&d| d.sqrt()).collect();
    let at = |r: usize, c: usize| dist[r * w + c];
    let diff = |lo: f64, hi: f64, span: usize| {
        if span == 0 {
            0.0
        } else {
            (hi - lo) / span as f64
        }
    };
    let mut grad = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let (c0, c1) = (c.saturating_sub(1), (c + 1).min(w - 1));
            let (r0, r1) = (r.saturating_sub(1), (r + 1).min(h - 1));
            grad.push([
                diff(at(r, c0), at(r, c1), c1 - c0),
                diff(at(r0, c), at(r1, c), r1 - r0),
            ]);
        }
    }
    ChamferMap {
        width: w,
        height: h,
        dist,
        grad,
    }
}

impl ChamferMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn distance(&self, row: usize, col: usize) -> f64 {
        self.dist[row * self.width + col]
    }

    /// Central-difference gradient `(d/dx, d/dy)` at a pixel.
    pub fn grid_gradient(&self, row: usize, col: usize) -> [f64; 2] {
        self.grad[row * self.width + col]
    }

    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    pub fn sample(&self, p: Vec2) -> f64 {
        self.sample_with_gradient(p).0
    }

    /// Interpolated distance at `p = (x, y)` and its exact derivative. At
    /// pixel-grid lines the derivative is one-sided.
    pub fn sample_with_gradient(&self, p: Vec2) -> (f64, Vec2) {
        let xmax = (self.width - 1) as f64;
        let ymax = (self.height - 1) as f64;
        let q = Vec2::new(p.x.clamp(0.0, xmax), p.y.clamp(0.0, ymax));

        let x0 = (q.x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (q.y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = q.x - x0 as f64;
        let fy = q.y - y0 as f64;
        let d00 = self.distance(y0, x0);
        let d01 = self.distance(y0, x1);
        let d10 = self.distance(y1, x0);
        let d11 = self.distance(y1, x1);
        let value = (1.0 - fy) * ((1.0 - fx) * d00 + fx * d01) + fy * ((1.0 - fx) * d10 + fx * d11);
        let mut grad = Vec2::new(
            (1.0 - fy) * (d01 - d00) + fy * (d11 - d10),
            (1.0 - fx) * (d10 - d00) + fx * (d11 - d01),
        );
        // clamped directions do not move the interpolation point
        if p.x != q.x {
            grad.x = 0.0;
        }
        if p.y != q.y {
            grad.y = 0.0;
        }

        let off = p - q;
        let out = off.norm();
        if out > 0.0 {
            (value + out, grad + off / out)
        } else {
            (value, grad)
        }
    }
}
