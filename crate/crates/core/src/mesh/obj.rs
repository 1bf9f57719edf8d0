//! Wavefront OBJ, restricted to `v` and `f` records.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::TriMesh;
use crate::{Error, Result, Vec3};

/// Reads an OBJ file. Polygons are fan-triangulated around their first
/// vertex; normals, texture coordinates, groups and materials are skipped.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

pub(crate) fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut vertices = Vec::new();
    // (line number, raw 1-based or negative indices)
    let mut polys: Vec<(usize, Vec<i64>)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let t = tok
                        .next()
                        .ok_or_else(|| parse_err(lineno, "vertex needs 3 coordinates".into()))?;
                    *slot = t
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad coordinate {t:?}")))?;
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx = tok
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        head.parse::<i64>()
                            .map_err(|_| parse_err(lineno, format!("bad face index {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(lineno, "face needs at least 3 vertices".into()));
                }
                polys.push((lineno, idx));
            }
            _ => {}
        }
    }

    let n = vertices.len();
    let mut faces = Vec::new();
    for (lineno, idx) in polys {
        let resolved = idx
            .iter()
            .map(|&i| {
                // negative indices count back from the last vertex read
                let k = if i > 0 { i - 1 } else { n as i64 + i };
                if i == 0 || k < 0 || k >= n as i64 {
                    Err(Error::IndexOutOfRange {
                        path: path.to_path_buf(),
                        line: lineno,
                        index: i,
                        count: n,
                    })
                } else {
                    Ok(k as usize)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for w in 1..resolved.len() - 1 {
            faces.push([resolved[0], resolved[w], resolved[w + 1]]);
        }
    }

    if vertices.is_empty() {
        return Err(parse_err(0, "file has no vertices".into()));
    }
    TriMesh::new(vertices, faces)
}

/// Serializes to OBJ text. Coordinates use the shortest representation that
/// parses back to the same `f64`.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.num_vertices() * 48 + mesh.num_faces() * 24);
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_obj(mesh)).map_err(|e| Error::io(path, e))
}
