//! Anchor CSV files: `id,x,y,z` for 3D and `id,x,y,visible` for 2D, each with
//! a header row.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnchorSet2D, AnchorSet3D};
use crate::{Error, Result, Vec2, Vec3};

#[derive(Serialize, Deserialize)]
struct Row3 {
    id: String,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Serialize, Deserialize)]
struct Row2 {
    id: String,
    x: f64,
    y: f64,
    visible: u8,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("{kind:?}"),
        },
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_err(path, e))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_anchors_3d(path: impl AsRef<Path>) -> Result<AnchorSet3D> {
    let path = path.as_ref();
    let rows: Vec<Row3> = read_rows(path)?;
    let (ids, pts) = rows
        .into_iter()
        .map(|r| (r.id, Vec3::new(r.x, r.y, r.z)))
        .unzip();
    AnchorSet3D::new(ids, pts)
}

pub fn save_anchors_3d(anchors: &AnchorSet3D, path: impl AsRef<Path>) -> Result<()> {
    let rows = anchors
        .ids()
        .iter()
        .zip(anchors.points())
        .map(|(id, p)| Row3 {
            id: id.clone(),
            x: p.x,
            y: p.y,
            z: p.z,
        });
    write_rows(path.as_ref(), rows)
}

pub fn load_anchors_2d(path: impl AsRef<Path>) -> Result<AnchorSet2D> {
    let path = path.as_ref();
    let rows: Vec<Row2> = read_rows(path)?;
    let mut ids = Vec::with_capacity(rows.len());
    let mut pts = Vec::with_capacity(rows.len());
    let mut vis = Vec::with_capacity(rows.len());
    for (i, r) in rows.into_iter().enumerate() {
        if r.visible > 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                msg: format!("visible must be 0 or 1, got {}", r.visible),
            });
        }
        ids.push(r.id);
        pts.push(Vec2::new(r.x, r.y));
        vis.push(r.visible == 1);
    }
    AnchorSet2D::new(ids, pts, vis)
}

pub fn save_anchors_2d(anchors: &AnchorSet2D, path: impl AsRef<Path>) -> Result<()> {
    let rows = anchors
        .ids()
        .iter()
        .zip(anchors.points())
        .zip(anchors.visible())
        .map(|((id, p), &v)| Row2 {
            id: id.clone(),
            x: p.x,
            y: p.y,
            visible: v as u8,
        });
    write_rows(path.as_ref(), rows)
}
