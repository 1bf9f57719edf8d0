//! Binary PGM (P5, 8-bit) silhouettes: 0 is background, 255 foreground.

use std::io::{BufReader, BufWriter};
use std::path::Path;

use image::codecs::pnm::{PnmDecoder, PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageDecoder, ImageEncoder};

use super::Silhouette;
use crate::{Error, Result};

/// Pixels at or above 128 are foreground.
pub fn load_silhouette(path: impl AsRef<Path>) -> Result<Silhouette> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg,
    };
    let dec = PnmDecoder::new(BufReader::new(file)).map_err(|e| bad(e.to_string()))?;
    if dec.color_type() != image::ColorType::L8 {
        return Err(bad(format!(
            "expected 8-bit gray, got {:?}",
            dec.color_type()
        )));
    }
    let (w, h) = dec.dimensions();
    let mut buf = vec![0u8; dec.total_bytes() as usize];
    dec.read_image(&mut buf).map_err(|e| bad(e.to_string()))?;
    Silhouette::new(
        w as usize,
        h as usize,
        buf.into_iter().map(|b| b >= 128).collect(),
    )
}

pub fn save_silhouette(sil: &Silhouette, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let bytes: Vec<u8> = sil
        .mask()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(
            &bytes,
            sil.width() as u32,
            sil.height() as u32,
            ExtendedColorType::L8,
        )
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::InvalidParam(other.to_string()),
        })
}
