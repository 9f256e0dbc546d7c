//! Label-map files: 16-bit grayscale PNG when every label fits in `u16`,
//! otherwise raw `.lbl` (little-endian `u32` H and W, then `u32` labels).

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageReader, Luma};

use crate::error::{Error, Result};
use crate::raster::LabelMap;

pub const LBL_HEADER_LEN: usize = 8;

pub fn encode_lbl(labels: &LabelMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(LBL_HEADER_LEN + labels.len() * 4);
    out.extend_from_slice(&(labels.height() as u32).to_le_bytes());
    out.extend_from_slice(&(labels.width() as u32).to_le_bytes());
    for l in labels.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn decode_lbl(bytes: &[u8]) -> Result<LabelMap> {
    if bytes.len() < LBL_HEADER_LEN {
        return Err(Error::Truncated {
            expected: LBL_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let h = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = LBL_HEADER_LEN + h * w * 4;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let labels = bytes[LBL_HEADER_LEN..expected]
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    LabelMap::new(h, w, labels)
}

pub fn fits_png16(labels: &LabelMap) -> bool {
    labels.labels().iter().all(|&l| l <= u16::MAX as u32)
}

/// Writes `<dir>/<stem>.png` or `<dir>/<stem>.lbl` and returns the path used.
pub fn save_label_map(labels: &LabelMap, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    if fits_png16(labels) {
        let path = dir.join(format!("{stem}.png"));
        let raw: Vec<u16> = labels.labels().iter().map(|&l| l as u16).collect();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(labels.width() as u32, labels.height() as u32, raw)
                .expect("buffer length matches dims");
        buf.save(&path).map_err(|source| Error::Encode {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    } else {
        let path = dir.join(format!("{stem}.lbl"));
        fs::write(&path, encode_lbl(labels)).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Reads a `.lbl` file or an 8/16-bit grayscale PNG. Values are kept as stored.
pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let is_lbl = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("lbl"));
    if is_lbl {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        return decode_lbl(&bytes);
    }
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Decode {
            path: path.to_path_buf(),
            source,
        })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let labels: Vec<u32> = match img {
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(Error::UnsupportedChannels(
                other.color().channel_count() as usize
            ))
        }
    };
    LabelMap::new(h, w, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let map = LabelMap::from_fn(5, 7, |x, y| (x * 9000 + y) as u32).unwrap();
        let path = save_label_map(&map, dir.path(), "labels").unwrap();
        assert_eq!(path.extension().unwrap(), "png");
        assert_eq!(load_label_map(&path).unwrap(), map);
    }

    #[test]
    fn large_labels_use_lbl() {
        let dir = tempfile::tempdir().unwrap();
        let map = LabelMap::from_fn(3, 4, |x, y| (x + y * 4) as u32 * 40_000).unwrap();
        let path = save_label_map(&map, dir.path(), "labels").unwrap();
        assert_eq!(path.extension().unwrap(), "lbl");
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 12 * 4);
        assert_eq!(&bytes[0..4], &3u32.to_le_bytes());
        assert_eq!(&bytes[4..8], &4u32.to_le_bytes());
        assert_eq!(load_label_map(&path).unwrap(), map);
    }

    #[test]
    fn truncated_lbl_is_rejected() {
        let map = LabelMap::constant(2, 2, 1).unwrap();
        let bytes = encode_lbl(&map);
        assert!(matches!(
            decode_lbl(&bytes[..bytes.len() - 1]),
            Err(Error::Truncated { .. })
        ));
    }
}
