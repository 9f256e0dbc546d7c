//! Boundary overlays: base superpixels in black, clustered regions in blue.

use crate::error::{Error, Result};
use crate::metrics::extract_boundaries;
use crate::raster::{LabelMap, RasterImage};

pub const BASE_COLOR: [u8; 3] = [0, 0, 0];
pub const CLUSTER_COLOR: [u8; 3] = [0, 0, 255];

fn paint(out: &mut RasterImage, labels: &LabelMap, color: [u8; 3]) -> Result<()> {
    if labels.height() != out.height() || labels.width() != out.width() {
        return Err(Error::DimensionMismatch(format!(
            "labels {}x{} vs image {}x{}",
            labels.height(),
            labels.width(),
            out.height(),
            out.width()
        )));
    }
    for (px, edge) in out
        .data_mut()
        .chunks_exact_mut(3)
        .zip(extract_boundaries(labels))
    {
        if edge {
            px.copy_from_slice(&color);
        }
    }
    Ok(())
}

pub fn render_overlay(
    image: &RasterImage,
    base: &LabelMap,
    clustered: Option<&LabelMap>,
) -> Result<RasterImage> {
    if image.channels() != 3 {
        return Err(Error::UnsupportedChannels(image.channels()));
    }
    let mut out = image.clone();
    paint(&mut out, base, BASE_COLOR)?;
    if let Some(c) = clustered {
        paint(&mut out, c, CLUSTER_COLOR)?;
    }
    Ok(out)
}
