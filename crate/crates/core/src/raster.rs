//! Core raster types shared by every stage.

use std::path::Path;

use image::{DynamicImage, ImageReader};

use crate::error::{Error, Result};

/// 8-bit image, row-major, channel-interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
    /// Physical resolution, when known. Never inferred.
    pub microns_per_pixel: Option<f64>,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroSized { height, width });
        }
        if channels == 0 || data.len() != height * width * channels {
            return Err(Error::Shape {
                height,
                width,
                channels,
                actual: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
            microns_per_pixel: None,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(height * width * 3)
            .collect();
        Self::new(height, width, 3, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Writes a 3-channel image as PNG (or JPEG, by extension).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            3 => image::ExtendedColorType::Rgb8,
            c => return Err(Error::UnsupportedChannels(c)),
        };
        image::save_buffer(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            color,
        )
        .map_err(|source| Error::Encode {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Decodes a PNG or JPEG file. Grayscale is promoted to three identical channels.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let decoded = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Decode {
            path: path.to_path_buf(),
            source,
        })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::ZeroSized { height, width });
    }
    let data = match decoded {
        DynamicImage::ImageRgb8(buf) => buf.into_raw(),
        DynamicImage::ImageLuma8(buf) => {
            buf.into_raw().into_iter().flat_map(|v| [v, v, v]).collect()
        }
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => {
            return Err(Error::UnsupportedBitDepth("16-bit samples".into()))
        }
        DynamicImage::ImageRgb32F(_) | DynamicImage::ImageRgba32F(_) => {
            return Err(Error::UnsupportedBitDepth("32-bit float samples".into()))
        }
        other => {
            return Err(Error::UnsupportedChannels(
                other.color().channel_count() as usize
            ))
        }
    };
    RasterImage::new(height, width, 3, data)
}

/// H×W×C raster of finite `f32` samples, index `(y·W + x)·C + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroSized { height, width });
        }
        if channels == 0 || data.len() != height * width * channels {
            return Err(Error::Shape {
                height,
                width,
                channels,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    /// Builds a map from a per-pixel generator.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Standardizes every channel to zero mean and unit variance over the image.
    /// Constant channels become all-zero.
    pub fn standardized(&self) -> FeatureMap {
        let c = self.channels;
        let n = (self.height * self.width) as f64;
        let mut mean = vec![0f64; c];
        for px in self.data.chunks_exact(c) {
            for (m, &v) in mean.iter_mut().zip(px) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0f64; c];
        for px in self.data.chunks_exact(c) {
            for ((s, &v), &m) in var.iter_mut().zip(px).zip(&mean) {
                let d = v as f64 - m;
                *s += d * d;
            }
        }
        let inv_std: Vec<f64> = var
            .iter()
            .map(|&s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();
        let data = self
            .data
            .chunks_exact(c)
            .flat_map(|px| {
                px.iter()
                    .zip(&mean)
                    .zip(&inv_std)
                    .map(|((&v, &m), &k)| ((v as f64 - m) * k) as f32)
            })
            .collect();
        FeatureMap {
            height: self.height,
            width: self.width,
            channels: c,
            data,
        }
    }
}

/// Scales a 3-channel image to `[0, 1]` by division by 255.
pub fn rgb_to_feature(image: &RasterImage) -> Result<FeatureMap> {
    if image.channels() != 3 {
        return Err(Error::UnsupportedChannels(image.channels()));
    }
    let data = image.data().iter().map(|&v| v as f32 / 255.0).collect();
    FeatureMap::new(image.height(), image.width(), 3, data)
}

/// Per-pixel `u32` labels, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroSized { height, width });
        }
        if labels.len() != height * width {
            return Err(Error::Shape {
                height,
                width,
                channels: 1,
                actual: labels.len(),
            });
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn constant(height: usize, width: usize, label: u32) -> Result<Self> {
        Self::new(height, width, vec![label; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> u32,
    ) -> Result<Self> {
        let mut labels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self::new(height, width, labels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn same_dims(&self, other: &LabelMap) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Number of distinct label values.
    pub fn distinct_count(&self) -> usize {
        let mut seen: Vec<u32> = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Renumbers labels to `[0, L)` in order of first appearance (row-major).
    pub fn densified(&self) -> LabelMap {
        let mut mapping = std::collections::HashMap::new();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                let next = mapping.len() as u32;
                *mapping.entry(l).or_insert(next)
            })
            .collect();
        LabelMap {
            height: self.height,
            width: self.width,
            labels,
        }
    }

    /// True when labels already occupy exactly `[0, L)`.
    pub fn is_dense(&self) -> bool {
        let max = match self.labels.iter().max() {
            Some(&m) => m as usize,
            None => return true,
        };
        if max >= self.labels.len() {
            return false;
        }
        let mut seen = vec![false; max + 1];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        seen.into_iter().all(|s| s)
    }

    /// Label count of a dense map (`max + 1`).
    pub fn label_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m as usize + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_feature_scaling() {
        let white = RasterImage::filled(2, 2, [255, 255, 255]).unwrap();
        assert!(rgb_to_feature(&white)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 1.0));
        let black = RasterImage::filled(2, 2, [0, 0, 0]).unwrap();
        assert!(rgb_to_feature(&black)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        let img = RasterImage::filled(1, 1, [51, 51, 51]).unwrap();
        assert_eq!(rgb_to_feature(&img).unwrap().data()[0], 0.2f32);
    }

    #[test]
    fn feature_map_rejects_nan() {
        let err = FeatureMap::new(1, 2, 1, vec![0.0, f32::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1 }));
        assert!(FeatureMap::new(1, 1, 1, vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn shapes_are_checked() {
        assert!(matches!(
            RasterImage::new(0, 3, 3, vec![]),
            Err(Error::ZeroSized { .. })
        ));
        assert!(matches!(
            LabelMap::new(2, 2, vec![0; 3]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn densify_first_appearance() {
        let m = LabelMap::new(1, 5, vec![7, 7, 3, 9, 3]).unwrap();
        let d = m.densified();
        assert_eq!(d.labels(), &[0, 0, 1, 2, 1]);
        assert!(d.is_dense());
        assert!(!m.is_dense());
        assert_eq!(m.distinct_count(), 3);
    }

    #[test]
    fn standardize_channels() {
        let m = FeatureMap::new(1, 2, 2, vec![0.0, 5.0, 2.0, 5.0]).unwrap();
        let s = m.standardized();
        assert_eq!(s.data(), &[-1.0, 0.0, 1.0, 0.0]);
    }
}
