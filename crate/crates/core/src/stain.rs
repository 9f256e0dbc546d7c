//! Stain-aware preprocessing: optical-density color deconvolution into
//! hematoxylin / eosin / DAB concentrations, and suppression of one stain
//! channel by heavy Gaussian smoothing plus attenuation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{FeatureMap, RasterImage};

/// Three stain optical-density vectors (rows: H, E, DAB) over (R, G, B).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StainMatrix {
    rows: [[f64; 3]; 3],
    inverse: [[f64; 3]; 3],
}

/// Absolute determinant below which the basis is treated as singular.
const SINGULAR_DET: f64 = 1e-9;

impl StainMatrix {
    /// Builds a matrix from raw rows; each row is renormalized to unit length.
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self> {
        let mut unit = rows;
        for row in unit.iter_mut() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::SingularMatrix(0.0));
            }
            row.iter_mut().for_each(|v| *v /= norm);
        }
        let inverse = invert3(&unit)?;
        Ok(Self {
            rows: unit,
            inverse,
        })
    }

    /// Row-major nine values, as stored in config files.
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != 9 {
            return Err(Error::InvalidParameter(format!(
                "stain matrix needs 9 values, got {}",
                values.len()
            )));
        }
        Self::new([
            [values[0], values[1], values[2]],
            [values[3], values[4], values[5]],
            [values[6], values[7], values[8]],
        ])
    }

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.rows
    }

    pub fn inverse(&self) -> &[[f64; 3]; 3] {
        &self.inverse
    }

    /// `od = conc · M`
    pub fn mix(&self, conc: [f64; 3]) -> [f64; 3] {
        let mut od = [0.0; 3];
        for (s, row) in self.rows.iter().enumerate() {
            for c in 0..3 {
                od[c] += conc[s] * row[c];
            }
        }
        od
    }

    /// `conc = od · M⁻¹`, unclamped.
    pub fn unmix(&self, od: [f64; 3]) -> [f64; 3] {
        let mut conc = [0.0; 3];
        for (c, row) in self.inverse.iter().enumerate() {
            for s in 0..3 {
                conc[s] += od[c] * row[s];
            }
        }
        conc
    }
}

impl Default for StainMatrix {
    fn default() -> Self {
        Self::new([[0.65, 0.70, 0.29], [0.07, 0.99, 0.11], [0.27, 0.57, 0.78]])
            .expect("default H/E/DAB basis is invertible")
    }
}

fn invert3(m: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let det = m[0][0] * cof(1, 2, 1, 2) - m[0][1] * cof(1, 2, 0, 2) + m[0][2] * cof(1, 2, 0, 1);
    if !det.is_finite() || det.abs() < SINGULAR_DET {
        return Err(Error::SingularMatrix(det));
    }
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            inv[r][c] = adj[r][c] / det;
        }
    }
    Ok(inv)
}

#[inline]
fn optical_density(intensity: u8) -> f64 {
    -((intensity as f64 + 1.0) / 256.0).log10()
}

/// Per-pixel HED concentrations, clamped below at zero.
pub fn rgb_to_hed(image: &RasterImage, matrix: &StainMatrix) -> Result<FeatureMap> {
    if image.channels() != 3 {
        return Err(Error::UnsupportedChannels(image.channels()));
    }
    let lut: Vec<f64> = (0..=255u8).map(optical_density).collect();
    let mut data = vec![0f32; image.data().len()];
    data.par_chunks_mut(3)
        .zip(image.data().par_chunks(3))
        .for_each(|(out, px)| {
            let od = [
                lut[px[0] as usize],
                lut[px[1] as usize],
                lut[px[2] as usize],
            ];
            let conc = matrix.unmix(od);
            for s in 0..3 {
                out[s] = conc[s].max(0.0) as f32;
            }
        });
    FeatureMap::new(image.height(), image.width(), 3, data)
}

/// Recomposes RGB from HED concentrations: `I = round(256·10^(−od) − 1)`.
pub fn hed_to_rgb(hed: &FeatureMap, matrix: &StainMatrix) -> Result<RasterImage> {
    if hed.channels() != 3 {
        return Err(Error::UnsupportedChannels(hed.channels()));
    }
    let mut data = vec![0u8; hed.data().len()];
    data.par_chunks_mut(3)
        .zip(hed.data().par_chunks(3))
        .for_each(|(out, conc)| {
            let od = matrix.mix([conc[0] as f64, conc[1] as f64, conc[2] as f64]);
            for c in 0..3 {
                let v = (256.0 * 10f64.powf(-od[c]) - 1.0).round();
                out[c] = v.clamp(0.0, 255.0) as u8;
            }
        });
    RasterImage::new(hed.height(), hed.width(), 3, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuppressionParams {
    /// Channel to suppress (0 = hematoxylin).
    pub channel: usize,
    /// Gaussian standard deviation in pixels.
    pub sigma: f64,
    /// Attenuation factor applied after blurring.
    pub alpha: f64,
}

impl Default for SuppressionParams {
    fn default() -> Self {
        Self {
            channel: 0,
            sigma: 15.0,
            alpha: 0.25,
        }
    }
}

impl SuppressionParams {
    pub fn validate(&self) -> Result<()> {
        if self.channel >= 3 {
            return Err(Error::InvalidParameter(format!(
                "suppression channel {} must be < 3",
                self.channel
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma {} must be >= 0",
                self.sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha {} must be in [0, 1]",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Symmetric reflection (`d c b a | a b c d | d c b a`), valid for any offset.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// Separable Gaussian blur of one plane (row-major, `h×w`).
pub fn gaussian_blur(plane: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    if kernel.len() == 1 {
        return plane.to_vec();
    }
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0f64; h * w];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let src = &plane[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, wk) in kernel.iter().enumerate() {
                acc += wk * src[reflect(x as isize + k as isize - r, w)];
            }
            *out = acc;
        }
    });
    let mut out = vec![0f64; h * w];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (k, wk) in kernel.iter().enumerate() {
            let sy = reflect(y as isize + k as isize - r, h);
            let src = &tmp[sy * w..(sy + 1) * w];
            for (o, s) in row.iter_mut().zip(src) {
                *o += wk * s;
            }
        }
    });
    out
}

/// Replaces one channel by `alpha · blur(channel, sigma)`; other channels are copied.
pub fn suppress_channel(hed: &FeatureMap, params: &SuppressionParams) -> Result<FeatureMap> {
    params.validate()?;
    let c = hed.channels();
    if params.channel >= c {
        return Err(Error::InvalidParameter(format!(
            "channel {} out of range for {c}-channel map",
            params.channel
        )));
    }
    let (h, w) = (hed.height(), hed.width());
    let plane: Vec<f64> = hed
        .data()
        .iter()
        .skip(params.channel)
        .step_by(c)
        .map(|&v| v as f64)
        .collect();
    let blurred = gaussian_blur(&plane, h, w, params.sigma);
    let mut data = hed.data().to_vec();
    for (px, b) in data.chunks_exact_mut(c).zip(blurred) {
        px[params.channel] = (params.alpha * b) as f32;
    }
    FeatureMap::new(h, w, c, data)
}
