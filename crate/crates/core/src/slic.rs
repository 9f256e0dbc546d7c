//! SLIC superpixels over C-channel feature maps.
//!
//! Centers are seeded on a regular grid of spacing `S`, nudged to the lowest
//! gradient pixel in their 3×3 neighborhood, then refined by local k-means:
//! each center only competes for pixels within `S` of it along both axes, with
//! distance `D² = ‖f − f_k‖² + (m/S)²·‖p − p_k‖²`. Small and disconnected
//! fragments are absorbed afterwards so every superpixel is 4-connected.
//!
//! All reductions run in a fixed row order, so results do not depend on the
//! size of the rayon pool.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::components::{absorb_small_components, AbsorbOptions};
use crate::error::{Error, Result};
use crate::raster::{FeatureMap, LabelMap};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlicParams {
    /// Grid spacing `S`, used as the superpixel diameter.
    pub step: usize,
    /// Compactness `m`.
    pub compactness: f64,
    pub iterations: usize,
    /// Components smaller than `min_region_frac·S²` are absorbed.
    pub min_region_frac: f64,
    /// Standardize channels before clustering. `None` means "only when C > 3".
    pub normalize_features: Option<bool>,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            step: 120,
            compactness: 10.0,
            iterations: 10,
            min_region_frac: 0.25,
            normalize_features: None,
        }
    }
}

impl SlicParams {
    pub fn validate(&self) -> Result<()> {
        if self.step < 2 {
            return Err(Error::InvalidParameter(format!(
                "step {} must be >= 2",
                self.step
            )));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        if !(self.compactness >= 0.0 && self.compactness.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "compactness {} must be finite and >= 0",
                self.compactness
            )));
        }
        if !(self.min_region_frac > 0.0 && self.min_region_frac < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "min_region_frac {} must be in (0, 1)",
                self.min_region_frac
            )));
        }
        Ok(())
    }

    pub fn normalizes(&self, channels: usize) -> bool {
        self.normalize_features.unwrap_or(channels > 3)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterCenter {
    pub feature: Vec<f64>,
    pub x: f64,
    pub y: f64,
    pub count: usize,
}

/// Pixel count and mean feature of one superpixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub count: usize,
    pub mean: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperpixelSegmentation {
    labels: LabelMap,
    stats: Vec<RegionStats>,
}

impl SuperpixelSegmentation {
    /// Computes statistics for a dense label map over `features`.
    pub fn from_labels(labels: LabelMap, features: &FeatureMap) -> Result<Self> {
        if labels.height() != features.height() || labels.width() != features.width() {
            return Err(Error::DimensionMismatch(format!(
                "labels {}x{} vs features {}x{}",
                labels.height(),
                labels.width(),
                features.height(),
                features.width()
            )));
        }
        if !labels.is_dense() {
            return Err(Error::InvalidParameter("label map is not dense".into()));
        }
        let n = labels.label_count();
        let sums = accumulate(labels.labels(), features, n);
        let c = features.channels();
        let stats = (0..n)
            .map(|k| {
                let count = sums.counts[k];
                let row = &sums.features[k * c..(k + 1) * c];
                RegionStats {
                    count,
                    mean: row.iter().map(|s| s / count as f64).collect(),
                }
            })
            .collect();
        Ok(Self { labels, stats })
    }

    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    pub fn stats(&self) -> &[RegionStats] {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.stats.first().map_or(0, |s| s.mean.len())
    }
}

/// Squared central-difference gradient; `None` on the image border.
fn gradient(map: &FeatureMap, x: usize, y: usize) -> Option<f64> {
    if x == 0 || y == 0 || x + 1 >= map.width() || y + 1 >= map.height() {
        return None;
    }
    let sq = |a: &[f32], b: &[f32]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(&p, &q)| {
                let d = p as f64 - q as f64;
                d * d
            })
            .sum()
    };
    Some(
        sq(map.pixel(x + 1, y), map.pixel(x - 1, y)) + sq(map.pixel(x, y + 1), map.pixel(x, y - 1)),
    )
}

fn grid_positions(extent: usize, step: usize) -> Vec<usize> {
    let cells = extent.div_ceil(step);
    (0..cells)
        .map(|i| (((i as f64 + 0.5) * step as f64).floor() as usize).min(extent - 1))
        .collect()
}

/// Grid-seeded centers, each moved to the strictly lowest-gradient interior
/// pixel of its 3×3 neighborhood (scan order: row-major from the top-left).
pub fn init_centers(map: &FeatureMap, step: usize) -> Result<Vec<ClusterCenter>> {
    if step < 1 || step > map.height().min(map.width()) {
        return Err(Error::InvalidParameter(format!(
            "step {step} larger than image {}x{}",
            map.height(),
            map.width()
        )));
    }
    let xs = grid_positions(map.width(), step);
    let ys = grid_positions(map.height(), step);
    let mut centers = Vec::with_capacity(xs.len() * ys.len());
    for &gy in &ys {
        for &gx in &xs {
            let (mut cx, mut cy) = (gx, gy);
            if let Some(mut best) = gradient(map, gx, gy) {
                for ny in gy - 1..=gy + 1 {
                    for nx in gx - 1..=gx + 1 {
                        if let Some(g) = gradient(map, nx, ny) {
                            if g < best {
                                best = g;
                                (cx, cy) = (nx, ny);
                            }
                        }
                    }
                }
            }
            centers.push(ClusterCenter {
                feature: map.pixel(cx, cy).iter().map(|&v| v as f64).collect(),
                x: cx as f64,
                y: cy as f64,
                count: 0,
            });
        }
    }
    Ok(centers)
}

struct Sums {
    counts: Vec<usize>,
    features: Vec<f64>,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

const REDUCE_BLOCK_ROWS: usize = 256;

/// Per-label pixel count, feature sums and coordinate sums. Rows are reduced
/// into the totals strictly in row order.
fn accumulate(labels: &[u32], map: &FeatureMap, n: usize) -> Sums {
    let (h, w, c) = (map.height(), map.width(), map.channels());
    let mut sums = Sums {
        counts: vec![0; n],
        features: vec![0.0; n * c],
        xs: vec![0.0; n],
        ys: vec![0.0; n],
    };
    for block in (0..h).step_by(REDUCE_BLOCK_ROWS) {
        let rows: Vec<_> = (block..(block + REDUCE_BLOCK_ROWS).min(h))
            .into_par_iter()
            .map(|y| {
                // (label, count, x sum, feature sums)
                let mut slots: HashMap<u32, usize> = HashMap::new();
                let mut part: Vec<(u32, usize, f64, Vec<f64>)> = Vec::new();
                let mut last: Option<(u32, usize)> = None;
                for x in 0..w {
                    let l = labels[y * w + x];
                    if l == u32::MAX {
                        continue;
                    }
                    let slot = match last {
                        Some((pl, s)) if pl == l => s,
                        _ => *slots.entry(l).or_insert_with(|| {
                            part.push((l, 0, 0.0, vec![0.0; c]));
                            part.len() - 1
                        }),
                    };
                    last = Some((l, slot));
                    let entry = &mut part[slot];
                    entry.1 += 1;
                    entry.2 += x as f64;
                    for (s, &v) in entry.3.iter_mut().zip(map.pixel(x, y)) {
                        *s += v as f64;
                    }
                }
                (y, part)
            })
            .collect();
        for (y, part) in rows {
            for (l, count, xsum, fsum) in part {
                let k = l as usize;
                sums.counts[k] += count;
                sums.xs[k] += xsum;
                sums.ys[k] += (y * count) as f64;
                for (t, s) in sums.features[k * c..(k + 1) * c].iter_mut().zip(fsum) {
                    *t += s;
                }
            }
        }
    }
    sums
}

/// One assignment pass. Pixels claimed by no center keep their previous label.
fn assign(
    map: &FeatureMap,
    centers: &[ClusterCenter],
    step: usize,
    spatial: f64,
    labels: &mut [u32],
) {
    let (w, c) = (map.width(), map.channels());
    let s = step as f64;
    labels.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let yf = y as f64;
        let mut best = vec![f64::INFINITY; w];
        for (k, center) in centers.iter().enumerate() {
            let dy = yf - center.y;
            if dy.abs() > s {
                continue;
            }
            let x0 = (center.x - s).ceil().max(0.0) as usize;
            let x1 = ((center.x + s).floor() as isize).min(w as isize - 1);
            if x1 < x0 as isize {
                continue;
            }
            for x in x0..=x1 as usize {
                let px = &map.data()[(y * w + x) * c..(y * w + x + 1) * c];
                let mut df = 0.0;
                for (&v, &f) in px.iter().zip(&center.feature) {
                    let d = v as f64 - f;
                    df += d * d;
                }
                let dx = x as f64 - center.x;
                let d = df + spatial * (dx * dx + dy * dy);
                if d < best[x] {
                    best[x] = d;
                    row[x] = k as u32;
                }
            }
        }
    });
}

/// Runs the clustering loop and returns raw (possibly fragmented) labels.
pub fn cluster(map: &FeatureMap, params: &SlicParams) -> Result<(Vec<ClusterCenter>, LabelMap)> {
    params.validate()?;
    let mut centers = init_centers(map, params.step)?;
    let spatial = (params.compactness / params.step as f64).powi(2);
    let mut labels = vec![u32::MAX; map.height() * map.width()];
    for _ in 0..params.iterations {
        assign(map, &centers, params.step, spatial, &mut labels);
        let sums = accumulate(&labels, map, centers.len());
        let c = map.channels();
        for (k, center) in centers.iter_mut().enumerate() {
            let n = sums.counts[k];
            center.count = n;
            if n == 0 {
                continue;
            }
            let nf = n as f64;
            center.x = sums.xs[k] / nf;
            center.y = sums.ys[k] / nf;
            for (f, s) in center
                .feature
                .iter_mut()
                .zip(&sums.features[k * c..(k + 1) * c])
            {
                *f = s / nf;
            }
        }
    }
    // Only reachable if a pixel was never inside any window.
    if labels.contains(&u32::MAX) {
        return Err(Error::InvalidParameter("pixels left unassigned".into()));
    }
    Ok((centers, LabelMap::new(map.height(), map.width(), labels)?))
}

/// Absorbs components smaller than `min_region_frac·S²` into their largest
/// neighbor, repeating until none remain. Output labels are dense.
pub fn enforce_connectivity(labels: &LabelMap, step: usize, min_region_frac: f64) -> LabelMap {
    absorb_small_components(
        labels,
        AbsorbOptions {
            min_size: min_region_frac * (step * step) as f64,
            absorb_secondary: false,
        },
    )
}

/// Full SLIC: clustering, connectivity enforcement (including absorption of
/// every non-largest fragment of a cluster), dense labels and statistics.
///
/// Statistics are computed over the features actually clustered, i.e. after
/// standardization when it is enabled.
pub fn slic_segment(map: &FeatureMap, params: &SlicParams) -> Result<SuperpixelSegmentation> {
    params.validate()?;
    let normalized;
    let working = if params.normalizes(map.channels()) {
        normalized = map.standardized();
        &normalized
    } else {
        map
    };
    let (_, raw) = cluster(working, params)?;
    let labels = absorb_small_components(
        &raw,
        AbsorbOptions {
            min_size: params.min_region_frac * (params.step * params.step) as f64,
            absorb_secondary: true,
        },
    );
    SuperpixelSegmentation::from_labels(labels, working)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::is_label_connected;

    #[test]
    fn grid_seeding_on_constant_map() {
        let map = FeatureMap::filled(100, 100, 3, 0.5).unwrap();
        let centers = init_centers(&map, 25).unwrap();
        assert_eq!(centers.len(), 16);
        let expected = [12.0, 37.0, 62.0, 87.0];
        for (i, c) in centers.iter().enumerate() {
            assert_eq!(c.x, expected[i % 4]);
            assert_eq!(c.y, expected[i / 4]);
            assert_eq!(c.feature, vec![0.5f32 as f64; 3]);
        }
    }

    #[test]
    fn partial_border_cells_keep_clamped_centers() {
        let map = FeatureMap::filled(10, 7, 1, 0.0).unwrap();
        let centers = init_centers(&map, 4).unwrap();
        // ceil(10/4)=3 rows, ceil(7/4)=2 cols; last column cell center 6 stays inside
        assert_eq!(centers.len(), 6);
        let xs: Vec<f64> = centers.iter().take(2).map(|c| c.x).collect();
        assert_eq!(xs, vec![2.0, 6.0]);
        let ys: Vec<f64> = centers.iter().step_by(2).map(|c| c.y).collect();
        assert_eq!(ys, vec![2.0, 6.0, 9.0]);
    }

    #[test]
    fn step_larger_than_image_is_rejected() {
        let map = FeatureMap::filled(10, 30, 1, 0.0).unwrap();
        assert!(init_centers(&map, 11).is_err());
    }

    #[test]
    fn dark_pixel_moves_center() {
        let mut map = FeatureMap::filled(50, 50, 1, 1.0).unwrap().into_data();
        map[12 * 50 + 13] = 0.0;
        let map = FeatureMap::new(50, 50, 1, map).unwrap();
        // Hand-enumerated gradients around the seed (12, 12): the seed itself and
        // (13,11), (13,13) read the dark pixel through a central difference (G=1);
        // every other neighbor is flat (G=0). Scan order picks (11, 11).
        let g = |x: usize, y: usize| {
            let f = |x: usize, y: usize| if (x, y) == (13, 12) { 0.0f64 } else { 1.0 };
            (f(x + 1, y) - f(x - 1, y)).powi(2) + (f(x, y + 1) - f(x, y - 1)).powi(2)
        };
        let mut best = ((12, 12), g(12, 12));
        for y in 11..=13 {
            for x in 11..=13 {
                if g(x, y) < best.1 {
                    best = ((x, y), g(x, y));
                }
            }
        }
        assert_eq!(best.0, (11, 11));
        let centers = init_centers(&map, 25).unwrap();
        assert_eq!(
            (centers[0].x, centers[0].y),
            (best.0 .0 as f64, best.0 .1 as f64)
        );
        assert_eq!((centers[1].x, centers[1].y), (37.0, 12.0));
    }

    #[test]
    fn param_validation() {
        let ok = SlicParams::default();
        assert!(ok.validate().is_ok());
        assert!(SlicParams { step: 1, ..ok }.validate().is_err());
        assert!(SlicParams {
            iterations: 0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(SlicParams {
            min_region_frac: 0.0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(SlicParams {
            min_region_frac: 1.0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(SlicParams {
            compactness: -1.0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(ok.normalizes(64));
        assert!(!ok.normalizes(3));
        assert!(SlicParams {
            normalize_features: Some(true),
            ..ok
        }
        .normalizes(3));
    }

    #[test]
    fn connectivity_identity_and_stray_pixel() {
        let blocks = LabelMap::from_fn(8, 8, |x, y| (x / 4 + 2 * (y / 4)) as u32 + 10).unwrap();
        let out = enforce_connectivity(&blocks, 4, 0.25);
        assert_eq!(out, blocks.densified());

        let mut sea = vec![1u32; 64];
        sea[3 * 8 + 4] = 0;
        let sea = LabelMap::new(8, 8, sea).unwrap();
        let out = enforce_connectivity(&sea, 4, 0.25);
        assert!(out.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn orphan_fragments_join_their_own_neighbors() {
        // Label 9 has a main body in the middle band and two 1-pixel orphans in
        // the left (label 1) and right (label 2) halves.
        let mut m = LabelMap::from_fn(8, 8, |x, _| if x < 4 { 1 } else { 2 })
            .unwrap()
            .into_labels();
        for x in 0..8 {
            m[4 * 8 + x] = 9;
            m[5 * 8 + x] = 9;
        }
        m[8 + 1] = 9;
        m[8 + 6] = 9;
        let m = LabelMap::new(8, 8, m).unwrap();
        let out = enforce_connectivity(&m, 4, 0.25);
        assert_eq!(out.distinct_count(), 5);
        assert_eq!(out.get(1, 1), out.get(0, 0));
        assert_eq!(out.get(6, 1), out.get(7, 0));
        assert_ne!(out.get(1, 1), out.get(6, 1));
        assert!(is_label_connected(&out));
    }
}
