//! Feature-map upsampling to image resolution.
//!
//! Destination pixel `d` maps to source coordinate `(d + 0.5)·(src/dst) − 0.5`,
//! clamped to the source extent. Bilinear interpolates between the two
//! bracketing samples; nearest takes the source pixel whose area contains the
//! destination center.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::FeatureMap;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpsampleMode {
    Nearest,
    #[default]
    Bilinear,
}

#[derive(Clone, Copy, Debug)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn bilinear_taps(src: usize, dst: usize) -> Vec<Tap> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            Tap {
                lo,
                hi,
                frac: s - lo as f64,
            }
        })
        .collect()
}

fn nearest_taps(src: usize, dst: usize) -> Vec<usize> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|d| (((d as f64 + 0.5) * ratio).floor() as usize).min(src - 1))
        .collect()
}

pub fn upsample(
    map: &FeatureMap,
    target_h: usize,
    target_w: usize,
    mode: UpsampleMode,
) -> Result<FeatureMap> {
    if target_h < map.height() || target_w < map.width() {
        return Err(Error::InvalidParameter(format!(
            "upsample target {target_h}x{target_w} is smaller than source {}x{}",
            map.height(),
            map.width()
        )));
    }
    let c = map.channels();
    let mut out = vec![0f32; target_h * target_w * c];
    match mode {
        UpsampleMode::Nearest => {
            let ys = nearest_taps(map.height(), target_h);
            let xs = nearest_taps(map.width(), target_w);
            out.par_chunks_mut(target_w * c)
                .zip(ys.par_iter())
                .for_each(|(row, &sy)| {
                    for (px, &sx) in row.chunks_exact_mut(c).zip(&xs) {
                        px.copy_from_slice(map.pixel(sx, sy));
                    }
                });
        }
        UpsampleMode::Bilinear => {
            let ys = bilinear_taps(map.height(), target_h);
            let xs = bilinear_taps(map.width(), target_w);
            out.par_chunks_mut(target_w * c)
                .zip(ys.par_iter())
                .for_each(|(row, ty)| {
                    for (px, tx) in row.chunks_exact_mut(c).zip(&xs) {
                        let (a, b) = (map.pixel(tx.lo, ty.lo), map.pixel(tx.hi, ty.lo));
                        let (p, q) = (map.pixel(tx.lo, ty.hi), map.pixel(tx.hi, ty.hi));
                        for ch in 0..c {
                            let top = (1.0 - tx.frac) * a[ch] as f64 + tx.frac * b[ch] as f64;
                            let bot = (1.0 - tx.frac) * p[ch] as f64 + tx.frac * q[ch] as f64;
                            px[ch] = ((1.0 - ty.frac) * top + ty.frac * bot) as f32;
                        }
                    }
                });
        }
    }
    FeatureMap::new(target_h, target_w, c, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Scalar reference, written independently of the tap tables.
    fn oracle_bilinear(map: &FeatureMap, th: usize, tw: usize) -> Vec<f64> {
        let (h, w, c) = (map.height(), map.width(), map.channels());
        let mut out = Vec::new();
        for y in 0..th {
            let sy = ((y as f64 + 0.5) * h as f64 / th as f64 - 0.5)
                .max(0.0)
                .min((h - 1) as f64);
            for x in 0..tw {
                let sx = ((x as f64 + 0.5) * w as f64 / tw as f64 - 0.5)
                    .max(0.0)
                    .min((w - 1) as f64);
                for ch in 0..c {
                    let mut acc = 0.0;
                    // Tent-weight sum over all source samples.
                    for j in 0..h {
                        for i in 0..w {
                            let wy = (1.0 - (sy - j as f64).abs()).max(0.0);
                            let wx = (1.0 - (sx - i as f64).abs()).max(0.0);
                            acc += wy * wx * map.get(i, j, ch) as f64;
                        }
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    #[test]
    fn one_by_two_to_one_by_four() {
        let map = FeatureMap::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let up = upsample(&map, 1, 4, UpsampleMode::Bilinear).unwrap();
        assert_eq!(up.data(), &[0.0, 0.25, 0.75, 1.0]);
        let oracle = oracle_bilinear(&map, 1, 4);
        assert_eq!(oracle, vec![0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn single_pixel_extends_to_constant() {
        let map = FeatureMap::new(1, 1, 2, vec![0.3, -7.5]).unwrap();
        for mode in [UpsampleMode::Nearest, UpsampleMode::Bilinear] {
            let up = upsample(&map, 5, 3, mode).unwrap();
            for px in up.data().chunks(2) {
                assert_eq!(px, &[0.3, -7.5]);
            }
        }
    }

    #[test]
    fn nearest_two_by_two_blocks() {
        let map = FeatureMap::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let up = upsample(&map, 4, 4, UpsampleMode::Nearest).unwrap();
        assert_eq!(
            up.data(),
            &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 3.0, 3.0, 4.0, 4.0]
        );
    }

    #[test]
    fn downscale_is_rejected() {
        let map = FeatureMap::filled(4, 4, 1, 0.0).unwrap();
        assert!(upsample(&map, 3, 4, UpsampleMode::Nearest).is_err());
        assert!(upsample(&map, 4, 2, UpsampleMode::Bilinear).is_err());
    }

    #[test]
    fn bilinear_matches_tent_oracle() {
        let map = FeatureMap::from_fn(3, 4, 2, |x, y, c| {
            ((x * 13 + y * 5 + c * 3) % 7) as f32 - 2.5
        })
        .unwrap();
        let up = upsample(&map, 7, 10, UpsampleMode::Bilinear).unwrap();
        let oracle = oracle_bilinear(&map, 7, 10);
        for (a, b) in up.data().iter().zip(oracle) {
            assert!((*a as f64 - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    fn small_map() -> impl Strategy<Value = FeatureMap> {
        (1usize..5, 1usize..5, 1usize..3).prop_flat_map(|(h, w, c)| {
            proptest::collection::vec(-100f32..100.0, h * w * c)
                .prop_map(move |d| FeatureMap::new(h, w, c, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn identity_at_same_size(map in small_map()) {
            for mode in [UpsampleMode::Nearest, UpsampleMode::Bilinear] {
                let up = upsample(&map, map.height(), map.width(), mode).unwrap();
                prop_assert_eq!(&up, &map);
            }
        }

        #[test]
        fn bilinear_stays_within_input_range(map in small_map(), dh in 0usize..6, dw in 0usize..6) {
            let up = upsample(&map, map.height() + dh, map.width() + dw, UpsampleMode::Bilinear).unwrap();
            let c = map.channels();
            for ch in 0..c {
                let src = map.data().iter().skip(ch).step_by(c);
                let lo = src.clone().cloned().fold(f32::INFINITY, f32::min);
                let hi = src.cloned().fold(f32::NEG_INFINITY, f32::max);
                for v in up.data().iter().skip(ch).step_by(c) {
                    prop_assert!(*v >= lo && *v <= hi);
                }
            }
        }

        #[test]
        fn bilinear_preserves_constants(v in -1e6f32..1e6, h in 1usize..4, w in 1usize..4, th in 4usize..11, tw in 4usize..11) {
            let map = FeatureMap::filled(h, w, 1, v).unwrap();
            let up = upsample(&map, th, tw, UpsampleMode::Bilinear).unwrap();
            prop_assert!(up.data().iter().all(|&u| u == v));
        }
    }
}
