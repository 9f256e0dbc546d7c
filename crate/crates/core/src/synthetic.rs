//! Seeded synthetic fixtures with known ground truth.
//!
//! Used by the test suites, the acceptance runner and the `synth` CLI
//! command. The same seed always yields the same image.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::raster::{LabelMap, RasterImage};
use crate::stain::StainMatrix;

/// Image and its exact region map.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub image: RasterImage,
    pub truth: LabelMap,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random colors that are pairwise at least `min_dist` apart (0–255 scale).
fn distinct_colors(rng: &mut ChaCha8Rng, n: usize, min_dist: f64) -> Vec<[f64; 3]> {
    let mut colors: Vec<[f64; 3]> = Vec::with_capacity(n);
    let mut attempts = 0;
    while colors.len() < n {
        let c = [
            rng.random_range(30.0..225.0),
            rng.random_range(30.0..225.0),
            rng.random_range(30.0..225.0),
        ];
        attempts += 1;
        let far = colors.iter().all(|o| {
            let d: f64 = o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            d.sqrt() >= min_dist
        });
        // Spacing is dropped after 1000 rejected draws.
        if far || attempts > 1000 {
            colors.push(c);
        }
    }
    colors
}

fn paint(
    rng: &mut ChaCha8Rng,
    truth: &LabelMap,
    colors: &[[f64; 3]],
    noise_sigma: f64,
) -> RasterImage {
    let noise = Normal::new(0.0, noise_sigma.max(1e-12)).unwrap();
    let mut data = Vec::with_capacity(truth.len() * 3);
    for &l in truth.labels() {
        for c in colors[l as usize] {
            let v = if noise_sigma > 0.0 {
                c + noise.sample(rng)
            } else {
                c
            };
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    RasterImage::new(truth.height(), truth.width(), 3, data).expect("dims")
}

/// Two regions split by a random straight line; color distance ≥ 120 levels.
pub fn two_region(height: usize, width: usize, noise_sigma: f64, seed: u64) -> Fixture {
    let mut rng = rng(seed);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (nx, ny) = (angle.cos(), angle.sin());
    let (cx, cy) = (
        width as f64 * rng.random_range(0.35..0.65),
        height as f64 * rng.random_range(0.35..0.65),
    );
    let truth = LabelMap::from_fn(height, width, |x, y| {
        ((x as f64 + 0.5 - cx) * nx + (y as f64 + 0.5 - cy) * ny >= 0.0) as u32
    })
    .unwrap();
    let colors = distinct_colors(&mut rng, 2, 120.0);
    let image = paint(&mut rng, &truth, &colors, noise_sigma);
    Fixture { image, truth }
}

/// Four connected regions: a vertical split with an independent horizontal
/// split on each side.
pub fn four_region(height: usize, width: usize, noise_sigma: f64, seed: u64) -> Fixture {
    let mut rng = rng(seed);
    let split_x = (width as f64 * rng.random_range(0.3..0.7)) as usize;
    let left_y = (height as f64 * rng.random_range(0.3..0.7)) as usize;
    let right_y = (height as f64 * rng.random_range(0.3..0.7)) as usize;
    let truth = LabelMap::from_fn(height, width, |x, y| {
        if x < split_x {
            (y >= left_y) as u32
        } else {
            2 + (y >= right_y) as u32
        }
    })
    .unwrap();
    let colors = distinct_colors(&mut rng, 4, 90.0);
    let image = paint(&mut rng, &truth, &colors, noise_sigma);
    Fixture { image, truth }
}

/// Voronoi tessellation with per-region colors, pixel noise and a smooth
/// intensity ripple, approximating tissue areas with internal texture.
pub fn textured(
    height: usize,
    width: usize,
    regions: usize,
    noise_sigma: f64,
    seed: u64,
) -> Fixture {
    let mut rng = rng(seed);
    let sites: Vec<(f64, f64)> = (0..regions)
        .map(|_| {
            (
                rng.random_range(0.0..width as f64),
                rng.random_range(0.0..height as f64),
            )
        })
        .collect();
    let truth = LabelMap::from_fn(height, width, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        sites
            .iter()
            .enumerate()
            .map(|(i, &(sx, sy))| ((px - sx).powi(2) + (py - sy).powi(2), i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .unwrap()
            .1 as u32
    })
    .unwrap()
    .densified();
    let colors = distinct_colors(&mut rng, regions, 60.0);
    let mut image = paint(&mut rng, &truth, &colors, noise_sigma);
    let (fx, fy, amp) = (
        rng.random_range(0.02..0.08),
        rng.random_range(0.02..0.08),
        rng.random_range(4.0..10.0),
    );
    for y in 0..height {
        for x in 0..width {
            let ripple = amp * ((x as f64 * fx).sin() * (y as f64 * fy).cos());
            for v in image.pixel_mut(x, y) {
                *v = (*v as f64 + ripple).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Fixture { image, truth }
}

/// Random stained image synthesized from non-negative stain concentrations
/// (smooth per-stain fields) through the Beer–Lambert forward model.
pub fn stained(height: usize, width: usize, matrix: &StainMatrix, seed: u64) -> RasterImage {
    let mut rng = rng(seed);
    let waves: Vec<[f64; 4]> = (0..3)
        .map(|_| {
            [
                rng.random_range(0.01..0.2),
                rng.random_range(0.01..0.2),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.2..0.9),
            ]
        })
        .collect();
    let mut data = Vec::with_capacity(height * width * 3);
    for y in 0..height {
        for x in 0..width {
            let mut conc = [0.0; 3];
            for (s, w) in waves.iter().enumerate() {
                let jitter: f64 = rng.random_range(0.0..0.1);
                let field = 0.5 + 0.5 * (x as f64 * w[0] + y as f64 * w[1] + w[2]).sin();
                conc[s] = w[3] * field + jitter;
            }
            let od = matrix.mix(conc);
            for o in od {
                data.push((256.0 * 10f64.powf(-o) - 1.0).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(height, width, 3, data).expect("dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::is_label_connected;

    #[test]
    fn fixtures_are_deterministic() {
        let a = textured(64, 80, 6, 8.0, 3);
        let b = textured(64, 80, 6, 8.0, 3);
        assert_eq!(a.image, b.image);
        assert_eq!(a.truth, b.truth);
        assert_ne!(textured(64, 80, 6, 8.0, 4).image, a.image);
    }

    #[test]
    fn region_fixtures_have_expected_topology() {
        let f = four_region(128, 128, 2.0, 9);
        assert_eq!(f.truth.distinct_count(), 4);
        assert!(is_label_connected(&f.truth));
        let t = two_region(64, 64, 0.0, 1);
        assert_eq!(t.truth.distinct_count(), 2);
        assert!(is_label_connected(&t.truth));
        let v = textured(100, 100, 8, 5.0, 2);
        assert!(is_label_connected(&v.truth));
        assert!(v.truth.is_dense());
    }
}
