use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spixel::metrics::{asa, boundary_prf, evaluate, extract_boundaries, GroundTruth};
use spixel::LabelMap;

fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, labels: u32) -> LabelMap {
    LabelMap::from_fn(h, w, |_, _| rng.random_range(0..labels)).unwrap()
}

/// Blocky random map: a few rectangles painted over a background.
fn blocky_map(rng: &mut ChaCha8Rng, h: usize, w: usize, labels: u32) -> LabelMap {
    let mut v = vec![0u32; h * w];
    for _ in 0..rng.random_range(0..6) {
        let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
        let (x1, y1) = (rng.random_range(x0..w) + 1, rng.random_range(y0..h) + 1);
        let l = rng.random_range(0..labels);
        for y in y0..y1 {
            for x in x0..x1 {
                v[y * w + x] = l;
            }
        }
    }
    LabelMap::new(h, w, v).unwrap()
}

fn asa_oracle(pred: &LabelMap, gt: &LabelMap) -> f64 {
    let pl: Vec<u32> = {
        let mut s: Vec<u32> = pred.labels().to_vec();
        s.sort_unstable();
        s.dedup();
        s
    };
    let gl: Vec<u32> = {
        let mut s: Vec<u32> = gt.labels().to_vec();
        s.sort_unstable();
        s.dedup();
        s
    };
    let mut total = 0u64;
    for &p in &pl {
        let mut best = 0u64;
        for &g in &gl {
            let n = pred
                .labels()
                .iter()
                .zip(gt.labels())
                .filter(|&(&a, &b)| a == p && b == g)
                .count() as u64;
            best = best.max(n);
        }
        total += best;
    }
    total as f64 / pred.len() as f64
}

fn boundary_oracle(m: &LabelMap) -> Vec<(i64, i64)> {
    let (h, w) = (m.height() as i64, m.width() as i64);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let here = m.get(x as usize, y as usize);
            let differs = [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                nx >= 0 && ny >= 0 && nx < w && ny < h && m.get(nx as usize, ny as usize) != here
            });
            if differs {
                out.push((x, y));
            }
        }
    }
    out
}

fn prf_oracle(pred: &LabelMap, gt: &LabelMap, tol: f64) -> (f64, f64, f64) {
    let bp = boundary_oracle(pred);
    let bg = boundary_oracle(gt);
    let near = |a: (i64, i64), set: &[(i64, i64)]| {
        set.iter().any(|b| {
            let d2 = ((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)) as f64;
            d2.sqrt() <= tol
        })
    };
    let (r, p) = match (bg.is_empty(), bp.is_empty()) {
        (true, true) => return (1.0, 1.0, 1.0),
        (true, false) => (1.0, 0.0),
        (false, true) => (0.0, 0.0),
        (false, false) => (
            bg.iter().filter(|&&g| near(g, &bp)).count() as f64 / bg.len() as f64,
            bp.iter().filter(|&&q| near(q, &bg)).count() as f64 / bp.len() as f64,
        ),
    };
    let f = if r + p == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (r, p, f)
}

#[test]
fn asa_matches_contingency_oracle_on_6x6() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let pred = random_map(&mut rng, 6, 6, 4);
        let gt = random_map(&mut rng, 6, 6, 4);
        assert_eq!(asa(&pred, &gt).unwrap(), asa_oracle(&pred, &gt));
    }
}

#[test]
fn boundary_prf_matches_all_pairs_oracle_on_16x16() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..200 {
        let (pred, gt) = if i % 2 == 0 {
            (
                blocky_map(&mut rng, 16, 16, 5),
                blocky_map(&mut rng, 16, 16, 5),
            )
        } else {
            (
                random_map(&mut rng, 16, 16, 2),
                blocky_map(&mut rng, 16, 16, 5),
            )
        };
        for tol in [0.0, 1.0, 2.0] {
            let s = boundary_prf(&pred, &gt, tol).unwrap();
            let (r, p, f) = prf_oracle(&pred, &gt, tol);
            assert!((s.recall - r).abs() <= 1e-12, "recall {} vs {r}", s.recall);
            assert!((s.precision - p).abs() <= 1e-12);
            assert!((s.f1 - f).abs() <= 1e-12);
        }
    }
}

#[test]
fn extracted_mask_matches_neighbor_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let m = blocky_map(&mut rng, 9, 13, 3);
        let mask = extract_boundaries(&m);
        let expected: Vec<bool> = {
            let mut e = vec![false; m.len()];
            for (x, y) in boundary_oracle(&m) {
                e[y as usize * 13 + x as usize] = true;
            }
            e
        };
        assert_eq!(mask, expected);
    }
}

#[test]
fn shifted_split_at_wide_tolerance() {
    let gt = LabelMap::from_fn(100, 100, |x, _| (x >= 50) as u32).unwrap();
    let pred = LabelMap::from_fn(100, 100, |x, _| (x >= 53) as u32).unwrap();
    let s = boundary_prf(&pred, &gt, 5.0).unwrap();
    assert_eq!((s.recall, s.precision, s.f1), (1.0, 1.0, 1.0));
    assert_eq!(prf_oracle(&pred, &gt, 2.0), (0.5, 0.5, 0.5));
    assert_eq!(prf_oracle(&pred, &gt, 1.0), (0.0, 0.0, 0.0));
}

#[test]
fn evaluate_agrees_with_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let pred = blocky_map(&mut rng, 16, 16, 5);
        let gt = blocky_map(&mut rng, 16, 16, 5);
        let report = evaluate(&pred, &GroundTruth::new(gt.clone()), 2.0).unwrap();
        let (r, p, f) = prf_oracle(&pred, &gt, 2.0);
        assert_eq!(report.asa, asa_oracle(&pred, &gt));
        assert_eq!((report.boundary_recall, report.boundary_precision), (r, p));
        assert!((report.boundary_f1 - f).abs() <= 1e-12);
        assert_eq!(report.n_regions, pred.distinct_count());
        assert_eq!(report.tolerance_px, 2.0);
    }
}

fn arb_pair() -> impl Strategy<Value = (LabelMap, LabelMap)> {
    (1usize..12, 1usize..12).prop_flat_map(|(h, w)| {
        (
            proptest::collection::vec(0u32..4, h * w),
            proptest::collection::vec(0u32..4, h * w),
        )
            .prop_map(move |(a, b)| {
                (
                    LabelMap::new(h, w, a).unwrap(),
                    LabelMap::new(h, w, b).unwrap(),
                )
            })
    })
}

proptest! {
    #[test]
    fn prf_is_symmetric((a, b) in arb_pair(), tol in 0.0f64..4.0) {
        let ab = boundary_prf(&a, &b, tol).unwrap();
        let ba = boundary_prf(&b, &a, tol).unwrap();
        let both_empty = ab.recall == 1.0 && ab.precision == 1.0 && ab.f1 == 1.0;
        let one_empty = extract_boundaries(&a).iter().all(|&v| !v) != extract_boundaries(&b).iter().all(|&v| !v);
        if !both_empty && !one_empty {
            prop_assert_eq!(ab.recall, ba.precision);
            prop_assert_eq!(ab.precision, ba.recall);
        }
    }

    #[test]
    fn prf_is_monotone_in_tolerance((a, b) in arb_pair(), t in 0.0f64..3.0, dt in 0.0f64..3.0) {
        let lo = boundary_prf(&a, &b, t).unwrap();
        let hi = boundary_prf(&a, &b, t + dt).unwrap();
        prop_assert!(hi.recall >= lo.recall);
        prop_assert!(hi.precision >= lo.precision);
        prop_assert!(hi.f1 >= lo.f1);
    }

    #[test]
    fn refinement_never_lowers_asa((pred, gt) in arb_pair(), split in proptest::collection::vec(0u32..3, 144)) {
        let refined = LabelMap::new(
            pred.height(),
            pred.width(),
            pred.labels().iter().zip(&split).map(|(&l, &s)| l * 3 + s).collect(),
        ).unwrap();
        prop_assert!(asa(&refined, &gt).unwrap() >= asa(&pred, &gt).unwrap());
    }

    #[test]
    fn asa_is_one_iff_nested((pred, gt) in arb_pair()) {
        let nested = pred.labels().iter().zip(gt.labels()).all(|(&p, &g)| {
            pred.labels().iter().zip(gt.labels()).all(|(&p2, &g2)| p2 != p || g2 == g)
        });
        prop_assert_eq!(asa(&pred, &gt).unwrap() == 1.0, nested);
    }
}
