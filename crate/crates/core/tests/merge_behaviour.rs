use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spixel::merge::{agglomerate, build_rag, clusters_at, cut_dendrogram, Dendrogram};
use spixel::metrics::asa;
use spixel::slic::{slic_segment, SlicParams, SuperpixelSegmentation};
use spixel::{FeatureMap, LabelMap};

fn segmentation(labels: LabelMap, features: FeatureMap) -> SuperpixelSegmentation {
    SuperpixelSegmentation::from_labels(labels, &features).unwrap()
}

/// Naive agglomeration over explicit pixel sets: every step recomputes all
/// cluster means from member pixels and scans all adjacent pairs.
fn brute_merges(labels: &LabelMap, features: &FeatureMap) -> Vec<(u32, u32, f64, u32)> {
    let (h, w, c) = (labels.height(), labels.width(), features.channels());
    let mut owner: Vec<u32> = labels.labels().to_vec();
    let mut alive: BTreeSet<u32> = owner.iter().copied().collect();
    let mut next = alive.len() as u32;
    let mut out = Vec::new();
    loop {
        let mut stats: BTreeMap<u32, (f64, Vec<f64>)> = BTreeMap::new();
        for (i, &o) in owner.iter().enumerate() {
            let e = stats.entry(o).or_insert((0.0, vec![0.0; c]));
            e.0 += 1.0;
            for k in 0..c {
                e.1[k] += features.data()[i * c + k] as f64;
            }
        }
        let mut pairs = BTreeSet::new();
        for y in 0..h {
            for x in 0..w {
                let a = owner[y * w + x];
                for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                    if nx < w && ny < h {
                        let b = owner[ny * w + nx];
                        if a != b {
                            pairs.insert((a.min(b), a.max(b)));
                        }
                    }
                }
            }
        }
        let best = pairs
            .iter()
            .map(|&(a, b)| {
                let (na, sa) = &stats[&a];
                let (nb, sb) = &stats[&b];
                let d2: f64 = (0..c).map(|k| (sa[k] / na - sb[k] / nb).powi(2)).sum();
                (na * nb / (na + nb) * d2, a, b)
            })
            .min_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let Some((delta, a, b)) = best else { break };
        for o in owner.iter_mut() {
            if *o == a || *o == b {
                *o = next;
            }
        }
        alive.remove(&a);
        alive.remove(&b);
        alive.insert(next);
        out.push((a, b, delta, next));
        next += 1;
    }
    out
}

fn connected_regions(m: &LabelMap) -> usize {
    let (h, w) = (m.height(), m.width());
    let mut seen = vec![false; h * w];
    let mut n = 0;
    for s in 0..h * w {
        if seen[s] {
            continue;
        }
        n += 1;
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(i) = q.pop_front() {
            let (x, y) = (i % w, i / w);
            let nbrs = [
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
                (y > 0).then(|| i - w),
                (y + 1 < h).then(|| i + w),
            ];
            for j in nbrs.into_iter().flatten() {
                if !seen[j] && m.labels()[j] == m.labels()[i] {
                    seen[j] = true;
                    q.push_back(j);
                }
            }
        }
    }
    n
}

fn random_case(seed: u64) -> (LabelMap, FeatureMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (rng.random_range(8..24), rng.random_range(8..24));
    let base = FeatureMap::from_fn(h, w, 3, |x, y, c| {
        let region = (x * 3 / w + (y * 2 / h) * 3) as f32;
        region * 0.1 + c as f32 * 0.01
    })
    .unwrap();
    let noisy = FeatureMap::new(
        h,
        w,
        3,
        base.data()
            .iter()
            .map(|v| v + rng.random_range(-0.04..0.04))
            .collect(),
    )
    .unwrap();
    let step = rng.random_range(3..6);
    let seg = slic_segment(
        &noisy,
        &SlicParams {
            step,
            compactness: 0.5,
            ..SlicParams::default()
        },
    )
    .unwrap();
    (seg.labels().clone(), noisy)
}

#[test]
fn two_by_two_example() {
    let labels = LabelMap::new(2, 2, vec![0, 1, 2, 3]).unwrap();
    let features = FeatureMap::new(2, 2, 1, vec![0.0, 1.0, 10.0, 11.0]).unwrap();
    let seg = segmentation(labels.clone(), features.clone());
    let d = agglomerate(&seg, &build_rag(&seg)).unwrap();
    let got: Vec<(u32, u32, f64, u32)> = d
        .merges
        .iter()
        .map(|m| (m.a, m.b, m.height, m.new_id))
        .collect();
    assert_eq!(got, vec![(0, 1, 0.5, 4), (2, 3, 0.5, 5), (4, 5, 100.0, 6)]);
    assert_eq!(got, brute_merges(&labels, &features));
    let cut = cut_dendrogram(&d, &seg, 2).unwrap();
    assert_eq!(cut.labels(), &[0, 0, 1, 1]);
    assert_eq!(cut_dendrogram(&d, &seg, 4).unwrap(), labels);
    assert_eq!(cut_dendrogram(&d, &seg, 1).unwrap().labels(), &[0; 4]);
}

#[test]
fn merge_sequence_matches_brute_force() {
    for seed in 0..25 {
        let (labels, features) = random_case(seed);
        let seg = segmentation(labels.clone(), features.clone());
        let d = agglomerate(&seg, &build_rag(&seg)).unwrap();
        let oracle = brute_merges(&labels, &features);
        assert_eq!(d.merges.len(), oracle.len());
        for (m, o) in d.merges.iter().zip(&oracle) {
            assert_eq!((m.a, m.b, m.new_id), (o.0, o.1, o.3), "seed {seed}");
            assert!((m.height - o.2).abs() <= 1e-9 * o.2.abs().max(1e-9));
        }
    }
}

#[test]
fn cluster_stats_match_member_pixels() {
    for seed in 0..10 {
        let (labels, features) = random_case(seed);
        let seg = segmentation(labels.clone(), features.clone());
        let d = agglomerate(&seg, &build_rag(&seg)).unwrap();
        for k in d.min_clusters()..=d.initial_count {
            for node in clusters_at(&d, k).unwrap() {
                let pixels: Vec<usize> = (0..labels.len())
                    .filter(|&i| node.members.binary_search(&labels.labels()[i]).is_ok())
                    .collect();
                assert_eq!(node.n, pixels.len());
                for c in 0..3 {
                    let mean = pixels
                        .iter()
                        .map(|&i| features.data()[i * 3 + c] as f64)
                        .sum::<f64>()
                        / pixels.len() as f64;
                    assert!((node.mu[c] - mean).abs() <= 1e-5 * mean.abs().max(1e-12));
                }
            }
        }
    }
}

#[test]
fn every_cut_is_connected_and_asa_monotone() {
    for seed in 0..10 {
        let (labels, features) = random_case(seed);
        let gt = LabelMap::from_fn(labels.height(), labels.width(), |x, y| {
            (x * 3 / labels.width() + (y * 2 / labels.height()) * 3) as u32
        })
        .unwrap();
        let seg = segmentation(labels, features);
        let d = agglomerate(&seg, &build_rag(&seg)).unwrap();
        let mut prev = f64::INFINITY;
        for k in (d.min_clusters()..=d.initial_count).rev() {
            let cut = cut_dendrogram(&d, &seg, k).unwrap();
            assert_eq!(cut.label_count(), k);
            assert_eq!(connected_regions(&cut), k);
            let a = asa(&cut, &gt).unwrap();
            assert!(a <= prev);
            prev = a;
        }
    }
}

#[test]
fn agglomerate_is_deterministic_and_json_round_trips() {
    let (labels, features) = random_case(3);
    let seg = segmentation(labels, features);
    let rag = build_rag(&seg);
    let d = agglomerate(&seg, &rag).unwrap();
    assert_eq!(d, agglomerate(&seg, &rag).unwrap());
    let text = d.to_json().unwrap();
    assert_eq!(Dendrogram::from_json(&text).unwrap(), d);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["initial_count"], d.initial_count);
    assert_eq!(doc["merges"].as_array().unwrap().len(), d.merges.len());
    assert_eq!(
        doc["superpixel_counts"].as_array().unwrap().len(),
        d.initial_count
    );
}

#[test]
fn out_of_range_cut_is_rejected() {
    let labels = LabelMap::new(1, 4, vec![0, 1, 2, 3]).unwrap();
    let features = FeatureMap::new(1, 4, 1, vec![0.0, 1.0, 5.0, 9.0]).unwrap();
    let seg = segmentation(labels, features);
    let d = agglomerate(&seg, &build_rag(&seg)).unwrap();
    assert!(cut_dendrogram(&d, &seg, 0).is_err());
    assert!(cut_dendrogram(&d, &seg, 5).is_err());
}
