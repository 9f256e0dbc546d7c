//! Segmentation quality against ground truth.
//!
//! - ASA: fraction of pixels that would be correct if every predicted region
//!   took the ground-truth label it overlaps most.
//! - Boundary precision / recall / F1 with a Euclidean pixel tolerance,
//!   matched through an exact squared distance transform.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelio::load_label_map;
use crate::raster::LabelMap;

/// Boundary tolerance used when none is configured, in pixels.
pub const DEFAULT_TOLERANCE_PX: f64 = 15.0;

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub labels: LabelMap,
    pub class_names: Option<Vec<String>>,
    /// Pixels carrying this label are excluded from every metric.
    pub ignore_label: Option<u32>,
}

impl GroundTruth {
    pub fn new(labels: LabelMap) -> Self {
        Self {
            labels,
            class_names: None,
            ignore_label: None,
        }
    }

    /// Loads a label map plus an optional `<stem>.classes.json` sidecar holding
    /// a JSON array of class names indexed by label value.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let labels = load_label_map(path)?;
        let sidecar = sidecar_path(path);
        let class_names = if sidecar.exists() {
            let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
            Some(serde_json::from_str(&text)?)
        } else {
            None
        };
        Ok(Self {
            labels,
            class_names,
            ignore_label: None,
        })
    }

    pub fn class_name(&self, label: u32) -> Option<&str> {
        self.class_names
            .as_ref()
            .and_then(|names| names.get(label as usize))
            .map(String::as_str)
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.classes.json"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub asa: f64,
    pub boundary_recall: f64,
    pub boundary_precision: f64,
    pub boundary_f1: f64,
    pub n_regions: usize,
    pub tolerance_px: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryScores {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

fn check_dims(pred: &LabelMap, gt: &LabelMap) -> Result<()> {
    if pred.same_dims(gt) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )))
    }
}

pub fn asa(pred: &LabelMap, gt: &LabelMap) -> Result<f64> {
    asa_ignoring(pred, gt, None)
}

pub fn asa_ignoring(pred: &LabelMap, gt: &LabelMap, ignore: Option<u32>) -> Result<f64> {
    check_dims(pred, gt)?;
    let mut overlap: HashMap<(u32, u32), u64> = HashMap::new();
    let mut total = 0u64;
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        if Some(g) == ignore {
            continue;
        }
        total += 1;
        *overlap.entry((p, g)).or_insert(0) += 1;
    }
    if total == 0 {
        return Ok(1.0);
    }
    let mut best: HashMap<u32, u64> = HashMap::new();
    for (&(p, _), &n) in &overlap {
        let b = best.entry(p).or_insert(0);
        *b = (*b).max(n);
    }
    let hit: u64 = best.values().sum();
    Ok(hit as f64 / total as f64)
}

/// Marks both pixels of every horizontally or vertically adjacent pair with
/// different labels. The image border alone never marks a pixel.
pub fn extract_boundaries(labels: &LabelMap) -> Vec<bool> {
    let (h, w) = (labels.height(), labels.width());
    let l = labels.labels();
    let mut mask = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w && l[i] != l[i + 1] {
                mask[i] = true;
                mask[i + 1] = true;
            }
            if y + 1 < h && l[i] != l[i + w] {
                mask[i] = true;
                mask[i + w] = true;
            }
        }
    }
    mask
}

/// 1-D lower envelope of parabolas (Felzenszwalb–Huttenlocher) on integer
/// squared distances. `INF` marks absent sites.
fn edt_1d(f: &[i64], out: &mut [i64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    const INF: i64 = i64::MAX / 4;
    let n = f.len();
    v.clear();
    z.clear();
    for q in 0..n {
        if f[q] >= INF {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = ((f[q] + (q * q) as i64) - (f[p] + (p * p) as i64)) as f64
                        / (2 * (q - p)) as f64;
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = INF);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as i64 - p as i64;
        *o = d * d + f[p];
    }
}

/// Exact squared Euclidean distance to the nearest `true` pixel.
/// Returns `None` when the mask is empty.
pub fn squared_distance_transform(mask: &[bool], h: usize, w: usize) -> Option<Vec<i64>> {
    const INF: i64 = i64::MAX / 4;
    if !mask.iter().any(|&m| m) {
        return None;
    }
    let mut cols = vec![INF; h * w];
    // Columns are independent: transform each column (stored transposed).
    let transposed: Vec<Vec<i64>> = (0..w)
        .into_par_iter()
        .map(|x| {
            let f: Vec<i64> = (0..h)
                .map(|y| if mask[y * w + x] { 0 } else { INF })
                .collect();
            let mut out = vec![0; h];
            edt_1d(&f, &mut out, &mut Vec::new(), &mut Vec::new());
            out
        })
        .collect();
    for (x, col) in transposed.iter().enumerate() {
        for (y, &v) in col.iter().enumerate() {
            cols[y * w + x] = v;
        }
    }
    let mut dist = vec![0; h * w];
    dist.par_chunks_mut(w)
        .zip(cols.par_chunks(w))
        .for_each(|(out, row)| {
            edt_1d(row, out, &mut Vec::new(), &mut Vec::new());
        });
    Some(dist)
}

fn f1(recall: f64, precision: f64) -> f64 {
    if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    }
}

/// Fraction of `from` pixels within `tolerance` of some `to` pixel.
fn matched_fraction(from: &[bool], to_dist: &Option<Vec<i64>>, tol2: f64) -> Option<f64> {
    let total = from.iter().filter(|&&b| b).count();
    if total == 0 {
        return None;
    }
    let hits = match to_dist {
        None => 0,
        Some(d) => from
            .iter()
            .zip(d)
            .filter(|(&b, &d2)| b && (d2 as f64) <= tol2)
            .count(),
    };
    Some(hits as f64 / total as f64)
}

pub fn boundary_prf(pred: &LabelMap, gt: &LabelMap, tolerance: f64) -> Result<BoundaryScores> {
    boundary_prf_ignoring(pred, gt, tolerance, None)
}

pub fn boundary_prf_ignoring(
    pred: &LabelMap,
    gt: &LabelMap,
    tolerance: f64,
    ignore: Option<u32>,
) -> Result<BoundaryScores> {
    check_dims(pred, gt)?;
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tolerance} must be >= 0"
        )));
    }
    let (h, w) = (pred.height(), pred.width());
    let mut pb = extract_boundaries(pred);
    let mut gb = extract_boundaries(gt);
    if let Some(ig) = ignore {
        for ((p, g), &label) in pb.iter_mut().zip(gb.iter_mut()).zip(gt.labels()) {
            if label == ig {
                *p = false;
                *g = false;
            }
        }
    }
    let tol2 = tolerance * tolerance;
    let pred_dist = squared_distance_transform(&pb, h, w);
    let gt_dist = squared_distance_transform(&gb, h, w);
    let recall = matched_fraction(&gb, &pred_dist, tol2);
    let precision = matched_fraction(&pb, &gt_dist, tol2);
    let (recall, precision) = match (recall, precision) {
        (None, None) => (1.0, 1.0),
        (None, Some(_)) => (1.0, 0.0),
        (Some(_), None) => (0.0, 0.0),
        (Some(r), Some(p)) => (r, p),
    };
    Ok(BoundaryScores {
        recall,
        precision,
        f1: f1(recall, precision),
    })
}

pub fn evaluate(pred: &LabelMap, gt: &GroundTruth, tolerance: f64) -> Result<MetricsReport> {
    let asa = asa_ignoring(pred, &gt.labels, gt.ignore_label)?;
    let b = boundary_prf_ignoring(pred, &gt.labels, tolerance, gt.ignore_label)?;
    Ok(MetricsReport {
        asa,
        boundary_recall: b.recall,
        boundary_precision: b.precision,
        boundary_f1: b.f1,
        n_regions: pred.distinct_count(),
        tolerance_px: tolerance,
    })
}
