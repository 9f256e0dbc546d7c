//! Method × diameter × cluster-count sweeps against ground truth.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use spixel::merge::{agglomerate, build_rag, cut_dendrogram};
use spixel::metrics::{evaluate, GroundTruth};
use spixel::slic::{slic_segment, SuperpixelSegmentation};
use spixel::FeatureMap;

use crate::config::{ClusterCount, Method, RunConfig};
use crate::pipeline::{clamp_k, method_features, require_image};

pub const REPORT_FILE: &str = "report.csv";

/// One CSV row; field order is the column order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: String,
    pub diameter: usize,
    pub compactness: f64,
    pub k: String,
    pub n_regions: usize,
    pub asa: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub runtime_ms: Option<u64>,
}

/// Identifies one sweep cell in the report.
#[derive(Clone, Copy, Debug)]
pub struct Cell<'a> {
    pub method: &'a str,
    pub diameter: usize,
    pub compactness: f64,
}

/// Evaluates one segmentation unclustered and at every requested cut.
/// `elapsed_ms` is the time already spent producing `seg`, or `None` when
/// timing is off.
pub fn rows_for_segmentation(
    cell: Cell<'_>,
    seg: &SuperpixelSegmentation,
    gt: &GroundTruth,
    cluster_counts: &[ClusterCount],
    tolerance: f64,
    elapsed_ms: Option<u64>,
) -> Result<Vec<SweepRow>> {
    let clock = Instant::now();
    let since = |base: Option<u64>| base.map(|ms| ms + clock.elapsed().as_millis() as u64);
    let row =
        |k: ClusterCount, labels: &spixel::LabelMap, runtime_ms: Option<u64>| -> Result<SweepRow> {
            let r = evaluate(labels, gt, tolerance)?;
            Ok(SweepRow {
                method: cell.method.to_owned(),
                diameter: cell.diameter,
                compactness: cell.compactness,
                k: k.to_string(),
                n_regions: r.n_regions,
                asa: r.asa,
                recall: r.boundary_recall,
                precision: r.boundary_precision,
                f1: r.boundary_f1,
                runtime_ms,
            })
        };

    let dendrogram = if cluster_counts
        .iter()
        .any(|k| matches!(k, ClusterCount::K(_)))
    {
        Some(agglomerate(seg, &build_rag(seg))?)
    } else {
        None
    };
    let merge_ms = since(elapsed_ms);

    cluster_counts
        .iter()
        .map(|&k| match k {
            ClusterCount::None => row(k, seg.labels(), elapsed_ms),
            ClusterCount::K(n) => {
                let d = dendrogram
                    .as_ref()
                    .expect("dendrogram built for cluster rows");
                let start = Instant::now();
                let cut = cut_dendrogram(d, seg, clamp_k(d, n))?;
                let runtime = merge_ms.map(|ms| ms + start.elapsed().as_millis() as u64);
                row(k, &cut, runtime)
            }
        })
        .collect()
}

fn sweep_cell(
    cfg: &RunConfig,
    method: Method,
    features: &FeatureMap,
    diameter: usize,
    gt: &GroundTruth,
) -> Result<Vec<SweepRow>> {
    let params = cfg.slic_params(method, diameter);
    let start = Instant::now();
    let seg = slic_segment(features, &params)?;
    let elapsed = cfg
        .record_timing
        .then(|| start.elapsed().as_millis() as u64);
    info!("{method} d={diameter}: {} superpixels", seg.len());
    let cell = Cell {
        method: method.name(),
        diameter,
        compactness: params.compactness,
    };
    rows_for_segmentation(
        cell,
        &seg,
        gt,
        &cfg.sweep.cluster_counts,
        cfg.tolerance,
        elapsed,
    )
}

/// Runs every (method, diameter) cell in parallel; rows come back in
/// (method, diameter, k) order as listed in the config.
pub fn run_sweep(cfg: &RunConfig, gt: &GroundTruth) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let image = require_image(cfg)?;
    if image.height() != gt.labels.height() || image.width() != gt.labels.width() {
        bail!(
            "ground truth {}x{} does not match image {}x{}",
            gt.labels.height(),
            gt.labels.width(),
            image.height(),
            image.width()
        );
    }
    let methods = cfg.sweep_methods();
    let features: Vec<FeatureMap> = methods
        .iter()
        .map(|&m| method_features(cfg, m, &image))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|m| cfg.sweep.diameters.iter().map(move |&d| (m, d)))
        .collect();
    let per_cell: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(m, d)| sweep_cell(cfg, methods[m], &features[m], d, gt))
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
