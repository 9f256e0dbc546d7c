//! Method presets and the artifacts written by each command.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{debug, info, warn};
use serde::Serialize;
use spixel::merge::{agglomerate, build_rag, cut_dendrogram, Dendrogram};
use spixel::metrics::GroundTruth;
use spixel::overlay::render_overlay;
use spixel::polygon::{to_geojson, trace_region_polygons};
use spixel::raster::{load_image, rgb_to_feature};
use spixel::slic::{slic_segment, SlicParams, SuperpixelSegmentation};
use spixel::stain::{rgb_to_hed, suppress_channel};
use spixel::upsample::upsample;
use spixel::{ftm, labelio, FeatureMap, LabelMap, RasterImage};

use crate::config::{ClusterCount, Method, RunConfig};

pub const STATS_FILE: &str = "stats.json";
pub const OVERLAY_FILE: &str = "overlay.png";
pub const DENDROGRAM_FILE: &str = "dendrogram.json";
pub const GEOJSON_FILE: &str = "regions.geojson";
pub const LABELS_STEM: &str = "labels";
pub const CLUSTERS_STEM: &str = "clusters";

pub fn require_image(cfg: &RunConfig) -> Result<RasterImage> {
    let path = cfg.image.as_ref().context("no input image (--image)")?;
    load_image(path).with_context(|| format!("loading {}", path.display()))
}

/// Feature map the given method clusters on, at the image's resolution.
pub fn method_features(cfg: &RunConfig, method: Method, image: &RasterImage) -> Result<FeatureMap> {
    Ok(match method {
        Method::RgbSlic => rgb_to_feature(image)?,
        Method::HedSlic => {
            let hed = rgb_to_hed(image, &cfg.stain_matrix()?)?;
            suppress_channel(&hed, &cfg.suppression)?
        }
        Method::FeatureSlic => {
            let path = cfg
                .features
                .as_ref()
                .context("feature-slic needs --features")?;
            let tensor = ftm::read_feature_tensor(path)
                .with_context(|| format!("reading {}", path.display()))?;
            debug!(
                "tensor {}x{}x{} -> {}x{}",
                tensor.height(),
                tensor.width(),
                tensor.channels(),
                image.height(),
                image.width()
            );
            if tensor.height() == image.height() && tensor.width() == image.width() {
                tensor
            } else {
                upsample(&tensor, image.height(), image.width(), cfg.upsample).with_context(
                    || {
                        format!(
                            "tensor {}x{} cannot be upsampled to image {}x{}",
                            tensor.height(),
                            tensor.width(),
                            image.height(),
                            image.width()
                        )
                    },
                )?
            }
        }
    })
}

#[derive(Serialize)]
struct RegionRecord<'a> {
    label: usize,
    count: usize,
    mean: &'a [f64],
}

#[derive(Serialize)]
struct StatsDoc<'a> {
    method: &'a str,
    height: usize,
    width: usize,
    step: usize,
    compactness: f64,
    iterations: usize,
    n_superpixels: usize,
    regions: Vec<RegionRecord<'a>>,
}

pub fn stats_json(
    seg: &SuperpixelSegmentation,
    method: Method,
    params: &SlicParams,
) -> Result<String> {
    let doc = StatsDoc {
        method: method.name(),
        height: seg.labels().height(),
        width: seg.labels().width(),
        step: params.step,
        compactness: params.compactness,
        iterations: params.iterations,
        n_superpixels: seg.len(),
        regions: seg
            .stats()
            .iter()
            .enumerate()
            .map(|(label, s)| RegionRecord {
                label,
                count: s.count,
                mean: &s.mean,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

pub struct Segmented {
    pub image: RasterImage,
    pub seg: SuperpixelSegmentation,
    pub params: SlicParams,
    pub labels_path: PathBuf,
}

/// Segments `cfg.image` with `cfg.method` and writes labels, stats and overlay.
pub fn run_segment(cfg: &RunConfig) -> Result<Segmented> {
    cfg.validate()?;
    let image = require_image(cfg)?;
    let features = method_features(cfg, cfg.method, &image)?;
    let params = cfg.slic_params(cfg.method, cfg.slic.step);
    info!(
        "{} on {}x{}: step {} compactness {}",
        cfg.method,
        image.height(),
        image.width(),
        params.step,
        params.compactness
    );
    let seg = slic_segment(&features, &params)?;
    info!("{} superpixels", seg.len());

    let dir = out_dir(cfg)?;
    let labels_path = labelio::save_label_map(seg.labels(), dir, LABELS_STEM)?;
    write(
        &dir.join(STATS_FILE),
        stats_json(&seg, cfg.method, &params)?,
    )?;
    render_overlay(&image, seg.labels(), None)?.save(dir.join(OVERLAY_FILE))?;
    Ok(Segmented {
        image,
        seg,
        params,
        labels_path,
    })
}

/// Clamps `k` into the range of cuts the dendrogram supports.
pub fn clamp_k(d: &Dendrogram, k: usize) -> usize {
    let clamped = k.clamp(d.min_clusters(), d.initial_count);
    if clamped != k {
        warn!(
            "k = {k} outside [{}, {}], using {clamped}",
            d.min_clusters(),
            d.initial_count
        );
    }
    clamped
}

pub struct Clustered {
    pub segmented: Segmented,
    pub dendrogram: Dendrogram,
    pub cut: Option<LabelMap>,
}

/// Segment, agglomerate, write the dendrogram and, when `cfg.k` is set, the
/// cut label map and a two-level overlay.
pub fn run_cluster(cfg: &RunConfig) -> Result<Clustered> {
    let segmented = run_segment(cfg)?;
    let seg = &segmented.seg;
    let dendrogram = agglomerate(seg, &build_rag(seg))?;
    let dir = &cfg.out;
    write(&dir.join(DENDROGRAM_FILE), dendrogram.to_json()?)?;
    let cut = match cfg.k {
        ClusterCount::None => None,
        ClusterCount::K(k) => {
            let cut = cut_dendrogram(&dendrogram, seg, clamp_k(&dendrogram, k))?;
            labelio::save_label_map(&cut, dir, CLUSTERS_STEM)?;
            render_overlay(&segmented.image, seg.labels(), Some(&cut))?
                .save(dir.join(OVERLAY_FILE))?;
            Some(cut)
        }
    };
    Ok(Clustered {
        segmented,
        dendrogram,
        cut,
    })
}

pub fn load_labels(path: &Path) -> Result<LabelMap> {
    labelio::load_label_map(path).with_context(|| format!("loading labels {}", path.display()))
}

pub fn load_ground_truth(path: &Path, ignore_label: Option<u32>) -> Result<GroundTruth> {
    let mut gt = GroundTruth::load(path)
        .with_context(|| format!("loading ground truth {}", path.display()))?;
    gt.ignore_label = ignore_label;
    Ok(gt)
}

/// Overlay of existing label maps onto an image.
pub fn run_render(image: &Path, base: &Path, clustered: Option<&Path>, out: &Path) -> Result<()> {
    let image = load_image(image)?;
    let base = load_labels(base)?;
    let clustered = clustered.map(load_labels).transpose()?;
    render_overlay(&image, &base, clustered.as_ref())?.save(out)?;
    Ok(())
}

/// GeoJSON with one feature per region. Class names come from the label
/// file's sidecar when present.
pub fn export_polygons(labels_path: &Path, out: &Path) -> Result<usize> {
    let gt = GroundTruth::load(labels_path)
        .with_context(|| format!("loading {}", labels_path.display()))?;
    let regions = trace_region_polygons(&gt.labels);
    let doc = to_geojson(&regions, |l| gt.class_name(l).map(str::to_owned));
    write(out, serde_json::to_string(&doc)?)?;
    Ok(regions.len())
}
