//! Command-line surface.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ClusterCount, Method, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "spixel",
    version,
    about = "Superpixel pre-segmentation for histology annotation"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Superpixels for one image: labels, stats.json, overlay.png.
    Segment(RunArgs),
    /// Superpixels plus Ward agglomeration; writes dendrogram.json and the cut at --k.
    Cluster(RunArgs),
    /// Score a label map against ground truth.
    Eval(EvalArgs),
    /// Evaluate every method × diameter × k cell into report.csv.
    Sweep(RunArgs),
    /// Draw superpixel (black) and cluster (blue) outlines onto an image.
    Render(RenderArgs),
    /// Label map to a GeoJSON FeatureCollection.
    ExportPolygons(ExportPolygonsArgs),
    /// Dendrogram for an image, from fresh superpixels or an existing label map.
    ExportDendrogram(ExportDendrogramArgs),
    /// Write a synthetic image and its ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// rgb-slic, hed-slic or feature-slic.
    #[arg(long)]
    pub method: Option<Method>,
    /// FTM feature tensor (feature-slic).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Superpixel diameter in pixels.
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long)]
    pub compactness: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Cluster count, or `none`. Sweeps accept a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<ClusterCount>,
    /// Sweep diameters, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub diameters: Vec<usize>,
    /// Sweep methods, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<Method>,
    /// Boundary matching tolerance in pixels.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Ground-truth label map (sweep).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fill the runtime_ms column of the sweep report.
    #[arg(long)]
    pub timing: bool,
}

impl RunArgs {
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.image {
            cfg.image = Some(v.clone());
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = &self.features {
            cfg.features = Some(v.clone());
        }
        if let Some(v) = self.step {
            cfg.slic.step = v;
        }
        if let Some(v) = self.compactness {
            cfg.slic.compactness = Some(v);
        }
        if let Some(v) = self.iterations {
            cfg.slic.iterations = v;
        }
        if let Some(&k) = self.k.first() {
            cfg.k = k;
            cfg.sweep.cluster_counts = self.k.clone();
        }
        if !self.diameters.is_empty() {
            cfg.sweep.diameters = self.diameters.clone();
        }
        if !self.methods.is_empty() {
            cfg.sweep.methods = self.methods.clone();
        }
        if let Some(v) = self.tolerance {
            cfg.tolerance = v;
        }
        if let Some(v) = &self.gt {
            cfg.ground_truth = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.timing {
            cfg.record_timing = true;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted label map (.png or .lbl).
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = spixel::metrics::DEFAULT_TOLERANCE_PX)]
    pub tolerance: f64,
    /// Ground-truth label excluded from all metrics.
    #[arg(long)]
    pub ignore_label: Option<u32>,
    /// Also write metrics.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Superpixel labels, outlined in black.
    #[arg(long)]
    pub labels: PathBuf,
    /// Cluster labels, outlined in blue.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportPolygonsArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportDendrogramArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Existing superpixel label map; segment afresh when absent.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    TwoRegion,
    FourRegion,
    Textured,
    Stained,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Textured)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    /// Voronoi regions (textured).
    #[arg(long, default_value_t = 8)]
    pub regions: usize,
    /// Gaussian pixel noise in intensity levels.
    #[arg(long, default_value_t = 6.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}
