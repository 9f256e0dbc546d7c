//! Pipeline driver behind the `spixel` binary.

pub mod args;
pub mod config;
pub mod pipeline;
pub mod sweep;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use log::info;
use spixel::merge::{agglomerate, build_rag};
use spixel::metrics::evaluate;
use spixel::slic::SuperpixelSegmentation;
use spixel::synthetic;

use crate::args::{Cli, Command, EvalArgs, ExportDendrogramArgs, SynthArgs, SynthKind};
use crate::pipeline::{
    load_ground_truth, load_labels, method_features, require_image, DENDROGRAM_FILE, GEOJSON_FILE,
    OVERLAY_FILE,
};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Segment(args) => {
            let cfg = args.to_config()?;
            let s = pipeline::run_segment(&cfg)?;
            println!("{} superpixels -> {}", s.seg.len(), cfg.out.display());
        }
        Command::Cluster(args) => {
            let cfg = args.to_config()?;
            let c = pipeline::run_cluster(&cfg)?;
            match &c.cut {
                Some(cut) => println!(
                    "{} superpixels, {} clusters -> {}",
                    c.segmented.seg.len(),
                    cut.label_count(),
                    cfg.out.display()
                ),
                None => println!(
                    "{} superpixels -> {}",
                    c.segmented.seg.len(),
                    cfg.out.display()
                ),
            }
        }
        Command::Eval(args) => eval(&args)?,
        Command::Sweep(args) => {
            let cfg = args.to_config()?;
            let gt_path = cfg
                .ground_truth
                .as_ref()
                .context("sweep needs ground truth (--gt)")?;
            let gt = load_ground_truth(gt_path, cfg.ignore_label)?;
            let rows = sweep::run_sweep(&cfg, &gt)?;
            fs::create_dir_all(&cfg.out)
                .with_context(|| format!("creating {}", cfg.out.display()))?;
            let path = cfg.out.join(sweep::REPORT_FILE);
            sweep::write_csv(&rows, &path)?;
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Command::Render(args) => {
            fs::create_dir_all(&args.out)?;
            let path = args.out.join(OVERLAY_FILE);
            pipeline::run_render(&args.image, &args.labels, args.clusters.as_deref(), &path)?;
            println!("{}", path.display());
        }
        Command::ExportPolygons(args) => {
            fs::create_dir_all(&args.out)?;
            let path = args.out.join(GEOJSON_FILE);
            let n = pipeline::export_polygons(&args.labels, &path)?;
            println!("{n} regions -> {}", path.display());
        }
        Command::ExportDendrogram(args) => export_dendrogram(&args)?,
        Command::Synth(args) => synth(&args)?,
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let pred = load_labels(&args.labels)?;
    let gt = load_ground_truth(&args.gt, args.ignore_label)?;
    let report = evaluate(&pred, &gt, args.tolerance)?;
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("metrics.json"), &text)?;
    }
    println!("{text}");
    Ok(())
}

fn export_dendrogram(args: &ExportDendrogramArgs) -> Result<()> {
    let cfg = args.run.to_config()?;
    let dendrogram = match &args.labels {
        Some(path) => {
            cfg.validate()?;
            let image = require_image(&cfg)?;
            let features = method_features(&cfg, cfg.method, &image)?;
            let features = if cfg
                .slic_params(cfg.method, cfg.slic.step)
                .normalizes(features.channels())
            {
                features.standardized()
            } else {
                features
            };
            let labels = load_labels(path)?.densified();
            let seg = SuperpixelSegmentation::from_labels(labels, &features)?;
            agglomerate(&seg, &build_rag(&seg))?
        }
        None => pipeline::run_cluster(&cfg)?.dendrogram,
    };
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(DENDROGRAM_FILE);
    fs::write(&path, dendrogram.to_json()?)?;
    println!("{} merges -> {}", dendrogram.merges.len(), path.display());
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let (h, w) = (args.height, args.width);
    let out: &Path = &args.out;
    fs::create_dir_all(out)?;
    let fixture = match args.kind {
        SynthKind::TwoRegion => synthetic::two_region(h, w, args.noise, args.seed),
        SynthKind::FourRegion => synthetic::four_region(h, w, args.noise, args.seed),
        SynthKind::Textured => synthetic::textured(h, w, args.regions, args.noise, args.seed),
        SynthKind::Stained => {
            let image = synthetic::stained(h, w, &Default::default(), args.seed);
            image.save(out.join("image.png"))?;
            println!("{}", out.join("image.png").display());
            return Ok(());
        }
    };
    fixture.image.save(out.join("image.png"))?;
    let gt = spixel::labelio::save_label_map(&fixture.truth, out, "gt")?;
    info!("{} ground-truth regions", fixture.truth.distinct_count());
    println!("{} {}", out.join("image.png").display(), gt.display());
    Ok(())
}
