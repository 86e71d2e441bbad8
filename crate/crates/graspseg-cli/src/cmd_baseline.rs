//! `graspseg baseline` — color-prior box segmentation for comparison runs.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::Args;
use graspseg_core::baseline::{browatzki_segment, BrowatzkiParams};
use graspseg_core::PixelCoord;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{load_rgb_png, save_mask_png, write_provenance};
use crate::opts::{load_cfg, parse_pixel, pick, require};

#[derive(Args, Debug)]
pub struct BaselineArgs {
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root holding frames/*.json sidecars.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Output directory (masks land in masks/).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Side of the inner box left unlabeled while training the color model.
    #[arg(long)]
    inner_box: Option<usize>,
    /// Side of the outer box bounding the training ring.
    #[arg(long)]
    outer_box: Option<usize>,
    /// Gaussians in the background color model.
    #[arg(long)]
    gaussians: Option<usize>,
    /// Density below which an inner-box pixel counts as foreground.
    #[arg(long)]
    threshold: Option<f64>,
    /// Box center as row,col (defaults to the image center).
    #[arg(long, value_parser = parse_pixel)]
    center: Option<(i64, i64)>,
    /// Base seed; frame i fits its color model with seed+i.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct BaselineCfg {
    frames: Option<PathBuf>,
    out: Option<PathBuf>,
    inner_box: Option<usize>,
    outer_box: Option<usize>,
    gaussians: Option<usize>,
    threshold: Option<f64>,
    center: Option<(i64, i64)>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct BaselineProvenance {
    params: BrowatzkiParams,
}

pub fn run(args: BaselineArgs) -> Result<()> {
    let cfg: BaselineCfg = load_cfg(&args.config)?;
    let root = require("frames", args.frames, cfg.frames)?;
    let out = require("out", args.out, cfg.out)?;
    let seed = pick(args.seed, cfg.seed, 0);
    let defaults = BrowatzkiParams::default();
    let params = BrowatzkiParams {
        inner_box: pick(args.inner_box, cfg.inner_box, defaults.inner_box),
        outer_box: pick(args.outer_box, cfg.outer_box, defaults.outer_box),
        n_gaussians: pick(args.gaussians, cfg.gaussians, defaults.n_gaussians),
        density_threshold: pick(args.threshold, cfg.threshold, defaults.density_threshold),
        center: args
            .center
            .or(cfg.center)
            .map(|(r, c)| PixelCoord::new(r, c))
            .or(defaults.center),
    };

    let entries = crate::io::list_frames(&root)?;
    entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let rgb = load_rgb_png(&root.join(&entry.record.rgb))?;
            let mask = browatzki_segment(&rgb, &params, seed.wrapping_add(i as u64))
                .map_err(|e| anyhow!("{}: {e}", entry.stem))?;
            save_mask_png(&out.join(format!("masks/{}.png", entry.stem)), &mask)
        })
        .collect::<Result<Vec<_>>>()?;

    write_provenance(&out, "baseline", seed, &BaselineProvenance { params })?;
    println!("wrote {} masks to {}", entries.len(), out.join("masks").display());
    Ok(())
}
