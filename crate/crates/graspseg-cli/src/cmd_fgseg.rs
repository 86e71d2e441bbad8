//! `graspseg fgseg` — depth-guided foreground masks for every frame of a
//! dataset, optionally dumping each intermediate stage.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use clap::Args;
use graspseg_core::pipeline::{foreground_mask, FgDebugBundle, FgPipelineParams};
use graspseg_core::{BinaryMask, Trimap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{load_frame_images, save_mask_png, write_provenance, FrameEntry};
use crate::opts::{
    load_cfg, pick, require, resolve_pipeline, PipelineFileCfg, PipelineFlags, ResolvedPipeline,
};

#[derive(Args, Debug)]
pub struct FgsegArgs {
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root holding frames/*.json sidecars.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Output directory (masks land in masks/).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; frame i refines with seed+i.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write per-stage images under debug/<stem>/.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    debug: Option<bool>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct FgsegCfg {
    frames: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    debug: Option<bool>,
    #[serde(flatten)]
    pipeline: PipelineFileCfg,
}

#[derive(Serialize)]
struct FgsegProvenance {
    pipeline: FgPipelineParams,
    max_depth_mm: f32,
    debug: bool,
}

/// Gray rendering of a four-level trimap for debug dumps.
fn trimap_to_gray(tri: &Trimap) -> graspseg_core::RgbImage {
    let (h, w) = tri.dims();
    let data = tri.data().iter().flat_map(|&v| [v * 85; 3]).collect();
    graspseg_core::RgbImage::from_data(h, w, data).expect("length matches dims")
}

fn write_debug(dir: &Path, dbg: &FgDebugBundle) -> Result<()> {
    save_mask_png(&dir.join("selected.png"), &dbg.m0)?;
    save_mask_png(&dir.join("certain.png"), &dbg.mp)?;
    save_mask_png(&dir.join("envelope.png"), &dbg.mr)?;
    crate::io::save_rgb_png(&dir.join("trimap.png"), &trimap_to_gray(&dbg.mgc))?;
    save_mask_png(&dir.join("refined.png"), &dbg.mfg)?;
    Ok(())
}

/// One frame through the pipeline; returns the mask plus warning text.
pub fn run_frame(
    root: &Path,
    entry: &FrameEntry,
    resolved: &ResolvedPipeline,
    seed: u64,
    want_debug: bool,
) -> Result<(BinaryMask, Option<FgDebugBundle>, Vec<String>)> {
    let mut warnings = Vec::new();
    let loaded = load_frame_images(root, &entry.record, resolved.max_depth_mm)?;
    if loaded.clamped > 0 {
        warnings.push(format!(
            "{}: {} depth samples beyond {} mm clamped to invalid",
            entry.stem, loaded.clamped, resolved.max_depth_mm
        ));
    }
    let out = foreground_mask(
        &loaded.rgb,
        &loaded.depth,
        &entry.record.links,
        &entry.record.intrinsics,
        &resolved.params,
        seed,
        want_debug,
    )
    .map_err(|e| anyhow!("{}: {e}", entry.stem))?;
    if out.degenerate {
        warnings.push(format!(
            "{}: no link-confirmed depth segments; emitting the unrefined mask",
            entry.stem
        ));
    }
    Ok((out.mask, out.debug, warnings))
}

pub fn run(args: FgsegArgs) -> Result<()> {
    let cfg: FgsegCfg = load_cfg(&args.config)?;
    let root = require("frames", args.frames, cfg.frames)?;
    let out = require("out", args.out, cfg.out)?;
    let seed = pick(args.seed, cfg.seed, 0);
    let want_debug = pick(args.debug, cfg.debug, false);
    let resolved = resolve_pipeline(&args.pipeline, &cfg.pipeline);

    let entries = crate::io::list_frames(&root)?;
    let mut results: Vec<Vec<String>> = entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let (mask, dbg, warnings) =
                run_frame(&root, entry, &resolved, seed.wrapping_add(i as u64), want_debug)?;
            save_mask_png(&out.join(format!("masks/{}.png", entry.stem)), &mask)?;
            if let Some(d) = dbg {
                write_debug(&out.join(format!("debug/{}", entry.stem)), &d)?;
            }
            Ok(warnings)
        })
        .collect::<Result<_>>()?;
    for warning in results.drain(..).flatten() {
        eprintln!("warning: {warning}");
    }

    write_provenance(
        &out,
        "fgseg",
        seed,
        &FgsegProvenance {
            pipeline: resolved.params,
            max_depth_mm: resolved.max_depth_mm,
            debug: want_debug,
        },
    )?;
    println!("wrote {} masks to {}", entries.len(), out.join("masks").display());
    Ok(())
}
