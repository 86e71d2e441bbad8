//! `graspseg selfdata` — turn robot-only frames into a labeled manipulator
//! dataset: run the foreground pipeline and emit masks plus annotations.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use graspseg_core::annotations::{AnnotationSet, Category, ImageInfo};
use graspseg_core::augment::CLASS_MANIPULATOR;
use graspseg_core::pipeline::FgPipelineParams;
use graspseg_core::BinaryMask;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmd_fgseg::run_frame;
use crate::io::{save_annotations, save_mask_png, write_provenance};
use crate::opts::{load_cfg, pick, require, resolve_pipeline, PipelineFileCfg, PipelineFlags};

#[derive(Args, Debug)]
pub struct SelfdataArgs {
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root holding frames/*.json sidecars.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Output directory (masks/ and annotations.json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; frame i refines with seed+i.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct SelfdataCfg {
    frames: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    #[serde(flatten)]
    pipeline: PipelineFileCfg,
}

#[derive(Serialize)]
struct SelfdataProvenance {
    pipeline: FgPipelineParams,
    max_depth_mm: f32,
}

pub fn run(args: SelfdataArgs) -> Result<()> {
    let cfg: SelfdataCfg = load_cfg(&args.config)?;
    let root = require("frames", args.frames, cfg.frames)?;
    let out = require("out", args.out, cfg.out)?;
    let seed = pick(args.seed, cfg.seed, 0);
    let resolved = resolve_pipeline(&args.pipeline, &cfg.pipeline);

    let entries = crate::io::list_frames(&root)?;
    let per_frame: Vec<(BinaryMask, Vec<String>)> = entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let (mask, _, warnings) =
                run_frame(&root, entry, &resolved, seed.wrapping_add(i as u64), false)?;
            save_mask_png(&out.join(format!("masks/{}.png", entry.stem)), &mask)?;
            Ok((mask, warnings))
        })
        .collect::<Result<_>>()?;

    let mut set = AnnotationSet {
        categories: vec![
            Category { id: 0, name: "background".into() },
            Category { id: CLASS_MANIPULATOR, name: "manipulator".into() },
        ],
        ..Default::default()
    };
    let mut next_ann_id = 0u64;
    for (i, (entry, (mask, warnings))) in entries.iter().zip(&per_frame).enumerate() {
        for warning in warnings {
            eprintln!("warning: {warning}");
        }
        let (h, w) = mask.dims();
        let image_id = i as u64;
        set.images.push(ImageInfo {
            id: image_id,
            file_name: entry.record.rgb.clone(),
            height: h,
            width: w,
        });
        if let Some(ann) = AnnotationSet::annotation_from_mask(
            next_ann_id,
            image_id,
            CLASS_MANIPULATOR,
            mask,
            None,
        ) {
            next_ann_id += 1;
            set.annotations.push(ann);
        } else {
            eprintln!("warning: {}: empty mask, no annotation emitted", entry.stem);
        }
    }
    save_annotations(&out.join("annotations.json"), &set)?;

    write_provenance(
        &out,
        "selfdata",
        seed,
        &SelfdataProvenance { pipeline: resolved.params, max_depth_mm: resolved.max_depth_mm },
    )?;
    println!(
        "wrote {} masks and {} annotations to {}",
        entries.len(),
        set.annotations.len(),
        out.display()
    );
    Ok(())
}
