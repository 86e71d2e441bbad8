//! `graspseg augment` — composite labeled manipulator frames over new
//! backgrounds and paste in distractor objects, emitting training splits.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use graspseg_core::annotations::rle_decode;
use graspseg_core::augment::{build_srn_dataset, AugmentSpec, LabeledFrame};
use graspseg_core::BinaryMask;
use serde::{Deserialize, Serialize};

use crate::io::{
    list_png_files, load_annotations, load_rgb_png, load_rgba_png, save_annotations,
    save_mask_png, save_rgb_png, write_provenance,
};
use crate::opts::{load_cfg, parse_f64_pair, pick, require};

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labeled source frames: an annotation file (e.g. selfdata output).
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Directory the annotation file names resolve against.
    #[arg(long)]
    image_root: Option<PathBuf>,
    /// Directory of replacement background PNGs.
    #[arg(long)]
    backgrounds: Option<PathBuf>,
    /// Directory of distractor-object RGBA PNGs.
    #[arg(long)]
    objects: Option<PathBuf>,
    /// Passes over the most plentiful resource per augmented split.
    #[arg(long)]
    repeats: Option<usize>,
    /// Distractor scale range as lo,hi.
    #[arg(long, value_parser = parse_f64_pair)]
    scale: Option<(f64, f64)>,
    /// Distractor rotation range in degrees as lo,hi.
    #[arg(long, value_parser = parse_f64_pair)]
    rotation: Option<(f64, f64)>,
    /// Seed for per-item scale/rotation sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (images/, masks/, annotations/).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct AugmentCfg {
    annotations: Option<PathBuf>,
    image_root: Option<PathBuf>,
    backgrounds: Option<PathBuf>,
    objects: Option<PathBuf>,
    repeats: Option<usize>,
    scale: Option<(f64, f64)>,
    rotation: Option<(f64, f64)>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct AugmentProvenance {
    n_frames: usize,
    n_backgrounds: usize,
    n_objects: usize,
    repeats: usize,
    scale_range: (f64, f64),
    rotation_range_deg: (f64, f64),
}

/// Decode the manipulator mask for one image from its annotations.
fn frame_mask(
    set: &graspseg_core::annotations::AnnotationSet,
    image_id: u64,
    height: usize,
    width: usize,
) -> Result<BinaryMask> {
    let mut mask = BinaryMask::zeros(height, width);
    for ann in set.annotations.iter().filter(|a| a.image_id == image_id) {
        let decoded = rle_decode(&ann.segmentation).map_err(|e| anyhow!("{e}"))?;
        mask = mask.union(&decoded);
    }
    Ok(mask)
}

pub fn run(args: AugmentArgs) -> Result<()> {
    let cfg: AugmentCfg = load_cfg(&args.config)?;
    let ann_path = require("annotations", args.annotations, cfg.annotations)?;
    let image_root = require("image-root", args.image_root, cfg.image_root)?;
    let bg_dir = require("backgrounds", args.backgrounds, cfg.backgrounds)?;
    let obj_dir = require("objects", args.objects, cfg.objects)?;
    let out = require("out", args.out, cfg.out)?;
    let seed = pick(args.seed, cfg.seed, 0);

    let set = load_annotations(&ann_path)?;
    if set.images.is_empty() {
        bail!("{}: no images to augment", ann_path.display());
    }
    let mut images = set.images.clone();
    images.sort_by_key(|im| im.id);
    let frames: Vec<LabeledFrame> = images
        .iter()
        .map(|im| {
            let rgb = load_rgb_png(&image_root.join(&im.file_name))?;
            let mask = frame_mask(&set, im.id, im.height, im.width)?;
            LabeledFrame::new(rgb, mask).map_err(|e| anyhow!("{}: {e}", im.file_name))
        })
        .collect::<Result<_>>()?;

    let backgrounds = list_png_files(&bg_dir)?
        .iter()
        .map(|p| load_rgb_png(p))
        .collect::<Result<Vec<_>>>()
        .context("loading backgrounds")?;
    let objects = list_png_files(&obj_dir)?
        .iter()
        .map(|p| load_rgba_png(p))
        .collect::<Result<Vec<_>>>()
        .context("loading distractor objects")?;

    let mut spec = AugmentSpec::new(backgrounds, objects, seed);
    spec.repeats = pick(args.repeats, cfg.repeats, spec.repeats);
    spec.scale_range = pick(args.scale, cfg.scale, spec.scale_range);
    spec.rotation_range_deg = pick(args.rotation, cfg.rotation, spec.rotation_range_deg);

    let provenance = AugmentProvenance {
        n_frames: frames.len(),
        n_backgrounds: spec.backgrounds.len(),
        n_objects: spec.fg_objects.len(),
        repeats: spec.repeats,
        scale_range: spec.scale_range,
        rotation_range_deg: spec.rotation_range_deg,
    };

    let sets = build_srn_dataset(&frames, &spec, |split, i, frame| {
        let sub = format!("{}/{i:06}.png", split.to_lowercase());
        save_rgb_png(&out.join("images").join(&sub), &frame.rgb)
            .and_then(|()| save_mask_png(&out.join("masks").join(&sub), &frame.manipulator_mask))
            .map_err(|e| graspseg_core::Error::Integrity(format!("{e:#}")))
    })
    .map_err(|e| anyhow!("{e}"))?;

    let mut total = 0usize;
    for (name, split_set) in &sets {
        save_annotations(&out.join(format!("annotations/{}.json", name.to_lowercase())), split_set)?;
        if name != "All" {
            total += split_set.images.len();
        }
        println!("split {name}: {} images", split_set.images.len());
    }
    write_provenance(&out, "augment", seed, &provenance)?;
    println!("wrote {total} rendered images to {}", out.join("images").display());
    Ok(())
}
