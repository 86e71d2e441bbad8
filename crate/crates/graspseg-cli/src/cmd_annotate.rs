//! `graspseg annotate` — label held objects by subtracting a robot-only
//! prediction from the combined foreground mask.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::Args;
use graspseg_core::annotate::{object_mask, select_srn_prediction, SrnPrediction};
use graspseg_core::annotations::{AnnotationSet, Category, ImageInfo};
use graspseg_core::BinaryMask;
use serde::{Deserialize, Serialize};

use crate::io::{load_mask_png, save_annotations, save_mask_png, write_provenance};
use crate::opts::{load_cfg, pick, require};

/// Category id for held objects in emitted annotation sets.
pub const CLASS_OBJECT: u32 = 2;

#[derive(Args, Debug)]
pub struct AnnotateArgs {
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root holding frames/*.json sidecars.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Directory of combined foreground masks (fgseg output masks/).
    #[arg(long)]
    fg_masks: Option<PathBuf>,
    /// Directory of robot-only prediction masks, one <stem>.png per frame.
    #[arg(long)]
    srn_masks: Option<PathBuf>,
    /// Optional JSON map of stem -> prediction confidence (default 1.0).
    #[arg(long)]
    srn_scores: Option<PathBuf>,
    /// Output directory (masks/ and annotations.json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recorded in provenance; the subtraction itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct AnnotateCfg {
    frames: Option<PathBuf>,
    fg_masks: Option<PathBuf>,
    srn_masks: Option<PathBuf>,
    srn_scores: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct AnnotateProvenance {
    srn_scores_provided: bool,
}

type ScoreMap = std::collections::BTreeMap<String, f64>;

pub fn run(args: AnnotateArgs) -> Result<()> {
    let cfg: AnnotateCfg = load_cfg(&args.config)?;
    let root = require("frames", args.frames, cfg.frames)?;
    let fg_dir = require("fg-masks", args.fg_masks, cfg.fg_masks)?;
    let srn_dir = require("srn-masks", args.srn_masks, cfg.srn_masks)?;
    let out = require("out", args.out, cfg.out)?;
    let seed = pick(args.seed, cfg.seed, 0);
    let scores_path = args.srn_scores.or(cfg.srn_scores);
    let scores: ScoreMap =
        scores_path.as_ref().map(|p| crate::io::read_json(p)).transpose()?.unwrap_or_default();

    let entries = crate::io::list_frames(&root)?;
    let mut set = AnnotationSet {
        categories: vec![
            Category { id: 0, name: "background".into() },
            Category { id: CLASS_OBJECT, name: "object".into() },
        ],
        ..Default::default()
    };
    let mut next_ann_id = 0u64;
    let mut written = 0usize;
    for (i, entry) in entries.iter().enumerate() {
        let fg = load_mask_png(&fg_dir.join(format!("{}.png", entry.stem)))?;
        let (h, w) = fg.dims();
        let srn_path = srn_dir.join(format!("{}.png", entry.stem));
        let predictions: Vec<SrnPrediction> = if srn_path.is_file() {
            let score = scores.get(&entry.stem).copied().unwrap_or(1.0);
            vec![SrnPrediction { mask: load_mask_png(&srn_path)?, score }]
        } else {
            eprintln!("warning: {}: no robot prediction mask, treating it as empty", entry.stem);
            Vec::new()
        };
        let robot: BinaryMask = select_srn_prediction(&predictions, h, w);
        let object = object_mask(&fg, &robot).map_err(|e| anyhow!("{}: {e}", entry.stem))?;
        save_mask_png(&out.join(format!("masks/{}.png", entry.stem)), &object)?;
        written += 1;

        let image_id = i as u64;
        set.images.push(ImageInfo {
            id: image_id,
            file_name: entry.record.rgb.clone(),
            height: h,
            width: w,
        });
        let score = scores.get(&entry.stem).copied().unwrap_or(1.0);
        if let Some(ann) = AnnotationSet::annotation_from_mask(
            next_ann_id,
            image_id,
            CLASS_OBJECT,
            &object,
            Some(score),
        ) {
            next_ann_id += 1;
            set.annotations.push(ann);
        }
    }
    save_annotations(&out.join("annotations.json"), &set)?;
    write_provenance(
        &out,
        "annotate",
        seed,
        &AnnotateProvenance { srn_scores_provided: scores_path.is_some() },
    )?;
    println!("wrote {written} object masks to {}", out.join("masks").display());
    Ok(())
}
