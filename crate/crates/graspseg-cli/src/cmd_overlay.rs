//! `graspseg overlay` — visual composites: robot prediction tinted blue,
//! extracted object tinted red, over the original color frame.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;
use graspseg_core::{BinaryMask, RgbImage};
use serde::{Deserialize, Serialize};

use crate::io::{load_mask_png, save_rgb_png, write_provenance};
use crate::opts::{load_cfg, pick, pick_opt, require};

#[derive(Args, Debug)]
pub struct OverlayArgs {
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root holding frames/*.json sidecars.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Directory of robot prediction masks to tint blue.
    #[arg(long)]
    srn_masks: Option<PathBuf>,
    /// Directory of object masks to tint red.
    #[arg(long)]
    object_masks: Option<PathBuf>,
    /// Output directory for the composites.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recorded in provenance only; compositing is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct OverlayCfg {
    frames: Option<PathBuf>,
    srn_masks: Option<PathBuf>,
    object_masks: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct OverlayProvenance {
    srn_masks: bool,
    object_masks: bool,
}

/// Blend `color` into every masked pixel at 50%.
fn tint(img: &mut RgbImage, mask: &BinaryMask, color: [u8; 3]) {
    let (h, w) = img.dims();
    for r in 0..h {
        for c in 0..w {
            if mask.at(r, c) {
                let px = img.px(r, c);
                let mixed =
                    [0, 1, 2].map(|i| ((px[i] as u16 + color[i] as u16) / 2) as u8);
                img.set_px(r, c, mixed);
            }
        }
    }
}

fn optional_mask(dir: &Option<PathBuf>, stem: &str) -> Result<Option<BinaryMask>> {
    match dir {
        Some(d) => {
            let path: &Path = &d.join(format!("{stem}.png"));
            if path.is_file() {
                Ok(Some(load_mask_png(path)?))
            } else {
                Ok(None)
            }
        }
        None => Ok(None),
    }
}

pub fn run(args: OverlayArgs) -> Result<()> {
    let cfg: OverlayCfg = load_cfg(&args.config)?;
    let root = require("frames", args.frames, cfg.frames)?;
    let out = require("out", args.out, cfg.out)?;
    let seed = pick(args.seed, cfg.seed, 0);
    let srn_dir = pick_opt(args.srn_masks, cfg.srn_masks);
    let obj_dir = pick_opt(args.object_masks, cfg.object_masks);
    if srn_dir.is_none() && obj_dir.is_none() {
        return Err(crate::opts::UsageError(
            "need --srn-masks and/or --object-masks to overlay".into(),
        )
        .into());
    }

    let entries = crate::io::list_frames(&root)?;
    for entry in &entries {
        let mut rgb = crate::io::load_rgb_png(&root.join(&entry.record.rgb))?;
        let (h, w) = rgb.dims();
        let mut drew = false;
        if let Some(mask) = optional_mask(&srn_dir, &entry.stem)? {
            if mask.dims() != (h, w) {
                bail!("{}: robot mask is {:?}, frame is {:?}", entry.stem, mask.dims(), (h, w));
            }
            tint(&mut rgb, &mask, [0, 0, 255]);
            drew = true;
        }
        if let Some(mask) = optional_mask(&obj_dir, &entry.stem)? {
            if mask.dims() != (h, w) {
                bail!("{}: object mask is {:?}, frame is {:?}", entry.stem, mask.dims(), (h, w));
            }
            tint(&mut rgb, &mask, [255, 0, 0]);
            drew = true;
        }
        if !drew {
            eprintln!("warning: {}: no masks found, copying the frame unchanged", entry.stem);
        }
        save_rgb_png(&out.join(format!("{}.png", entry.stem)), &rgb)?;
    }

    write_provenance(
        &out,
        "overlay",
        seed,
        &OverlayProvenance { srn_masks: srn_dir.is_some(), object_masks: obj_dir.is_some() },
    )?;
    println!("wrote {} composites to {}", entries.len(), out.display());
    Ok(())
}
