//! `graspseg eval-miou` / `graspseg eval-ap` — score predictions against
//! ground truth and emit a deterministic JSON report.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::Args;
use graspseg_core::annotations::{rle_decode, AnnotationSet};
use graspseg_core::metrics::{
    coco_ap, miou_report, pixel_precision_recall, Detection, GtInstance, MatchMode, MetricReport,
};
use graspseg_core::BinaryMask;
use serde::{Deserialize, Serialize};

use crate::io::{load_annotations, load_mask_png, paired_mask_stems, write_json, ClassMap};
use crate::opts::{load_cfg, pick, pick_opt, require};

// ---------------------------------------------------------------------------
// eval-miou
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct EvalMiouArgs {
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of predicted masks (<stem>.png).
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Directory of ground-truth masks with matching stems.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Optional JSON map stem -> class id (default: everything class 1).
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Write the full report here as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recorded in provenance only; scoring is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct EvalMiouCfg {
    pred: Option<PathBuf>,
    gt: Option<PathBuf>,
    classes: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
}

pub fn run_miou(args: EvalMiouArgs) -> Result<()> {
    let cfg: EvalMiouCfg = load_cfg(&args.config)?;
    let pred_dir = require("pred", args.pred, cfg.pred)?;
    let gt_dir = require("gt", args.gt, cfg.gt)?;
    let class_map: ClassMap = match pick_opt(args.classes, cfg.classes) {
        Some(path) => crate::io::read_json(&path)?,
        None => ClassMap::new(),
    };

    let stems = paired_mask_stems(&pred_dir, &gt_dir)?;
    let mut preds: Vec<BinaryMask> = Vec::with_capacity(stems.len());
    let mut gts: Vec<BinaryMask> = Vec::with_capacity(stems.len());
    let mut image_classes: Vec<u32> = Vec::with_capacity(stems.len());
    for stem in &stems {
        preds.push(load_mask_png(&pred_dir.join(format!("{stem}.png")))?);
        gts.push(load_mask_png(&gt_dir.join(format!("{stem}.png")))?);
        image_classes.push(class_map.get(stem).copied().unwrap_or(1));
    }

    let miou = miou_report(&preds, &gts, &image_classes, None).map_err(|e| anyhow!("{e}"))?;
    let pr = pixel_precision_recall(&preds, &gts, &image_classes, None).map_err(|e| anyhow!("{e}"))?;
    let report = MetricReport::assemble(miou, pr, None);

    for (cls, v) in &report.per_class_miou {
        println!("class {cls} mIoU {v:.3}");
    }
    println!("overall mIoU {:.3}", report.overall_miou);
    println!("precision {:.3}  recall {:.3}", report.precision, report.recall);
    if let Some(out) = pick_opt(args.out, cfg.out) {
        write_json(&out, &report)?;
        let seed = pick(args.seed, cfg.seed, 0);
        write_sidecar(&out, "eval-miou", seed, &MiouProvenance { n_images: stems.len() })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MiouProvenance {
    n_images: usize,
}

#[derive(Serialize)]
struct SidecarDoc<'a, P: Serialize> {
    command: &'a str,
    seed: u64,
    params: &'a P,
}

/// Reports are single files, so their provenance rides in a sibling file
/// named `<report>.provenance.json`.
fn write_sidecar<P: Serialize>(report: &std::path::Path, command: &str, seed: u64, params: &P) -> Result<()> {
    let stem = report.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let sidecar = report.with_file_name(format!("{stem}.provenance.json"));
    write_json(&sidecar, &SidecarDoc { command, seed, params })
}

// ---------------------------------------------------------------------------
// eval-ap
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct EvalApArgs {
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Annotation file holding the detections (scores required).
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Annotation file holding the ground truth.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Match on "mask" or "box" overlap.
    #[arg(long)]
    mode: Option<String>,
    /// Write the AP table here as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recorded in provenance only; scoring is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct EvalApCfg {
    pred: Option<PathBuf>,
    gt: Option<PathBuf>,
    mode: Option<String>,
    out: Option<PathBuf>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct ApReport {
    mode: String,
    n_detections: usize,
    n_ground_truth: usize,
    #[serde(flatten)]
    table: graspseg_core::metrics::ApTable,
}

fn decode_set(set: &AnnotationSet, want_scores: bool) -> Result<Vec<(u64, u32, f64, BinaryMask)>> {
    let mut out = Vec::with_capacity(set.annotations.len());
    for ann in &set.annotations {
        let mask = rle_decode(&ann.segmentation).map_err(|e| anyhow!("annotation {}: {e}", ann.id))?;
        let score = match (ann.score, want_scores) {
            (Some(s), _) => s,
            (None, false) => 1.0,
            (None, true) => 1.0, // unscored detections rank as full confidence
        };
        out.push((ann.image_id, ann.category_id, score, mask));
    }
    Ok(out)
}

pub fn run_ap(args: EvalApArgs) -> Result<()> {
    let cfg: EvalApCfg = load_cfg(&args.config)?;
    let pred_path = require("pred", args.pred, cfg.pred)?;
    let gt_path = require("gt", args.gt, cfg.gt)?;
    let mode = match pick(args.mode, cfg.mode, "mask".to_string()).as_str() {
        "mask" => MatchMode::Mask,
        "box" => MatchMode::Box,
        other => {
            return Err(crate::opts::UsageError(format!(
                "--mode must be \"mask\" or \"box\", got {other:?}"
            ))
            .into())
        }
    };

    let pred_set = load_annotations(&pred_path)?;
    let gt_set = load_annotations(&gt_path)?;
    let dets: Vec<Detection> = decode_set(&pred_set, true)?
        .into_iter()
        .map(|(image_id, class_id, score, mask)| Detection { image_id, class_id, score, mask })
        .collect();
    let gts: Vec<GtInstance> = decode_set(&gt_set, false)?
        .into_iter()
        .map(|(image_id, class_id, _, mask)| GtInstance { image_id, class_id, mask })
        .collect();

    let table = coco_ap(&dets, &gts, mode).map_err(|e| anyhow!("{e}"))?;
    println!("AP {:.3}", table.ap);
    println!("AP50 {:.3}  AP75 {:.3}", table.ap50, table.ap75);
    println!(
        "AP small {:.3}  medium {:.3}  large {:.3}",
        table.ap_small, table.ap_medium, table.ap_large
    );
    if !table.skipped_classes.is_empty() {
        eprintln!("warning: detection classes with no ground truth: {:?}", table.skipped_classes);
    }
    if let Some(out) = pick_opt(args.out, cfg.out) {
        let mode_name = if mode == MatchMode::Mask { "mask" } else { "box" };
        let report = ApReport {
            mode: mode_name.into(),
            n_detections: dets.len(),
            n_ground_truth: gts.len(),
            table,
        };
        write_json(&out, &report)?;
        let seed = pick(args.seed, cfg.seed, 0);
        write_sidecar(&out, "eval-ap", seed, &ApProvenance { mode: mode_name.into() })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ApProvenance {
    mode: String,
}
