//! Mask-quality metrics: per-image IoU, class-averaged mIoU, pixelwise
//! precision/recall, and COCO-convention average precision for instance
//! detections (greedy score-ordered matching, 101-point interpolation,
//! area-range breakdowns).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::annotations::mask_bbox;
use crate::error::{Error, Result};
use crate::image::BinaryMask;

/// Intersection over union. Two empty masks agree perfectly: 1.0.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.dims() != b.dims() {
        let (eh, ew) = a.dims();
        let (gh, gw) = b.dims();
        return Err(Error::DimensionMismatch { expected_h: eh, expected_w: ew, got_h: gh, got_w: gw });
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Per-class mean IoU and the unweighted mean over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiouReport {
    pub per_class: BTreeMap<u32, f64>,
    pub overall: f64,
    /// Classes requested via the universe that had no images.
    pub skipped_classes: Vec<u32>,
}

/// Pixelwise precision/recall aggregated exactly like mIoU: per image,
/// then per class, then an unweighted mean over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallReport {
    pub per_class_precision: BTreeMap<u32, f64>,
    pub per_class_recall: BTreeMap<u32, f64>,
    pub precision: f64,
    pub recall: f64,
    pub skipped_classes: Vec<u32>,
}

fn check_aligned(preds: &[BinaryMask], gts: &[BinaryMask], image_classes: &[u32]) -> Result<()> {
    if preds.len() != gts.len() || preds.len() != image_classes.len() {
        return Err(Error::InvalidParam(format!(
            "preds ({}), gts ({}) and classes ({}) must have equal length",
            preds.len(),
            gts.len(),
            image_classes.len()
        )));
    }
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-image IoU, averaged per class, then averaged over classes.
///
/// `class_universe` lists the classes that should appear in the report;
/// universe classes with zero images are skipped (reported in
/// `skipped_classes`). `None` derives the universe from `image_classes`.
pub fn miou_report(
    preds: &[BinaryMask],
    gts: &[BinaryMask],
    image_classes: &[u32],
    class_universe: Option<&[u32]>,
) -> Result<MiouReport> {
    check_aligned(preds, gts, image_classes)?;
    let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for ((p, g), &cls) in preds.iter().zip(gts).zip(image_classes) {
        groups.entry(cls).or_default().push(iou(p, g)?);
    }
    let universe: BTreeSet<u32> = match class_universe {
        Some(u) => u.iter().copied().collect(),
        None => groups.keys().copied().collect(),
    };
    let mut per_class = BTreeMap::new();
    let mut skipped = Vec::new();
    for &cls in &universe {
        match groups.get(&cls) {
            Some(vals) => {
                per_class.insert(cls, mean(vals.iter().copied()));
            }
            None => skipped.push(cls),
        }
    }
    let overall = mean(per_class.values().copied());
    Ok(MiouReport { per_class, overall, skipped_classes: skipped })
}

/// Pixelwise precision and recall with mIoU-style class aggregation.
/// An empty prediction has precision 1.0; an empty ground truth has
/// recall 1.0 (nothing was missed).
pub fn pixel_precision_recall(
    preds: &[BinaryMask],
    gts: &[BinaryMask],
    image_classes: &[u32],
    class_universe: Option<&[u32]>,
) -> Result<PrecisionRecallReport> {
    check_aligned(preds, gts, image_classes)?;
    let mut groups: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for ((p, g), &cls) in preds.iter().zip(gts).zip(image_classes) {
        if p.dims() != g.dims() {
            let (eh, ew) = p.dims();
            let (gh, gw) = g.dims();
            return Err(Error::DimensionMismatch { expected_h: eh, expected_w: ew, got_h: gh, got_w: gw });
        }
        let inter = p.intersection(g).area();
        let prec = if p.area() == 0 { 1.0 } else { inter as f64 / p.area() as f64 };
        let rec = if g.area() == 0 { 1.0 } else { inter as f64 / g.area() as f64 };
        groups.entry(cls).or_default().push((prec, rec));
    }
    let universe: BTreeSet<u32> = match class_universe {
        Some(u) => u.iter().copied().collect(),
        None => groups.keys().copied().collect(),
    };
    let mut per_class_precision = BTreeMap::new();
    let mut per_class_recall = BTreeMap::new();
    let mut skipped = Vec::new();
    for &cls in &universe {
        match groups.get(&cls) {
            Some(vals) => {
                per_class_precision.insert(cls, mean(vals.iter().map(|v| v.0)));
                per_class_recall.insert(cls, mean(vals.iter().map(|v| v.1)));
            }
            None => skipped.push(cls),
        }
    }
    Ok(PrecisionRecallReport {
        precision: mean(per_class_precision.values().copied()),
        recall: mean(per_class_recall.values().copied()),
        per_class_precision,
        per_class_recall,
        skipped_classes: skipped,
    })
}

/// One scored instance prediction.
#[derive(Debug, Clone)]
pub struct Detection {
    pub image_id: u64,
    pub class_id: u32,
    /// Confidence in `[0, 1]`.
    pub score: f64,
    pub mask: BinaryMask,
}

/// One ground-truth instance.
#[derive(Debug, Clone)]
pub struct GtInstance {
    pub image_id: u64,
    pub class_id: u32,
    pub mask: BinaryMask,
}

/// Whether matching IoU is computed on masks or on their tight boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchMode {
    Box,
    Mask,
}

/// COCO-style AP summary. Means over classes (and IoU thresholds where
/// applicable); a breakdown with no eligible ground truth reports 0.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApTable {
    /// Mean over thresholds 0.50..0.95 (step 0.05).
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    /// Ground truth restricted to area < 32².
    pub ap_small: f64,
    /// Ground truth restricted to 32² ≤ area ≤ 96².
    pub ap_medium: f64,
    /// Ground truth restricted to area > 96².
    pub ap_large: f64,
    /// Detection classes with no ground truth at all.
    pub skipped_classes: Vec<u32>,
}

pub const IOU_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

const MAX_DETS_PER_IMAGE: usize = 100;

#[derive(Clone, Copy, PartialEq, Eq)]
enum AreaRange {
    All,
    Small,
    Medium,
    Large,
}

impl AreaRange {
    fn contains(self, area: usize) -> bool {
        match self {
            AreaRange::All => true,
            AreaRange::Small => area < 32 * 32,
            AreaRange::Medium => (32 * 32..=96 * 96).contains(&area),
            AreaRange::Large => area > 96 * 96,
        }
    }
}

struct InstMeta {
    area: usize,
    bbox: [usize; 4],
}

fn box_iou(a: [usize; 4], b: [usize; 4]) -> f64 {
    let ia = (a[2] * a[3]) as f64;
    let ib = (b[2] * b[3]) as f64;
    if ia == 0.0 && ib == 0.0 {
        return 1.0;
    }
    let x0 = a[0].max(b[0]) as i64;
    let y0 = a[1].max(b[1]) as i64;
    let x1 = ((a[0] + a[2]).min(b[0] + b[2])) as i64;
    let y1 = ((a[1] + a[3]).min(b[1] + b[3])) as i64;
    let inter = ((x1 - x0).max(0) * (y1 - y0).max(0)) as f64;
    let union = ia + ib - inter;
    if union == 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Total order on detections that depends only on their content, never on
/// input position, so evaluation is invariant to reordering the input.
fn canon_cmp(a: &Detection, am: &InstMeta, b: &Detection, bm: &InstMeta) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.image_id.cmp(&b.image_id))
        .then_with(|| a.class_id.cmp(&b.class_id))
        .then_with(|| am.area.cmp(&bm.area))
        .then_with(|| am.bbox.cmp(&bm.bbox))
        .then_with(|| a.mask.data().cmp(b.mask.data()))
}

struct ImageEval {
    /// Global detection indices, canonical order, capped at 100.
    det_idx: Vec<usize>,
    /// Global ground-truth indices.
    gt_idx: Vec<usize>,
    /// `ious[local det][local gt]`.
    ious: Vec<Vec<f64>>,
}

struct Prepared {
    /// class id -> image id -> pairing data.
    per_class: BTreeMap<u32, BTreeMap<u64, ImageEval>>,
    det_meta: Vec<InstMeta>,
    gt_meta: Vec<InstMeta>,
    /// Canonical rank of each detection (global).
    det_rank: Vec<usize>,
    skipped_classes: Vec<u32>,
}

fn prepare(dets: &[Detection], gts: &[GtInstance], mode: MatchMode) -> Result<Prepared> {
    for d in dets {
        if !(0.0..=1.0).contains(&d.score) {
            return Err(Error::InvalidParam(format!("detection score {} outside [0, 1]", d.score)));
        }
    }
    let det_meta: Vec<InstMeta> =
        dets.iter().map(|d| InstMeta { area: d.mask.area(), bbox: mask_bbox(&d.mask) }).collect();
    let gt_meta: Vec<InstMeta> =
        gts.iter().map(|g| InstMeta { area: g.mask.area(), bbox: mask_bbox(&g.mask) }).collect();

    let gt_classes: BTreeSet<u32> = gts.iter().map(|g| g.class_id).collect();
    let skipped_classes: Vec<u32> = dets
        .iter()
        .map(|d| d.class_id)
        .filter(|c| !gt_classes.contains(c))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| canon_cmp(&dets[a], &det_meta[a], &dets[b], &det_meta[b]));
    let mut det_rank = vec![0usize; dets.len()];
    for (rank, &i) in order.iter().enumerate() {
        det_rank[i] = rank;
    }

    let mut per_class: BTreeMap<u32, BTreeMap<u64, ImageEval>> = BTreeMap::new();
    for &cls in &gt_classes {
        per_class.insert(cls, BTreeMap::new());
    }
    for (gi, g) in gts.iter().enumerate() {
        per_class
            .get_mut(&g.class_id)
            .unwrap()
            .entry(g.image_id)
            .or_insert_with(|| ImageEval { det_idx: vec![], gt_idx: vec![], ious: vec![] })
            .gt_idx
            .push(gi);
    }
    for (di, d) in dets.iter().enumerate() {
        if let Some(images) = per_class.get_mut(&d.class_id) {
            images
                .entry(d.image_id)
                .or_insert_with(|| ImageEval { det_idx: vec![], gt_idx: vec![], ious: vec![] })
                .det_idx
                .push(di);
        }
    }
    for images in per_class.values_mut() {
        for im in images.values_mut() {
            im.det_idx.sort_by_key(|&i| det_rank[i]);
            im.det_idx.truncate(MAX_DETS_PER_IMAGE);
            im.ious = im
                .det_idx
                .iter()
                .map(|&di| {
                    im.gt_idx
                        .iter()
                        .map(|&gi| {
                            let (dm, gm) = (&dets[di].mask, &gts[gi].mask);
                            match mode {
                                MatchMode::Mask => iou(dm, gm),
                                MatchMode::Box => {
                                    iou(dm, gm).map(|_| box_iou(det_meta[di].bbox, gt_meta[gi].bbox))
                                }
                            }
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
        }
    }
    Ok(Prepared { per_class, det_meta, gt_meta, det_rank, skipped_classes })
}

/// 101-point interpolated AP for one (class, area range, threshold), or
/// `None` when the range holds no eligible ground truth for the class.
fn class_ap(
    prep: &Prepared,
    images: &BTreeMap<u64, ImageEval>,
    range: AreaRange,
    t: f64,
) -> Option<f64> {
    // (canonical rank, counted as match, excluded from the curve)
    let mut outcomes: Vec<(usize, bool, bool)> = Vec::new();
    let mut npig = 0usize;
    for im in images.values() {
        let gt_ignored: Vec<bool> =
            im.gt_idx.iter().map(|&g| !range.contains(prep.gt_meta[g].area)).collect();
        npig += gt_ignored.iter().filter(|&&x| !x).count();
        // Eligible ground truth is offered before ignored ground truth.
        let mut gt_order: Vec<usize> = (0..im.gt_idx.len()).collect();
        gt_order.sort_by_key(|&g| gt_ignored[g]);
        let mut used = vec![false; im.gt_idx.len()];
        for (dl, &dg) in im.det_idx.iter().enumerate() {
            let mut best: Option<usize> = None;
            let mut best_iou = t;
            for &gl in &gt_order {
                if used[gl] {
                    continue;
                }
                // Never trade an eligible match for an ignored one.
                if let Some(b) = best {
                    if !gt_ignored[b] && gt_ignored[gl] {
                        break;
                    }
                }
                let v = im.ious[dl][gl];
                if v < best_iou {
                    continue;
                }
                best_iou = v;
                best = Some(gl);
            }
            match best {
                Some(gl) => {
                    used[gl] = true;
                    outcomes.push((prep.det_rank[dg], true, gt_ignored[gl]));
                }
                None => {
                    let out = !range.contains(prep.det_meta[dg].area);
                    outcomes.push((prep.det_rank[dg], false, out));
                }
            }
        }
    }
    if npig == 0 {
        return None;
    }
    outcomes.sort_by_key(|o| o.0);
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for &(_, matched, excluded) in &outcomes {
        if excluded {
            continue;
        }
        if matched {
            tp += 1;
        } else {
            fp += 1;
        }
        precisions.push(tp as f64 / (tp + fp) as f64);
        recalls.push(tp as f64 / npig as f64);
    }
    // Right-to-left envelope makes precision monotone before interpolation.
    for k in (0..precisions.len().saturating_sub(1)).rev() {
        precisions[k] = precisions[k].max(precisions[k + 1]);
    }
    let mut sum = 0.0;
    for ri in 0..=100 {
        let r = ri as f64 / 100.0;
        let idx = recalls.partition_point(|&x| x < r);
        if idx < precisions.len() {
            sum += precisions[idx];
        }
    }
    Some(sum / 101.0)
}

/// Mean AP over classes at one IoU threshold (all areas).
pub fn ap_at_threshold(dets: &[Detection], gts: &[GtInstance], mode: MatchMode, t: f64) -> Result<f64> {
    if !(0.0 < t && t <= 1.0) {
        return Err(Error::InvalidParam(format!("IoU threshold {t} outside (0, 1]")));
    }
    let prep = prepare(dets, gts, mode)?;
    Ok(mean(
        prep.per_class
            .values()
            .filter_map(|images| class_ap(&prep, images, AreaRange::All, t)),
    ))
}

/// Full COCO-style AP table.
pub fn coco_ap(dets: &[Detection], gts: &[GtInstance], mode: MatchMode) -> Result<ApTable> {
    let prep = prepare(dets, gts, mode)?;
    let prep_ref = &prep;
    let range_mean = |range: AreaRange| -> f64 {
        mean(prep_ref.per_class.values().flat_map(|images| {
            IOU_THRESHOLDS.iter().filter_map(move |&t| class_ap(prep_ref, images, range, t))
        }))
    };
    let fixed_t = |t: f64| -> f64 {
        mean(
            prep_ref
                .per_class
                .values()
                .filter_map(|images| class_ap(prep_ref, images, AreaRange::All, t)),
        )
    };
    let table = ApTable {
        ap: range_mean(AreaRange::All),
        ap50: fixed_t(0.50),
        ap75: fixed_t(0.75),
        ap_small: range_mean(AreaRange::Small),
        ap_medium: range_mean(AreaRange::Medium),
        ap_large: range_mean(AreaRange::Large),
        skipped_classes: Vec::new(),
    };
    Ok(ApTable { skipped_classes: prep.skipped_classes, ..table })
}

/// Aggregate report: mIoU fields, pixel precision/recall, optional AP table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_class_miou: BTreeMap<u32, f64>,
    pub overall_miou: f64,
    pub precision: f64,
    pub recall: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ap: Option<ApTable>,
}

impl MetricReport {
    pub fn assemble(miou: MiouReport, pr: PrecisionRecallReport, ap: Option<ApTable>) -> Self {
        Self {
            per_class_miou: miou.per_class,
            overall_miou: miou.overall,
            precision: pr.precision,
            recall: pr.recall,
            ap,
        }
    }
}
