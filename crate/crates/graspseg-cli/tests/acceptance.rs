//! Acceptance checks for the shipped toolchain. Each test covers one
//! numbered guarantee and prints exactly one `criterion N (...): PASS/FAIL`
//! line, so `cargo test --test acceptance -- --nocapture` doubles as a
//! sign-off report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use graspseg_core::annotate::object_mask;
use graspseg_core::annotations::{AnnotationSet, Category, ImageInfo};
use graspseg_core::augment::plan_splits;
use graspseg_core::baseline::{browatzki_segment, BrowatzkiParams};
use graspseg_core::gmm::fit_em_traced;
use graspseg_core::grabcut::{grabcut_refine_traced, CutGraph, CutLabel};
use graspseg_core::metrics::{
    coco_ap, iou, miou_report, pixel_precision_recall, Detection, GtInstance, MatchMode,
};
use graspseg_core::morph::{dilate, erode, open, SquareKernel};
use graspseg_core::overseg::{felzenszwalb_segment, FelzParams};
use graspseg_core::pipeline::{build_trimap, depth_foreground, foreground_mask, FgPipelineParams};
use graspseg_core::synth::{generate_scene, template_scene, TemplateOptions};
use graspseg_core::{BinaryMask, DepthImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

// ---------------------------------------------------------------------------
// Reporting scaffold
// ---------------------------------------------------------------------------

fn report(n: u32, label: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("criterion {n} ({label}): PASS"),
        Err(msg) => {
            println!("criterion {n} ({label}): FAIL — {msg}");
            panic!("criterion {n} ({label}) failed: {msg}");
        }
    }
}

/// Serializes the CPU-heavy criteria so the per-frame timing bound in
/// criterion 1 is not distorted by sibling tests.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_guard() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

// ---------------------------------------------------------------------------
// Criteria 1 + 2: end-to-end synthetic foreground and object annotation
// ---------------------------------------------------------------------------

struct VgaOutcome {
    fg_iou: f64,
    object_iou: f64,
    secs: f64,
}

static VGA: OnceLock<Vec<VgaOutcome>> = OnceLock::new();

/// 20 VGA scenes with held objects, depth noise sigma 5 mm, default
/// parameters (depth gate 200 mm, segmentation sigma 0.5 / k 800). Shared
/// between criteria 1 and 2. Sequential on purpose: criterion 1 times each
/// frame.
fn vga_outcomes() -> &'static [VgaOutcome] {
    VGA.get_or_init(|| {
        let _guard = heavy_guard();
        let opts =
            TemplateOptions { with_object: true, noise_sigma_mm: 5.0, ..Default::default() };
        let params = FgPipelineParams::default();
        (0..20u64)
            .map(|i| {
                let spec = template_scene(i, &opts);
                let bundle = generate_scene(&spec).expect("template scene renders");
                let t0 = Instant::now();
                let out = foreground_mask(
                    &bundle.rgb,
                    &bundle.depth,
                    &bundle.links,
                    &spec.intrinsics,
                    &params,
                    i,
                    false,
                )
                .expect("pipeline runs");
                let secs = t0.elapsed().as_secs_f64();
                let fg_iou = iou(&out.mask, &bundle.gt_foreground_mask).expect("same dims");
                let object = object_mask(&out.mask, &bundle.gt_arm_mask).expect("same dims");
                let object_iou = iou(&object, &bundle.gt_object_mask).expect("same dims");
                VgaOutcome { fg_iou, object_iou, secs }
            })
            .collect()
    })
}

#[test]
fn criterion_01_synthetic_foreground_accuracy_and_speed() {
    report(1, "synthetic foreground IoU and per-frame runtime", || {
        let runs = vga_outcomes();
        let ious: Vec<f64> = runs.iter().map(|r| r.fg_iou).collect();
        let m = mean(&ious);
        if m < 0.95 {
            return Err(format!("mean foreground IoU {m:.4} < 0.95 (per-scene {ious:.3?})"));
        }
        let slowest = runs.iter().map(|r| r.secs).fold(0.0f64, f64::max);
        if slowest > 2.0 {
            return Err(format!("slowest frame took {slowest:.2} s > 2 s"));
        }
        Ok(())
    });
}

#[test]
fn criterion_02_object_annotation_against_arm_ground_truth() {
    report(2, "object mask from perfect robot predictions", || {
        let runs = vga_outcomes();
        let ious: Vec<f64> = runs.iter().map(|r| r.object_iou).collect();
        let m = mean(&ious);
        if m < 0.95 {
            return Err(format!("mean object IoU {m:.4} < 0.95 (per-scene {ious:.3?})"));
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 3: pipeline vs color-prior baseline across saturation
// ---------------------------------------------------------------------------

/// Mean object IoU for the pipeline and the baseline over 10 scenes.
fn saturation_study(object_color: Option<[u8; 3]>) -> (f64, f64) {
    let opts = TemplateOptions {
        with_object: true,
        object_color,
        noise_sigma_mm: 5.0,
        ..Default::default()
    };
    let params = FgPipelineParams::default();
    let scores: Vec<(f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|i| {
            let spec = template_scene(i, &opts);
            let bundle = generate_scene(&spec).expect("template scene renders");
            let out = foreground_mask(
                &bundle.rgb,
                &bundle.depth,
                &bundle.links,
                &spec.intrinsics,
                &params,
                i,
                false,
            )
            .expect("pipeline runs");
            let object = object_mask(&out.mask, &bundle.gt_arm_mask).expect("same dims");
            let pipeline = iou(&object, &bundle.gt_object_mask).expect("same dims");
            let base_mask = browatzki_segment(&bundle.rgb, &BrowatzkiParams::default(), i)
                .expect("baseline runs");
            let baseline = iou(&base_mask, &bundle.gt_object_mask).expect("same dims");
            (pipeline, baseline)
        })
        .collect();
    let pipeline: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let baseline: Vec<f64> = scores.iter().map(|s| s.1).collect();
    (mean(&pipeline), mean(&baseline))
}

#[test]
fn criterion_03_saturation_ordering_vs_baseline() {
    report(3, "pipeline vs color baseline across object saturation", || {
        let _guard = heavy_guard();
        // Object gray inside the arm's gray band: color alone cannot find it.
        let (low_pipe, low_base) = saturation_study(Some([190, 190, 190]));
        if low_pipe - low_base < 0.2 {
            return Err(format!(
                "low-saturation gap {:.3} (pipeline {low_pipe:.3}, baseline {low_base:.3}) < 0.2",
                low_pipe - low_base
            ));
        }
        let (high_pipe, high_base) = saturation_study(None);
        if high_pipe <= 0.6 || high_base <= 0.6 {
            return Err(format!(
                "high saturation: pipeline {high_pipe:.3} and baseline {high_base:.3} must both exceed 0.6"
            ));
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 4: min-cut equals exhaustive enumeration
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_min_cut_matches_exhaustive_enumeration() {
    report(4, "min-cut exactness on random graphs", || {
        for case in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(40_000 + case);
            let n = rng.random_range(1..=12usize);
            let mut graph = CutGraph::new(n);
            let mut fg_cost = vec![0.0f64; n];
            let mut bg_cost = vec![0.0f64; n];
            for i in 0..n {
                // Integer-valued costs keep every labeling cost exact in f64.
                fg_cost[i] = rng.random_range(0..9) as f64;
                bg_cost[i] = rng.random_range(0..9) as f64;
                graph.add_terminal(i, fg_cost[i], bg_cost[i]);
            }
            let mut edges: Vec<(usize, usize, f64)> = Vec::new();
            for a in 0..n {
                for b in (a + 1)..n {
                    if rng.random::<f64>() < 0.35 {
                        let w = rng.random_range(1..7) as f64;
                        graph.add_pairwise(a, b, w);
                        edges.push((a, b, w));
                    }
                }
            }
            let (labels, cut) = graph.min_cut();

            let labeling_cost = |fg: &dyn Fn(usize) -> bool| -> f64 {
                let mut total = 0.0;
                for i in 0..n {
                    total += if fg(i) { fg_cost[i] } else { bg_cost[i] };
                }
                for &(a, b, w) in &edges {
                    if fg(a) != fg(b) {
                        total += w;
                    }
                }
                total
            };

            let returned = labeling_cost(&|i| labels[i] == CutLabel::Foreground);
            let mut best = f64::INFINITY;
            for assign in 0..(1u32 << n) {
                let cost = labeling_cost(&|i| assign >> i & 1 == 1);
                if cost < best {
                    best = cost;
                }
            }
            if cut != best {
                return Err(format!("case {case}: cut value {cut} != exhaustive minimum {best}"));
            }
            if returned != best {
                return Err(format!(
                    "case {case}: returned labeling costs {returned}, exhaustive minimum {best}"
                ));
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 5: EM log-likelihood monotonicity
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_em_log_likelihood_monotone() {
    report(5, "EM log-likelihood never decreases", || {
        for case in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(50_000 + case);
            let k = rng.random_range(1..=3usize);
            let n = rng.random_range(k.max(4)..60usize);
            // Blobby data: a few cluster centers plus per-sample jitter.
            let centers: Vec<[f64; 3]> = (0..rng.random_range(1..4usize))
                .map(|_| [rng.random_range(0.0..256.0), rng.random_range(0.0..256.0), rng.random_range(0.0..256.0)])
                .collect();
            let samples: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    let c = centers[rng.random_range(0..centers.len())];
                    [
                        c[0] + rng.random_range(-12.0..12.0),
                        c[1] + rng.random_range(-12.0..12.0),
                        c[2] + rng.random_range(-12.0..12.0),
                    ]
                })
                .collect();
            let (_, trace) = fit_em_traced(&samples, k, 40, 1e-12, case)
                .map_err(|e| format!("case {case}: EM failed: {e}"))?;
            for (i, pair) in trace.windows(2).enumerate() {
                if pair[1] < pair[0] - 1e-9 {
                    return Err(format!(
                        "case {case}: log-likelihood fell from {} to {} at round {}",
                        pair[0],
                        pair[1],
                        i + 1
                    ));
                }
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 6: refinement cut never raises the labeling energy
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_refinement_energy_non_increasing() {
    report(6, "graph-cut refinement energy per sweep", || {
        let _guard = heavy_guard();
        let params = FgPipelineParams::default();
        for i in 0..20u64 {
            let opts = TemplateOptions {
                height: 240,
                width: 320,
                with_object: i % 2 == 0,
                object_color: None,
                noise_sigma_mm: 5.0,
            };
            let spec = template_scene(i, &opts);
            let bundle = generate_scene(&spec).expect("template scene renders");
            let m0 = depth_foreground(&bundle.depth, &bundle.links, &spec.intrinsics, &params)
                .map_err(|e| format!("scene {i}: depth stage failed: {e}"))?;
            let trimap = build_trimap(&m0, &params);
            let (_, energies) =
                grabcut_refine_traced(&bundle.rgb, &trimap, &params.grabcut, 700 + i)
                    .map_err(|e| format!("scene {i}: refinement failed: {e}"))?;
            if energies.len() != 8 {
                return Err(format!("scene {i}: expected 8 sweeps, saw {}", energies.len()));
            }
            for (sweep, e) in energies.iter().enumerate() {
                if e.after > e.before + 1e-6 {
                    return Err(format!(
                        "scene {i} sweep {sweep}: energy rose {} -> {}",
                        e.before, e.after
                    ));
                }
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 7: morphology equals a brute-force oracle
// ---------------------------------------------------------------------------

/// Local sliding-window reference: AND over the window `[i-a, i-a+n)`,
/// out-of-image reads count as background.
fn erode_oracle(m: &BinaryMask, n: usize, a: usize) -> BinaryMask {
    let (h, w) = m.dims();
    BinaryMask::from_fn(h, w, |r, c| {
        for dr in 0..n as isize {
            for dc in 0..n as isize {
                let rr = r as isize + dr - a as isize;
                let cc = c as isize + dc - a as isize;
                let inside = rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w;
                if !inside || !m.at(rr as usize, cc as usize) {
                    return false;
                }
            }
        }
        true
    })
}

/// Local sliding-window reference: OR over the window `[i-a, i-a+n)`.
fn dilate_oracle(m: &BinaryMask, n: usize, a: usize) -> BinaryMask {
    let (h, w) = m.dims();
    BinaryMask::from_fn(h, w, |r, c| {
        for dr in 0..n as isize {
            for dc in 0..n as isize {
                let rr = r as isize + dr - a as isize;
                let cc = c as isize + dc - a as isize;
                let inside = rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w;
                if inside && m.at(rr as usize, cc as usize) {
                    return true;
                }
            }
        }
        false
    })
}

fn complement(m: &BinaryMask) -> BinaryMask {
    let (h, w) = m.dims();
    BinaryMask::from_fn(h, w, |r, c| !m.at(r, c))
}

#[test]
fn criterion_07_morphology_oracle_duality_idempotence() {
    report(7, "morphology vs brute force, duality, opening idempotence", || {
        for case in 0..500u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(70_000 + case);
            let h = rng.random_range(1..=32usize);
            let w = rng.random_range(1..=32usize);
            let density = rng.random_range(0.2..0.8);
            let m = BinaryMask::from_fn(h, w, |_, _| rng.random::<f64>() < density);
            let k = SquareKernel::new(rng.random_range(1..=6usize));
            let (n, a) = (k.side(), k.anchor());

            let er = erode(&m, k);
            if er != erode_oracle(&m, n, a) {
                return Err(format!("case {case}: erosion differs from the oracle"));
            }
            let di = dilate(&m, k);
            // Production dilation mirrors the erosion anchor (adjoint pair).
            if di != dilate_oracle(&m, n, n - 1 - a) {
                return Err(format!("case {case}: dilation differs from the oracle"));
            }

            // Duality: eroding equals complement-dilate-complement when both
            // sweep the same window; away from the border the padding policy
            // cannot differ.
            let dual = dilate_oracle(&complement(&m), n, a);
            for r in n.min(h)..h.saturating_sub(n) {
                for c in n.min(w)..w.saturating_sub(n) {
                    if er.at(r, c) == dual.at(r, c) {
                        return Err(format!("case {case}: duality broken at ({r}, {c})"));
                    }
                }
            }

            let opened = open(&m, k);
            if open(&opened, k) != opened {
                return Err(format!("case {case}: opening is not idempotent"));
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 8: depth over-segmentation partitions and is deterministic
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_segmentation_partition_and_determinism() {
    report(8, "segmentation partition, determinism, two-plane case", || {
        for case in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(80_000 + case);
            let h = rng.random_range(8..28usize);
            let w = rng.random_range(8..28usize);
            let split = rng.random_range(1..w);
            let base_a = rng.random_range(400.0..2000.0f32);
            let base_b = rng.random_range(400.0..2000.0f32);
            let invalid_rate = rng.random_range(0.0..0.15);
            let depth = DepthImage::from_fn(h, w, |_, c| {
                if rng.random::<f64>() < invalid_rate {
                    0.0 // invalid sample
                } else {
                    let base = if c < split { base_a } else { base_b };
                    base + rng.random_range(-15.0..15.0f32)
                }
            });
            let params = FelzParams {
                k: rng.random_range(100.0..1200.0),
                min_size: rng.random_range(1..30usize),
                sigma: 0.5,
            };
            let seg = felzenszwalb_segment(&depth, &params)
                .map_err(|e| format!("case {case}: segmentation failed: {e}"))?;
            let count = seg.segment_count();
            let mut tallies = vec![0usize; count];
            for &label in seg.labels() {
                if label as usize >= count {
                    return Err(format!("case {case}: label {label} out of range {count}"));
                }
                tallies[label as usize] += 1;
            }
            for (id, &tally) in tallies.iter().enumerate() {
                if tally == 0 {
                    return Err(format!("case {case}: segment id {id} unused (not contiguous)"));
                }
                if tally != seg.segment_size(id as u32) {
                    return Err(format!(
                        "case {case}: segment {id} stores size {} but covers {tally} pixels",
                        seg.segment_size(id as u32)
                    ));
                }
            }
            let again = felzenszwalb_segment(&depth, &params)
                .map_err(|e| format!("case {case}: rerun failed: {e}"))?;
            if again != seg {
                return Err(format!("case {case}: repeated run differed"));
            }
        }

        // Two flat planes separated by a sharp step: exactly two valid
        // segments at the default merge threshold k=800.
        let depth = DepthImage::from_fn(20, 20, |_, c| if c < 10 { 600.0 } else { 1200.0 });
        let seg = felzenszwalb_segment(&depth, &FelzParams::default())
            .map_err(|e| format!("two-plane case failed: {e}"))?;
        let valid = (0..seg.segment_count() as u32).filter(|&id| !seg.is_invalid(id)).count();
        if valid != 2 {
            return Err(format!("two-plane image produced {valid} valid segments, expected 2"));
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 9: trimap containment and value algebra
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_trimap_containment_and_values() {
    report(9, "trimap band containment and value set", || {
        for case in 0..500u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(90_000 + case);
            let h = rng.random_range(1..=32usize);
            let w = rng.random_range(1..=32usize);
            let density = rng.random_range(0.1..0.9);
            let m0 = BinaryMask::from_fn(h, w, |_, _| rng.random::<f64>() < density);
            let params = FgPipelineParams {
                erode_kernel: rng.random_range(1..=8usize),
                dilate_kernel: rng.random_range(1..=8usize),
                ..Default::default()
            };
            let mp = erode(&m0, SquareKernel::new(params.erode_kernel));
            let mr = dilate(&m0, SquareKernel::new(params.dilate_kernel));
            if !mp.is_subset_of(&m0) || !m0.is_subset_of(&mr) {
                return Err(format!("case {case}: band containment broken"));
            }
            let tri = build_trimap(&m0, &params);
            for r in 0..h {
                for c in 0..w {
                    let v = tri.at(r, c);
                    let want = mp.at(r, c) as u8 + m0.at(r, c) as u8 + mr.at(r, c) as u8;
                    if v != want || v > 3 {
                        return Err(format!(
                            "case {case}: trimap value {v} at ({r}, {c}), expected {want}"
                        ));
                    }
                }
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 10: metric oracles and hand-computed AP cases
// ---------------------------------------------------------------------------

fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> BinaryMask {
    let density = rng.random_range(0.0..1.0);
    BinaryMask::from_fn(h, w, |_, _| rng.random::<f64>() < density)
}

/// 8x8 mask with `cols` of row `row` set.
fn strip(row: usize, cols: std::ops::Range<usize>) -> BinaryMask {
    BinaryMask::from_fn(8, 8, |r, c| r == row && cols.contains(&c))
}

fn det(image_id: u64, class_id: u32, score: f64, mask: BinaryMask) -> Detection {
    Detection { image_id, class_id, score, mask }
}

fn gt(image_id: u64, class_id: u32, mask: BinaryMask) -> GtInstance {
    GtInstance { image_id, class_id, mask }
}

#[test]
fn criterion_10_metric_oracles_and_ap_cases() {
    report(10, "metric pixel-count oracles and hand-computed AP", || {
        // Brute-force oracle for mIoU / precision / recall, mirroring the
        // aggregation order exactly (per image, per class, over classes).
        for case in 0..80u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100_000 + case);
            let n_images = rng.random_range(1..6usize);
            let h = rng.random_range(1..=8usize);
            let w = rng.random_range(1..=8usize);
            let mut preds = Vec::new();
            let mut gts = Vec::new();
            let mut classes = Vec::new();
            for _ in 0..n_images {
                preds.push(random_mask(&mut rng, h, w));
                gts.push(random_mask(&mut rng, h, w));
                classes.push(rng.random_range(1..3u32));
            }

            let mut iou_groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            let mut pr_groups: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
            for i in 0..n_images {
                let mut inter = 0usize;
                let mut union = 0usize;
                let mut p_area = 0usize;
                let mut g_area = 0usize;
                for (&p, &g) in preds[i].data().iter().zip(gts[i].data()) {
                    inter += (p && g) as usize;
                    union += (p || g) as usize;
                    p_area += p as usize;
                    g_area += g as usize;
                }
                let iou_val = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
                let prec = if p_area == 0 { 1.0 } else { inter as f64 / p_area as f64 };
                let rec = if g_area == 0 { 1.0 } else { inter as f64 / g_area as f64 };
                if iou(&preds[i], &gts[i]).unwrap() != iou_val {
                    return Err(format!("case {case}: IoU differs from pixel counting"));
                }
                iou_groups.entry(classes[i]).or_default().push(iou_val);
                pr_groups.entry(classes[i]).or_default().push((prec, rec));
            }
            let class_means: Vec<f64> = iou_groups.values().map(|v| mean(v)).collect();
            let want_miou = mean(&class_means);
            let got = miou_report(&preds, &gts, &classes, None).unwrap();
            if got.overall != want_miou {
                return Err(format!(
                    "case {case}: mIoU {} != oracle {want_miou}",
                    got.overall
                ));
            }
            let precisions: Vec<f64> =
                pr_groups.values().map(|v| mean(&v.iter().map(|x| x.0).collect::<Vec<_>>())).collect();
            let recalls: Vec<f64> =
                pr_groups.values().map(|v| mean(&v.iter().map(|x| x.1).collect::<Vec<_>>())).collect();
            let pr = pixel_precision_recall(&preds, &gts, &classes, None).unwrap();
            if pr.precision != mean(&precisions) || pr.recall != mean(&recalls) {
                return Err(format!("case {case}: precision/recall differ from pixel counting"));
            }
        }

        // Hand case 1: one perfect detection.
        let m = strip(2, 1..6);
        let table = coco_ap(&[det(0, 1, 0.9, m.clone())], &[gt(0, 1, m)], MatchMode::Mask)
            .map_err(|e| format!("perfect case failed: {e}"))?;
        for (name, v) in [("ap", table.ap), ("ap50", table.ap50), ("ap75", table.ap75)] {
            if (v - 1.0).abs() > 1e-6 {
                return Err(format!("perfect detection: {name} = {v}, expected 1.0"));
            }
        }

        // Hand case 2: two ground truths, one perfect detection. Precision
        // 1.0 holds up to recall 0.5 — 51 of the 101 interpolation points —
        // so AP is 51/101 ≈ 0.50495.
        let g1 = strip(1, 0..4);
        let g2 = strip(5, 0..4);
        let table = coco_ap(
            &[det(0, 1, 0.8, g1.clone())],
            &[gt(0, 1, g1), gt(0, 1, g2)],
            MatchMode::Mask,
        )
        .map_err(|e| format!("51/101 case failed: {e}"))?;
        let want = 51.0 / 101.0;
        if (table.ap50 - want).abs() > 1e-6 || (table.ap - want).abs() > 1e-6 {
            return Err(format!(
                "51/101 case: ap50 {} / ap {}, expected {want}",
                table.ap50, table.ap
            ));
        }

        // Hand case 3: overlap exactly 0.6 — counts at thresholds 0.50,
        // 0.55, 0.60 and at nothing higher, so the threshold mean is 0.3.
        let g3 = strip(0, 0..4);
        let p3 = strip(0, 1..5);
        let table = coco_ap(&[det(0, 1, 0.8, p3)], &[gt(0, 1, g3)], MatchMode::Mask)
            .map_err(|e| format!("0.6-overlap case failed: {e}"))?;
        if (table.ap50 - 1.0).abs() > 1e-6
            || table.ap75.abs() > 1e-6
            || (table.ap - 0.3).abs() > 1e-6
        {
            return Err(format!(
                "0.6-overlap case: ap50 {} ap75 {} ap {}, expected 1.0 / 0.0 / 0.3",
                table.ap50, table.ap75, table.ap
            ));
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 11: augmentation split arithmetic
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_augmentation_split_sizes() {
    report(11, "augmentation split sizes at production scale", || {
        let plans = plan_splits(297, 1800, 80, 3).map_err(|e| format!("planning failed: {e}"))?;
        let got: Vec<(String, usize)> =
            plans.iter().map(|p| (p.name.clone(), p.items.len())).collect();
        let want = [
            ("Orig", 297usize),
            ("FG", 891),
            ("BG", 5400),
            ("FGBG", 5400),
            ("All", 11988),
        ];
        if got.len() != want.len() {
            return Err(format!("expected 5 splits, got {}", got.len()));
        }
        for ((gn, gc), (wn, wc)) in got.iter().zip(want.iter()) {
            if gn != wn || gc != wc {
                return Err(format!("split {gn} has {gc} items, expected {wn} = {wc}"));
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 12: every subcommand is byte-deterministic under --seed
// ---------------------------------------------------------------------------

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_graspseg")
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin())
        .args(args)
        .output()
        .map_err(|e| format!("spawning {:?}: {e}", args.first()))?;
    if !out.status.success() {
        return Err(format!(
            "`graspseg {}` exited with {:?}\nstderr: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

/// Relative path -> file bytes for every file under `dir`.
fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) -> Result<(), String> {
        let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        for entry in entries {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                out.insert(rel, bytes);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}

fn assert_identical(what: &str, a: &Path, b: &Path) -> Result<(), String> {
    let sa = snapshot(a)?;
    let sb = snapshot(b)?;
    let keys_a: Vec<&String> = sa.keys().collect();
    let keys_b: Vec<&String> = sb.keys().collect();
    if keys_a != keys_b {
        return Err(format!("{what}: file sets differ ({keys_a:?} vs {keys_b:?})"));
    }
    for (rel, bytes) in &sa {
        if sb[rel] != *bytes {
            return Err(format!("{what}: {rel} differs between runs"));
        }
    }
    if sa.is_empty() {
        return Err(format!("{what}: no output files produced"));
    }
    Ok(())
}

fn write_rgb_png(path: &Path, h: u32, w: u32, f: impl Fn(u32, u32) -> [u8; 3]) {
    let img = image::RgbImage::from_fn(w, h, |x, y| image::Rgb(f(y, x)));
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    img.save(path).unwrap();
}

fn write_rgba_png(path: &Path, h: u32, w: u32, f: impl Fn(u32, u32) -> [u8; 4]) {
    let img = image::RgbaImage::from_fn(w, h, |x, y| image::Rgba(f(y, x)));
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    img.save(path).unwrap();
}

fn load_mask(path: &Path) -> BinaryMask {
    let gray = image::open(path).unwrap().to_luma8();
    let (w, h) = gray.dimensions();
    let data: Vec<bool> = gray.into_raw().iter().map(|&v| v >= 128).collect();
    BinaryMask::from_data(h as usize, w as usize, data).unwrap()
}

/// Build a ground-truth annotation file from the synthetic object masks so
/// eval-ap has something to score against.
fn write_gt_annotations(synth: &Path, out: &Path, n: usize) -> Result<(), String> {
    let mut set = AnnotationSet {
        categories: vec![
            Category { id: 0, name: "background".into() },
            Category { id: 2, name: "object".into() },
        ],
        ..Default::default()
    };
    let mut ann_id = 0u64;
    for i in 0..n {
        let mask = load_mask(&synth.join(format!("gt/object/{i:06}.png")));
        let (h, w) = mask.dims();
        set.images.push(ImageInfo {
            id: i as u64,
            file_name: format!("rgb/{i:06}.png"),
            height: h,
            width: w,
        });
        if let Some(ann) =
            AnnotationSet::annotation_from_mask(ann_id, i as u64, 2, &mask, None)
        {
            ann_id += 1;
            set.annotations.push(ann);
        }
    }
    set.validate().map_err(|e| format!("ground-truth annotations invalid: {e}"))?;
    let text = serde_json::to_string_pretty(&set).unwrap();
    std::fs::write(out, text).map_err(|e| format!("{}: {e}", out.display()))
}

#[test]
fn criterion_12_subcommands_byte_deterministic() {
    report(12, "every subcommand byte-identical across seeded reruns", || {
        let _guard = heavy_guard();
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let root = tmp.path();
        let p = |name: &str| root.join(name);
        let s = |path: PathBuf| path.to_string_lossy().into_owned();

        // -- synth ----------------------------------------------------------
        for run in ["synth_a", "synth_b"] {
            run_cli(&[
                "synth",
                "--out",
                &s(p(run)),
                "--count",
                "2",
                "--height",
                "120",
                "--width",
                "160",
                "--with-object",
                "--noise-sigma",
                "3",
                "--seed",
                "11",
            ])?;
        }
        assert_identical("synth", &p("synth_a"), &p("synth_b"))?;
        let synth = p("synth_a");

        // -- fgseg ----------------------------------------------------------
        for run in ["fg_a", "fg_b"] {
            run_cli(&["fgseg", "--frames", &s(synth.clone()), "--out", &s(p(run)), "--seed", "3"])?;
        }
        assert_identical("fgseg", &p("fg_a"), &p("fg_b"))?;

        // -- selfdata -------------------------------------------------------
        for run in ["sd_a", "sd_b"] {
            run_cli(&[
                "selfdata",
                "--frames",
                &s(synth.clone()),
                "--out",
                &s(p(run)),
                "--seed",
                "3",
            ])?;
        }
        assert_identical("selfdata", &p("sd_a"), &p("sd_b"))?;

        // -- baseline -------------------------------------------------------
        for run in ["bl_a", "bl_b"] {
            run_cli(&[
                "baseline",
                "--frames",
                &s(synth.clone()),
                "--out",
                &s(p(run)),
                "--inner-box",
                "60",
                "--outer-box",
                "100",
                "--seed",
                "9",
            ])?;
        }
        assert_identical("baseline", &p("bl_a"), &p("bl_b"))?;

        // -- annotate -------------------------------------------------------
        for run in ["an_a", "an_b"] {
            run_cli(&[
                "annotate",
                "--frames",
                &s(synth.clone()),
                "--fg-masks",
                &s(p("fg_a").join("masks")),
                "--srn-masks",
                &s(synth.join("gt/arm")),
                "--out",
                &s(p(run)),
                "--seed",
                "4",
            ])?;
        }
        assert_identical("annotate", &p("an_a"), &p("an_b"))?;

        // -- augment --------------------------------------------------------
        let bgs = p("bgs");
        write_rgb_png(&bgs.join("grad.png"), 90, 140, |r, c| {
            [(r * 2) as u8, (c % 256) as u8, 120]
        });
        write_rgb_png(&bgs.join("tiles.png"), 200, 100, |r, c| {
            if (r / 10 + c / 10) % 2 == 0 {
                [30, 160, 90]
            } else {
                [220, 210, 60]
            }
        });
        let objs = p("objs");
        write_rgba_png(&objs.join("disk.png"), 40, 40, |r, c| {
            let dr = r as f64 - 19.5;
            let dc = c as f64 - 19.5;
            if (dr * dr + dc * dc).sqrt() < 16.0 {
                [250, 80, 30, 255]
            } else {
                [0, 0, 0, 0]
            }
        });
        for run in ["aug_a", "aug_b"] {
            run_cli(&[
                "augment",
                "--annotations",
                &s(p("sd_a").join("annotations.json")),
                "--image-root",
                &s(synth.clone()),
                "--backgrounds",
                &s(bgs.clone()),
                "--objects",
                &s(objs.clone()),
                "--repeats",
                "1",
                "--out",
                &s(p(run)),
                "--seed",
                "5",
            ])?;
        }
        assert_identical("augment", &p("aug_a"), &p("aug_b"))?;

        // -- eval-miou ------------------------------------------------------
        for run in ["miou_a", "miou_b"] {
            run_cli(&[
                "eval-miou",
                "--pred",
                &s(p("fg_a").join("masks")),
                "--gt",
                &s(synth.join("gt/foreground")),
                "--out",
                &s(p(run).join("report.json")),
                "--seed",
                "1",
            ])?;
        }
        assert_identical("eval-miou", &p("miou_a"), &p("miou_b"))?;

        // -- eval-ap --------------------------------------------------------
        write_gt_annotations(&synth, &p("gt_ann.json"), 2)?;
        for run in ["ap_a", "ap_b"] {
            run_cli(&[
                "eval-ap",
                "--pred",
                &s(p("an_a").join("annotations.json")),
                "--gt",
                &s(p("gt_ann.json")),
                "--mode",
                "mask",
                "--out",
                &s(p(run).join("report.json")),
                "--seed",
                "1",
            ])?;
        }
        assert_identical("eval-ap", &p("ap_a"), &p("ap_b"))?;

        // -- overlay --------------------------------------------------------
        for run in ["ov_a", "ov_b"] {
            run_cli(&[
                "overlay",
                "--frames",
                &s(synth.clone()),
                "--srn-masks",
                &s(synth.join("gt/arm")),
                "--object-masks",
                &s(p("an_a").join("masks")),
                "--out",
                &s(p(run)),
                "--seed",
                "2",
            ])?;
        }
        assert_identical("overlay", &p("ov_a"), &p("ov_b"))?;
        Ok(())
    });
}
