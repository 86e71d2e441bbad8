//! Training-set synthesis for the manipulator segmentation network:
//! background substitution behind the manipulator mask and alpha-matted
//! object overlays with random scale/rotation, expanded into named splits
//! whose sizes follow a repeats-per-most-plentiful-resource rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationSet, Category, ImageInfo};
use crate::error::{Error, Result};
use crate::image::{BinaryMask, RgbImage};

pub const CLASS_BACKGROUND: u32 = 0;
pub const CLASS_MANIPULATOR: u32 = 1;

/// RGB frame with its manipulator mask (class 1; everything else class 0).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub rgb: RgbImage,
    pub manipulator_mask: BinaryMask,
}

impl LabeledFrame {
    pub fn new(rgb: RgbImage, manipulator_mask: BinaryMask) -> Result<Self> {
        if rgb.dims() != manipulator_mask.dims() {
            let (eh, ew) = rgb.dims();
            let (gh, gw) = manipulator_mask.dims();
            return Err(Error::DimensionMismatch { expected_h: eh, expected_w: ew, got_h: gh, got_w: gw });
        }
        Ok(Self { rgb, manipulator_mask })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.rgb.dims()
    }
}

/// 8-bit RGBA image, row-major interleaved; alpha 0 = fully transparent.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbaImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbaImage {
    pub fn from_data(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width * 4 {
            return Err(Error::InvalidParam(format!(
                "rgba data length {} != {}x{}x4",
                data.len(),
                height,
                width
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgba: [u8; 4]) -> Self {
        let mut data = Vec::with_capacity(height * width * 4);
        for _ in 0..height * width {
            data.extend_from_slice(&rgba);
        }
        Self { height, width, data }
    }

    /// Cut an object out of an RGB frame: opaque where the mask is set.
    pub fn from_rgb_mask(rgb: &RgbImage, mask: &BinaryMask) -> Result<Self> {
        if rgb.dims() != mask.dims() {
            let (eh, ew) = rgb.dims();
            let (gh, gw) = mask.dims();
            return Err(Error::DimensionMismatch { expected_h: eh, expected_w: ew, got_h: gh, got_w: gw });
        }
        let (h, w) = rgb.dims();
        let mut data = Vec::with_capacity(h * w * 4);
        for r in 0..h {
            for c in 0..w {
                let p = rgb.px(r, c);
                data.extend_from_slice(&[p[0], p[1], p[2], if mask.at(r, c) { 255 } else { 0 }]);
            }
        }
        Ok(Self { height: h, width: w, data })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn px(&self, row: usize, col: usize) -> [u8; 4] {
        let i = (row * self.width + col) * 4;
        [self.data[i], self.data[i + 1], self.data[i + 2], self.data[i + 3]]
    }
}

/// Augmentation resources and sampling parameters.
#[derive(Debug, Clone)]
pub struct AugmentSpec {
    pub backgrounds: Vec<RgbImage>,
    pub fg_objects: Vec<RgbaImage>,
    /// Each split is this many passes over its most plentiful resource.
    pub repeats: usize,
    /// Uniform scale multipliers, min > 0.
    pub scale_range: (f64, f64),
    /// Uniform rotation, degrees, half-open.
    pub rotation_range_deg: (f64, f64),
    pub seed: u64,
}

impl AugmentSpec {
    pub fn new(backgrounds: Vec<RgbImage>, fg_objects: Vec<RgbaImage>, seed: u64) -> Self {
        Self {
            backgrounds,
            fg_objects,
            repeats: 3,
            scale_range: (0.3, 1.2),
            rotation_range_deg: (0.0, 360.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidParam("repeats must be >= 1".into()));
        }
        if !(self.scale_range.0 > 0.0) || self.scale_range.1 < self.scale_range.0 {
            return Err(Error::InvalidParam(format!(
                "scale range ({}, {}) must satisfy 0 < min <= max",
                self.scale_range.0, self.scale_range.1
            )));
        }
        if self.rotation_range_deg.1 < self.rotation_range_deg.0 {
            return Err(Error::InvalidParam("rotation range must satisfy min <= max".into()));
        }
        Ok(())
    }
}

fn sample_rgb_clamped(img: &RgbImage, y: f64, x: f64) -> [f64; 3] {
    let (h, w) = img.dims();
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let gi = |r: i64, c: i64| -> [u8; 3] {
        img.px(r.clamp(0, h as i64 - 1) as usize, c.clamp(0, w as i64 - 1) as usize)
    };
    let (x0, y0) = (x0 as i64, y0 as i64);
    let (p00, p01, p10, p11) = (gi(y0, x0), gi(y0, x0 + 1), gi(y0 + 1, x0), gi(y0 + 1, x0 + 1));
    let mut out = [0.0; 3];
    for ch in 0..3 {
        let top = p00[ch] as f64 * (1.0 - fx) + p01[ch] as f64 * fx;
        let bot = p10[ch] as f64 * (1.0 - fx) + p11[ch] as f64 * fx;
        out[ch] = top * (1.0 - fy) + bot * fy;
    }
    out
}

/// Bilinear RGBA sample with transparent zero padding outside the image,
/// premultiplied by alpha so transparent texels do not bleed color.
fn sample_rgba_premul(img: &RgbaImage, y: f64, x: f64) -> [f64; 4] {
    let (h, w) = img.dims();
    let x0f = x.floor();
    let y0f = y.floor();
    let fx = x - x0f;
    let fy = y - y0f;
    let mut acc = [0.0f64; 4];
    for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let (r, c) = (y0f as i64 + dy, x0f as i64 + dx);
            if r < 0 || c < 0 || r >= h as i64 || c >= w as i64 {
                continue;
            }
            let p = img.px(r as usize, c as usize);
            let a = p[3] as f64 / 255.0;
            let wgt = wy * wx;
            acc[0] += p[0] as f64 * a * wgt;
            acc[1] += p[1] as f64 * a * wgt;
            acc[2] += p[2] as f64 * a * wgt;
            acc[3] += a * wgt;
        }
    }
    acc
}

/// Resize a background with aspect-preserving scale so it covers the target,
/// then center-crop to exactly `height` x `width`.
pub fn fit_background(bg: &RgbImage, height: usize, width: usize) -> RgbImage {
    let (bh, bw) = bg.dims();
    if (bh, bw) == (height, width) {
        return bg.clone();
    }
    let scale = (height as f64 / bh as f64).max(width as f64 / bw as f64);
    let off_y = (bh as f64 * scale - height as f64) / 2.0;
    let off_x = (bw as f64 * scale - width as f64) / 2.0;
    let mut out = RgbImage::filled(height, width, [0, 0, 0]);
    for r in 0..height {
        for c in 0..width {
            let sy = (r as f64 + off_y) / scale;
            let sx = (c as f64 + off_x) / scale;
            let p = sample_rgb_clamped(bg, sy, sx);
            out.set_px(r, c, [p[0].round() as u8, p[1].round() as u8, p[2].round() as u8]);
        }
    }
    out
}

/// Replace every non-manipulator pixel with the background; manipulator
/// pixels and the mask are untouched.
pub fn substitute_background(frame: &LabeledFrame, background: &RgbImage) -> Result<LabeledFrame> {
    if frame.dims() != background.dims() {
        let (eh, ew) = frame.dims();
        let (gh, gw) = background.dims();
        return Err(Error::DimensionMismatch { expected_h: eh, expected_w: ew, got_h: gh, got_w: gw });
    }
    let (h, w) = frame.dims();
    let mut rgb = frame.rgb.clone();
    for r in 0..h {
        for c in 0..w {
            if !frame.manipulator_mask.at(r, c) {
                rgb.set_px(r, c, background.px(r, c));
            }
        }
    }
    Ok(LabeledFrame { rgb, manipulator_mask: frame.manipulator_mask.clone() })
}

/// Composite a scaled + rotated alpha-matted object at the frame center.
/// Manipulator pixels hidden behind mostly-opaque object pixels
/// (alpha >= 0.5) are cleared from the mask, imitating real occlusion by a
/// grasped object. Non-positive scale degenerates to a no-op.
pub fn overlay_foreground(
    frame: &LabeledFrame,
    obj: &RgbaImage,
    scale: f64,
    rotation_deg: f64,
) -> LabeledFrame {
    let (h, w) = frame.dims();
    let (oh, ow) = obj.dims();
    let mut rgb = frame.rgb.clone();
    let mut mask = frame.manipulator_mask.clone();
    if scale <= 0.0 || oh == 0 || ow == 0 {
        return LabeledFrame { rgb, manipulator_mask: mask };
    }
    let theta = rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let (fcx, fcy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (ocx, ocy) = ((ow as f64 - 1.0) / 2.0, (oh as f64 - 1.0) / 2.0);
    for r in 0..h {
        for c in 0..w {
            let dx = c as f64 - fcx;
            let dy = r as f64 - fcy;
            // Inverse transform: un-rotate, then un-scale.
            let sx = (dx * cos + dy * sin) / scale + ocx;
            let sy = (-dx * sin + dy * cos) / scale + ocy;
            let acc = sample_rgba_premul(obj, sy, sx);
            let a = acc[3];
            if a <= 0.0 {
                continue;
            }
            let base = rgb.px(r, c);
            let blend = |premul: f64, b: u8| -> u8 {
                // acc holds alpha-premultiplied color, so the composite is
                // premul + (1 - a) * base.
                (premul + (1.0 - a) * b as f64).round().clamp(0.0, 255.0) as u8
            };
            rgb.set_px(r, c, [blend(acc[0], base[0]), blend(acc[1], base[1]), blend(acc[2], base[2])]);
            if a >= 0.5 {
                mask.set(r, c, false);
            }
        }
    }
    LabeledFrame { rgb, manipulator_mask: mask }
}

/// One planned dataset item, referring to resources by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AugmentItem {
    Orig { frame: usize },
    Fg { frame: usize, object: usize },
    Bg { frame: usize, background: usize },
    FgBg { frame: usize, background: usize, object: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub name: String,
    pub items: Vec<AugmentItem>,
}

pub const SPLIT_NAMES: [&str; 5] = ["Orig", "FG", "BG", "FGBG", "All"];

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent per-item stream seed; items can be rendered in any order
/// (or in parallel) and still match a serial build.
fn item_seed(seed: u64, split_idx: usize, item_idx: usize) -> u64 {
    splitmix64(seed ^ splitmix64(((split_idx as u64) << 32) ^ item_idx as u64))
}

/// Expand resource counts into concrete split plans.
///
/// Every augmented split takes `repeats` passes over its most plentiful
/// resource, cycling the scarcer ones: with 297 frames, 1800 backgrounds
/// and 80 objects at repeats=3 this yields Orig 297, FG 891, BG 5400,
/// FGBG 5400 and All 11988.
pub fn plan_splits(
    n_frames: usize,
    n_backgrounds: usize,
    n_objects: usize,
    repeats: usize,
) -> Result<Vec<SplitPlan>> {
    if n_frames == 0 {
        return Err(Error::EmptyResource("labeled frames"));
    }
    if n_backgrounds == 0 {
        return Err(Error::EmptyResource("backgrounds"));
    }
    if n_objects == 0 {
        return Err(Error::EmptyResource("fg_objects"));
    }
    if repeats == 0 {
        return Err(Error::InvalidParam("repeats must be >= 1".into()));
    }
    let orig = SplitPlan {
        name: "Orig".into(),
        items: (0..n_frames).map(|frame| AugmentItem::Orig { frame }).collect(),
    };
    let fg = SplitPlan {
        name: "FG".into(),
        items: (0..repeats * n_frames.max(n_objects))
            .map(|i| AugmentItem::Fg { frame: i % n_frames, object: i % n_objects })
            .collect(),
    };
    let bg = SplitPlan {
        name: "BG".into(),
        items: (0..repeats * n_frames.max(n_backgrounds))
            .map(|i| AugmentItem::Bg { frame: i % n_frames, background: i % n_backgrounds })
            .collect(),
    };
    let fgbg = SplitPlan {
        name: "FGBG".into(),
        items: (0..repeats * n_frames.max(n_backgrounds).max(n_objects))
            .map(|i| AugmentItem::FgBg {
                frame: i % n_frames,
                background: i % n_backgrounds,
                object: i % n_objects,
            })
            .collect(),
    };
    let all = SplitPlan {
        name: "All".into(),
        items: [&orig, &fg, &bg, &fgbg].iter().flat_map(|p| p.items.iter().copied()).collect(),
    };
    Ok(vec![orig, fg, bg, fgbg, all])
}

/// Render one planned item with its own seeded stream.
pub fn render_item(
    item: &AugmentItem,
    frames: &[LabeledFrame],
    spec: &AugmentSpec,
    seed: u64,
) -> Result<LabeledFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = |range: (f64, f64)| -> f64 {
        if range.1 > range.0 {
            rng.random_range(range.0..range.1)
        } else {
            range.0
        }
    };
    match *item {
        AugmentItem::Orig { frame } => Ok(frames[frame].clone()),
        AugmentItem::Fg { frame, object } => {
            let scale = sample(spec.scale_range);
            let rot = sample(spec.rotation_range_deg);
            Ok(overlay_foreground(&frames[frame], &spec.fg_objects[object], scale, rot))
        }
        AugmentItem::Bg { frame, background } => {
            let f = &frames[frame];
            let (h, w) = f.dims();
            substitute_background(f, &fit_background(&spec.backgrounds[background], h, w))
        }
        AugmentItem::FgBg { frame, background, object } => {
            let scale = sample(spec.scale_range);
            let rot = sample(spec.rotation_range_deg);
            let f = &frames[frame];
            let (h, w) = f.dims();
            let swapped = substitute_background(f, &fit_background(&spec.backgrounds[background], h, w))?;
            Ok(overlay_foreground(&swapped, &spec.fg_objects[object], scale, rot))
        }
    }
}

/// Build all five splits, streaming each rendered frame to `sink(split,
/// index, frame)` and returning one annotation set per split. The `All`
/// split reuses the already-rendered images (its annotation set references
/// them; the sink is not called again).
pub fn build_srn_dataset(
    frames: &[LabeledFrame],
    spec: &AugmentSpec,
    mut sink: impl FnMut(&str, usize, &LabeledFrame) -> Result<()>,
) -> Result<Vec<(String, AnnotationSet)>> {
    spec.validate()?;
    let plans = plan_splits(frames.len(), spec.backgrounds.len(), spec.fg_objects.len(), spec.repeats)?;
    let categories = vec![
        Category { id: CLASS_BACKGROUND, name: "background".into() },
        Category { id: CLASS_MANIPULATOR, name: "manipulator".into() },
    ];
    let mut out: Vec<(String, AnnotationSet)> = Vec::new();
    let mut next_image_id: u64 = 0;
    let mut next_ann_id: u64 = 0;
    for (split_idx, plan) in plans.iter().enumerate() {
        if plan.name == "All" {
            continue;
        }
        let mut set = AnnotationSet { categories: categories.clone(), ..Default::default() };
        for (i, item) in plan.items.iter().enumerate() {
            let lf = render_item(item, frames, spec, item_seed(spec.seed, split_idx, i))?;
            let (h, w) = lf.dims();
            let image_id = next_image_id;
            next_image_id += 1;
            set.images.push(ImageInfo {
                id: image_id,
                file_name: format!("{}/{:06}.png", plan.name.to_lowercase(), i),
                height: h,
                width: w,
            });
            if let Some(ann) = AnnotationSet::annotation_from_mask(
                next_ann_id,
                image_id,
                CLASS_MANIPULATOR,
                &lf.manipulator_mask,
                None,
            ) {
                next_ann_id += 1;
                set.annotations.push(ann);
            }
            sink(&plan.name, i, &lf)?;
        }
        out.push((plan.name.clone(), set));
    }
    let mut all = AnnotationSet { categories, ..Default::default() };
    for (_, set) in &out {
        all.images.extend(set.images.iter().cloned());
        all.annotations.extend(set.annotations.iter().cloned());
    }
    out.push(("All".into(), all));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn checker_frame() -> LabeledFrame {
        let rgb = RgbImage::from_data(
            8,
            8,
            (0..64).flat_map(|i| if i % 2 == 0 { [200, 10, 10] } else { [10, 200, 10] }).collect(),
        )
        .unwrap();
        let mask = BinaryMask::from_fn(8, 8, |r, _| r < 4);
        LabeledFrame::new(rgb, mask).unwrap()
    }

    #[test]
    fn substitute_keeps_masked_pixels_and_replaces_rest() {
        let frame = checker_frame();
        let bg = RgbImage::filled(8, 8, [1, 2, 3]);
        let out = substitute_background(&frame, &bg).unwrap();
        assert_eq!(out.manipulator_mask, frame.manipulator_mask);
        for r in 0..8 {
            for c in 0..8 {
                let expect = if frame.manipulator_mask.at(r, c) { frame.rgb.px(r, c) } else { [1, 2, 3] };
                assert_eq!(out.rgb.px(r, c), expect);
            }
        }

        let all_fg = LabeledFrame::new(frame.rgb.clone(), BinaryMask::ones(8, 8)).unwrap();
        assert_eq!(substitute_background(&all_fg, &bg).unwrap().rgb, frame.rgb);

        let all_bg = LabeledFrame::new(frame.rgb.clone(), BinaryMask::zeros(8, 8)).unwrap();
        assert_eq!(substitute_background(&all_bg, &bg).unwrap().rgb, bg);

        assert!(substitute_background(&frame, &RgbImage::filled(4, 4, [0, 0, 0])).is_err());
    }

    #[test]
    fn transparent_overlay_is_identity() {
        let frame = checker_frame();
        let ghost = RgbaImage::filled(6, 6, [255, 255, 255, 0]);
        let out = overlay_foreground(&frame, &ghost, 1.0, 33.0);
        assert_eq!(out, frame);
    }

    #[test]
    fn opaque_overlay_clears_covered_mask_pixels() {
        let rgb = RgbImage::filled(11, 11, [9, 9, 9]);
        let mask = BinaryMask::ones(11, 11);
        let frame = LabeledFrame::new(rgb, mask).unwrap();
        let obj = RgbaImage::filled(3, 3, [0, 0, 255, 255]);
        let out = overlay_foreground(&frame, &obj, 1.0, 0.0);
        // Center pixel is fully covered by the opaque object.
        assert_eq!(out.rgb.px(5, 5), [0, 0, 255]);
        assert!(!out.manipulator_mask.at(5, 5));
        // A far corner is untouched.
        assert_eq!(out.rgb.px(0, 0), [9, 9, 9]);
        assert!(out.manipulator_mask.at(0, 0));
    }

    #[test]
    fn full_turn_matches_no_rotation_up_to_resampling() {
        let frame = checker_frame();
        let mut obj_data = Vec::new();
        for i in 0..5 * 5 {
            obj_data.extend_from_slice(&[(i * 9 % 256) as u8, 30, 200, 255]);
        }
        let obj = RgbaImage::from_data(5, 5, obj_data).unwrap();
        let a = overlay_foreground(&frame, &obj, 1.0, 0.0);
        let b = overlay_foreground(&frame, &obj, 1.0, 360.0);
        let diff: f64 = a
            .rgb
            .data()
            .iter()
            .zip(b.rgb.data())
            .map(|(&x, &y)| (x as f64 - y as f64).abs())
            .sum::<f64>()
            / a.rgb.data().len() as f64;
        assert!(diff <= 1.0, "mean abs diff {diff}");
    }

    #[test]
    fn table_two_arithmetic() {
        let plans = plan_splits(297, 1800, 80, 3).unwrap();
        let sizes: Vec<(String, usize)> =
            plans.iter().map(|p| (p.name.clone(), p.items.len())).collect();
        assert_eq!(
            sizes,
            vec![
                ("Orig".to_string(), 297),
                ("FG".to_string(), 891),
                ("BG".to_string(), 5400),
                ("FGBG".to_string(), 5400),
                ("All".to_string(), 11988),
            ]
        );
    }

    #[test]
    fn empty_resources_error() {
        assert!(matches!(plan_splits(0, 5, 5, 3), Err(Error::EmptyResource(_))));
        assert!(matches!(plan_splits(5, 0, 5, 3), Err(Error::EmptyResource(_))));
        assert!(matches!(plan_splits(5, 5, 0, 3), Err(Error::EmptyResource(_))));
    }

    fn tiny_spec(seed: u64) -> AugmentSpec {
        let bg1 = RgbImage::filled(8, 8, [40, 40, 200]);
        let bg2 = RgbImage::filled(12, 10, [200, 40, 40]);
        let obj = RgbaImage::filled(4, 4, [10, 250, 10, 255]);
        AugmentSpec::new(vec![bg1, bg2], vec![obj], seed)
    }

    #[test]
    fn dataset_build_is_deterministic_and_consistent() {
        let frames = vec![checker_frame(), checker_frame()];
        let spec = tiny_spec(11);
        let mut seen_a: Vec<(String, usize, LabeledFrame)> = Vec::new();
        let a = build_srn_dataset(&frames, &spec, |s, i, lf| {
            seen_a.push((s.to_string(), i, lf.clone()));
            Ok(())
        })
        .unwrap();
        let mut seen_b = Vec::new();
        let b = build_srn_dataset(&frames, &spec, |s, i, lf| {
            seen_b.push((s.to_string(), i, lf.clone()));
            Ok(())
        })
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(seen_a, seen_b);

        // Split sizes follow the repeat rule: 2 frames, 2 backgrounds,
        // 1 object, repeats 3.
        let sizes: Vec<usize> = a.iter().map(|(_, s)| s.images.len()).collect();
        assert_eq!(sizes, vec![2, 6, 6, 6, 20]);
        for (_, set) in &a {
            set.validate().unwrap();
            for ann in &set.annotations {
                assert!(ann.category_id == CLASS_MANIPULATOR || ann.category_id == CLASS_BACKGROUND);
            }
        }
    }

    #[test]
    fn items_render_identically_in_isolation() {
        // The per-item streams make order irrelevant: re-rendering any item
        // alone reproduces the full build's output.
        let frames = vec![checker_frame()];
        let spec = tiny_spec(5);
        let mut captured: Vec<(String, usize, LabeledFrame)> = Vec::new();
        build_srn_dataset(&frames, &spec, |s, i, lf| {
            captured.push((s.to_string(), i, lf.clone()));
            Ok(())
        })
        .unwrap();
        let plans = plan_splits(1, 2, 1, 3).unwrap();
        for (split_idx, plan) in plans.iter().enumerate().take(4) {
            for (i, item) in plan.items.iter().enumerate() {
                let lone = render_item(item, &frames, &spec, item_seed(spec.seed, split_idx, i)).unwrap();
                let from_build = captured
                    .iter()
                    .find(|(s, idx, _)| *s == plan.name && *idx == i)
                    .map(|(_, _, lf)| lf.clone())
                    .unwrap();
                assert_eq!(lone, from_build);
            }
        }
    }

    #[test]
    fn fit_background_covers_and_crops() {
        let bg = RgbImage::from_data(
            2,
            4,
            vec![
                10, 0, 0, 20, 0, 0, 30, 0, 0, 40, 0, 0, //
                50, 0, 0, 60, 0, 0, 70, 0, 0, 80, 0, 0,
            ],
        )
        .unwrap();
        let out = fit_background(&bg, 8, 8);
        assert_eq!(out.dims(), (8, 8));
        // Matching dims pass through unchanged.
        let exact = fit_background(&bg, 2, 4);
        assert_eq!(exact, bg);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn substitution_matches_mux_oracle(
            mask_bits in proptest::collection::vec(any::<bool>(), 36),
            fg_col in any::<[u8; 3]>(),
            bg_col in any::<[u8; 3]>()
        ) {
            let mask = BinaryMask::from_data(6, 6, mask_bits).unwrap();
            let frame = LabeledFrame::new(RgbImage::filled(6, 6, fg_col), mask.clone()).unwrap();
            let bg = RgbImage::filled(6, 6, bg_col);
            let out = substitute_background(&frame, &bg).unwrap();
            for r in 0..6 {
                for c in 0..6 {
                    let expect = if mask.at(r, c) { fg_col } else { bg_col };
                    prop_assert_eq!(out.rgb.px(r, c), expect);
                }
            }
            prop_assert_eq!(out.manipulator_mask, mask);
        }
    }
}
