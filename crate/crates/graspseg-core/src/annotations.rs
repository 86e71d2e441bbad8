//! Instance-annotation container with run-length encoded masks.
//!
//! Masks are stored column-major (all rows of column 0, then column 1, …)
//! as alternating run lengths, always starting with the number of leading
//! background pixels — an empty first run is written as an explicit 0 when
//! the mask starts with foreground. Bounding boxes are `[x, y, w, h]` in
//! pixels and `area` is the foreground pixel count.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::BinaryMask;

/// Run-length encoded binary mask, column-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRle {
    /// `[height, width]`.
    pub size: [usize; 2],
    /// Alternating background/foreground run lengths; `counts[0]` is the
    /// leading background run (possibly 0).
    pub counts: Vec<u32>,
}

/// Encode a mask; runs alternate starting with background.
pub fn rle_encode(mask: &BinaryMask) -> MaskRle {
    let (h, w) = mask.dims();
    let mut counts = Vec::new();
    let mut current = false; // runs start with background
    let mut run: u32 = 0;
    for c in 0..w {
        for r in 0..h {
            let v = mask.at(r, c);
            if v == current {
                run += 1;
            } else {
                counts.push(run);
                current = v;
                run = 1;
            }
        }
    }
    counts.push(run);
    if h * w == 0 {
        counts.clear();
    }
    MaskRle { size: [h, w], counts }
}

/// Decode a mask; rejects runs that do not sum to `height * width`.
pub fn rle_decode(rle: &MaskRle) -> Result<BinaryMask> {
    let [h, w] = rle.size;
    let total: u64 = rle.counts.iter().map(|&c| c as u64).sum();
    if total != (h * w) as u64 {
        return Err(Error::Integrity(format!(
            "RLE runs sum to {total}, expected {}",
            h * w
        )));
    }
    let mut mask = BinaryMask::zeros(h, w);
    let mut idx = 0usize;
    let mut fg = false;
    for &run in &rle.counts {
        if fg {
            for k in idx..idx + run as usize {
                mask.set(k % h, k / h, true);
            }
        }
        idx += run as usize;
        fg = !fg;
    }
    Ok(mask)
}

/// Tight bounding box `[x, y, w, h]`; all zeros for an empty mask.
pub fn mask_bbox(mask: &BinaryMask) -> [usize; 4] {
    let (h, w) = mask.dims();
    let (mut r0, mut r1, mut c0, mut c1) = (h, 0usize, w, 0usize);
    let mut any = false;
    for r in 0..h {
        for c in 0..w {
            if mask.at(r, c) {
                any = true;
                r0 = r0.min(r);
                r1 = r1.max(r);
                c0 = c0.min(c);
                c1 = c1.max(c);
            }
        }
    }
    if !any {
        return [0, 0, 0, 0];
    }
    [c0, r0, c1 - c0 + 1, r1 - r0 + 1]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    pub file_name: String,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u32,
    pub segmentation: MaskRle,
    /// `[x, y, w, h]`, tight around the mask.
    pub bbox: [usize; 4],
    /// Foreground pixel count.
    pub area: usize,
    /// Present on detections, absent on ground truth.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score: Option<f64>,
}

/// A set of images, their instance annotations, and the category table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AnnotationSet {
    pub images: Vec<ImageInfo>,
    pub annotations: Vec<Annotation>,
    pub categories: Vec<Category>,
}

impl AnnotationSet {
    /// Checks referential integrity: unique ids, every annotation points at
    /// an existing image and category, and each RLE matches its image size.
    pub fn validate(&self) -> Result<()> {
        let mut image_ids = HashSet::new();
        for im in &self.images {
            if !image_ids.insert(im.id) {
                return Err(Error::Integrity(format!("duplicate image id {}", im.id)));
            }
        }
        let cat_ids: BTreeSet<u32> = self.categories.iter().map(|c| c.id).collect();
        if cat_ids.len() != self.categories.len() {
            return Err(Error::Integrity("duplicate category id".into()));
        }
        let mut ann_ids = HashSet::new();
        for ann in &self.annotations {
            if !ann_ids.insert(ann.id) {
                return Err(Error::Integrity(format!("duplicate annotation id {}", ann.id)));
            }
            if !image_ids.contains(&ann.image_id) {
                return Err(Error::Integrity(format!(
                    "annotation {} references missing image {}",
                    ann.id, ann.image_id
                )));
            }
            if !cat_ids.contains(&ann.category_id) {
                return Err(Error::Integrity(format!(
                    "annotation {} references missing category {}",
                    ann.id, ann.category_id
                )));
            }
            let im = self.images.iter().find(|im| im.id == ann.image_id).unwrap();
            if ann.segmentation.size != [im.height, im.width] {
                return Err(Error::Integrity(format!(
                    "annotation {} mask size {:?} != image size [{}, {}]",
                    ann.id, ann.segmentation.size, im.height, im.width
                )));
            }
            let total: u64 = ann.segmentation.counts.iter().map(|&c| c as u64).sum();
            if total != (im.height * im.width) as u64 {
                return Err(Error::Integrity(format!(
                    "annotation {} RLE does not cover the image",
                    ann.id
                )));
            }
        }
        Ok(())
    }

    /// Build one annotation from a mask; returns `None` for an empty mask.
    pub fn annotation_from_mask(
        id: u64,
        image_id: u64,
        category_id: u32,
        mask: &BinaryMask,
        score: Option<f64>,
    ) -> Option<Annotation> {
        if mask.is_empty() {
            return None;
        }
        Some(Annotation {
            id,
            image_id,
            category_id,
            segmentation: rle_encode(mask),
            bbox: mask_bbox(mask),
            area: mask.area(),
            score,
        })
    }
}
