//! Box-prior color baseline for in-hand object segmentation.
//!
//! A color mixture is trained on the pixels between two concentric boxes
//! around the expected object location; everything inside the inner box
//! whose density falls below a threshold is declared object. The method
//! needs no kinematics, which is exactly why it breaks when the object's
//! colors also occur in the training frame.

use crate::error::{Error, Result};
use crate::gmm::fit_em;
use crate::image::{BinaryMask, PixelCoord, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BrowatzkiParams {
    /// Inner box side length, pixels; the mask may only appear inside it.
    pub inner_box: usize,
    /// Outer box side length, pixels; the ring between the boxes is the
    /// training region.
    pub outer_box: usize,
    pub n_gaussians: usize,
    /// Pixels with mixture density below this are labeled object.
    pub density_threshold: f64,
    /// Box center; `None` means the image center.
    pub center: Option<PixelCoord>,
}

impl BrowatzkiParams {
    pub fn validate(&self) -> Result<()> {
        if self.inner_box == 0 || self.outer_box <= self.inner_box {
            return Err(Error::InvalidParam(format!(
                "need outer_box > inner_box > 0, got inner={} outer={}",
                self.inner_box, self.outer_box
            )));
        }
        if !(self.density_threshold > 0.0) {
            return Err(Error::InvalidParam("density_threshold must be > 0".into()));
        }
        if self.n_gaussians == 0 {
            return Err(Error::InvalidParam("n_gaussians must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for BrowatzkiParams {
    fn default() -> Self {
        Self {
            inner_box: 270,
            outer_box: 300,
            n_gaussians: 1,
            density_threshold: 1e-15,
            center: None,
        }
    }
}

/// Half-open pixel range of a square box of side `side` centered at `c`,
/// clamped to `[0, len)`.
fn box_range(c: i64, side: usize, len: usize) -> (usize, usize) {
    let lo = c - side as i64 / 2;
    let hi = lo + side as i64;
    (lo.clamp(0, len as i64) as usize, hi.clamp(0, len as i64) as usize)
}

/// Segment the in-hand object by thresholding a color model of the frame
/// ring between the two boxes. No morphological cleanup is applied; the
/// output reflects the raw method.
pub fn browatzki_segment(rgb: &RgbImage, params: &BrowatzkiParams, seed: u64) -> Result<BinaryMask> {
    params.validate()?;
    let (h, w) = rgb.dims();
    let center = params.center.unwrap_or(PixelCoord::new(h as i64 / 2, w as i64 / 2));
    let (ir0, ir1) = box_range(center.row, params.inner_box, h);
    let (ic0, ic1) = box_range(center.col, params.inner_box, w);
    let (or0, or1) = box_range(center.row, params.outer_box, h);
    let (oc0, oc1) = box_range(center.col, params.outer_box, w);

    let in_inner = |r: usize, c: usize| (ir0..ir1).contains(&r) && (ic0..ic1).contains(&c);
    let mut samples: Vec<[f64; 3]> = Vec::new();
    for r in or0..or1 {
        for c in oc0..oc1 {
            if in_inner(r, c) {
                continue;
            }
            let p = rgb.px(r, c);
            samples.push([p[0] as f64, p[1] as f64, p[2] as f64]);
        }
    }
    if samples.len() < params.n_gaussians {
        return Err(Error::EmptyResource("frame ring between inner and outer boxes"));
    }
    let model = fit_em(&samples, params.n_gaussians, 100, 1e-6, seed)?;

    Ok(BinaryMask::from_fn(h, w, |r, c| {
        if !in_inner(r, c) {
            return false;
        }
        let p = rgb.px(r, c);
        model.pdf([p[0] as f64, p[1] as f64, p[2] as f64]) < params.density_threshold
    }))
}
