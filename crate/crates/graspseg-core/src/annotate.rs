//! Object-label extraction: subtract the manipulator prediction from the
//! depth-derived foreground, then clean up with a small opening.
//!
//! The foreground mask covers arm + grasped object; a segmentation network
//! trained on arm-only data predicts just the arm. What the network cannot
//! explain is the object.

use crate::error::Result;
use crate::image::BinaryMask;
use crate::morph::{open, SquareKernel};

/// One manipulator-mask prediction with its confidence score.
#[derive(Debug, Clone)]
pub struct SrnPrediction {
    pub mask: BinaryMask,
    pub score: f64,
}

/// Pick the highest-scoring prediction; ties go to the earliest entry and
/// an empty list yields an all-background mask of the given dims.
pub fn select_srn_prediction(preds: &[SrnPrediction], height: usize, width: usize) -> BinaryMask {
    let mut best: Option<&SrnPrediction> = None;
    for p in preds {
        if best.map_or(true, |b| p.score > b.score) {
            best = Some(p);
        }
    }
    match best {
        Some(p) => p.mask.clone(),
        None => BinaryMask::zeros(height, width),
    }
}

/// Object label: foreground pixels not explained by the manipulator
/// prediction, opened with a 3x3 kernel to drop sliver artifacts along the
/// arm boundary.
pub fn object_mask(m_fg: &BinaryMask, m_srn: &BinaryMask) -> Result<BinaryMask> {
    let diff = m_fg.intersect_complement(m_srn)?;
    Ok(open(&diff, SquareKernel::new(3)))
}
