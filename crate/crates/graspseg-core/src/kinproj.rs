//! Project kinematic link positions into the image and pick the depth
//! segments the robot is actually touching.
//!
//! A link at camera-frame position (x, y, z) lands on pixel
//! `col = floor(fx*x/z + cx + 0.5)`, `row = floor(fy*y/z + cy + 0.5)`.
//! The intrinsic matrix produces (u, v) = (col, row); lookups use the
//! row-major (row, col) order everywhere downstream. A segment joins the
//! foreground when the measured depth under some link satisfies
//! `D <= z + lambda`: the test is one-sided on purpose, since a grasped
//! object or the manipulator itself may occlude the link and measure
//! closer than the kinematic depth.

use crate::error::{Error, Result};
use crate::image::{BinaryMask, CameraIntrinsics, DepthImage, LinkPoint, PixelCoord};
use crate::overseg::SegmentMap;

/// A link position mapped onto the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedLink {
    pub pixel: PixelCoord,
    /// Kinematic depth of the link, millimeters; equals the source z.
    pub expected_depth_z: f64,
}

impl ProjectedLink {
    /// Whether the projection lands inside an image of the given size.
    pub fn in_bounds(&self, height: usize, width: usize) -> bool {
        self.pixel.in_bounds(height, width)
    }
}

/// Depth-consistency gate for segment selection.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FgSelectParams {
    /// Accepted slack past the kinematic depth, millimeters.
    pub lambda: f64,
}

impl FgSelectParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParam(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { lambda })
    }
}

impl Default for FgSelectParams {
    fn default() -> Self {
        Self { lambda: 200.0 }
    }
}

/// Pinhole projection of a camera-frame point to pixel coordinates.
pub fn project_link(p: &LinkPoint, k: &CameraIntrinsics) -> Result<ProjectedLink> {
    if p.z <= 0.0 {
        return Err(Error::BehindCamera { z: p.z });
    }
    let col = (k.fx * p.x / p.z + k.cx + 0.5).floor() as i64;
    let row = (k.fy * p.y / p.z + k.cy + 0.5).floor() as i64;
    Ok(ProjectedLink {
        pixel: PixelCoord::new(row, col),
        expected_depth_z: p.z,
    })
}

/// Union of the segments whose measured depth confirms a projected link.
///
/// A link contributes when its projection is in bounds, the depth reading
/// there is valid, and `D <= z + lambda`. Invalid-flagged segments never
/// enter the union. Links behind the camera are skipped rather than
/// failing the whole frame.
pub fn select_foreground_segments(
    seg: &SegmentMap,
    depth: &DepthImage,
    links: &[LinkPoint],
    k: &CameraIntrinsics,
    params: &FgSelectParams,
) -> Result<BinaryMask> {
    let (h, w) = seg.dims();
    if depth.dims() != (h, w) {
        return Err(Error::DimensionMismatch {
            expected_h: h,
            expected_w: w,
            got_h: depth.dims().0,
            got_w: depth.dims().1,
        });
    }
    let mut selected = vec![false; seg.segment_count()];
    for p in links {
        let Ok(proj) = project_link(p, k) else { continue };
        if !proj.in_bounds(h, w) {
            continue;
        }
        let (r, c) = (proj.pixel.row as usize, proj.pixel.col as usize);
        if !depth.is_valid(r, c) {
            continue;
        }
        if (depth.at(r, c) as f64) <= proj.expected_depth_z + params.lambda {
            let id = seg.label_at(r, c);
            if !seg.is_invalid(id) {
                selected[id as usize] = true;
            }
        }
    }
    Ok(seg.mask_of(&selected))
}
