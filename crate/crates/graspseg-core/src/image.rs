//! Shared image and geometry value types plus the exact mask algebra used by
//! every pipeline stage.
//!
//! All raster types are row-major with `(row, col)` indexing. Depth is stored
//! in millimeters with `0.0` as the invalid-reading sentinel; foreground logic
//! must treat sentinel pixels as "no data", never as a surface at 0 mm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default maximum sensor range in millimeters.
pub const DEFAULT_MAX_DEPTH_MM: f32 = 10_000.0;

/// Depth value marking an invalid sensor reading.
pub const DEPTH_INVALID: f32 = 0.0;

fn check_dims(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            expected_h: expected.0,
            expected_w: expected.1,
            got_h: got.0,
            got_w: got.1,
        });
    }
    Ok(())
}

/// Registered depth frame, millimeters, row-major. `0.0` marks an invalid reading.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl DepthImage {
    /// Build from raw row-major millimeter values.
    ///
    /// Valid readings must be positive and at most `max_range_mm`
    /// ([`DEFAULT_MAX_DEPTH_MM`] when `None`); `0.0` is the invalid sentinel.
    pub fn from_data(height: usize, width: usize, data: Vec<f32>, max_range_mm: Option<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidParam(format!(
                "depth data length {} != {}x{}",
                data.len(),
                height,
                width
            )));
        }
        let max_range = max_range_mm.unwrap_or(DEFAULT_MAX_DEPTH_MM);
        for &d in &data {
            if !d.is_finite() || d < 0.0 || d > max_range {
                return Err(Error::InvalidParam(format!(
                    "depth value {d} outside [0, {max_range}] mm"
                )));
            }
        }
        Ok(Self { height, width, data })
    }

    /// All-invalid frame.
    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    /// Build from a per-pixel function; values are validated against the
    /// default sensor range.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::from_data(height, width, data, None).expect("per-pixel values in range")
    }

    /// Internal constructor for values already known to be in range
    /// (convex combinations of an existing frame's readings).
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.data[row * self.width + col] = value;
    }

    /// True when the pixel holds a usable reading.
    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.at(row, col) > DEPTH_INVALID
    }
}

/// Registered 8-bit RGB frame, row-major, 3 channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn from_data(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::InvalidParam(format!(
                "rgb data length {} != {}x{}x3",
                data.len(),
                height,
                width
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, color: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&color);
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn px(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_px(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Per-pixel boolean mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![true; height * width],
        }
    }

    pub fn from_data(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidParam(format!(
                "mask data length {} != {}x{}",
                data.len(),
                height,
                width
            )));
        }
        Ok(Self { height, width, data })
    }

    /// Build from any per-pixel predicate on `(row, col)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&b| !b)
    }

    /// Pixelwise `self AND NOT other`: keeps foreground not explained by `other`.
    pub fn intersect_complement(&self, other: &BinaryMask) -> Result<BinaryMask> {
        check_dims(self.dims(), other.dims())?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a && !b)
            .collect();
        Ok(BinaryMask {
            height: self.height,
            width: self.width,
            data,
        })
    }

    /// Pixelwise union. Panics on dimension mismatch (internal use on
    /// same-frame masks).
    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!(self.dims(), other.dims());
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect();
        BinaryMask {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Pixelwise intersection. Panics on dimension mismatch.
    pub fn intersection(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!(self.dims(), other.dims());
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a && b).collect();
        BinaryMask {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// True when every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(&a, &b)| !a || b)
    }
}

/// `a AND NOT b`, the mask subtraction used to carve the object out of the
/// foreground once the manipulator prediction is known.
pub fn mask_intersect_complement(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    a.intersect_complement(b)
}

/// Number of foreground pixels in `a`.
pub fn mask_area(a: &BinaryMask) -> usize {
    a.area()
}

/// Four-valued GrabCut initialization map.
///
/// Values: 0 background, 1 probably background, 2 probably foreground,
/// 3 foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

/// Trimap value: definite background.
pub const TRIMAP_BG: u8 = 0;
/// Trimap value: probably background.
pub const TRIMAP_PROB_BG: u8 = 1;
/// Trimap value: probably foreground.
pub const TRIMAP_PROB_FG: u8 = 2;
/// Trimap value: definite foreground.
pub const TRIMAP_FG: u8 = 3;

impl Trimap {
    pub fn from_data(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidParam(format!(
                "trimap data length {} != {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if let Some(&v) = data.iter().find(|&&v| v > TRIMAP_FG) {
            return Err(Error::InvalidParam(format!("trimap value {v} outside 0..=3")));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        assert!(value <= TRIMAP_FG);
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        debug_assert!(value <= TRIMAP_FG);
        self.data[row * self.width + col] = value;
    }

    /// Collapse to binary: foreground iff value is 2 or 3.
    pub fn to_binary(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| v >= TRIMAP_PROB_FG).collect(),
        }
    }
}

/// Pinhole intrinsics with zero skew: focal lengths and principal point in
/// pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        Ok(Self { fx, fy, cx, cy })
    }
}

/// 3D kinematic link position in the camera frame, millimeters.
/// Axes: +x right, +y down, +z forward (out of the camera).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LinkPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Integer pixel coordinate. May lie outside image bounds; callers
/// bounds-check before indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelCoord {
    pub row: i64,
    pub col: i64,
}

impl PixelCoord {
    pub fn new(row: i64, col: i64) -> Self {
        Self { row, col }
    }

    /// True when the coordinate indexes into an image of the given size.
    pub fn in_bounds(&self, height: usize, width: usize) -> bool {
        self.row >= 0 && self.col >= 0 && (self.row as usize) < height && (self.col as usize) < width
    }
}
