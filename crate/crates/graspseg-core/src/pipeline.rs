//! End-to-end foreground extraction for one RGB-D frame.
//!
//! Stage order is fixed: segment the depth image, select the segments the
//! projected links confirm, rasterize the union, fill holes, open with the
//! small kernel (giving M_0), erode/dilate M_0 into the precision and
//! recall masks, sum the three into the trimap, refine by graph cuts, and
//! binarize. The containment erode(M_0) <= M_0 <= dilate(M_0) is what
//! keeps the summed trimap inside {0,1,2,3}.

use crate::error::Result;
use crate::grabcut::{grabcut_refine, GrabCutParams};
use crate::image::{BinaryMask, CameraIntrinsics, DepthImage, LinkPoint, RgbImage, Trimap};
use crate::kinproj::{project_link, select_foreground_segments, FgSelectParams, ProjectedLink};
use crate::morph::{dilate, erode, fill_holes, open, SquareKernel};
use crate::overseg::{felzenszwalb_segment, FelzParams, SegmentMap};

/// Knobs for the whole chain; kernel sides default to the 8/10/75 trio.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FgPipelineParams {
    pub felz: FelzParams,
    pub select: FgSelectParams,
    /// Opening kernel side applied to the filled selection.
    pub open_kernel: usize,
    /// Erosion kernel side producing the precision mask.
    pub erode_kernel: usize,
    /// Dilation kernel side producing the recall mask.
    pub dilate_kernel: usize,
    pub grabcut: GrabCutParams,
}

impl Default for FgPipelineParams {
    fn default() -> Self {
        Self {
            felz: FelzParams::default(),
            select: FgSelectParams::default(),
            open_kernel: 8,
            erode_kernel: 10,
            dilate_kernel: 75,
            grabcut: GrabCutParams::default(),
        }
    }
}

impl FgPipelineParams {
    fn validate(&self) -> Result<()> {
        for (name, n) in [
            ("open_kernel", self.open_kernel),
            ("erode_kernel", self.erode_kernel),
            ("dilate_kernel", self.dilate_kernel),
        ] {
            if n < 1 {
                return Err(crate::error::Error::InvalidParam(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Every intermediate stage output, for overlays and debugging.
#[derive(Debug, Clone)]
pub struct FgDebugBundle {
    pub segments: SegmentMap,
    pub links: Vec<ProjectedLink>,
    pub m0: BinaryMask,
    pub mp: BinaryMask,
    pub mr: BinaryMask,
    pub mgc: Trimap,
    pub mfg: BinaryMask,
}

/// Result of [`foreground_mask`]. `degenerate` flags frames whose trimap
/// had no refinable structure (typically zero selected segments); the mask
/// is then the unrefined trimap binarization so batch jobs keep moving.
#[derive(Debug, Clone)]
pub struct FgOutcome {
    pub mask: BinaryMask,
    pub degenerate: bool,
    pub debug: Option<FgDebugBundle>,
}

/// Depth-only foreground estimate M_0: segment, select by links, fill
/// holes, then open.
pub fn depth_foreground(
    depth: &DepthImage,
    links: &[LinkPoint],
    cam: &CameraIntrinsics,
    params: &FgPipelineParams,
) -> Result<BinaryMask> {
    params.validate()?;
    let seg = felzenszwalb_segment(depth, &params.felz)?;
    depth_foreground_with(&seg, depth, links, cam, params).map(|(m0, _)| m0)
}

fn depth_foreground_with(
    seg: &SegmentMap,
    depth: &DepthImage,
    links: &[LinkPoint],
    cam: &CameraIntrinsics,
    params: &FgPipelineParams,
) -> Result<(BinaryMask, BinaryMask)> {
    let selected = select_foreground_segments(seg, depth, links, cam, &params.select)?;
    let filled = fill_holes(&selected);
    let m0 = open(&filled, SquareKernel::new(params.open_kernel));
    Ok((m0, selected))
}

/// Compose the four-level trimap from M_0: erode for the sure-foreground
/// core, dilate for the permissive envelope, and sum the three masks.
pub fn build_trimap(m0: &BinaryMask, params: &FgPipelineParams) -> Trimap {
    let mp = erode(m0, SquareKernel::new(params.erode_kernel));
    let mr = dilate(m0, SquareKernel::new(params.dilate_kernel));
    compose_trimap(&mp, m0, &mr)
}

fn compose_trimap(mp: &BinaryMask, m0: &BinaryMask, mr: &BinaryMask) -> Trimap {
    let (h, w) = m0.dims();
    debug_assert!(mp.is_subset_of(m0) && m0.is_subset_of(mr));
    let data = (0..h * w)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            mr.at(r, c) as u8 + m0.at(r, c) as u8 + mp.at(r, c) as u8
        })
        .collect();
    Trimap::from_data(h, w, data).expect("containment keeps values in 0..=3")
}

/// Full per-frame pipeline: M_0, trimap, graph-cut refinement, binarize.
pub fn foreground_mask(
    rgb: &RgbImage,
    depth: &DepthImage,
    links: &[LinkPoint],
    cam: &CameraIntrinsics,
    params: &FgPipelineParams,
    seed: u64,
    want_debug: bool,
) -> Result<FgOutcome> {
    params.validate()?;
    let seg = felzenszwalb_segment(depth, &params.felz)?;
    let (m0, _) = depth_foreground_with(&seg, depth, links, cam, params)?;
    let mp = erode(&m0, SquareKernel::new(params.erode_kernel));
    let mr = dilate(&m0, SquareKernel::new(params.dilate_kernel));
    let mgc = compose_trimap(&mp, &m0, &mr);

    let (refined, degenerate) = match grabcut_refine(rgb, &mgc, &params.grabcut, seed) {
        Ok(t) => (t, false),
        Err(crate::error::Error::DegenerateTrimap(_)) => (mgc.clone(), true),
        Err(e) => return Err(e),
    };
    let mfg = refined.to_binary();

    let debug = want_debug.then(|| {
        let links_proj = links.iter().filter_map(|p| project_link(p, cam).ok()).collect();
        FgDebugBundle {
            segments: seg,
            links: links_proj,
            m0,
            mp,
            mr,
            mgc,
            mfg: mfg.clone(),
        }
    });
    Ok(FgOutcome { mask: mfg, degenerate, debug })
}
