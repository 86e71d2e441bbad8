//! Robot-supervised foreground annotation for in-hand objects.
//!
//! The library turns a depth + color frame of a robot arm holding an object
//! into pixel masks, with the robot's kinematic state standing in for a
//! human annotator:
//!
//! 1. over-segment the depth image into surface patches ([`overseg`]);
//! 2. project the arm's link positions into the frame and keep the patches
//!    a link lands on, depth-gated so occluders in front survive
//!    ([`kinproj`]);
//! 3. grow the raw selection into a four-level trimap with hole filling,
//!    opening, erosion and dilation ([`morph`], [`pipeline`]);
//! 4. refine the trimap with iterated color-model graph cuts ([`gmm`],
//!    [`grabcut`]);
//! 5. subtract a robot-only segmentation from a robot-plus-object one to
//!    label the held object ([`annotate`]);
//! 6. composite the labeled crops over replacement backgrounds to build
//!    training splits ([`augment`]).
//!
//! [`baseline`] carries the box-prior color baseline the pipeline is
//! compared against, [`metrics`] the IoU / precision / recall / AP scoring,
//! and [`synth`] renders the synthetic arm scenes the test suite runs on.
//! Everything here is pure computation on in-memory buffers; file formats
//! live in the CLI.

pub mod annotate;
pub mod annotations;
pub mod augment;
pub mod baseline;
pub mod error;
pub mod gmm;
pub mod grabcut;
pub mod image;
pub mod kinproj;
pub mod metrics;
pub mod morph;
pub mod overseg;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use image::{
    BinaryMask, CameraIntrinsics, DepthImage, LinkPoint, PixelCoord, RgbImage, Trimap,
};
