//! Error type shared by all pipeline stages.

/// Errors surfaced by segmentation, model fitting and dataset assembly.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two images or masks that must be registered have different shapes.
    #[error("dimension mismatch: expected {expected_h}x{expected_w}, got {got_h}x{got_w}")]
    DimensionMismatch {
        expected_h: usize,
        expected_w: usize,
        got_h: usize,
        got_w: usize,
    },

    /// A kinematic link with z <= 0 cannot be projected.
    #[error("link is behind the camera (z = {z} mm)")]
    BehindCamera { z: f64 },

    /// Mixture fitting needs at least as many samples as components.
    #[error("cannot fit {components} mixture components from {samples} samples")]
    TooFewSamples { samples: usize, components: usize },

    /// GrabCut needs at least one foreground and one background seed.
    #[error("degenerate trimap: no {0} seeds")]
    DegenerateTrimap(&'static str),

    /// A parameter violates its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A dataset build was asked for a split whose resources are missing.
    #[error("empty resource collection: {0}")]
    EmptyResource(&'static str),

    /// An annotation set references ids that do not exist.
    #[error("annotation integrity violation: {0}")]
    Integrity(String),

    /// A scene specification violates its invariants.
    #[error("invalid scene spec: {0}")]
    InvalidScene(String),
}

pub type Result<T> = std::result::Result<T, Error>;
