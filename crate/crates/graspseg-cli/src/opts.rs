//! Flag/config resolution shared by the subcommands.
//!
//! Every subcommand accepts `--config FILE` pointing at a JSON object whose
//! keys mirror the long flag names. Resolution order is: explicit flag,
//! then config value, then built-in default. Required settings missing
//! from both are usage errors (exit status 2), distinct from processing
//! failures (exit status 1).

use std::fmt;
use std::path::PathBuf;

use anyhow::Result;
use graspseg_core::grabcut::GrabCutParams;
use graspseg_core::kinproj::FgSelectParams;
use graspseg_core::overseg::FelzParams;
use graspseg_core::pipeline::FgPipelineParams;
use serde::Deserialize;

/// A bad invocation discovered after clap parsing (e.g. a required value
/// absent from both the command line and the config file).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

/// Flag value if given, else config value, else default.
pub fn pick<T>(flag: Option<T>, cfg: Option<T>, default: T) -> T {
    flag.or(cfg).unwrap_or(default)
}

/// Flag value if given, else config value; `None` if neither.
pub fn pick_opt<T>(flag: Option<T>, cfg: Option<T>) -> Option<T> {
    flag.or(cfg)
}

/// Like [`pick`] but the setting is mandatory.
pub fn require<T>(name: &str, flag: Option<T>, cfg: Option<T>) -> Result<T> {
    flag.or(cfg).ok_or_else(|| {
        UsageError(format!("missing required --{name} (not in the config file either)")).into()
    })
}

/// Read the per-command config file if one was given.
pub fn load_cfg<C: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<C> {
    match path {
        Some(p) => crate::io::read_json(p),
        None => Ok(C::default()),
    }
}

// ---------------------------------------------------------------------------
// Foreground-pipeline knobs (shared by `fgseg` and `selfdata`)
// ---------------------------------------------------------------------------

/// Command-line overrides for the per-frame foreground pipeline.
#[derive(clap::Args, Debug, Clone)]
pub struct PipelineFlags {
    /// Accepted slack in millimeters past a link's kinematic depth when
    /// deciding whether a depth segment belongs to the arm.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Gaussian smoothing applied to depth before graph segmentation.
    #[arg(long)]
    pub felz_sigma: Option<f64>,
    /// Segmentation merge threshold; larger values merge more aggressively.
    #[arg(long)]
    pub felz_k: Option<f64>,
    /// Minimum segment size enforced by a final merge pass.
    #[arg(long)]
    pub felz_min_size: Option<usize>,
    /// Opening kernel side applied to the filled link selection.
    #[arg(long)]
    pub open_kernel: Option<usize>,
    /// Erosion kernel side producing the certain-foreground band.
    #[arg(long)]
    pub erode_kernel: Option<usize>,
    /// Dilation kernel side producing the permissive envelope.
    #[arg(long)]
    pub dilate_kernel: Option<usize>,
    /// Color-model refinement sweeps.
    #[arg(long)]
    pub gc_iterations: Option<usize>,
    /// Pairwise smoothness weight for the refinement graph.
    #[arg(long)]
    pub gc_gamma: Option<f64>,
    /// Gaussians per color model in the refinement step.
    #[arg(long)]
    pub gc_components: Option<usize>,
    /// Reject depth samples beyond this range (millimeters) when loading.
    #[arg(long)]
    pub max_depth_mm: Option<f32>,
}

/// Config-file mirror of [`PipelineFlags`].
#[derive(Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineFileCfg {
    pub lambda: Option<f64>,
    pub felz_sigma: Option<f64>,
    pub felz_k: Option<f64>,
    pub felz_min_size: Option<usize>,
    pub open_kernel: Option<usize>,
    pub erode_kernel: Option<usize>,
    pub dilate_kernel: Option<usize>,
    pub gc_iterations: Option<usize>,
    pub gc_gamma: Option<f64>,
    pub gc_components: Option<usize>,
    pub max_depth_mm: Option<f32>,
}

/// Fully resolved pipeline settings plus the depth-load range.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedPipeline {
    pub params: FgPipelineParams,
    pub max_depth_mm: f32,
}

pub fn resolve_pipeline(flags: &PipelineFlags, cfg: &PipelineFileCfg) -> ResolvedPipeline {
    let felz_def = FelzParams::default();
    let select_def = FgSelectParams::default();
    let gc_def = GrabCutParams::default();
    let pipe_def = FgPipelineParams::default();
    let params = FgPipelineParams {
        felz: FelzParams {
            sigma: pick(flags.felz_sigma, cfg.felz_sigma, felz_def.sigma),
            k: pick(flags.felz_k, cfg.felz_k, felz_def.k),
            min_size: pick(flags.felz_min_size, cfg.felz_min_size, felz_def.min_size),
        },
        select: FgSelectParams { lambda: pick(flags.lambda, cfg.lambda, select_def.lambda) },
        open_kernel: pick(flags.open_kernel, cfg.open_kernel, pipe_def.open_kernel),
        erode_kernel: pick(flags.erode_kernel, cfg.erode_kernel, pipe_def.erode_kernel),
        dilate_kernel: pick(flags.dilate_kernel, cfg.dilate_kernel, pipe_def.dilate_kernel),
        grabcut: GrabCutParams {
            iterations: pick(flags.gc_iterations, cfg.gc_iterations, gc_def.iterations),
            gamma: pick(flags.gc_gamma, cfg.gc_gamma, gc_def.gamma),
            n_components: pick(flags.gc_components, cfg.gc_components, gc_def.n_components),
        },
    };
    let max_depth_mm =
        pick(flags.max_depth_mm, cfg.max_depth_mm, crate::io::DEFAULT_MAX_DEPTH_MM);
    ResolvedPipeline { params, max_depth_mm }
}

// ---------------------------------------------------------------------------
// Small value parsers for composite flags
// ---------------------------------------------------------------------------

/// Parse "r,g,b" into an RGB triple.
pub fn parse_color(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected r,g,b — got {s:?}"));
    }
    let mut out = [0u8; 3];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part.trim().parse::<u8>().map_err(|e| format!("bad channel {part:?}: {e}"))?;
    }
    Ok(out)
}

/// Parse "lo,hi" into an f64 pair.
pub fn parse_f64_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected lo,hi — got {s:?}"));
    }
    let lo = parts[0].trim().parse::<f64>().map_err(|e| format!("bad value {:?}: {e}", parts[0]))?;
    let hi = parts[1].trim().parse::<f64>().map_err(|e| format!("bad value {:?}: {e}", parts[1]))?;
    Ok((lo, hi))
}

/// Parse "row,col" into a pixel position.
pub fn parse_pixel(s: &str) -> Result<(i64, i64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected row,col — got {s:?}"));
    }
    let r = parts[0].trim().parse::<i64>().map_err(|e| format!("bad row {:?}: {e}", parts[0]))?;
    let c = parts[1].trim().parse::<i64>().map_err(|e| format!("bad col {:?}: {e}", parts[1]))?;
    Ok((r, c))
}
