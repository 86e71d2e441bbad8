//! File formats for the CLI: PNG images, JSON sidecars, and reports.
//!
//! Conventions shared by every subcommand:
//! - depth is a 16-bit single-channel PNG holding millimeters (0 = invalid);
//!   readers reject other bit depths and clamp out-of-range samples to
//!   invalid with a warning count;
//! - color is 8-bit RGB PNG, masks are 8-bit gray PNG with 0/255 values
//!   (>= 128 reads as set);
//! - JSON is written through one canonical writer: sorted object keys,
//!   floats rounded to six significant digits, pretty-printed, trailing
//!   newline. Identical inputs therefore produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use graspseg_core::annotations::AnnotationSet;
use graspseg_core::image::DEPTH_INVALID;
use graspseg_core::{BinaryMask, CameraIntrinsics, DepthImage, LinkPoint, RgbImage};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Default acceptable depth range in millimeters when loading depth PNGs.
pub const DEFAULT_MAX_DEPTH_MM: f32 = graspseg_core::image::DEFAULT_MAX_DEPTH_MM;

// ---------------------------------------------------------------------------
// PNG readers / writers
// ---------------------------------------------------------------------------

/// Save a color image as an 8-bit RGB PNG.
pub fn save_rgb_png(path: &Path, img: &RgbImage) -> Result<()> {
    ensure_parent(path)?;
    let (h, w) = img.dims();
    let buf: image::RgbImage =
        image::ImageBuffer::from_raw(w as u32, h as u32, img.data().to_vec())
            .expect("buffer length matches dims");
    buf.save(path).with_context(|| format!("writing {}", path.display()))
}

/// Load an 8-bit color PNG (alpha, if present, is dropped).
pub fn load_rgb_png(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).with_context(|| format!("reading {}", path.display()))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    RgbImage::from_data(h as usize, w as usize, rgb.into_raw())
        .map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Save depth as a 16-bit single-channel PNG in millimeters. Values are
/// rounded to the nearest millimeter; invalid pixels write as 0.
pub fn save_depth_png(path: &Path, depth: &DepthImage) -> Result<()> {
    ensure_parent(path)?;
    let (h, w) = depth.dims();
    let raw: Vec<u16> =
        depth.data().iter().map(|&v| v.round().clamp(0.0, 65535.0) as u16).collect();
    let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer length matches dims");
    buf.save(path).with_context(|| format!("writing {}", path.display()))
}

/// Result of reading a depth PNG: the image plus how many samples were
/// beyond `max_range_mm` and got clamped to invalid.
pub struct LoadedDepth {
    pub depth: DepthImage,
    pub clamped: usize,
}

/// Load a 16-bit single-channel depth PNG. Any other bit depth or channel
/// layout is a format error. Samples above `max_range_mm` become invalid
/// pixels and are counted in `clamped` so callers can warn.
pub fn load_depth_png(path: &Path, max_range_mm: f32) -> Result<LoadedDepth> {
    let img = image::open(path).with_context(|| format!("reading {}", path.display()))?;
    let buf = match img {
        image::DynamicImage::ImageLuma16(buf) => buf,
        other => bail!(
            "{}: depth must be a 16-bit single-channel PNG, found {:?}",
            path.display(),
            other.color()
        ),
    };
    let (w, h) = buf.dimensions();
    let mut clamped = 0usize;
    let data: Vec<f32> = buf
        .into_raw()
        .iter()
        .map(|&v| {
            let mm = v as f32;
            if mm > max_range_mm {
                clamped += 1;
                DEPTH_INVALID
            } else {
                mm
            }
        })
        .collect();
    let depth = DepthImage::from_data(h as usize, w as usize, data, Some(max_range_mm))
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(LoadedDepth { depth, clamped })
}

/// Save a binary mask as an 8-bit gray PNG (255 = set, 0 = clear).
pub fn save_mask_png(path: &Path, mask: &BinaryMask) -> Result<()> {
    ensure_parent(path)?;
    let (h, w) = mask.dims();
    let raw: Vec<u8> = mask.data().iter().map(|&b| if b { 255u8 } else { 0 }).collect();
    let buf: image::GrayImage =
        image::ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer length matches dims");
    buf.save(path).with_context(|| format!("writing {}", path.display()))
}

/// Load a mask PNG; any gray value >= 128 counts as set.
pub fn load_mask_png(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path).with_context(|| format!("reading {}", path.display()))?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    let data: Vec<bool> = gray.into_raw().iter().map(|&v| v >= 128).collect();
    BinaryMask::from_data(h as usize, w as usize, data).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Load an RGBA PNG for compositing (missing alpha reads as opaque).
pub fn load_rgba_png(path: &Path) -> Result<graspseg_core::augment::RgbaImage> {
    let img = image::open(path).with_context(|| format!("reading {}", path.display()))?;
    let rgba = img.to_rgba8();
    let (w, h) = rgba.dimensions();
    graspseg_core::augment::RgbaImage::from_data(h as usize, w as usize, rgba.into_raw())
        .map_err(|e| anyhow!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

/// Round to six significant digits; integers and non-finite values pass
/// through untouched.
pub fn round_sig6(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let mag = v.abs().log10().floor() as i32;
    let factor = 10f64.powi(5 - mag);
    (v * factor).round() / factor
}

fn round_value_floats(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            // Leave integral JSON numbers alone; only finite floats round.
            if !n.is_i64() && !n.is_u64() {
                if let Some(f) = n.as_f64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig6(f)) {
                        *n = rounded;
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_value_floats),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_value_floats),
        _ => {}
    }
}

/// Serialize to pretty JSON with sorted keys, 6-significant-digit floats,
/// and a trailing newline, then write atomically-enough for batch jobs.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut val = serde_json::to_value(value)
        .with_context(|| format!("serializing {}", path.display()))?;
    round_value_floats(&mut val);
    let mut text = serde_json::to_string_pretty(&val).expect("Value always serializes");
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Read and deserialize a JSON file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Load an annotation set and verify its internal consistency (unique ids,
/// resolvable references, run lengths matching image sizes).
pub fn load_annotations(path: &Path) -> Result<AnnotationSet> {
    let set: AnnotationSet = read_json(path)?;
    set.validate().map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(set)
}

/// Validate then write an annotation set through the canonical writer.
pub fn save_annotations(path: &Path, set: &AnnotationSet) -> Result<()> {
    set.validate().map_err(|e| anyhow!("{}: {e}", path.display()))?;
    write_json(path, set)
}

// ---------------------------------------------------------------------------
// Frame records
// ---------------------------------------------------------------------------

/// Per-frame sidecar tying the image files to camera geometry. All paths
/// are relative to the dataset root (the directory holding `frames/`).
/// Camera axes: +x right, +y down, +z forward; positions in millimeters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameRecord {
    pub rgb: String,
    pub depth: String,
    pub intrinsics: CameraIntrinsics,
    pub links: Vec<LinkPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_arm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_foreground: Option<String>,
}

/// A frame record plus its identity within the dataset.
#[derive(Debug, Clone)]
pub struct FrameEntry {
    /// File stem of the sidecar, reused to name per-frame outputs.
    pub stem: String,
    pub record: FrameRecord,
}

/// List `root/frames/*.json` sorted by name and check every referenced
/// file exists.
pub fn list_frames(root: &Path) -> Result<Vec<FrameEntry>> {
    let frames_dir = root.join("frames");
    let mut stems: Vec<String> = Vec::new();
    let entries = fs::read_dir(&frames_dir)
        .with_context(|| format!("listing {}", frames_dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    if stems.is_empty() {
        bail!("no frame records under {}", frames_dir.display());
    }
    let mut out = Vec::with_capacity(stems.len());
    for stem in stems {
        let path = frames_dir.join(format!("{stem}.json"));
        let record: FrameRecord = read_json(&path)?;
        for rel in referenced_paths(&record) {
            let target = root.join(rel);
            if !target.is_file() {
                bail!("{}: referenced file {} does not exist", path.display(), target.display());
            }
        }
        out.push(FrameEntry { stem, record });
    }
    Ok(out)
}

fn referenced_paths(record: &FrameRecord) -> Vec<&str> {
    let mut refs = vec![record.rgb.as_str(), record.depth.as_str()];
    for opt in [&record.gt_arm, &record.gt_object, &record.gt_foreground] {
        if let Some(p) = opt.as_deref() {
            refs.push(p);
        }
    }
    refs
}

/// Images referenced by a frame record, decoded.
pub struct LoadedFrame {
    pub rgb: RgbImage,
    pub depth: DepthImage,
    /// Depth samples clamped to invalid because they exceeded the range.
    pub clamped: usize,
}

/// Decode the color and depth images a record points at.
pub fn load_frame_images(root: &Path, record: &FrameRecord, max_range_mm: f32) -> Result<LoadedFrame> {
    let rgb = load_rgb_png(&root.join(&record.rgb))?;
    let LoadedDepth { depth, clamped } = load_depth_png(&root.join(&record.depth), max_range_mm)?;
    if rgb.dims() != depth.dims() {
        bail!(
            "{}: color is {}x{} but depth is {}x{}",
            record.rgb,
            rgb.height(),
            rgb.width(),
            depth.height(),
            depth.width()
        );
    }
    Ok(LoadedFrame { rgb, depth, clamped })
}

// ---------------------------------------------------------------------------
// Provenance
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ProvenanceDoc<'a, P: Serialize> {
    command: &'a str,
    seed: u64,
    params: &'a P,
}

/// Record which command produced a directory, with the seed and the fully
/// resolved parameters, as `provenance.json` at its root.
pub fn write_provenance<P: Serialize>(out_dir: &Path, command: &str, seed: u64, params: &P) -> Result<()> {
    write_json(&out_dir.join("provenance.json"), &ProvenanceDoc { command, seed, params })
}

// ---------------------------------------------------------------------------
// Directory helpers
// ---------------------------------------------------------------------------

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(())
}

/// Zero-padded frame stem used across all per-frame outputs.
pub fn frame_stem(index: usize) -> String {
    format!("{index:06}")
}

/// Sorted stems of the `.png` files directly inside `dir`.
pub fn list_png_stems(dir: &Path) -> Result<Vec<String>> {
    let mut stems = Vec::new();
    let entries = fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("png") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

/// Sorted `.png` paths directly inside `dir`.
pub fn list_png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(list_png_stems(dir)?.into_iter().map(|s| dir.join(format!("{s}.png"))).collect())
}

/// Pair same-named PNG masks from two directories; every prediction stem
/// must have a ground-truth partner.
pub fn paired_mask_stems(pred_dir: &Path, gt_dir: &Path) -> Result<Vec<String>> {
    let pred = list_png_stems(pred_dir)?;
    if pred.is_empty() {
        bail!("no PNG masks under {}", pred_dir.display());
    }
    let gt: std::collections::BTreeSet<String> = list_png_stems(gt_dir)?.into_iter().collect();
    for stem in &pred {
        if !gt.contains(stem) {
            bail!("{}: no matching ground-truth mask in {}", stem, gt_dir.display());
        }
    }
    Ok(pred)
}

/// Optional per-stem class map (stem -> class id) for mask evaluation.
pub type ClassMap = BTreeMap<String, u32>;
