//! Deterministic synthetic RGB-D scenes with ground truth.
//!
//! Stands in for a real robot + depth camera at desk scale: an articulated
//! arm made of capsule primitives, an optional object blob held at the
//! end-effector, a textured background plane, and Gaussian depth noise.
//! Ground truth is rasterized before noise is applied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    BinaryMask, CameraIntrinsics, DepthImage, LinkPoint, RgbImage, DEFAULT_MAX_DEPTH_MM,
};

/// Background plane appearance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BackgroundTexture {
    /// Single color.
    Flat { color: [u8; 3] },
    /// Two-color checkerboard with square tiles of `tile` pixels.
    Checker { a: [u8; 3], b: [u8; 3], tile: usize },
    /// Independent per-pixel grays drawn uniformly from `lo..=hi`.
    Noise { lo: u8, hi: u8 },
}

/// One arm segment: a capsule (line segment with radius) in camera frame,
/// millimeters. Its screen footprint is every pixel within the projected
/// radius of the projected axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapsuleSpec {
    pub a: LinkPoint,
    pub b: LinkPoint,
    pub radius_mm: f64,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectShape {
    Disk,
    Square,
}

/// Object blob held at the end-effector, closer to the camera than the arm
/// so it occludes the gripper the way a grasped object does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub center: LinkPoint,
    pub radius_mm: f64,
    pub shape: ObjectShape,
    pub color: [u8; 3],
}

/// Full scene description; equal specs (same seed) render bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub intrinsics: CameraIntrinsics,
    pub background_depth_mm: f64,
    pub texture: BackgroundTexture,
    pub arm: Vec<CapsuleSpec>,
    /// Link points sampled evenly along each capsule axis.
    pub links_per_capsule: usize,
    pub object: Option<ObjectSpec>,
    /// Standard deviation of the additive depth noise, millimeters.
    pub noise_sigma_mm: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidScene("empty image".into()));
        }
        if self.arm.is_empty() {
            return Err(Error::InvalidScene("arm needs at least one capsule".into()));
        }
        if self.links_per_capsule == 0 {
            return Err(Error::InvalidScene("need at least one link per capsule".into()));
        }
        if !(self.background_depth_mm > 0.0)
            || self.background_depth_mm > DEFAULT_MAX_DEPTH_MM as f64
        {
            return Err(Error::InvalidScene(format!(
                "background depth {} mm outside sensor range",
                self.background_depth_mm
            )));
        }
        if !(self.noise_sigma_mm >= 0.0) {
            return Err(Error::InvalidScene("noise sigma must be >= 0".into()));
        }
        let check_depth = |z: f64, what: &str| -> Result<()> {
            if !(z > 0.0) || z > DEFAULT_MAX_DEPTH_MM as f64 {
                return Err(Error::InvalidScene(format!("{what} depth {z} mm outside sensor range")));
            }
            if z >= self.background_depth_mm {
                return Err(Error::InvalidScene(format!(
                    "{what} depth {z} mm not in front of background at {} mm",
                    self.background_depth_mm
                )));
            }
            Ok(())
        };
        for (i, cap) in self.arm.iter().enumerate() {
            if !(cap.radius_mm > 0.0) {
                return Err(Error::InvalidScene(format!("capsule {i} radius must be positive")));
            }
            check_depth(cap.a.z, "capsule")?;
            check_depth(cap.b.z, "capsule")?;
        }
        if let Some(obj) = &self.object {
            if !(obj.radius_mm > 0.0) {
                return Err(Error::InvalidScene("object radius must be positive".into()));
            }
            check_depth(obj.center.z, "object")?;
        }
        Ok(())
    }
}

/// Rendered scene plus ground truth. Masks are computed from the noise-free
/// geometry; `gt_arm_mask` and `gt_object_mask` are disjoint because the
/// nearer primitive wins each pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub rgb: RgbImage,
    pub depth: DepthImage,
    /// Kinematic link points in camera frame, millimeters.
    pub links: Vec<LinkPoint>,
    pub gt_arm_mask: BinaryMask,
    pub gt_object_mask: BinaryMask,
    /// Union of arm and object.
    pub gt_foreground_mask: BinaryMask,
}

#[derive(Clone, Copy, PartialEq)]
enum Owner {
    Background,
    Arm,
    Object,
}

fn project_f(p: &LinkPoint, k: &CameraIntrinsics) -> (f64, f64) {
    (k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy)
}

/// Screen-space footprint test for a capsule at pixel center `(u, v)`.
/// Returns the interpolated depth when the pixel is covered.
fn capsule_hit(cap: &CapsuleSpec, k: &CameraIntrinsics, u: f64, v: f64) -> Option<f64> {
    let (ua, va) = project_f(&cap.a, k);
    let (ub, vb) = project_f(&cap.b, k);
    let (dx, dy) = (ub - ua, vb - va);
    let len2 = dx * dx + dy * dy;
    let t = if len2 <= f64::EPSILON {
        0.0
    } else {
        (((u - ua) * dx + (v - va) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ua + t * dx, va + t * dy);
    let dist = ((u - cx).powi(2) + (v - cy).powi(2)).sqrt();
    let z = cap.a.z + t * (cap.b.z - cap.a.z);
    let radius_px = cap.radius_mm * k.fx / z;
    (dist <= radius_px).then_some(z)
}

fn object_hit(obj: &ObjectSpec, k: &CameraIntrinsics, u: f64, v: f64) -> Option<f64> {
    let (uo, vo) = project_f(&obj.center, k);
    let radius_px = obj.radius_mm * k.fx / obj.center.z;
    let (du, dv) = (u - uo, v - vo);
    let inside = match obj.shape {
        ObjectShape::Disk => (du * du + dv * dv).sqrt() <= radius_px,
        ObjectShape::Square => du.abs() <= radius_px && dv.abs() <= radius_px,
    };
    inside.then_some(obj.center.z)
}

/// Standard normal via Box-Muller; two uniforms per draw keeps the stream
/// layout independent of rejection behavior.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn background_color(texture: &BackgroundTexture, r: usize, c: usize, rng: &mut ChaCha8Rng) -> [u8; 3] {
    match *texture {
        BackgroundTexture::Flat { color } => color,
        BackgroundTexture::Checker { a, b, tile } => {
            let tile = tile.max(1);
            if (r / tile + c / tile) % 2 == 0 {
                a
            } else {
                b
            }
        }
        BackgroundTexture::Noise { lo, hi } => {
            let g = rng.random_range(lo.min(hi)..=lo.max(hi));
            [g, g, g]
        }
    }
}

/// Rasterize the scene. Per pixel the nearest covering primitive wins;
/// ground truth reflects that noise-free ownership, then Gaussian noise is
/// added to the depth and clamped into the valid sensor range.
pub fn generate_scene(spec: &SceneSpec) -> Result<SceneBundle> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let k = &spec.intrinsics;

    // Two independent deterministic streams so texture and depth noise do
    // not perturb each other when parameters change.
    let mut tex_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut owners = vec![Owner::Background; h * w];
    let mut clean_depth = vec![spec.background_depth_mm; h * w];
    let mut rgb = RgbImage::filled(h, w, [0, 0, 0]);
    for r in 0..h {
        for c in 0..w {
            let (u, v) = (c as f64, r as f64);
            let idx = r * w + c;
            let mut color = background_color(&spec.texture, r, c, &mut tex_rng);
            for cap in &spec.arm {
                if let Some(z) = capsule_hit(cap, k, u, v) {
                    if z < clean_depth[idx] {
                        clean_depth[idx] = z;
                        owners[idx] = Owner::Arm;
                        color = cap.color;
                    }
                }
            }
            if let Some(obj) = &spec.object {
                if let Some(z) = object_hit(obj, k, u, v) {
                    if z < clean_depth[idx] {
                        clean_depth[idx] = z;
                        owners[idx] = Owner::Object;
                        color = obj.color;
                    }
                }
            }
            rgb.set_px(r, c, color);
        }
    }

    let gt_arm_mask = BinaryMask::from_fn(h, w, |r, c| owners[r * w + c] == Owner::Arm);
    let gt_object_mask = BinaryMask::from_fn(h, w, |r, c| owners[r * w + c] == Owner::Object);
    let gt_foreground_mask = gt_arm_mask.union(&gt_object_mask);

    let mut depth_data = Vec::with_capacity(h * w);
    for &z in &clean_depth {
        let noisy = if spec.noise_sigma_mm > 0.0 {
            z + spec.noise_sigma_mm * standard_normal(&mut noise_rng)
        } else {
            z
        };
        depth_data.push(noisy.clamp(1.0, DEFAULT_MAX_DEPTH_MM as f64) as f32);
    }
    let depth = DepthImage::from_data(h, w, depth_data, None)?;

    let mut links = Vec::new();
    for cap in &spec.arm {
        for j in 0..spec.links_per_capsule {
            let t = (j as f64 + 0.5) / spec.links_per_capsule as f64;
            links.push(LinkPoint::new(
                cap.a.x + t * (cap.b.x - cap.a.x),
                cap.a.y + t * (cap.b.y - cap.a.y),
                cap.a.z + t * (cap.b.z - cap.a.z),
            ));
        }
    }

    Ok(SceneBundle { rgb, depth, links, gt_arm_mask, gt_object_mask, gt_foreground_mask })
}

/// Knobs for [`template_scene`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateOptions {
    pub height: usize,
    pub width: usize,
    pub with_object: bool,
    /// `None` cycles through saturated hues by scene index.
    pub object_color: Option<[u8; 3]>,
    pub noise_sigma_mm: f64,
}

impl Default for TemplateOptions {
    fn default() -> Self {
        Self { height: 480, width: 640, with_object: false, object_color: None, noise_sigma_mm: 0.0 }
    }
}

const HUES: [[u8; 3]; 6] = [
    [200, 40, 40],
    [40, 170, 60],
    [50, 70, 210],
    [210, 180, 40],
    [180, 50, 180],
    [40, 180, 190],
];

fn pixel_to_camera(u: f64, v: f64, z: f64, k: &CameraIntrinsics) -> LinkPoint {
    LinkPoint::new((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z)
}

/// Deterministic family of varied scenes: a three-segment gray arm enters
/// from an image edge and ends near the center, optionally holding an
/// object blob slightly closer to the camera. `index` seeds both the pose
/// sampling and the render noise.
pub fn template_scene(index: u64, opts: &TemplateOptions) -> SceneSpec {
    let (h, w) = (opts.height, opts.width);
    let k = CameraIntrinsics::new(
        0.82 * w as f64,
        0.82 * w as f64,
        (w as f64 - 1.0) / 2.0,
        (h as f64 - 1.0) / 2.0,
    )
    .expect("positive focal lengths");
    let mut rng = ChaCha8Rng::seed_from_u64(index.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));

    let background_depth = rng.random_range(2000.0..2800.0);
    let z0 = rng.random_range(600.0..750.0);
    let z_step = rng.random_range(-40.0..-10.0);

    // Waypoints in pixel space: edge -> intermediate -> near center.
    let side = index % 2 == 0;
    let u0 = if side { 0.04 * w as f64 } else { 0.96 * w as f64 };
    let v0 = rng.random_range(0.25 * h as f64..0.75 * h as f64);
    let u_end = w as f64 / 2.0 + rng.random_range(-0.04 * w as f64..0.04 * w as f64);
    let v_end = h as f64 / 2.0 + rng.random_range(-0.04 * h as f64..0.04 * h as f64);
    let u_mid = (u0 + u_end) / 2.0;
    let v_mid = (v0 + v_end) / 2.0 + rng.random_range(-0.10 * h as f64..0.10 * h as f64);

    let radius = rng.random_range(38.0..48.0);
    let grays: [u8; 3] = {
        let g = rng.random_range(175u8..=215);
        [g, g, g]
    };
    let zs = [z0, z0 + z_step, z0 + 2.0 * z_step];
    let points = [
        pixel_to_camera(u0, v0, zs[0], &k),
        pixel_to_camera(u_mid, v_mid, zs[1], &k),
        pixel_to_camera(u_end, v_end, zs[2], &k),
    ];
    // Split the two path legs into three capsules of slightly varied grays.
    let mids = pixel_to_camera(
        (u_mid + u_end) / 2.0,
        (v_mid + v_end) / 2.0,
        (zs[1] + zs[2]) / 2.0,
        &k,
    );
    let shade = |g: [u8; 3], d: i16| -> [u8; 3] {
        let v = (g[0] as i16 + d).clamp(0, 255) as u8;
        [v, v, v]
    };
    let arm = vec![
        CapsuleSpec { a: points[0], b: points[1], radius_mm: radius, color: grays },
        CapsuleSpec { a: points[1], b: mids, radius_mm: radius * 0.9, color: shade(grays, -12) },
        CapsuleSpec { a: mids, b: points[2], radius_mm: radius * 0.8, color: shade(grays, 12) },
    ];

    let texture = match index % 3 {
        0 => BackgroundTexture::Flat { color: [96, 118, 110] },
        1 => BackgroundTexture::Checker { a: [70, 90, 120], b: [120, 130, 90], tile: 24 },
        _ => BackgroundTexture::Noise { lo: 20, hi: 90 },
    };

    let object = opts.with_object.then(|| {
        let z_obj = zs[2] - 170.0;
        let color = opts.object_color.unwrap_or(HUES[(index % HUES.len() as u64) as usize]);
        let shape = if index % 2 == 0 { ObjectShape::Disk } else { ObjectShape::Square };
        ObjectSpec {
            center: pixel_to_camera(u_end, v_end, z_obj, &k),
            radius_mm: rng.random_range(50.0..62.0),
            shape,
            color,
        }
    });

    SceneSpec {
        height: h,
        width: w,
        intrinsics: k,
        background_depth_mm: background_depth,
        texture,
        arm,
        links_per_capsule: 4,
        object,
        noise_sigma_mm: opts.noise_sigma_mm,
        seed: index,
    }
}
