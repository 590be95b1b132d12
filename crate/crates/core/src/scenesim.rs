//! Deterministic synthetic scenes: textured fronto-parallel billboards over a
//! background plane, rendered at three instants `t-1`, `t`, `t+1`.
//!
//! World coordinates coincide with the frame-`t` camera. `ego_motion` maps
//! frame-`t` camera coordinates to frame-`t+1` coordinates and the camera moves
//! uniformly, so the pose to `t-1` is its inverse. Objects translate with
//! constant velocity.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pose};
use crate::grid::{DepthMap, Grid, Image, PixelMask, Rgb};
use crate::temporal::{Instance, InstanceSet};

pub const DEFAULT_FRAME_INTERVAL: f64 = 0.1;

fn default_frame_interval() -> f64 {
    DEFAULT_FRAME_INTERVAL
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Background {
    /// Fronto-parallel plane at `depth` meters.
    Plane { depth: f64 },
    /// Plane tilted about the camera x axis: `far` meters at the top image row, `near` at the bottom.
    Ramp { near: f64, far: f64 },
}

impl Background {
    fn min_depth(&self) -> f64 {
        match *self {
            Background::Plane { depth } => depth,
            Background::Ramp { near, far } => near.min(far),
        }
    }

    fn mean_depth(&self) -> f64 {
        match *self {
            Background::Plane { depth } => depth,
            Background::Ramp { near, far } => 0.5 * (near + far),
        }
    }

    /// World plane `n . X = c`.
    fn plane(&self, k: &Intrinsics) -> (Vector3<f64>, f64) {
        match *self {
            Background::Plane { depth } => (Vector3::new(0.0, 0.0, 1.0), depth),
            Background::Ramp { near, far } => {
                // z = a + b y  passes through depth `far` on row 0 and `near` on the last row
                let y0 = -k.cy / k.fy;
                let y1 = (k.height as f64 - 1.0 - k.cy) / k.fy;
                let b = (far - near) / (far * y0 - near * y1);
                let a = far * (1.0 - b * y0);
                (Vector3::new(0.0, -b, 1.0), a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Billboard {
    pub class_id: u32,
    /// Center at time `t`, meters, world frame.
    pub center: [f64; 3],
    /// Width and height in meters.
    pub extent: [f64; 2],
    /// Meters per second.
    #[serde(default)]
    pub velocity: [f64; 3],
    pub texture: u32,
}

impl Billboard {
    fn center_at(&self, tau: f64) -> [f64; 3] {
        [
            self.center[0] + self.velocity[0] * tau,
            self.center[1] + self.velocity[1] * tau,
            self.center[2] + self.velocity[2] * tau,
        ]
    }

    pub fn is_moving(&self) -> bool {
        self.velocity.iter().any(|v| *v != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub seed: u64,
    pub intrinsics: Intrinsics,
    pub background: Background,
    #[serde(default)]
    pub objects: Vec<Billboard>,
    /// `T_{t -> t+1}`; the same motion is assumed between `t-1` and `t`.
    #[serde(default)]
    pub ego_motion: Pose,
    #[serde(default = "default_frame_interval")]
    pub frame_interval: f64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if !(self.frame_interval > 0.0) {
            return Err(Error::contract(format!(
                "frame_interval must be positive, got {}",
                self.frame_interval
            )));
        }
        if let Background::Ramp { near, far } = self.background {
            if !(near > 0.0 && far > 0.0) {
                return Err(Error::contract("ramp depths must be positive"));
            }
        }
        let bg = self.background.min_depth();
        if !(bg > 0.0) {
            return Err(Error::contract(format!("background depth must be positive, got {bg}")));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.extent[0] > 0.0 && o.extent[1] > 0.0) {
                return Err(Error::contract(format!("object {i} has a non-positive extent")));
            }
            for f in [-1.0, 0.0, 1.0] {
                let z = o.center_at(f * self.frame_interval)[2];
                if !(z > 0.0 && z < bg) {
                    return Err(Error::contract(format!("object {i} depth {z} must lie in (0, {bg})")));
                }
            }
        }
        Ok(())
    }

    pub fn pose_prev(&self) -> Pose {
        self.ego_motion.inverse()
    }

    pub fn pose_next(&self) -> Pose {
        self.ego_motion
    }
}

/// Band-limited procedural texture over surface coordinates in meters.
#[derive(Debug, Clone)]
struct Texture {
    base: Rgb,
    waves: Vec<Wave>,
}

#[derive(Debug, Clone)]
struct Wave {
    k: [f64; 2],
    phase: f64,
    amp: Rgb,
}

impl Texture {
    /// `meters_per_pixel` sizes the wavelengths to the rendered scale.
    fn generate(seed: u64, id: u32, meters_per_pixel: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (u64::from(id) + 1).wrapping_mul(0xD1B5_4A32_D192_ED03),
        );
        let base = [
            rng.gen_range(0.4..0.6),
            rng.gen_range(0.4..0.6),
            rng.gen_range(0.4..0.6),
        ];
        let mut waves = Vec::new();
        let mut push = |rng: &mut ChaCha8Rng, lo: f64, hi: f64, amp_lo: f64, amp_hi: f64| {
            let wavelength = rng.gen_range(lo..hi) * meters_per_pixel;
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let mag = 2.0 * std::f64::consts::PI / wavelength;
            waves.push(Wave {
                k: [mag * theta.cos(), mag * theta.sin()],
                phase: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
                amp: [
                    rng.gen_range(amp_lo..amp_hi),
                    rng.gen_range(amp_lo..amp_hi),
                    rng.gen_range(amp_lo..amp_hi),
                ],
            });
        };
        for _ in 0..3 {
            push(&mut rng, 12.0, 32.0, 0.05, 0.12);
        }
        for _ in 0..2 {
            push(&mut rng, 7.0, 10.0, 0.005, 0.02);
        }
        Self { base, waves }
    }

    fn eval(&self, a: f64, b: f64) -> Rgb {
        let mut c = self.base;
        for w in &self.waves {
            let s = (w.k[0] * a + w.k[1] * b + w.phase).sin();
            for ch in 0..3 {
                c[ch] += w.amp[ch] * s;
            }
        }
        c.map(|v| v.clamp(0.0, 1.0))
    }
}

/// Rendered frames `t-1`, `t`, `t+1` with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub config: SceneConfig,
    /// Indexed `[t-1, t, t+1]`.
    pub frames: [Image; 3],
    pub depths: [DepthMap; 3],
    pub instances: [InstanceSet; 3],
    /// `T_{t -> t-1}`.
    pub pose_prev: Pose,
    /// `T_{t -> t+1}`.
    pub pose_next: Pose,
    /// Per object: `(dh, dv)` pixels over `t-1 -> t+1`, `None` when absent from `t-1` or `t+1`.
    pub gt_displacements: Vec<Option<(f64, f64)>>,
}

impl Triplet {
    pub fn intrinsics(&self) -> &Intrinsics {
        &self.config.intrinsics
    }

    pub fn prev(&self) -> &Image {
        &self.frames[0]
    }

    pub fn current(&self) -> &Image {
        &self.frames[1]
    }

    pub fn next(&self) -> &Image {
        &self.frames[2]
    }

    pub fn gt_depth(&self) -> &DepthMap {
        &self.depths[1]
    }

    /// Union of frame-`t` masks of moving objects.
    pub fn moving_mask(&self) -> PixelMask {
        let (w, h) = self.gt_depth().dims();
        let mut out = Grid::filled(w, h, false);
        for inst in self.instances[1].iter() {
            if self.config.objects[inst.id].is_moving() {
                for (o, m) in out.as_mut_slice().iter_mut().zip(inst.mask.as_slice()) {
                    *o |= *m;
                }
            }
        }
        out
    }

    /// Pixels at least `margin` away from the border and from any frame-`t` depth discontinuity.
    pub fn interior_mask(&self, margin: usize) -> PixelMask {
        let d = self.gt_depth();
        let (w, h) = d.dims();
        let edge = Grid::from_fn(w, h, |x, y| {
            let c = *d.get(x, y);
            let jump = |x2: usize, y2: usize| (d.get(x2, y2) - c).abs() > 0.05 * c;
            (x + 1 < w && jump(x + 1, y)) || (y + 1 < h && jump(x, y + 1))
        });
        let m = margin as isize;
        Grid::from_fn(w, h, |x, y| {
            if x < margin || y < margin || x + margin >= w || y + margin >= h {
                return false;
            }
            for dy in -m - 1..=m {
                for dx in -m - 1..=m {
                    let (xx, yy) = (x as isize + dx, y as isize + dy);
                    if xx >= 0
                        && yy >= 0
                        && (xx as usize) < w
                        && (yy as usize) < h
                        && *edge.get(xx as usize, yy as usize)
                    {
                        return false;
                    }
                }
            }
            true
        })
    }
}

struct FrameRender {
    image: Image,
    depth: DepthMap,
    masks: Vec<PixelMask>,
}

fn render_frame(cfg: &SceneConfig, textures: &[Texture], bg_texture: &Texture, frame: i32) -> Result<FrameRender> {
    let k = &cfg.intrinsics;
    let (w, h) = (k.width, k.height);
    let tau = frame as f64 * cfg.frame_interval;
    let pose = match frame {
        0 => Pose::identity(),
        f => cfg.ego_motion.power(f),
    };
    let rt = pose.rotation_matrix().transpose();
    let origin = -(rt * pose.translation_vector());
    let (bg_n, bg_c) = cfg.background.plane(k);
    let centers: Vec<[f64; 3]> = cfg.objects.iter().map(|o| o.center_at(tau)).collect();

    let mut pixels = Vec::with_capacity(w * h);
    let mut depth = Vec::with_capacity(w * h);
    let mut labels = vec![usize::MAX; w * h];
    for y in 0..h {
        for x in 0..w {
            let ray_cam = k.ray(x as f64, y as f64);
            let ray = rt * ray_cam;
            let mut best: Option<(f64, usize)> = None;
            for (i, (o, c)) in cfg.objects.iter().zip(&centers).enumerate() {
                if ray.z.abs() < 1e-12 {
                    continue;
                }
                let s = (c[2] - origin.z) / ray.z;
                if !(s > 0.0) {
                    continue;
                }
                let p = origin + ray * s;
                let (dx, dy) = (p.x - c[0], p.y - c[1]);
                let inside = dx >= -0.5 * o.extent[0]
                    && dx < 0.5 * o.extent[0]
                    && dy >= -0.5 * o.extent[1]
                    && dy < 0.5 * o.extent[1];
                if !inside {
                    continue;
                }
                match best {
                    Some((bs, bi)) if s == bs => {
                        return Err(Error::contract(format!(
                            "objects {bi} and {i} overlap at identical depth"
                        )));
                    }
                    Some((bs, _)) if bs < s => {}
                    _ => best = Some((s, i)),
                }
            }
            let (s, rgb) = match best {
                Some((s, i)) => {
                    let p = origin + ray * s;
                    labels[y * w + x] = i;
                    (s, textures[i].eval(p.x - centers[i][0], p.y - centers[i][1]))
                }
                None => {
                    let denom = bg_n.dot(&ray);
                    let s = (bg_c - bg_n.dot(&origin)) / denom;
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::contract(format!(
                            "background not visible from frame {frame} at pixel ({x}, {y})"
                        )));
                    }
                    let p = origin + ray * s;
                    (s, bg_texture.eval(p.x, p.y))
                }
            };
            pixels.push(rgb);
            depth.push(s);
        }
    }
    let masks = (0..cfg.objects.len())
        .map(|i| Grid::from_vec(w, h, labels.iter().map(|l| *l == i).collect()).expect("sized"))
        .collect();
    Ok(FrameRender {
        image: Image::new(Grid::from_vec(w, h, pixels)?),
        depth: Grid::from_vec(w, h, depth)?,
        masks,
    })
}

/// Projected box `[left, right, top, bottom]` of an object at time `tau`, in frame-`t` pixels.
fn projected_box(k: &Intrinsics, o: &Billboard, tau: f64) -> [f64; 4] {
    let c = o.center_at(tau);
    let (hw, hh) = (0.5 * o.extent[0], 0.5 * o.extent[1]);
    [
        k.fx * (c[0] - hw) / c[2] + k.cx,
        k.fx * (c[0] + hw) / c[2] + k.cx,
        k.fy * (c[1] - hh) / c[2] + k.cy,
        k.fy * (c[1] + hh) / c[2] + k.cy,
    ]
}

pub fn render_triplet(cfg: &SceneConfig) -> Result<Triplet> {
    cfg.validate()?;
    let k = &cfg.intrinsics;
    let textures: Vec<Texture> = cfg
        .objects
        .iter()
        .map(|o| Texture::generate(cfg.seed, o.texture, o.center[2] / k.fx))
        .collect();
    let bg_texture = Texture::generate(cfg.seed, u32::MAX, cfg.background.mean_depth() / k.fx);

    let renders = [
        render_frame(cfg, &textures, &bg_texture, -1)?,
        render_frame(cfg, &textures, &bg_texture, 0)?,
        render_frame(cfg, &textures, &bg_texture, 1)?,
    ];
    let instances = renders.each_ref().map(|r| {
        InstanceSet::new(
            r.masks
                .iter()
                .enumerate()
                .filter_map(|(i, m)| Instance::from_mask(i, cfg.objects[i].class_id, m.clone()).ok())
                .collect(),
        )
    });
    let gt_displacements = cfg
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let present = instances[0].get(i).is_some() && instances[2].get(i).is_some();
            present.then(|| {
                let a = projected_box(k, o, -cfg.frame_interval);
                let b = projected_box(k, o, cfg.frame_interval);
                (
                    0.5 * ((b[0] + b[1]) - (a[0] + a[1])),
                    0.5 * ((b[2] + b[3]) - (a[2] + a[3])),
                )
            })
        })
        .collect();
    let [r0, r1, r2] = renders;
    Ok(Triplet {
        config: cfg.clone(),
        frames: [r0.image, r1.image, r2.image],
        depths: [r0.depth, r1.depth, r2.depth],
        instances,
        pose_prev: cfg.pose_prev(),
        pose_next: cfg.pose_next(),
        gt_displacements,
    })
}

/// Ground-truth `(dh, dv)` pixel displacement of an object's projected box from `t-1` to `t+1`.
pub fn gt_displacement(tri: &Triplet, object_id: usize) -> Result<(f64, f64)> {
    tri.gt_displacements
        .get(object_id)
        .copied()
        .flatten()
        .ok_or_else(|| Error::Lookup(format!("object {object_id} is not visible in both t-1 and t+1")))
}

/// Seeded scene families used by the examples, tests and the command-line tool.
pub mod presets {
    use super::*;

    pub fn intrinsics() -> Intrinsics {
        Intrinsics::new(90.0, 90.0, 55.5, 39.5, 112, 80).expect("valid intrinsics")
    }

    fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0xA076_1D64_78BD_642F))
    }

    fn ego(rng: &mut ChaCha8Rng) -> Pose {
        Pose::new(
            [
                rng.gen_range(-0.004..0.004),
                rng.gen_range(-0.004..0.004),
                rng.gen_range(-0.003..0.003),
            ],
            [
                rng.gen_range(-0.1..0.1),
                if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.35..0.5),
                rng.gen_range(0.3..0.6),
            ],
        )
    }

    fn background(rng: &mut ChaCha8Rng) -> Background {
        if rng.gen_bool(0.5) {
            Background::Plane {
                depth: rng.gen_range(22.0..30.0),
            }
        } else {
            let near = rng.gen_range(16.0..22.0);
            Background::Ramp {
                near,
                far: near + rng.gen_range(6.0..14.0),
            }
        }
    }

    /// A billboard whose box stays inside the image at all three instants.
    fn placed_billboard(rng: &mut ChaCha8Rng, k: &Intrinsics, texture: u32, speed: f64, dt: f64) -> Billboard {
        let margin = 4.0;
        loop {
            let z = rng.gen_range(8.0..13.0);
            let extent = [rng.gen_range(2.2..3.2), rng.gen_range(1.6..2.4)];
            let u = rng.gen_range(0.3..0.7) * k.width as f64;
            let v = rng.gen_range(0.35..0.65) * k.height as f64;
            let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let vy = rng.gen_range(-0.15..0.15) * speed;
            let bb = Billboard {
                class_id: rng.gen_range(1..4),
                center: [(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z],
                extent,
                velocity: [dir * speed, vy, 0.0],
                texture,
            };
            let fits = [-dt, 0.0, dt].iter().all(|tau| {
                let b = projected_box(k, &bb, *tau);
                b[0] >= margin
                    && b[1] <= k.width as f64 - 1.0 - margin
                    && b[2] >= margin
                    && b[3] <= k.height as f64 - 1.0 - margin
            });
            if fits {
                return bb;
            }
        }
    }

    /// Camera translating mainly vertically, with some forward motion, past a textured background and one static billboard.
    pub fn static_scene(seed: u64) -> SceneConfig {
        let mut rng = rng(seed, 1);
        let k = intrinsics();
        let ego_motion = ego(&mut rng);
        let background = background(&mut rng);
        let objects = vec![placed_billboard(&mut rng, &k, 1, 0.0, DEFAULT_FRAME_INTERVAL)];
        SceneConfig {
            seed,
            intrinsics: k,
            background,
            objects,
            ego_motion,
            frame_interval: DEFAULT_FRAME_INTERVAL,
        }
    }

    /// Like [`static_scene`] but the billboard moves laterally at 5-9 m/s.
    pub fn dynamic_scene(seed: u64) -> SceneConfig {
        let mut rng = rng(seed, 2);
        let k = intrinsics();
        let ego_motion = ego(&mut rng);
        let background = background(&mut rng);
        let speed = rng.gen_range(5.0..9.0);
        let objects = vec![placed_billboard(&mut rng, &k, 1, speed, DEFAULT_FRAME_INTERVAL)];
        SceneConfig {
            seed,
            intrinsics: k,
            background,
            objects,
            ego_motion,
            frame_interval: DEFAULT_FRAME_INTERVAL,
        }
    }

    /// Static camera, one moving billboard; warps are the identity so raw masks are directly comparable.
    pub fn still_camera_scene(seed: u64) -> SceneConfig {
        let mut cfg = dynamic_scene(seed);
        cfg.ego_motion = Pose::identity();
        cfg
    }
}
