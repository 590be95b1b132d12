//! Pinhole reprojection between frames, bilinear sampling and inverse warping.
//!
//! Pixel centers sit on integer coordinates. A pixel of the target frame with
//! depth `d` is lifted to `d * K^-1 p`, moved by the relative pose and
//! re-projected; the source image is then sampled bilinearly at the result.
//! Samples that leave `[0, W-1] x [0, H-1]` are reported invalid rather than
//! clamped to the border.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DepthMap, Grid, Image, Rgb};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cy >= 0.0
            && self.cx < self.width as f64
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!("invalid intrinsics {self:?}")))
        }
    }

    /// Normalized viewing ray (z = 1) through pixel `(u, v)`.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    #[inline]
    pub fn in_bounds(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }
}

/// Rigid transform `x' = R x + t` with `R = Rx(a) * Ry(b) * Rz(c)` (intrinsic XYZ Euler angles).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
}

impl Pose {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_translation(t: [f64; 3]) -> Self {
        Self {
            rotation: [0.0; 3],
            translation: t,
        }
    }

    pub fn new(rotation: [f64; 3], translation: [f64; 3]) -> Self {
        Self { rotation, translation }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == [0.0; 3] && self.translation == [0.0; 3]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let [a, b, c] = self.rotation;
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let (sc, cc) = c.sin_cos();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, ca, -sa, 0.0, sa, ca);
        let ry = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
        let rz = Matrix3::new(cc, -sc, 0.0, sc, cc, 0.0, 0.0, 0.0, 1.0);
        rx * ry * rz
    }

    pub fn translation_vector(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }

    pub fn from_parts(r: &Matrix3<f64>, t: &Vector3<f64>) -> Self {
        let b = r[(0, 2)].clamp(-1.0, 1.0).asin();
        let a = (-r[(1, 2)]).atan2(r[(2, 2)]);
        let c = (-r[(0, 1)]).atan2(r[(0, 0)]);
        Self {
            rotation: [a, b, c],
            translation: [t.x, t.y, t.z],
        }
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * p + self.translation_vector()
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        let r1 = self.rotation_matrix();
        let r2 = other.rotation_matrix();
        let t = r1 * other.translation_vector() + self.translation_vector();
        Pose::from_parts(&(r1 * r2), &t)
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation_matrix().transpose();
        let t = -(rt * self.translation_vector());
        Pose::from_parts(&rt, &t)
    }

    /// `self` applied `n` times (negative `n` uses the inverse).
    pub fn power(&self, n: i32) -> Pose {
        let base = if n < 0 { self.inverse() } else { *self };
        (0..n.unsigned_abs()).fold(Pose::identity(), |acc, _| base.compose(&acc))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Result of reprojecting one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub coord: PixelCoord,
    /// Depth of the transformed point in the destination camera.
    pub depth: f64,
    /// False when the point is behind the camera or lands outside the image.
    pub valid: bool,
}

/// Precomputed `R`, `t` and `K` for repeated per-pixel reprojection.
#[derive(Debug, Clone)]
pub(crate) struct Projector {
    k: Intrinsics,
    r: Matrix3<f64>,
    t: Vector3<f64>,
    identity: bool,
}

/// Projected location with its derivative with respect to the source depth.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ProjectedPixel {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub du_dd: f64,
    pub dv_dd: f64,
}

impl Projector {
    pub fn new(k: &Intrinsics, pose: &Pose) -> Self {
        Self {
            k: *k,
            r: pose.rotation_matrix(),
            t: pose.translation_vector(),
            identity: pose.is_identity(),
        }
    }

    /// Projects without bounds checks; `None` when the point ends behind the camera.
    #[inline]
    pub fn project(&self, u: f64, v: f64, depth: f64) -> Option<ProjectedPixel> {
        if self.identity {
            return Some(ProjectedPixel {
                u,
                v,
                z: depth,
                du_dd: 0.0,
                dv_dd: 0.0,
            });
        }
        let ray = self.k.ray(u, v);
        let a = self.r * ray;
        let p = a * depth + self.t;
        if !(p.z > 0.0) {
            return None;
        }
        let inv_z = 1.0 / p.z;
        let un = p.x * inv_z;
        let vn = p.y * inv_z;
        // d(x/z)/dd with x = a.x d + t.x, z = a.z d + t.z
        let dxn = (a.x * p.z - p.x * a.z) * inv_z * inv_z;
        let dyn_ = (a.y * p.z - p.y * a.z) * inv_z * inv_z;
        Some(ProjectedPixel {
            u: self.k.fx * un + self.k.cx,
            v: self.k.fy * vn + self.k.cy,
            z: p.z,
            du_dd: self.k.fx * dxn,
            dv_dd: self.k.fy * dyn_,
        })
    }
}

/// Reprojects pixel `p` of the source view with metric `depth` through `pose`: `p' ~ K T D K^-1 p`.
pub fn project_pixel(p: PixelCoord, depth: f64, k: &Intrinsics, pose: &Pose) -> Result<Projection> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::domain(format!("depth must be positive, got {depth}")));
    }
    let proj = Projector::new(k, pose);
    Ok(match proj.project(p.u, p.v, depth) {
        Some(q) => Projection {
            coord: PixelCoord::new(q.u, q.v),
            depth: q.z,
            valid: q.u.is_finite() && q.v.is_finite() && k.in_bounds(q.u, q.v),
        },
        None => Projection {
            coord: PixelCoord::new(f64::NAN, f64::NAN),
            depth: proj_depth(k, pose, p, depth),
            valid: false,
        },
    })
}

fn proj_depth(k: &Intrinsics, pose: &Pose, p: PixelCoord, depth: f64) -> f64 {
    pose.apply(&(k.ray(p.u, p.v) * depth)).z
}

/// The (up to) four raster cells contributing to a bilinear sample, with their weights.
///
/// Cells with zero weight are dropped, so integer coordinates yield a single tap
/// of weight one.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Taps {
    pub idx: [usize; 4],
    pub w: [f64; 4],
    pub n: usize,
    /// Corner indices `[x0y0, x1y0, x0y1, x1y1]` and fractional offsets, for derivatives.
    pub corners: [usize; 4],
    pub fx: f64,
    pub fy: f64,
}

impl Taps {
    #[inline]
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n).map(move |i| (self.idx[i], self.w[i]))
    }
}

#[inline]
pub(crate) fn bilinear_taps(width: usize, height: usize, u: f64, v: f64) -> Option<Taps> {
    if !(u >= 0.0 && v >= 0.0 && u <= (width - 1) as f64 && v <= (height - 1) as f64) {
        return None;
    }
    let (x0, fx) = split_coord(u, width);
    let (y0, fy) = split_coord(v, height);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let corners = [y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1];
    let weights = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
    let mut taps = Taps {
        idx: [0; 4],
        w: [0.0; 4],
        n: 0,
        corners,
        fx,
        fy,
    };
    for (c, w) in corners.iter().zip(weights) {
        if w > 0.0 {
            taps.idx[taps.n] = *c;
            taps.w[taps.n] = w;
            taps.n += 1;
        }
    }
    Some(taps)
}

#[inline]
fn split_coord(c: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    // callers guarantee c >= 0, so truncation is floor
    let mut i = c as usize;
    if i >= n - 1 {
        i = n - 2;
    }
    (i, c - i as f64)
}

/// Bilinear sample of `img` at `p`; `None` when out of bounds or any contributing pixel is invalid.
pub fn bilinear_sample(img: &Image, p: PixelCoord) -> Option<Rgb> {
    let taps = bilinear_taps(img.width(), img.height(), p.u, p.v)?;
    sample_taps(img, &taps)
}

#[inline]
pub(crate) fn sample_taps(img: &Image, taps: &Taps) -> Option<Rgb> {
    let px = img.pixels.as_slice();
    let valid = img.valid.as_slice();
    let mut out = [0.0; 3];
    for (i, w) in taps.iter() {
        if !valid[i] {
            return None;
        }
        let c = px[i];
        out[0] += w * c[0];
        out[1] += w * c[1];
        out[2] += w * c[2];
    }
    Some(out)
}

/// Spatial derivative `(d/du, d/dv)` of the bilinear interpolant inside the current cell.
#[inline]
pub(crate) fn taps_gradient(img: &Image, taps: &Taps) -> [Rgb; 2] {
    let px = img.pixels.as_slice();
    let [c00, c10, c01, c11] = taps.corners.map(|i| px[i]);
    let (fx, fy) = (taps.fx, taps.fy);
    let mut du = [0.0; 3];
    let mut dv = [0.0; 3];
    for ch in 0..3 {
        du[ch] = (1.0 - fy) * (c10[ch] - c00[ch]) + fy * (c11[ch] - c01[ch]);
        dv[ch] = (1.0 - fx) * (c01[ch] - c00[ch]) + fx * (c11[ch] - c10[ch]);
    }
    [du, dv]
}

/// Per-pixel reprojection of a whole depth map, kept for resampling several
/// rasters (image, instance masks) with the same geometry.
#[derive(Debug, Clone)]
pub(crate) struct WarpField {
    pub width: usize,
    pub height: usize,
    pub coords: Vec<Option<ProjectedPixel>>,
}

impl WarpField {
    pub fn new(depth: &DepthMap, k: &Intrinsics, pose: &Pose) -> Result<Self> {
        check_depth_dims(depth, k)?;
        let proj = Projector::new(k, pose);
        let mut coords = Vec::with_capacity(depth.len());
        for y in 0..depth.height() {
            for x in 0..depth.width() {
                let d = *depth.get(x, y);
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::domain(format!("depth must be positive, got {d} at ({x}, {y})")));
                }
                coords.push(proj.project(x as f64, y as f64, d));
            }
        }
        Ok(Self {
            width: depth.width(),
            height: depth.height(),
            coords,
        })
    }

    #[inline]
    pub fn taps(&self, i: usize, src_w: usize, src_h: usize) -> Option<Taps> {
        let q = self.coords[i]?;
        bilinear_taps(src_w, src_h, q.u, q.v)
    }

    pub fn sample(&self, src: &Image) -> Image {
        let (w, h) = src.dims();
        let mut pixels = Vec::with_capacity(self.coords.len());
        let mut valid = Vec::with_capacity(self.coords.len());
        for i in 0..self.coords.len() {
            match self.taps(i, w, h).and_then(|t| sample_taps(src, &t)) {
                Some(rgb) => {
                    pixels.push(rgb);
                    valid.push(true);
                }
                None => {
                    pixels.push([0.0; 3]);
                    valid.push(false);
                }
            }
        }
        Image {
            pixels: Grid::from_vec(self.width, self.height, pixels).expect("sized"),
            valid: Grid::from_vec(self.width, self.height, valid).expect("sized"),
        }
    }

    /// Warped image plus `d(warped)/d(depth)` per pixel.
    pub fn sample_with_depth_derivative(&self, src: &Image) -> (Image, Vec<Rgb>) {
        let (w, h) = src.dims();
        let mut pixels = Vec::with_capacity(self.coords.len());
        let mut valid = Vec::with_capacity(self.coords.len());
        let mut deriv = Vec::with_capacity(self.coords.len());
        for (i, q) in self.coords.iter().enumerate() {
            let sample = self
                .taps(i, w, h)
                .and_then(|t| sample_taps(src, &t).map(|rgb| (rgb, t)));
            match (sample, q) {
                (Some((rgb, taps)), Some(q)) => {
                    let [gu, gv] = taps_gradient(src, &taps);
                    pixels.push(rgb);
                    valid.push(true);
                    deriv.push([
                        gu[0] * q.du_dd + gv[0] * q.dv_dd,
                        gu[1] * q.du_dd + gv[1] * q.dv_dd,
                        gu[2] * q.du_dd + gv[2] * q.dv_dd,
                    ]);
                }
                _ => {
                    pixels.push([0.0; 3]);
                    valid.push(false);
                    deriv.push([0.0; 3]);
                }
            }
        }
        (
            Image {
                pixels: Grid::from_vec(self.width, self.height, pixels).expect("sized"),
                valid: Grid::from_vec(self.width, self.height, valid).expect("sized"),
            },
            deriv,
        )
    }

    /// Resamples a binary mask whose set pixels lie inside `[left, right] x [top, bottom]`, thresholding at 0.5.
    pub fn sample_mask(&self, mask: &Grid<bool>, bounds: [usize; 4]) -> Grid<bool> {
        let (w, h) = mask.dims();
        let data = mask.as_slice();
        let [left, right, top, bottom] = bounds.map(|b| b as f64);
        let out = self
            .coords
            .iter()
            .map(|q| match q {
                Some(q) if q.u > left - 1.0 && q.u < right + 1.0 && q.v > top - 1.0 && q.v < bottom + 1.0 => {
                    bilinear_taps(w, h, q.u, q.v).map_or(false, |t| {
                        t.iter().map(|(j, wt)| if data[j] { wt } else { 0.0 }).sum::<f64>() >= 0.5
                    })
                }
                _ => false,
            })
            .collect();
        Grid::from_vec(self.width, self.height, out).expect("sized")
    }
}

fn check_depth_dims(depth: &DepthMap, k: &Intrinsics) -> Result<()> {
    if depth.width() != k.width || depth.height() != k.height {
        return Err(Error::contract(format!(
            "depth map is {}x{} but intrinsics describe {}x{}",
            depth.width(),
            depth.height(),
            k.width,
            k.height
        )));
    }
    Ok(())
}

/// Reconstructs the target view by sampling `src` at the reprojection of every target pixel.
pub fn warp_image(src: &Image, depth: &DepthMap, k: &Intrinsics, pose: &Pose) -> Result<Image> {
    if src.width() != k.width || src.height() != k.height {
        return Err(Error::contract(format!(
            "source image is {}x{} but intrinsics describe {}x{}",
            src.width(),
            src.height(),
            k.width,
            k.height
        )));
    }
    Ok(WarpField::new(depth, k, pose)?.sample(src))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k() -> Intrinsics {
        Intrinsics::new(100.0, 100.0, 64.0, 48.0, 128, 96).unwrap()
    }

    /// Independent route: full 4x4 homogeneous matrices.
    fn homogeneous_oracle(p: (f64, f64), d: f64, k: &Intrinsics, pose: &Pose) -> (f64, f64) {
        let km = k.matrix();
        let kinv = km.try_inverse().unwrap();
        let r = pose.rotation_matrix();
        let mut t4 = nalgebra::Matrix4::<f64>::identity();
        t4.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        t4[(0, 3)] = pose.translation[0];
        t4[(1, 3)] = pose.translation[1];
        t4[(2, 3)] = pose.translation[2];
        let cam = kinv * nalgebra::Vector3::new(p.0, p.1, 1.0) * d;
        let h = t4 * nalgebra::Vector4::new(cam.x, cam.y, cam.z, 1.0);
        let img = km * nalgebra::Vector3::new(h.x, h.y, h.z);
        (img.x / img.z, img.y / img.z)
    }

    #[test]
    fn identity_pose_keeps_pixel() {
        let p = project_pixel(PixelCoord::new(10.0, 20.0), 7.3, &k(), &Pose::identity()).unwrap();
        assert_eq!(p.coord, PixelCoord::new(10.0, 20.0));
        assert!(p.valid);
    }

    #[test]
    fn lateral_translation_shift_is_inverse_in_depth() {
        let pose = Pose::from_translation([1.0, 0.0, 0.0]);
        let near = project_pixel(PixelCoord::new(64.0, 48.0), 10.0, &k(), &pose).unwrap();
        assert_relative_eq!(near.coord.u, 74.0, epsilon = 1e-12);
        assert_relative_eq!(near.coord.v, 48.0, epsilon = 1e-12);
        let o = homogeneous_oracle((64.0, 48.0), 10.0, &k(), &pose);
        assert_relative_eq!(o.0, 74.0, epsilon = 1e-12);

        let far = project_pixel(PixelCoord::new(64.0, 48.0), 20.0, &k(), &pose).unwrap();
        assert_relative_eq!(far.coord.u, 69.0, epsilon = 1e-12);
        let o = homogeneous_oracle((64.0, 48.0), 20.0, &k(), &pose);
        assert_relative_eq!(o.0, 69.0, epsilon = 1e-12);
    }

    #[test]
    fn general_pose_matches_homogeneous_oracle() {
        let pose = Pose::new([0.02, -0.03, 0.01], [0.3, -0.1, 0.5]);
        for &(u, v, d) in &[(3.0, 4.0, 5.0), (100.5, 80.25, 12.0), (64.0, 48.0, 30.0)] {
            let p = project_pixel(PixelCoord::new(u, v), d, &k(), &pose).unwrap();
            let o = homogeneous_oracle((u, v), d, &k(), &pose);
            assert_relative_eq!(p.coord.u, o.0, epsilon = 1e-9);
            assert_relative_eq!(p.coord.v, o.1, epsilon = 1e-9);
        }
    }

    #[test]
    fn non_positive_depth_is_domain_error() {
        let r = project_pixel(PixelCoord::new(1.0, 1.0), 0.0, &k(), &Pose::identity());
        assert!(matches!(r, Err(Error::Domain(_))));
        let r = project_pixel(PixelCoord::new(1.0, 1.0), -2.0, &k(), &Pose::identity());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn behind_camera_is_invalid() {
        let pose = Pose::from_translation([0.0, 0.0, -20.0]);
        let p = project_pixel(PixelCoord::new(10.0, 10.0), 5.0, &k(), &pose).unwrap();
        assert!(!p.valid);
        assert!(p.depth < 0.0);
    }

    #[test]
    fn euler_round_trip_and_inverse() {
        let pose = Pose::new([0.1, -0.2, 0.3], [1.0, 2.0, -0.5]);
        let back = Pose::from_parts(&pose.rotation_matrix(), &pose.translation_vector());
        for i in 0..3 {
            assert_relative_eq!(back.rotation[i], pose.rotation[i], epsilon = 1e-12);
        }
        let id = pose.compose(&pose.inverse()).inverse();
        for i in 0..3 {
            assert!(id.rotation[i].abs() < 1e-9);
            assert!(id.translation[i].abs() < 1e-9);
        }
    }

    #[test]
    fn depth_derivative_matches_finite_difference() {
        let pose = Pose::new([0.01, 0.02, -0.01], [0.4, 0.1, 0.6]);
        let proj = Projector::new(&k(), &pose);
        let (u, v, d) = (30.0, 70.0, 8.0);
        let q = proj.project(u, v, d).unwrap();
        let h = 1e-5;
        let a = proj.project(u, v, d + h).unwrap();
        let b = proj.project(u, v, d - h).unwrap();
        assert_relative_eq!(q.du_dd, (a.u - b.u) / (2.0 * h), max_relative = 1e-6);
        assert_relative_eq!(q.dv_dd, (a.v - b.v) / (2.0 * h), max_relative = 1e-6);
    }

    fn ramp_image() -> Image {
        Image::new(Grid::from_fn(4, 3, |x, y| {
            [x as f64 / 3.0, y as f64 / 2.0, (x + y) as f64 / 5.0]
        }))
    }

    #[test]
    fn bilinear_exact_on_integers() {
        let img = Image::new(Grid::from_fn(6, 7, |x, y| [x as f64 * 0.1, y as f64 * 0.05, 0.3]));
        let s = bilinear_sample(&img, PixelCoord::new(3.0, 5.0)).unwrap();
        assert_eq!(s, img.rgb(3, 5));
        // last row and column are reachable
        let s = bilinear_sample(&img, PixelCoord::new(5.0, 6.0)).unwrap();
        assert_eq!(s, img.rgb(5, 6));
    }

    #[test]
    fn bilinear_half_step() {
        let img = Image::new(Grid::from_vec(2, 1, vec![[0.0; 3], [1.0; 3]]).unwrap());
        let s = bilinear_sample(&img, PixelCoord::new(0.5, 0.0)).unwrap();
        assert_eq!(s, [0.5; 3]);
        assert!(bilinear_sample(&img, PixelCoord::new(-0.5, 0.0)).is_none());
        assert!(bilinear_sample(&img, PixelCoord::new(1.0001, 0.0)).is_none());
    }

    #[test]
    fn bilinear_invalid_neighbor_propagates() {
        let mut img = ramp_image();
        *img.valid.get_mut(1, 0) = false;
        assert!(bilinear_sample(&img, PixelCoord::new(0.5, 0.0)).is_none());
        // zero-weight neighbor does not contaminate
        assert!(bilinear_sample(&img, PixelCoord::new(0.0, 0.0)).is_some());
    }

    #[test]
    fn warp_identity_is_bit_exact() {
        let k = Intrinsics::new(50.0, 50.0, 2.0, 1.0, 4, 3).unwrap();
        let img = ramp_image();
        let depth = DepthMap::filled(4, 3, 3.7);
        let out = warp_image(&img, &depth, &k, &Pose::identity()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn warp_behind_camera_all_invalid() {
        let k = Intrinsics::new(50.0, 50.0, 2.0, 1.0, 4, 3).unwrap();
        let depth = DepthMap::filled(4, 3, 2.0);
        let out = warp_image(&ramp_image(), &depth, &k, &Pose::from_translation([0.0, 0.0, -5.0])).unwrap();
        assert_eq!(out.valid_count(), 0);
    }

    #[test]
    fn warp_dimension_mismatch() {
        let k = Intrinsics::new(50.0, 50.0, 2.0, 1.0, 4, 3).unwrap();
        let depth = DepthMap::filled(5, 3, 2.0);
        assert!(matches!(
            warp_image(&ramp_image(), &depth, &k, &Pose::identity()),
            Err(Error::Contract(_))
        ));
    }
}
