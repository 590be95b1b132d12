//! Photometric error, per-pixel candidate selection, edge-aware smoothness and
//! masked reprojection loss.
//!
//! The per-pixel error blends a 3x3 SSIM term with an L1 term,
//! `pe = a * (1 - SSIM) / 2 + (1 - a) * |x - y|`, with `a = 0.85`, averaged over
//! the three channels. SSIM windows use reflection padding and only include
//! window members that are valid in both images.

use crate::error::{Error, Result};
use crate::grid::{reflect, DepthMap, ErrorMap, Grid, Image, PixelMask, Rgb};

pub const SSIM_WEIGHT: f64 = 0.85;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Per-pixel window sums: count, then `a`, `b`, `a^2`, `b^2`, `ab` per channel.
type Sums = [f64; 16];

#[inline]
fn add3<const K: usize>(a: &[f64; K], b: &[f64; K], c: &[f64; K]) -> [f64; K] {
    let mut out = [0.0; K];
    for k in 0..K {
        out[k] = a[k] + b[k] + c[k];
    }
    out
}

#[inline]
fn add_into<const K: usize>(acc: &mut [f64; K], v: &[f64; K]) {
    for k in 0..K {
        acc[k] += v[k];
    }
}

/// 3-tap sums along one row with reflection at both ends.
fn row_sums<const K: usize>(row: &[[f64; K]], out: &mut Vec<[f64; K]>) {
    let w = row.len();
    if w < 3 {
        for x in 0..w {
            let mut o = [0.0; K];
            for dx in -1..=1isize {
                add_into(&mut o, &row[reflect(x as isize + dx, w)]);
            }
            out.push(o);
        }
        return;
    }
    out.push(add3(&row[1], &row[0], &row[1]));
    out.extend(row.windows(3).map(|t| add3(&t[0], &t[1], &t[2])));
    out.push(add3(&row[w - 2], &row[w - 1], &row[w - 2]));
}

/// 3x3 window sums with reflection padding, computed as two 3-tap passes.
fn box3<const K: usize>(src: &[[f64; K]], w: usize, h: usize) -> Vec<[f64; K]> {
    let mut rows = Vec::with_capacity(w * h);
    for s in src.chunks_exact(w) {
        row_sums(s, &mut rows);
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (r0, r2) = (reflect(y as isize - 1, h) * w, reflect(y as isize + 1, h) * w);
        let r1 = y * w;
        out.extend((0..w).map(|x| add3(&rows[r0 + x], &rows[r1 + x], &rows[r2 + x])));
    }
    out
}

/// Adjoint of [`box3`]: scatters each value onto the pixels of its window.
fn box3_adjoint<const K: usize>(src: &[[f64; K]], w: usize, h: usize) -> Vec<[f64; K]> {
    let mut cols = vec![[0.0; K]; w * h];
    for y in 0..h {
        for dy in -1..=1isize {
            let row = reflect(y as isize + dy, h) * w;
            for x in 0..w {
                let v = src[y * w + x];
                add_into(&mut cols[row + x], &v);
            }
        }
    }
    let mut out = vec![[0.0; K]; w * h];
    for y in 0..h {
        let base = y * w;
        for x in 0..w {
            let v = cols[base + x];
            for dx in -1..=1isize {
                add_into(&mut out[base + reflect(x as isize + dx, w)], &v);
            }
        }
    }
    out
}

/// Window sums over members valid in both images.
fn window_sums(a: &Image, b: &Image) -> Vec<Sums> {
    let (w, h) = a.dims();
    let (pa, pb) = (a.pixels.as_slice(), b.pixels.as_slice());
    let (va, vb) = (a.valid.as_slice(), b.valid.as_slice());
    let terms: Vec<Sums> = (0..w * h)
        .map(|i| {
            let mut t = [0.0; 16];
            if va[i] && vb[i] {
                t[0] = 1.0;
                for c in 0..3 {
                    let (xa, xb) = (pa[i][c], pb[i][c]);
                    t[1 + c] = xa;
                    t[4 + c] = xb;
                    t[7 + c] = xa * xa;
                    t[10 + c] = xb * xb;
                    t[13 + c] = xa * xb;
                }
            }
            t
        })
        .collect();
    box3(&terms, w, h)
}

/// Window sums of one pixel, gathered directly.
fn pixel_sums(a: &Image, b: &Image, x: usize, y: usize) -> Sums {
    let (w, h) = a.dims();
    let (pa, pb) = (a.pixels.as_slice(), b.pixels.as_slice());
    let (va, vb) = (a.valid.as_slice(), b.valid.as_slice());
    let mut t = [0.0; 16];
    for j in window_members(x, y, w, h) {
        if !(va[j] && vb[j]) {
            continue;
        }
        t[0] += 1.0;
        for c in 0..3 {
            let (xa, xb) = (pa[j][c], pb[j][c]);
            t[1 + c] += xa;
            t[4 + c] += xb;
            t[7 + c] += xa * xa;
            t[10 + c] += xb * xb;
            t[13 + c] += xa * xb;
        }
    }
    t
}

#[inline]
fn window_members(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (xi, yi) = (x as isize, y as isize);
    (-1..=1isize).flat_map(move |dy| (-1..=1isize).map(move |dx| reflect(yi + dy, h) * w + reflect(xi + dx, w)))
}

#[inline]
fn pixel_error(sums: &Sums, ca: &Rgb, cb: &Rgb) -> f64 {
    let mut pe = 0.0;
    for c in 0..3 {
        let d = ChannelSsim::new(sums, c).dissimilarity();
        pe += SSIM_WEIGHT * d + (1.0 - SSIM_WEIGHT) * (ca[c] - cb[c]).abs();
    }
    pe / 3.0
}

/// SSIM ingredients for one channel.
struct ChannelSsim {
    n: f64,
    mu_a: f64,
    mu_b: f64,
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    ssim: f64,
}

impl ChannelSsim {
    fn new(s: &Sums, c: usize) -> Self {
        let n = s[0];
        let inv_n = 1.0 / n;
        let mu_a = s[1 + c] * inv_n;
        let mu_b = s[4 + c] * inv_n;
        let var_a = s[7 + c] * inv_n - mu_a * mu_a;
        let var_b = s[10 + c] * inv_n - mu_b * mu_b;
        let cov = s[13 + c] * inv_n - mu_a * mu_b;
        let a1 = 2.0 * mu_a * mu_b + SSIM_C1;
        let a2 = 2.0 * cov + SSIM_C2;
        let b1 = mu_a * mu_a + mu_b * mu_b + SSIM_C1;
        let b2 = var_a + var_b + SSIM_C2;
        Self {
            n,
            mu_a,
            mu_b,
            a1,
            a2,
            b1,
            b2,
            ssim: a1 * a2 / (b1 * b2),
        }
    }

    fn dissimilarity(&self) -> f64 {
        ((1.0 - self.ssim) / 2.0).clamp(0.0, 1.0)
    }

    fn clamped(&self) -> bool {
        let d = (1.0 - self.ssim) / 2.0;
        !(0.0..=1.0).contains(&d)
    }

    /// `dSSIM / d a_j = k0 + ka * a_j + kb * b_j` for every window member `j`.
    fn member_gradient(&self) -> [f64; 3] {
        let inv_n = 1.0 / self.n;
        let (inv_b1, inv_b2) = (1.0 / self.b1, 1.0 / self.b2);
        let inv_nd = inv_n * inv_b1 * inv_b2;
        let kb = 2.0 * self.a1 * inv_nd;
        let ka = -2.0 * self.ssim * inv_n * inv_b2;
        let k0 =
            2.0 * self.mu_b * (self.a2 - self.a1) * inv_nd - 2.0 * self.ssim * self.mu_a * (inv_b1 - inv_b2) * inv_n;
        [k0, ka, kb]
    }
}

/// Per-pixel photometric error between two images of equal size.
pub fn photometric_error(a: &Image, b: &Image) -> Result<ErrorMap> {
    a.pixels.ensure_dims(&b.pixels, "photometric_error")?;
    let (w, h) = a.dims();
    let sums = window_sums(a, b);
    let (pa, pb) = (a.pixels.as_slice(), b.pixels.as_slice());
    let (va, vb) = (a.valid.as_slice(), b.valid.as_slice());
    let mut values = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    for i in 0..w * h {
        if va[i] && vb[i] {
            values[i] = pixel_error(&sums[i], &pa[i], &pb[i]);
            valid[i] = true;
        }
    }
    ErrorMap::new(Grid::from_vec(w, h, values)?, Grid::from_vec(w, h, valid)?)
}

/// Error of `a` against `b`, given `base`, the error of an image that differs from `a` only where `changed`.
///
/// Only pixels whose window touches a changed pixel are recomputed.
pub(crate) fn photometric_error_update(a: &Image, b: &Image, base: &ErrorMap, changed: &[bool]) -> ErrorMap {
    let (w, h) = a.dims();
    let mut out = base.clone();
    let (pa, pb) = (a.pixels.as_slice(), b.pixels.as_slice());
    let (va, vb) = (a.valid.as_slice(), b.valid.as_slice());
    let mut touched = vec![false; w * h];
    for (i, c) in changed.iter().enumerate() {
        if *c {
            for j in window_members(i % w, i / w, w, h) {
                touched[j] = true;
            }
        }
    }
    for (i, t) in touched.iter().enumerate() {
        if !*t {
            continue;
        }
        let ok = va[i] && vb[i];
        out.valid.as_mut_slice()[i] = ok;
        out.values.as_mut_slice()[i] = if ok {
            pixel_error(&pixel_sums(a, b, i % w, i / w), &pa[i], &pb[i])
        } else {
            0.0
        };
    }
    out
}

/// Adds `upstream[p] * d pe(p) / d a` into `grad_a` for every pixel with nonzero upstream.
///
/// `b` is the fixed reference; only `a` receives gradient.
pub(crate) fn photometric_error_backward(a: &Image, b: &Image, upstream: &[f64], grad_a: &mut [Rgb]) {
    let (w, h) = a.dims();
    let (pa, pb) = (a.pixels.as_slice(), b.pixels.as_slice());
    let (va, vb) = (a.valid.as_slice(), b.valid.as_slice());
    let centers: Vec<usize> = (0..w * h).filter(|&i| upstream[i] != 0.0 && va[i] && vb[i]).collect();
    // coefficients of dSSIM/da_j = k0 + ka a_j + kb b_j, per center and channel
    let center_coeffs = |i: usize, sums: &Sums, grad_a: &mut [Rgb]| -> [f64; 9] {
        let scale = upstream[i] / 3.0;
        let mut k = [0.0; 9];
        for c in 0..3 {
            let diff = pa[i][c] - pb[i][c];
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            grad_a[i][c] += scale * (1.0 - SSIM_WEIGHT) * sign;
            let s = ChannelSsim::new(sums, c);
            if s.clamped() {
                continue;
            }
            let f = -scale * SSIM_WEIGHT / 2.0;
            for (t, kt) in s.member_gradient().iter().enumerate() {
                k[3 * c + t] = f * kt;
            }
        }
        k
    };
    if centers.len() * 4 < w * h {
        // sparse support: scatter from each center directly
        for &i in &centers {
            let (x, y) = (i % w, i / w);
            let k = center_coeffs(i, &pixel_sums(a, b, x, y), grad_a);
            for j in window_members(x, y, w, h) {
                if !(va[j] && vb[j]) {
                    continue;
                }
                for c in 0..3 {
                    grad_a[j][c] += k[3 * c] + k[3 * c + 1] * pa[j][c] + k[3 * c + 2] * pb[j][c];
                }
            }
        }
        return;
    }
    let sums = window_sums(a, b);
    let mut coeffs = vec![[0.0; 9]; w * h];
    for &i in &centers {
        coeffs[i] = center_coeffs(i, &sums[i], grad_a);
    }
    let spread = box3_adjoint(&coeffs, w, h);
    for j in 0..w * h {
        if !(va[j] && vb[j]) {
            continue;
        }
        let k = &spread[j];
        for c in 0..3 {
            grad_a[j][c] += k[3 * c] + k[3 * c + 1] * pa[j][c] + k[3 * c + 2] * pb[j][c];
        }
    }
}

/// Winning candidate per pixel together with the pixel-wise minimum error.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Index of the chosen candidate; `None` where every candidate is invalid.
    pub index: Grid<Option<u8>>,
    pub error: ErrorMap,
}

/// Pixel-wise argmin over candidate error maps; ties go to the earliest candidate.
pub fn select_by_error(errors: &[&ErrorMap]) -> Result<Selection> {
    let first = errors
        .first()
        .ok_or_else(|| Error::contract("select_pixels needs at least one candidate"))?;
    for e in errors.iter().skip(1) {
        first.values.ensure_dims(&e.values, "select_pixels")?;
    }
    if errors.len() > u8::MAX as usize {
        return Err(Error::contract("too many candidates"));
    }
    let (w, h) = first.dims();
    let n = w * h;
    let mut index = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for i in 0..n {
        let mut best: Option<(u8, f64)> = None;
        for (k, e) in errors.iter().enumerate() {
            if !e.valid.as_slice()[i] {
                continue;
            }
            let v = e.values.as_slice()[i];
            if best.map_or(true, |(_, bv)| v < bv) {
                best = Some((k as u8, v));
            }
        }
        index.push(best.map(|(k, _)| k));
        values.push(best.map_or(0.0, |(_, v)| v));
        valid.push(best.is_some());
    }
    Ok(Selection {
        index: Grid::from_vec(w, h, index)?,
        error: ErrorMap::new(Grid::from_vec(w, h, values)?, Grid::from_vec(w, h, valid)?)?,
    })
}

/// Composes the image of lowest error per pixel from a list of (image, error) candidates.
pub fn select_pixels(candidates: &[(Image, ErrorMap)]) -> Result<(Image, ErrorMap)> {
    let errors: Vec<&ErrorMap> = candidates.iter().map(|(_, e)| e).collect();
    let sel = select_by_error(&errors)?;
    for (img, e) in candidates {
        img.pixels.ensure_dims(&e.values, "select_pixels image")?;
    }
    let (w, h) = sel.error.dims();
    let mut pixels = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for (i, k) in sel.index.as_slice().iter().enumerate() {
        match k {
            Some(k) => {
                let img = &candidates[*k as usize].0;
                pixels.push(img.pixels.as_slice()[i]);
                valid.push(true);
            }
            None => {
                pixels.push([0.0; 3]);
                valid.push(false);
            }
        }
    }
    let image = Image::with_validity(Grid::from_vec(w, h, pixels)?, Grid::from_vec(w, h, valid)?)?;
    Ok((image, sel.error))
}

fn check_positive(depth: &DepthMap) -> Result<()> {
    match depth.as_slice().iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        Some(d) => Err(Error::domain(format!("depth must be positive, got {d}"))),
        None => Ok(()),
    }
}

fn edge_weights(img: &Image) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = img.dims();
    let px = img.pixels.as_slice();
    let mut ex = vec![0.0; w * h];
    let mut ey = vec![0.0; w * h];
    let grad = |p: &Rgb, q: &Rgb| ((p[0] - q[0]).abs() + (p[1] - q[1]).abs() + (p[2] - q[2]).abs()) / 3.0;
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let i = y * w + x;
            ex[i] = (-grad(&px[i + 1], &px[i])).exp();
            ey[i] = (-grad(&px[i + w], &px[i])).exp();
        }
    }
    (ex, ey)
}

/// Edge-aware smoothness of mean-normalized inverse depth.
pub fn smoothness_loss(depth: &DepthMap, img: &Image) -> Result<f64> {
    Ok(smoothness_with_gradient(depth, img, false)?.0)
}

/// Smoothness loss and, if requested, its gradient with respect to depth.
pub(crate) fn smoothness_with_gradient(depth: &DepthMap, img: &Image, want_grad: bool) -> Result<(f64, Vec<f64>)> {
    depth.ensure_dims(&img.pixels, "smoothness_loss")?;
    check_positive(depth)?;
    let (w, h) = depth.dims();
    let n_terms = w.saturating_sub(1) * h.saturating_sub(1);
    if n_terms == 0 {
        return Ok((0.0, vec![0.0; w * h]));
    }
    let inv: Vec<f64> = depth.as_slice().iter().map(|d| 1.0 / d).collect();
    let mean = inv.iter().sum::<f64>() / inv.len() as f64;
    let (ex, ey) = edge_weights(img);
    let mut raw = 0.0;
    let mut d_raw = if want_grad { vec![0.0; w * h] } else { Vec::new() };
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let i = y * w + x;
            let gx = inv[i + 1] - inv[i];
            let gy = inv[i + w] - inv[i];
            raw += gx.abs() * ex[i] + gy.abs() * ey[i];
            if want_grad {
                let sx = gx.signum() * (gx != 0.0) as u8 as f64 * ex[i];
                let sy = gy.signum() * (gy != 0.0) as u8 as f64 * ey[i];
                d_raw[i + 1] += sx;
                d_raw[i] -= sx;
                d_raw[i + w] += sy;
                d_raw[i] -= sy;
            }
        }
    }
    let raw = raw / n_terms as f64;
    let loss = raw / mean;
    if !want_grad {
        return Ok((loss, Vec::new()));
    }
    // L = raw / mean;  dL/dz_j = (d raw/dz_j) / mean - raw / mean^2 * (1 / N)
    let n = (w * h) as f64;
    let grad = d_raw
        .iter()
        .zip(&inv)
        .map(|(dr, z)| {
            let dz = dr / n_terms as f64 / mean - raw / (mean * mean) / n;
            dz * -(z * z)
        })
        .collect();
    Ok((loss, grad))
}

/// Mean error over pixels selected by `mask` that also carry a valid error; 0 when none do.
pub fn reprojection_loss(error: &ErrorMap, mask: &PixelMask) -> Result<f64> {
    error.values.ensure_dims(mask, "reprojection_loss")?;
    Ok(error.masked_mean(Some(mask)).unwrap_or(0.0))
}
