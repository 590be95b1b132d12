//! Plane-sweep matching between frame `t` and its predecessor, the derived
//! depth map and the teacher/cost-volume disagreement mask.

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pose, WarpField};
use crate::grid::{DepthMap, Grid, Image, PixelMask};

/// Uniformly spaced depth hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthPlanes {
    values: Vec<f64>,
}

impl DepthPlanes {
    /// `n` planes evenly spaced over `[d_min, d_max]`; a single plane sits at `d_min`.
    pub fn uniform(n: usize, d_min: f64, d_max: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("at least one depth plane is required"));
        }
        if !(d_min > 0.0 && d_min < d_max && d_max.is_finite()) {
            return Err(Error::contract(format!(
                "depth planes need 0 < d_min < d_max, got [{d_min}, {d_max}]"
            )));
        }
        let values = if n == 1 {
            vec![d_min]
        } else {
            let step = (d_max - d_min) / (n - 1) as f64;
            (0..n).map(|i| d_min + step * i as f64).collect()
        };
        Ok(Self { values })
    }

    /// Explicit plane depths; must be positive and strictly increasing.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::contract("at least one depth plane is required"));
        }
        if !(values[0] > 0.0) || values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::contract("plane depths must be positive and strictly increasing"));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the plane closest to `depth` (nearer plane on ties).
    pub fn nearest(&self, depth: f64) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if (v - depth).abs() < (self.values[best] - depth).abs() {
                best = i;
            }
        }
        best
    }
}

impl Default for DepthPlanes {
    fn default() -> Self {
        Self::uniform(32, 2.0, 40.0).expect("valid defaults")
    }
}

/// Matching cost per pixel and plane, stored plane-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    n_planes: usize,
    costs: Vec<f64>,
    valid: Vec<bool>,
}

impl CostVolume {
    /// Builds a volume from explicit entries (`None` marks an invalid entry), plane-major.
    pub fn from_entries(width: usize, height: usize, n_planes: usize, entries: Vec<Option<f64>>) -> Result<Self> {
        if entries.len() != width * height * n_planes {
            return Err(Error::contract("cost volume entry count does not match its dimensions"));
        }
        Ok(Self {
            width,
            height,
            n_planes,
            valid: entries.iter().map(Option::is_some).collect(),
            costs: entries.into_iter().map(|c| c.unwrap_or(0.0)).collect(),
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.n_planes)
    }

    pub fn cost(&self, x: usize, y: usize, plane: usize) -> Option<f64> {
        let i = plane * self.width * self.height + y * self.width + x;
        self.valid[i].then(|| self.costs[i])
    }

    /// One plane as a raster; invalid entries are `None`.
    pub fn slice(&self, plane: usize) -> Grid<Option<f64>> {
        Grid::from_fn(self.width, self.height, |x, y| self.cost(x, y, plane))
    }
}

/// Sum of absolute differences over 3x3 patches after warping `prev` into frame `t` at each plane depth.
///
/// An entry is invalid unless every patch member lies inside the image and is valid in both views.
pub fn build_cost_volume(
    prev: &Image,
    current: &Image,
    k: &Intrinsics,
    pose_to_prev: &Pose,
    planes: &DepthPlanes,
) -> Result<CostVolume> {
    prev.pixels.ensure_dims(&current.pixels, "build_cost_volume")?;
    let (w, h) = current.dims();
    if k.width != w || k.height != h {
        return Err(Error::contract("intrinsics do not match image size"));
    }
    let n = w * h;
    let mut costs = vec![0.0; n * planes.len()];
    let mut valid = vec![false; n * planes.len()];
    let cur = current.pixels.as_slice();
    let cur_valid = current.valid.as_slice();
    for (pi, &d) in planes.values().iter().enumerate() {
        let field = WarpField::new(&DepthMap::filled(w, h, d), k, pose_to_prev)?;
        let warped = field.sample(prev);
        let wp = warped.pixels.as_slice();
        let wv = warped.valid.as_slice();
        // per-pixel absolute difference, then 3x3 box sums
        let diff: Vec<Option<f64>> = (0..n)
            .map(|i| {
                (wv[i] && cur_valid[i])
                    .then(|| (wp[i][0] - cur[i][0]).abs() + (wp[i][1] - cur[i][1]).abs() + (wp[i][2] - cur[i][2]).abs())
            })
            .collect();
        let base = pi * n;
        for y in 1..h.saturating_sub(1) {
            for x in 1..w.saturating_sub(1) {
                let mut sum = 0.0;
                let mut ok = true;
                'patch: for yy in y - 1..=y + 1 {
                    for xx in x - 1..=x + 1 {
                        match diff[yy * w + xx] {
                            Some(v) => sum += v,
                            None => {
                                ok = false;
                                break 'patch;
                            }
                        }
                    }
                }
                if ok {
                    costs[base + y * w + x] = sum;
                    valid[base + y * w + x] = true;
                }
            }
        }
    }
    Ok(CostVolume {
        width: w,
        height: h,
        n_planes: planes.len(),
        costs,
        valid,
    })
}

/// Depth of the cheapest plane per pixel; ties go to the nearer plane.
///
/// Pixels without any valid plane take the median of their already-assigned
/// 8-neighbors, filled outward until the map is complete.
pub fn argmin_depth(cv: &CostVolume, planes: &DepthPlanes) -> Result<DepthMap> {
    if cv.n_planes != planes.len() {
        return Err(Error::contract(format!(
            "cost volume has {} planes but {} depths were given",
            cv.n_planes,
            planes.len()
        )));
    }
    let (w, h) = (cv.width, cv.height);
    let n = w * h;
    let mut depth: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let mut best: Option<(usize, f64)> = None;
            for p in 0..cv.n_planes {
                let j = p * n + i;
                if cv.valid[j] && best.map_or(true, |(_, c)| cv.costs[j] < c) {
                    best = Some((p, cv.costs[j]));
                }
            }
            best.map(|(p, _)| planes.values()[p])
        })
        .collect();
    if depth.iter().all(Option::is_none) {
        return Err(Error::contract("cost volume has no valid entry"));
    }
    while depth.iter().any(Option::is_none) {
        let snapshot = depth.clone();
        for y in 0..h {
            for x in 0..w {
                if snapshot[y * w + x].is_some() {
                    continue;
                }
                let mut neighbors = Vec::with_capacity(8);
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let (xx, yy) = (x as isize + dx, y as isize + dy);
                        if (dx, dy) == (0, 0) || xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                            continue;
                        }
                        if let Some(v) = snapshot[yy as usize * w + xx as usize] {
                            neighbors.push(v);
                        }
                    }
                }
                if !neighbors.is_empty() {
                    neighbors.sort_by(f64::total_cmp);
                    depth[y * w + x] = Some(neighbors[(neighbors.len() - 1) / 2]);
                }
            }
        }
    }
    Grid::from_vec(w, h, depth.into_iter().map(|d| d.expect("filled")).collect())
}

/// Pixels where the two depth maps disagree by more than a factor of two:
/// `max((a - b) / b, (b - a) / a) > 1`.
pub fn uncertainty_mask(d_cv: &DepthMap, d_teacher: &DepthMap) -> Result<PixelMask> {
    d_cv.ensure_dims(d_teacher, "uncertainty_mask")?;
    let mut out = Vec::with_capacity(d_cv.len());
    for (&a, &b) in d_cv.as_slice().iter().zip(d_teacher.as_slice()) {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::domain(format!("depths must be positive, got {a} and {b}")));
        }
        out.push(((a - b) / b).max((b - a) / a) > 1.0);
    }
    Grid::from_vec(d_cv.width(), d_cv.height(), out)
}
