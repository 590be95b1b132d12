use crate::error::{Axis, Error, Result};
use crate::geometry::{bilinear_taps, sample_taps, Taps};
use crate::grid::{Image, Rgb};

use super::instance::{Instance, InstanceSet};

/// Signed box displacement over `t-1 -> t+1`, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Displacement {
    pub dh: f64,
    pub dv: f64,
}

impl Displacement {
    pub fn new(dh: f64, dv: f64) -> Self {
        Self { dh, dv }
    }

    pub fn is_zero(&self) -> bool {
        self.dh == 0.0 && self.dv == 0.0
    }
}

/// Largest boundary motion among non-truncated pairs, signed by the pair achieving it.
fn axis_displacement(pairs: [(usize, usize, bool); 2], axis: Axis) -> Result<f64> {
    let mut best: Option<f64> = None;
    for (a, b, usable) in pairs {
        if !usable {
            continue;
        }
        let d = b as f64 - a as f64;
        if best.map_or(true, |m| d.abs() > m.abs()) {
            best = Some(d);
        }
    }
    best.ok_or(Error::DisplacementUnavailable { axis })
}

pub fn horizontal_displacement(prev: &Instance, next: &Instance) -> Result<f64> {
    let (p, n) = (&prev.bbox, &next.bbox);
    let (tp, tn) = (&prev.truncated, &next.truncated);
    axis_displacement(
        [
            (p.left, n.left, !tp.left && !tn.left),
            (p.right, n.right, !tp.right && !tn.right),
        ],
        Axis::Horizontal,
    )
}

pub fn vertical_displacement(prev: &Instance, next: &Instance) -> Result<f64> {
    let (p, n) = (&prev.bbox, &next.bbox);
    let (tp, tn) = (&prev.truncated, &next.truncated);
    axis_displacement(
        [
            (p.top, n.top, !tp.top && !tn.top),
            (p.bottom, n.bottom, !tp.bottom && !tn.bottom),
        ],
        Axis::Vertical,
    )
}

/// Box displacement of a matched pair from `t-1` to `t+1`.
///
/// Fails with [`Error::DisplacementUnavailable`] when every boundary pair on an axis is truncated.
pub fn boundary_displacement(prev: &Instance, next: &Instance) -> Result<Displacement> {
    Ok(Displacement {
        dh: horizontal_displacement(prev, next)?,
        dv: vertical_displacement(prev, next)?,
    })
}

/// Which warped image is being rectified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `I_{t+1 -> t}`: objects move back by half the displacement.
    FromNext,
    /// `I_{t-1 -> t}`: objects move forward by half the displacement.
    FromPrev,
}

impl Direction {
    pub fn shift(&self, d: &Displacement) -> (f64, f64) {
        match self {
            Direction::FromNext => (-0.5 * d.dh, -0.5 * d.dv),
            Direction::FromPrev => (0.5 * d.dh, 0.5 * d.dv),
        }
    }
}

/// Where each rectified pixel comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Source {
    Keep,
    /// Index into [`RectifyPlan::taps`].
    Shift(u32),
    Donor,
}

/// Per-pixel provenance of a rectified image; linear in the image and donor values.
#[derive(Debug, Clone)]
pub(crate) struct RectifyPlan {
    pub sources: Vec<Source>,
    pub taps: Vec<Taps>,
}

impl RectifyPlan {
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            sources: vec![Source::Keep; width * height],
            taps: Vec::new(),
        }
    }

    /// Builds the plan from warped instance masks and their displacements (keyed by instance id).
    pub fn new(
        width: usize,
        height: usize,
        instances: &InstanceSet,
        displacements: &[(usize, Displacement)],
        direction: Direction,
    ) -> Self {
        let mut plan = Self::identity(width, height);
        let mut shifted: Vec<Vec<(usize, Taps)>> = Vec::new();
        for (id, disp) in displacements {
            let Some(inst) = instances.get(*id) else {
                continue;
            };
            let s = direction.shift(disp);
            if s == (0.0, 0.0) {
                continue;
            }
            let data = inst.mask.as_slice();
            // only pixels whose source cell touches the mask box can land inside it
            let b = &inst.bbox;
            let span = |lo: usize, hi: usize, shift: f64, n: usize| {
                let lo = (lo as f64 + shift - 1.0).floor().max(0.0) as usize;
                let hi = ((hi as f64 + shift + 1.0).ceil().max(-1.0) + 1.0).min(n as f64) as usize;
                lo..hi.max(lo)
            };
            let mut target = Vec::new();
            let mut inside = vec![false; width * height];
            for y in span(b.top, b.bottom, s.1, height) {
                for x in span(b.left, b.right, s.0, width) {
                    if let Some(t) = bilinear_taps(width, height, x as f64 - s.0, y as f64 - s.1) {
                        let m: f64 = t.iter().map(|(j, w)| if data[j] { w } else { 0.0 }).sum();
                        if m >= 0.5 {
                            target.push((y * width + x, t));
                            inside[y * width + x] = true;
                        }
                    }
                }
            }
            for (i, m) in data.iter().enumerate() {
                if *m && !inside[i] {
                    plan.sources[i] = Source::Donor;
                }
            }
            shifted.push(target);
        }
        for target in shifted {
            for (i, t) in target {
                plan.sources[i] = Source::Shift(plan.taps.len() as u32);
                plan.taps.push(t);
            }
        }
        plan
    }

    /// Pixels whose rectified value is not simply the input pixel.
    pub fn changed(&self) -> Vec<bool> {
        self.sources.iter().map(|s| *s != Source::Keep).collect()
    }

    pub fn apply(&self, img: &Image, donor: &Image) -> Image {
        let mut out = img.clone();
        let dpx = donor.pixels.as_slice();
        let dvalid = donor.valid.as_slice();
        for (i, s) in self.sources.iter().enumerate() {
            let v: Option<Rgb> = match s {
                Source::Keep => continue,
                Source::Shift(t) => sample_taps(img, &self.taps[*t as usize]),
                Source::Donor => dvalid[i].then(|| dpx[i]),
            };
            out.pixels.as_mut_slice()[i] = v.unwrap_or([0.0; 3]);
            out.valid.as_mut_slice()[i] = v.is_some();
        }
        out
    }

    /// Routes `grad` (w.r.t. the rectified image) back to the image and donor.
    pub fn backward(&self, grad: &[Rgb], grad_img: &mut [Rgb], grad_donor: &mut [Rgb]) {
        for (i, (s, g)) in self.sources.iter().zip(grad).enumerate() {
            match s {
                Source::Keep => add(&mut grad_img[i], g, 1.0),
                Source::Shift(t) => {
                    for (j, w) in self.taps[*t as usize].iter() {
                        add(&mut grad_img[j], g, w);
                    }
                }
                Source::Donor => add(&mut grad_donor[i], g, 1.0),
            }
        }
    }
}

#[inline]
fn add(acc: &mut Rgb, g: &Rgb, w: f64) {
    acc[0] += w * g[0];
    acc[1] += w * g[1];
    acc[2] += w * g[2];
}

/// Moves each instance of a warped image to its estimated frame-`t` position.
///
/// Instances are translated by half their displacement (toward `t`), the strip
/// they vacate is filled from `donor` at the same coordinates, and pixels that
/// remain without a valid source are marked invalid.
pub fn rectify_warped(
    img: &Image,
    warped_instances: &InstanceSet,
    displacements: &[(usize, Displacement)],
    direction: Direction,
    donor: &Image,
) -> Result<Image> {
    img.pixels.ensure_dims(&donor.pixels, "rectify_warped donor")?;
    for inst in warped_instances.iter() {
        img.pixels.ensure_dims(&inst.mask, "rectify_warped mask")?;
    }
    let (w, h) = img.dims();
    Ok(RectifyPlan::new(w, h, warped_instances, displacements, direction).apply(img, donor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::grid::PixelMask;

    fn inst(id: usize, w: usize, h: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> Instance {
        let mask = PixelMask::from_fn(w, h, |x, y| (x0..=x1).contains(&x) && (y0..=y1).contains(&y));
        Instance::from_mask(id, 1, mask).unwrap()
    }

    #[test]
    fn shifted_box_displacement() {
        let a = inst(0, 40, 20, 10, 20, 5, 9);
        let b = inst(0, 40, 20, 16, 26, 5, 9);
        let d = boundary_displacement(&a, &b).unwrap();
        assert_eq!(d, Displacement::new(6.0, 0.0));
        let back = boundary_displacement(&b, &a).unwrap();
        assert_eq!(back.dh, -6.0);
    }

    #[test]
    fn truncated_left_uses_right_boundary() {
        let a = inst(0, 40, 20, 0, 20, 5, 9);
        let b = inst(0, 40, 20, 0, 26, 5, 9);
        assert!(a.truncated.left && b.truncated.left);
        assert_eq!(horizontal_displacement(&a, &b).unwrap(), 6.0);
    }

    #[test]
    fn fully_truncated_axis_errors() {
        let a = inst(0, 10, 20, 0, 9, 5, 9);
        let b = inst(0, 10, 20, 0, 9, 6, 10);
        assert!(matches!(
            boundary_displacement(&a, &b),
            Err(Error::DisplacementUnavailable { axis: Axis::Horizontal })
        ));
        assert_eq!(vertical_displacement(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn largest_boundary_motion_wins_with_sign() {
        // growing object: left moves -1, right moves +4
        let a = inst(0, 40, 20, 10, 20, 5, 9);
        let b = inst(0, 40, 20, 9, 24, 5, 9);
        assert_eq!(horizontal_displacement(&a, &b).unwrap(), 4.0);
        let c = inst(0, 40, 20, 4, 21, 5, 9);
        assert_eq!(horizontal_displacement(&a, &c).unwrap(), -6.0);
    }

    fn striped(w: usize, h: usize) -> Image {
        Image::new(Grid::from_fn(w, h, |x, y| {
            [x as f64 / w as f64, y as f64 / h as f64, 0.5]
        }))
    }

    #[test]
    fn zero_displacement_is_identity() {
        let img = striped(12, 8);
        let donor = Image::constant(12, 8, [0.9; 3]);
        let set = InstanceSet::new(vec![inst(0, 12, 8, 3, 6, 2, 5)]);
        let out = rectify_warped(&img, &set, &[(0, Displacement::default())], Direction::FromNext, &donor).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn integer_shift_moves_object_and_fills_from_donor() {
        let (w, h) = (20, 10);
        // object occupies x in 8..=11 of the warped image, displacement +4 means shift -2 from t+1
        let mut img = Image::constant(w, h, [0.2; 3]);
        for y in 3..=6 {
            for x in 8..=11 {
                *img.pixels.get_mut(x, y) = [0.8, 0.1 * x as f64, 0.0];
            }
        }
        let donor = Image::new(Grid::from_fn(w, h, |x, y| [0.3, 0.01 * (x + y) as f64, 0.6]));
        let set = InstanceSet::new(vec![inst(0, w, h, 8, 11, 3, 6)]);
        let out = rectify_warped(
            &img,
            &set,
            &[(0, Displacement::new(4.0, 0.0))],
            Direction::FromNext,
            &donor,
        )
        .unwrap();
        for y in 3..=6 {
            for x in 6..=9 {
                assert_eq!(out.rgb(x, y), img.rgb(x + 2, y));
            }
            for x in 10..=11 {
                assert_eq!(out.rgb(x, y), donor.rgb(x, y));
            }
        }
        assert_eq!(out.rgb(0, 0), img.rgb(0, 0));
        assert!(out.valid.as_slice().iter().all(|v| *v));
    }

    #[test]
    fn half_pixel_shift_blends_within_input_range() {
        let (w, h) = (16, 9);
        let img = Image::new(Grid::from_fn(w, h, |x, y| {
            [0.2 + 0.04 * x as f64, 0.5, 0.1 * (y % 3) as f64]
        }));
        let donor = Image::new(Grid::from_fn(w, h, |x, y| {
            [0.9 - 0.03 * x as f64, 0.25, 0.05 * y as f64]
        }));
        let set = InstanceSet::new(vec![inst(0, w, h, 5, 9, 2, 6)]);
        let out = rectify_warped(
            &img,
            &set,
            &[(0, Displacement::new(3.0, 1.0))],
            Direction::FromPrev,
            &donor,
        )
        .unwrap();
        for c in 0..3 {
            let all = img
                .pixels
                .as_slice()
                .iter()
                .chain(donor.pixels.as_slice())
                .map(|p| p[c]);
            let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            for (p, v) in out.pixels.as_slice().iter().zip(out.valid.as_slice()) {
                if *v {
                    assert!(p[c] >= lo - 1e-12 && p[c] <= hi + 1e-12);
                }
            }
        }
        // constant inputs stay constant: blend weights sum to one
        let flat = Image::constant(w, h, [0.4; 3]);
        let out = rectify_warped(
            &flat,
            &set,
            &[(0, Displacement::new(3.0, 1.0))],
            Direction::FromPrev,
            &flat,
        )
        .unwrap();
        for (p, v) in out.pixels.as_slice().iter().zip(out.valid.as_slice()) {
            if *v {
                assert!((p[0] - 0.4).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn donor_invalid_leaves_hole() {
        let (w, h) = (10, 6);
        let img = striped(w, h);
        let mut donor = striped(w, h);
        donor.valid = Grid::filled(w, h, false);
        let set = InstanceSet::new(vec![inst(0, w, h, 4, 5, 2, 3)]);
        let out = rectify_warped(
            &img,
            &set,
            &[(0, Displacement::new(-4.0, 0.0))],
            Direction::FromPrev,
            &donor,
        )
        .unwrap();
        // shift by -2: object lands on 2..=3, vacated 4..=5 has no valid donor
        assert!(!out.is_valid(4, 2) && !out.is_valid(5, 3));
        assert!(out.is_valid(2, 2));
        assert_eq!(out.rgb(2, 2), img.rgb(4, 2));
    }

    #[test]
    fn backward_is_adjoint_of_apply() {
        let (w, h) = (14, 9);
        let img = striped(w, h);
        let donor = Image::new(Grid::from_fn(w, h, |x, y| [0.1 * y as f64, 0.3, 0.05 * x as f64]));
        let set = InstanceSet::new(vec![inst(0, w, h, 4, 8, 2, 5)]);
        let plan = RectifyPlan::new(w, h, &set, &[(0, Displacement::new(3.0, 1.0))], Direction::FromNext);
        let g: Vec<Rgb> = (0..w * h).map(|i| [(i % 7) as f64, 1.0, -((i % 3) as f64)]).collect();
        let mut gi = vec![[0.0; 3]; w * h];
        let mut gd = vec![[0.0; 3]; w * h];
        plan.backward(&g, &mut gi, &mut gd);
        let out = plan.apply(&img, &donor);
        let lhs: f64 = out
            .pixels
            .as_slice()
            .iter()
            .zip(&g)
            .map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
            .sum();
        let dot = |x: &[Rgb], y: &[Rgb]| -> f64 {
            x.iter()
                .zip(y)
                .map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
                .sum()
        };
        let rhs = dot(img.pixels.as_slice(), &gi) + dot(donor.pixels.as_slice(), &gd);
        assert!((lhs - rhs).abs() < 1e-9);
    }
}
