//! Loss assembly for the student: masked reprojection, consistency with the
//! teacher, smoothness, the fused distillation target and the weighted total.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DepthMap, ErrorMap, Grid, Image, PixelMask};
use crate::photometric::{reprojection_loss, smoothness_loss};
use crate::scenesim::Triplet;
use crate::temporal::{reconstruction_error, Reconstruction};

/// Default smoothness weight.
pub const SMOOTHNESS_WEIGHT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossTerms {
    pub reproj: f64,
    pub consis: f64,
    pub smooth: f64,
    pub ori: f64,
    pub distil: f64,
    pub total: f64,
    pub lambda_s: f64,
}

fn check_positive(d: &DepthMap, what: &str) -> Result<()> {
    match d.as_slice().iter().find(|v| !(**v > 0.0)) {
        Some(v) => Err(Error::domain(format!("{what}: depth must be positive, got {v}"))),
        None => Ok(()),
    }
}

fn masked_l1(a: &DepthMap, b: &DepthMap, mask: &PixelMask, select: bool) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((x, y), m) in a.as_slice().iter().zip(b.as_slice()).zip(mask.as_slice()) {
        if *m == select {
            sum += (x - y).abs();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean `|D_s - D_teacher|` over the masked pixels; 0 when the mask is empty.
pub fn consistency_loss(d_s: &DepthMap, d_teacher: &DepthMap, mask: &PixelMask) -> Result<f64> {
    d_s.ensure_dims(d_teacher, "consistency_loss")?;
    d_s.ensure_dims(mask, "consistency_loss mask")?;
    check_positive(d_s, "consistency_loss")?;
    check_positive(d_teacher, "consistency_loss")?;
    Ok(masked_l1(d_s, d_teacher, mask, true))
}

/// Student loss before distillation: reprojection outside the mask, consistency inside it, plus smoothness.
pub fn original_loss(
    error: &ErrorMap,
    d_s: &DepthMap,
    d_teacher: &DepthMap,
    mask: &PixelMask,
    img: &Image,
    lambda_s: f64,
) -> Result<LossTerms> {
    let reproj = reprojection_loss(error, &mask.map(|m| !m))?;
    let consis = consistency_loss(d_s, d_teacher, mask)?;
    let smooth = smoothness_loss(d_s, img)?;
    let ori = reproj + consis + lambda_s * smooth;
    Ok(LossTerms {
        reproj,
        consis,
        smooth,
        ori,
        total: ori,
        lambda_s,
        ..Default::default()
    })
}

/// Target depth for distillation together with the error it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedTarget {
    pub depth: DepthMap,
    pub error: ErrorMap,
    /// Pixels where the student depth was taken.
    pub from_student: PixelMask,
}

/// Per pixel, the depth whose reconstruction error is lower; ties and jointly invalid pixels keep the teacher.
pub fn fuse_with_errors(
    d_teacher: &DepthMap,
    e_teacher: &ErrorMap,
    d_student: &DepthMap,
    e_student: &ErrorMap,
) -> Result<FusedTarget> {
    d_teacher.ensure_dims(d_student, "fuse_target_depth")?;
    d_teacher.ensure_dims(&e_teacher.values, "fuse_target_depth teacher error")?;
    d_teacher.ensure_dims(&e_student.values, "fuse_target_depth student error")?;
    let (w, h) = d_teacher.dims();
    let n = w * h;
    let (et, es) = (e_teacher.values.as_slice(), e_student.values.as_slice());
    let (vt, vs) = (e_teacher.valid.as_slice(), e_student.valid.as_slice());
    let from_student: Vec<bool> = (0..n).map(|i| vs[i] && (!vt[i] || es[i] < et[i])).collect();
    let pick = |i: usize, a: f64, b: f64| if from_student[i] { b } else { a };
    let depth = (0..n)
        .map(|i| pick(i, d_teacher.as_slice()[i], d_student.as_slice()[i]))
        .collect();
    let values = (0..n).map(|i| pick(i, et[i], es[i])).collect();
    let valid = (0..n).map(|i| vt[i] || vs[i]).collect();
    Ok(FusedTarget {
        depth: Grid::from_vec(w, h, depth)?,
        error: ErrorMap::new(Grid::from_vec(w, h, values)?, Grid::from_vec(w, h, valid)?)?,
        from_student: Grid::from_vec(w, h, from_student)?,
    })
}

/// Evaluates the reconstruction error under both depth maps and fuses them.
pub fn fuse_target_depth(
    d_teacher: &DepthMap,
    d_student: &DepthMap,
    tri: &Triplet,
    mode: Reconstruction,
) -> Result<FusedTarget> {
    check_positive(d_teacher, "fuse_target_depth")?;
    check_positive(d_student, "fuse_target_depth")?;
    let e_teacher = reconstruction_error(tri, d_teacher, mode)?;
    let e_student = reconstruction_error(tri, d_student, mode)?;
    fuse_with_errors(d_teacher, &e_teacher, d_student, &e_student)
}

/// Mean `|D_s - D_td|` outside the mask; 0 when the mask covers everything.
pub fn distillation_loss(d_s: &DepthMap, d_td: &DepthMap, mask: &PixelMask) -> Result<f64> {
    d_s.ensure_dims(d_td, "distillation_loss")?;
    d_s.ensure_dims(mask, "distillation_loss mask")?;
    Ok(masked_l1(d_s, d_td, mask, false))
}

/// `w1 * L_ori + w2 * L_distil`.
pub fn total_loss(l_ori: f64, l_distil: f64, weights: [f64; 2]) -> Result<f64> {
    if !(weights[0] >= 0.0 && weights[1] >= 0.0) {
        return Err(Error::contract(format!(
            "loss weights must be non-negative, got {weights:?}"
        )));
    }
    Ok(weights[0] * l_ori + weights[1] * l_distil)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn halves(w: usize, h: usize) -> PixelMask {
        PixelMask::from_fn(w, h, |x, _| x < w / 2)
    }

    #[test]
    fn consistency_cases() {
        let a = DepthMap::filled(4, 2, 3.0);
        assert_eq!(consistency_loss(&a, &a, &PixelMask::filled(4, 2, true)).unwrap(), 0.0);
        let b = DepthMap::filled(4, 2, 3.5);
        assert_relative_eq!(consistency_loss(&a, &b, &PixelMask::filled(4, 2, true)).unwrap(), 0.5);
        let c = DepthMap::from_fn(4, 2, |x, _| if x < 2 { 4.0 } else { 12.0 });
        assert_relative_eq!(consistency_loss(&a, &c, &halves(4, 2)).unwrap(), 1.0);
        assert_eq!(consistency_loss(&a, &c, &PixelMask::filled(4, 2, false)).unwrap(), 0.0);
        assert!(consistency_loss(&a, &DepthMap::filled(3, 2, 1.0), &halves(4, 2)).is_err());
    }

    #[test]
    fn original_loss_composition() {
        let img = Image::constant(4, 3, [0.5; 3]);
        let d = DepthMap::filled(4, 3, 5.0);
        let zero = ErrorMap::uniform(4, 3, 0.0);
        let terms = original_loss(&zero, &d, &d, &PixelMask::filled(4, 3, false), &img, SMOOTHNESS_WEIGHT).unwrap();
        assert_eq!(terms.ori, 0.0);

        let e = ErrorMap::uniform(4, 3, 0.3);
        let t = DepthMap::filled(4, 3, 6.0);
        let all = PixelMask::filled(4, 3, true);
        let terms = original_loss(&e, &d, &t, &all, &img, SMOOTHNESS_WEIGHT).unwrap();
        assert_eq!(terms.reproj, 0.0);
        assert_relative_eq!(terms.ori, terms.consis + SMOOTHNESS_WEIGHT * terms.smooth);

        let ds = DepthMap::from_fn(4, 3, |x, y| 4.0 + x as f64 + 0.5 * y as f64);
        let mask = halves(4, 3);
        let terms = original_loss(&e, &ds, &t, &mask, &img, SMOOTHNESS_WEIGHT).unwrap();
        let expected =
            0.3 + consistency_loss(&ds, &t, &mask).unwrap() + SMOOTHNESS_WEIGHT * smoothness_loss(&ds, &img).unwrap();
        assert_relative_eq!(terms.ori, expected, epsilon = 1e-15);
    }

    #[test]
    fn distillation_cases() {
        let a = DepthMap::filled(2, 2, 2.0);
        assert_eq!(distillation_loss(&a, &a, &PixelMask::filled(2, 2, false)).unwrap(), 0.0);
        let b = DepthMap::filled(2, 2, 2.3);
        assert_relative_eq!(
            distillation_loss(&a, &b, &PixelMask::filled(2, 2, false)).unwrap(),
            0.3,
            epsilon = 1e-12
        );
        assert_eq!(distillation_loss(&a, &b, &PixelMask::filled(2, 2, true)).unwrap(), 0.0);
    }

    #[test]
    fn total_loss_cases() {
        assert_relative_eq!(total_loss(0.4, 0.2, [0.5, 0.5]).unwrap(), 0.3, epsilon = 1e-15);
        assert_eq!(total_loss(0.4, 0.2, [1.0, 0.0]).unwrap(), 0.4);
        assert_relative_eq!(total_loss(1.0, 2.0, [0.3, 0.7]).unwrap(), 1.7, epsilon = 1e-15);
        assert!(total_loss(1.0, 2.0, [-0.1, 1.0]).is_err());
    }

    #[test]
    fn fusion_prefers_lower_error_and_teacher_on_ties() {
        let dt = DepthMap::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let ds = DepthMap::from_vec(3, 1, vec![10.0, 20.0, 30.0]).unwrap();
        let et = ErrorMap::new(
            Grid::from_vec(3, 1, vec![0.2, 0.1, 0.3]).unwrap(),
            Grid::filled(3, 1, true),
        )
        .unwrap();
        let es = ErrorMap::new(
            Grid::from_vec(3, 1, vec![0.1, 0.1, 0.5]).unwrap(),
            Grid::filled(3, 1, true),
        )
        .unwrap();
        let f = fuse_with_errors(&dt, &et, &ds, &es).unwrap();
        assert_eq!(f.depth.as_slice(), &[10.0, 2.0, 3.0]);
        for i in 0..3 {
            assert!(f.error.values.as_slice()[i] <= et.values.as_slice()[i]);
            assert!(f.error.values.as_slice()[i] <= es.values.as_slice()[i]);
        }
    }
}
