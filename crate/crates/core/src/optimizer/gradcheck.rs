use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::objective::{Evaluation, Frozen, Objective};
use crate::error::Result;
use crate::grid::DepthMap;

/// Central differences of the total loss at the listed pixels, with hints and target frozen.
///
/// The result has one entry per pixel; unlisted pixels are 0.
pub fn finite_difference_gradient(
    objective: &Objective,
    depth: &DepthMap,
    weights: [f64; 2],
    frozen: &Frozen,
    pixels: &[usize],
    h: f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; depth.len()];
    let mut probe = depth.clone();
    for &i in pixels {
        let d = depth.as_slice()[i];
        probe.as_mut_slice()[i] = d + h;
        let plus = objective.evaluate(&probe, weights, Some(frozen), false)?.terms.total;
        probe.as_mut_slice()[i] = d - h;
        let minus = objective.evaluate(&probe, weights, Some(frozen), false)?.terms.total;
        probe.as_mut_slice()[i] = d;
        out[i] = (plus - minus) / (2.0 * h);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PixelCheck {
    pub pixel: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientCheck {
    pub checks: Vec<PixelCheck>,
    /// Sampled pixels rejected as non-smooth within `+-h`.
    pub skipped: usize,
}

impl GradientCheck {
    pub fn agreeing(&self, tolerance: f64) -> usize {
        self.checks.iter().filter(|c| c.relative_error <= tolerance).count()
    }

    pub fn fraction_within(&self, tolerance: f64) -> f64 {
        if self.checks.is_empty() {
            return 0.0;
        }
        self.agreeing(tolerance) as f64 / self.checks.len() as f64
    }
}

/// `|a - b| / max(|a|, |b|)`, 0 when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn cell(e: &Evaluation, i: usize) -> [Option<(i64, i64)>; 2] {
    let c = |f: &crate::geometry::WarpField| f.coords[i].map(|q| (q.u.floor() as i64, q.v.floor() as i64));
    [
        c(&e.reconstructed.views.field_prev),
        c(&e.reconstructed.views.field_next),
    ]
}

/// Whether `|d - target|` terms have a kink within `+-h` of pixel `i`; known before probing.
fn near_target_kink(objective: &Objective, base: &Evaluation, depth: &DepthMap, i: usize, h: f64) -> bool {
    let d = depth.as_slice()[i];
    let masked = objective.mask.as_slice()[i];
    match (masked, &objective.teacher, &base.fused) {
        (true, Some(t), _) => (d - t.as_slice()[i]).abs() <= h,
        (false, _, Some(f)) => (d - f.depth.as_slice()[i]).abs() <= h,
        _ => false,
    }
}

/// Same selection, validity and sampling cells at both probes as at the base point.
fn same_piece(base: &Evaluation, plus: &Evaluation, minus: &Evaluation, i: usize) -> bool {
    let sel = &base.reconstructed.selection;
    [plus, minus].iter().all(|probe| {
        let s = &probe.reconstructed.selection;
        s.index == sel.index && s.error.valid == sel.error.valid && cell(probe, i) == cell(base, i)
    })
}

/// Compares analytic and central-difference gradients on up to `samples` smooth pixels drawn with `seed`.
///
/// Candidate pixels are visited in a seeded random order. Pixels within `h`
/// of their consistency or distillation target, or whose selection, validity
/// or bilinear cell changes within `+-h`, are skipped.
pub fn gradient_check(
    objective: &Objective,
    depth: &DepthMap,
    weights: [f64; 2],
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<GradientCheck> {
    let base = objective.evaluate(depth, weights, None, true)?;
    let analytic = base.gradient.clone().expect("requested");
    let frozen = base.frozen();
    let mut order: Vec<usize> = (0..depth.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = GradientCheck::default();
    let mut probe = depth.clone();
    for i in order {
        if out.checks.len() >= samples {
            break;
        }
        if near_target_kink(objective, &base, depth, i, h) {
            out.skipped += 1;
            continue;
        }
        let d = depth.as_slice()[i];
        probe.as_mut_slice()[i] = d + h;
        let plus = objective.evaluate(&probe, weights, Some(&frozen), false)?;
        probe.as_mut_slice()[i] = d - h;
        let minus = objective.evaluate(&probe, weights, Some(&frozen), false)?;
        probe.as_mut_slice()[i] = d;
        if !same_piece(&base, &plus, &minus, i) {
            out.skipped += 1;
            continue;
        }
        let numeric = (plus.terms.total - minus.terms.total) / (2.0 * h);
        out.checks.push(PixelCheck {
            pixel: i,
            analytic: analytic[i],
            numeric,
            relative_error: relative_error(analytic[i], numeric),
        });
    }
    Ok(out)
}
