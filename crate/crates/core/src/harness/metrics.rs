//! Depth evaluation: per-image median scaling, an 80 m cap and the seven
//! standard error and accuracy measures.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DepthMap, PixelMask};

pub const MIN_DEPTH: f64 = 1e-3;
pub const MAX_DEPTH: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub abs_rel: f64,
    pub sq_rel: f64,
    /// Meters.
    pub rmse: f64,
    pub rmse_log: f64,
    /// Fraction with `max(p/g, g/p) < 1.25`.
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn selected<'a>(pred: &'a DepthMap, gt: &'a DepthMap, mask: &'a PixelMask) -> impl Iterator<Item = (f64, f64)> + 'a {
    pred.as_slice()
        .iter()
        .zip(gt.as_slice())
        .zip(mask.as_slice())
        .filter(|(_, m)| **m)
        .map(|((p, g), _)| (*p, *g))
}

fn check(pred: &DepthMap, gt: &DepthMap, mask: &PixelMask) -> Result<()> {
    if !pred.same_dims(gt) || !pred.same_dims(mask) {
        return Err(Error::contract(
            "prediction, ground truth and mask must share dimensions",
        ));
    }
    if let Some((p, g)) =
        selected(pred, gt, mask).find(|(p, g)| !(*p > 0.0 && *g > 0.0 && p.is_finite() && g.is_finite()))
    {
        return Err(Error::domain(format!(
            "depths must be positive and finite, got pred {p} gt {g}"
        )));
    }
    Ok(())
}

/// `median(gt) / median(pred)` over the masked pixels.
pub fn median_scale(pred: &DepthMap, gt: &DepthMap, valid: &PixelMask) -> Result<f64> {
    check(pred, gt, valid)?;
    let (p, g): (Vec<f64>, Vec<f64>) = selected(pred, gt, valid).unzip();
    if p.is_empty() {
        return Err(Error::contract("no valid pixels to evaluate"));
    }
    Ok(median(g) / median(p))
}

/// Metrics of `scale * pred` against `gt` over `region`, both capped to `[MIN_DEPTH, MAX_DEPTH]`.
pub fn scaled_metrics(pred: &DepthMap, gt: &DepthMap, region: &PixelMask, scale: f64) -> Result<MetricsReport> {
    check(pred, gt, region)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::domain(format!("scale must be positive, got {scale}")));
    }
    let mut s = [0.0; 7];
    let mut n = 0usize;
    for (p, g) in selected(pred, gt, region) {
        let p = (p * scale).clamp(MIN_DEPTH, MAX_DEPTH);
        let g = g.clamp(MIN_DEPTH, MAX_DEPTH);
        let ratio = (p / g).max(g / p);
        s[0] += (p - g).abs() / g;
        s[1] += (p - g).powi(2) / g;
        s[2] += (p - g).powi(2);
        s[3] += (p.ln() - g.ln()).powi(2);
        s[4] += f64::from(u8::from(ratio < 1.25));
        s[5] += f64::from(u8::from(ratio < 1.25f64.powi(2)));
        s[6] += f64::from(u8::from(ratio < 1.25f64.powi(3)));
        n += 1;
    }
    if n == 0 {
        return Err(Error::contract("no valid pixels to evaluate"));
    }
    let n = n as f64;
    Ok(MetricsReport {
        abs_rel: s[0] / n,
        sq_rel: s[1] / n,
        rmse: (s[2] / n).sqrt(),
        rmse_log: (s[3] / n).sqrt(),
        a1: s[4] / n,
        a2: s[5] / n,
        a3: s[6] / n,
    })
}

/// Median-scaled, capped metrics over the valid pixels.
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap, valid: &PixelMask) -> Result<MetricsReport> {
    let scale = median_scale(pred, gt, valid)?;
    scaled_metrics(pred, gt, valid, scale)
}

/// Metrics over `region` using the median scale of the whole valid area.
pub fn region_metrics(pred: &DepthMap, gt: &DepthMap, valid: &PixelMask, region: &PixelMask) -> Result<MetricsReport> {
    let scale = median_scale(pred, gt, valid)?;
    if !region.same_dims(valid) {
        return Err(Error::contract("region and valid mask must share dimensions"));
    }
    let both = PixelMask::from_fn(region.width(), region.height(), |x, y| {
        *region.get(x, y) && *valid.get(x, y)
    });
    scaled_metrics(pred, gt, &both, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn all(w: usize, h: usize) -> PixelMask {
        PixelMask::filled(w, h, true)
    }

    #[test]
    fn perfect_prediction() {
        let gt = DepthMap::from_fn(5, 4, |x, y| 3.0 + x as f64 + 0.5 * y as f64);
        let m = depth_metrics(&gt, &gt, &all(5, 4)).unwrap();
        assert_eq!((m.abs_rel, m.sq_rel, m.rmse, m.rmse_log), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((m.a1, m.a2, m.a3), (1.0, 1.0, 1.0));
    }

    #[test]
    fn uniform_scale_cancels() {
        let gt = DepthMap::from_fn(6, 3, |x, y| 2.0 + x as f64 * y as f64);
        let pred = gt.map(|d| 2.0 * d);
        let m = depth_metrics(&pred, &gt, &all(6, 3)).unwrap();
        assert!(m.abs_rel < 1e-15 && m.a1 == 1.0);
    }

    #[test]
    fn half_offset_matches_hand_values() {
        // gt = 10 everywhere, pred = 11 on half the pixels: median of pred is
        // 10.5, so the scale is 10/10.5 and the two halves become 10/1.05 and 11/1.05
        let gt = DepthMap::filled(4, 2, 10.0);
        let pred = DepthMap::from_fn(4, 2, |x, _| if x < 2 { 11.0 } else { 10.0 });
        let m = depth_metrics(&pred, &gt, &all(4, 2)).unwrap();
        let lo = 10.0 / 1.05;
        let hi = 11.0 / 1.05;
        let abs_rel = 0.5 * ((lo - 10.0f64).abs() + (hi - 10.0f64).abs()) / 10.0;
        let sq = 0.5 * ((lo - 10.0f64).powi(2) + (hi - 10.0f64).powi(2));
        let log = 0.5 * ((lo / 10.0f64).ln().powi(2) + (hi / 10.0f64).ln().powi(2));
        assert_relative_eq!(m.abs_rel, abs_rel, epsilon = 1e-12);
        assert_relative_eq!(m.sq_rel, sq / 10.0, epsilon = 1e-12);
        assert_relative_eq!(m.rmse, sq.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(m.rmse_log, log.sqrt(), epsilon = 1e-12);
        assert_eq!((m.a1, m.a2, m.a3), (1.0, 1.0, 1.0));
    }

    #[test]
    fn cap_applies_to_both_maps() {
        let gt = DepthMap::from_vec(2, 1, vec![100.0, 10.0]).unwrap();
        let pred = DepthMap::from_vec(2, 1, vec![90.0, 10.0]).unwrap();
        let m = scaled_metrics(&pred, &gt, &all(2, 1), 1.0).unwrap();
        assert_eq!(m.abs_rel, 0.0);
    }

    #[test]
    fn errors() {
        let gt = DepthMap::filled(2, 2, 1.0);
        let none = PixelMask::filled(2, 2, false);
        assert!(matches!(depth_metrics(&gt, &gt, &none), Err(Error::Contract(_))));
        let bad = DepthMap::filled(2, 2, 0.0);
        assert!(matches!(depth_metrics(&bad, &gt, &all(2, 2)), Err(Error::Domain(_))));
        let small = DepthMap::filled(1, 2, 1.0);
        assert!(depth_metrics(&small, &gt, &all(2, 2)).is_err());
    }

    #[test]
    fn accuracies_are_exact_for_awkward_counts() {
        let gt = DepthMap::from_fn(7, 7, |x, y| 1.0 + (x + 7 * y) as f64);
        let m = depth_metrics(&gt, &gt, &all(7, 7)).unwrap();
        assert_eq!([m.a1, m.a2, m.a3], [1.0; 3]);
    }
}
