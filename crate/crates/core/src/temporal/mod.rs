//! Temporal hints: instance correspondence between the two warped neighbors,
//! boundary displacement, motion rectification and the four-candidate
//! reconstruction.

mod hungarian;
mod instance;
mod rectify;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use hungarian::{hungarian, match_instances, pair_cost, Correspondence};
pub use instance::{iou, BBox, Instance, InstanceSet, Truncation};
pub(crate) use rectify::RectifyPlan;
pub use rectify::{
    boundary_displacement, horizontal_displacement, rectify_warped, vertical_displacement, Direction, Displacement,
};

use crate::error::Result;
use crate::geometry::WarpField;
use crate::grid::{DepthMap, ErrorMap, Image, Rgb};
use crate::photometric::{photometric_error, photometric_error_update, select_by_error, select_pixels, Selection};
use crate::scenesim::Triplet;

/// How the target frame is reconstructed from its neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// Per-pixel best of the two warped neighbors.
    TwoWay,
    /// Best of the two warped neighbors and their motion-rectified versions.
    FourWay,
}

impl Reconstruction {
    pub fn name(&self) -> &'static str {
        match self {
            Reconstruction::TwoWay => "two_way",
            Reconstruction::FourWay => "four_way",
        }
    }
}

/// Both neighbors warped into frame `t` under one depth hypothesis.
#[derive(Debug, Clone)]
pub struct Views {
    pub(crate) field_prev: WarpField,
    pub(crate) field_next: WarpField,
    pub warped_prev: Image,
    pub warped_next: Image,
    /// `d(warped)/d(depth)` per pixel; empty unless requested.
    pub(crate) deriv_prev: Vec<Rgb>,
    pub(crate) deriv_next: Vec<Rgb>,
}

impl Views {
    pub fn new(tri: &Triplet, depth: &DepthMap) -> Result<Self> {
        Self::build(tri, depth, false)
    }

    pub(crate) fn build(tri: &Triplet, depth: &DepthMap, derivatives: bool) -> Result<Self> {
        let k = tri.intrinsics();
        let field_prev = WarpField::new(depth, k, &tri.pose_prev)?;
        let field_next = WarpField::new(depth, k, &tri.pose_next)?;
        let (warped_prev, deriv_prev, warped_next, deriv_next) = if derivatives {
            let (a, da) = field_prev.sample_with_depth_derivative(tri.prev());
            let (b, db) = field_next.sample_with_depth_derivative(tri.next());
            (a, da, b, db)
        } else {
            (
                field_prev.sample(tri.prev()),
                Vec::new(),
                field_next.sample(tri.next()),
                Vec::new(),
            )
        };
        Ok(Self {
            field_prev,
            field_next,
            warped_prev,
            warped_next,
            deriv_prev,
            deriv_next,
        })
    }
}

/// Resamples instance masks with a warp field (bilinear, thresholded at 0.5).
fn warp_instances(field: &WarpField, set: &InstanceSet) -> InstanceSet {
    InstanceSet::new(
        set.iter()
            .filter_map(|inst| {
                let b = &inst.bbox;
                let mask = field.sample_mask(&inst.mask, [b.left, b.right, b.top, b.bottom]);
                Instance::from_mask(inst.id, inst.class_id, mask).ok()
            })
            .collect(),
    )
}

/// One matched instance with its measured displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedMotion {
    pub correspondence: Correspondence,
    pub displacement: Displacement,
    /// Whether either axis had every boundary truncated (that axis is then not shifted).
    pub partial: bool,
}

/// Temporal hints for one depth hypothesis, held fixed while differentiating.
#[derive(Debug, Clone)]
pub struct TemporalHints {
    pub warped_instances_prev: InstanceSet,
    pub warped_instances_next: InstanceSet,
    pub motions: Vec<MatchedMotion>,
    pub(crate) plan_prev: RectifyPlan,
    pub(crate) plan_next: RectifyPlan,
}

impl TemporalHints {
    pub fn compute(tri: &Triplet, views: &Views) -> Self {
        let wp = warp_instances(&views.field_prev, &tri.instances[0]);
        let wn = warp_instances(&views.field_next, &tri.instances[2]);
        let motions: Vec<MatchedMotion> = match_instances(&wp, &wn)
            .into_iter()
            .map(|c| {
                let (a, b) = (wp.get(c.prev).expect("matched"), wn.get(c.next).expect("matched"));
                let dh = horizontal_displacement(a, b);
                let dv = vertical_displacement(a, b);
                MatchedMotion {
                    correspondence: c,
                    partial: dh.is_err() || dv.is_err(),
                    displacement: Displacement::new(dh.unwrap_or(0.0), dv.unwrap_or(0.0)),
                }
            })
            .collect();
        let (w, h) = views.warped_prev.dims();
        let by_prev: Vec<(usize, Displacement)> = motions
            .iter()
            .map(|m| (m.correspondence.prev, m.displacement))
            .collect();
        let by_next: Vec<(usize, Displacement)> = motions
            .iter()
            .map(|m| (m.correspondence.next, m.displacement))
            .collect();
        Self {
            plan_prev: RectifyPlan::new(w, h, &wp, &by_prev, Direction::FromPrev),
            plan_next: RectifyPlan::new(w, h, &wn, &by_next, Direction::FromNext),
            warped_instances_prev: wp,
            warped_instances_next: wn,
            motions,
        }
    }

    /// Rectified `(I_{t-1 -> t}, I_{t+1 -> t})`.
    pub fn rectify(&self, views: &Views) -> (Image, Image) {
        (
            self.plan_prev.apply(&views.warped_prev, &views.warped_next),
            self.plan_next.apply(&views.warped_next, &views.warped_prev),
        )
    }

    /// Correspondence table: `prev_id,next_id,iou,dh,dv,partial`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["prev_id", "next_id", "iou", "dh", "dv", "partial"])?;
        for m in &self.motions {
            w.write_record([
                m.correspondence.prev.to_string(),
                m.correspondence.next.to_string(),
                format!("{:.6}", m.correspondence.iou),
                format!("{:.3}", m.displacement.dh),
                format!("{:.3}", m.displacement.dv),
                m.partial.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Four-candidate reconstruction: per pixel, the lowest-error of the warped and rectified neighbors.
///
/// Candidates are ranked `[warped_prev, warped_next, rectified_prev, rectified_next]`; ties keep the earlier one.
pub fn temporal_reconstruct(
    warped_prev: &Image,
    warped_next: &Image,
    rect_prev: &Image,
    rect_next: &Image,
    target: &Image,
) -> Result<(Image, ErrorMap)> {
    let candidates = [warped_prev, warped_next, rect_prev, rect_next]
        .into_iter()
        .map(|c| Ok((c.clone(), photometric_error(c, target)?)))
        .collect::<Result<Vec<_>>>()?;
    select_pixels(&candidates)
}

/// Everything produced while reconstructing frame `t` under one depth map.
#[derive(Debug, Clone)]
pub struct Reconstructed {
    pub views: Views,
    pub hints: Option<TemporalHints>,
    /// Candidate images in selection order.
    pub candidates: Vec<Image>,
    pub errors: Vec<ErrorMap>,
    pub selection: Selection,
}

impl Reconstructed {
    pub fn error(&self) -> &ErrorMap {
        &self.selection.error
    }
}

/// Reconstructs frame `t`; `frozen` reuses hints from an earlier evaluation instead of recomputing them.
pub fn reconstruct(
    tri: &Triplet,
    depth: &DepthMap,
    mode: Reconstruction,
    frozen: Option<&TemporalHints>,
) -> Result<Reconstructed> {
    reconstruct_impl(tri, depth, mode, frozen, false)
}

pub(crate) fn reconstruct_impl(
    tri: &Triplet,
    depth: &DepthMap,
    mode: Reconstruction,
    frozen: Option<&TemporalHints>,
    derivatives: bool,
) -> Result<Reconstructed> {
    let views = Views::build(tri, depth, derivatives)?;
    let target = tri.current();
    let mut candidates = vec![views.warped_prev.clone(), views.warped_next.clone()];
    let hints = match mode {
        Reconstruction::TwoWay => None,
        Reconstruction::FourWay => {
            let hints = frozen.cloned().unwrap_or_else(|| TemporalHints::compute(tri, &views));
            let (rp, rn) = hints.rectify(&views);
            candidates.push(rp);
            candidates.push(rn);
            Some(hints)
        }
    };
    let mut errors = vec![
        photometric_error(&candidates[0], target)?,
        photometric_error(&candidates[1], target)?,
    ];
    if let Some(h) = &hints {
        // rectified candidates only differ from their sources where the plan moves pixels
        errors.push(photometric_error_update(
            &candidates[2],
            target,
            &errors[0],
            &h.plan_prev.changed(),
        ));
        errors.push(photometric_error_update(
            &candidates[3],
            target,
            &errors[1],
            &h.plan_next.changed(),
        ));
    }
    let selection = select_by_error(&errors.iter().collect::<Vec<_>>())?;
    Ok(Reconstructed {
        views,
        hints,
        candidates,
        errors,
        selection,
    })
}

/// Per-pixel reconstruction error of frame `t` under `depth`.
pub fn reconstruction_error(tri: &Triplet, depth: &DepthMap, mode: Reconstruction) -> Result<ErrorMap> {
    Ok(reconstruct(tri, depth, mode, None)?.selection.error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::mask_count;
    use crate::scenesim::{presets, render_triplet};

    #[test]
    fn identical_candidates_pass_through() {
        let tri = render_triplet(&presets::static_scene(1)).unwrap();
        let img = tri.current().clone();
        let (out, e) = temporal_reconstruct(&img, &img, &img, &img, &img).unwrap();
        assert_eq!(out, img);
        assert!(e.values.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn static_scene_four_way_equals_two_way() {
        let mut cfg = presets::static_scene(2);
        cfg.ego_motion = crate::geometry::Pose::identity();
        let tri = render_triplet(&cfg).unwrap();
        let a = reconstruct(&tri, tri.gt_depth(), Reconstruction::TwoWay, None).unwrap();
        let b = reconstruct(&tri, tri.gt_depth(), Reconstruction::FourWay, None).unwrap();
        assert_eq!(a.selection.error, b.selection.error);
        assert!(b.hints.unwrap().motions.iter().all(|m| m.displacement.is_zero()));
    }

    #[test]
    fn four_way_dominates_and_helps_on_moving_object() {
        let tri = render_triplet(&presets::dynamic_scene(4)).unwrap();
        let a = reconstruct(&tri, tri.gt_depth(), Reconstruction::TwoWay, None).unwrap();
        let b = reconstruct(&tri, tri.gt_depth(), Reconstruction::FourWay, None).unwrap();
        for i in 0..a.error().values.len() {
            if a.error().valid.as_slice()[i] {
                assert!(b.error().valid.as_slice()[i]);
                assert!(b.error().values.as_slice()[i] <= a.error().values.as_slice()[i]);
            }
        }
        let mask = tri.moving_mask();
        assert!(mask_count(&mask) > 0);
        let ea = a.error().masked_mean(Some(&mask)).unwrap();
        let eb = b.error().masked_mean(Some(&mask)).unwrap();
        assert!(eb < ea, "{eb} !< {ea}");
        assert_eq!(b.hints.as_ref().unwrap().motions.len(), 1);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let tri = render_triplet(&presets::dynamic_scene(4)).unwrap();
        let r = reconstruct(&tri, tri.gt_depth(), Reconstruction::FourWay, None).unwrap();
        let mut buf = Vec::new();
        r.hints.unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "prev_id,next_id,iou,dh,dv,partial");
        assert_eq!(lines.count(), 1);
    }
}
