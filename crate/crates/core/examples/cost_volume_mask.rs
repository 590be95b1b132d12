//! Builds the plane-sweep cost volume, takes its argmin depth and marks the
//! pixels where it disagrees with a teacher by more than a factor of two.

use dyndepth::costvolume::{argmin_depth, build_cost_volume, uncertainty_mask};
use dyndepth::grid::mask_count;
use dyndepth::optimizer::{abs_rel, teacher_depth, LossMode, OptimConfig};
use dyndepth::scenesim::{presets, render_triplet};

fn main() -> dyndepth::Result<()> {
    let tri = render_triplet(&presets::dynamic_scene(2))?;
    let cfg = OptimConfig {
        loss_mode: LossMode::Baseline,
        ..OptimConfig::default()
    };
    let planes = cfg.depth_planes()?;
    let cv = build_cost_volume(tri.prev(), tri.current(), tri.intrinsics(), &tri.pose_prev, &planes)?;
    let d_cv = argmin_depth(&cv, &planes)?;
    let (teacher, _) = teacher_depth(&tri, &cfg)?;
    let mask = uncertainty_mask(&d_cv, &teacher)?;
    let moving = tri.moving_mask();
    let both = mask
        .as_slice()
        .iter()
        .zip(moving.as_slice())
        .filter(|(a, b)| **a && **b)
        .count();

    let gt = tri.gt_depth();
    println!("cost-volume AbsRel {:.4}", abs_rel(&d_cv, gt, None).unwrap());
    println!("teacher AbsRel     {:.4}", abs_rel(&teacher, gt, None).unwrap());
    println!(
        "masked {} of {} pixels; {} of {} moving pixels are masked",
        mask_count(&mask),
        mask.len(),
        both,
        mask_count(&moving)
    );
    Ok(())
}
