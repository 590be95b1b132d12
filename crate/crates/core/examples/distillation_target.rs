//! Fuses teacher and student depth into a per-pixel distillation target and
//! evaluates the loss terms of the student against it.

use dyndepth::distill::{distillation_loss, fuse_target_depth, original_loss, total_loss};
use dyndepth::grid::mask_count;
use dyndepth::optimizer::{abs_rel, prepare, LossMode, OptimConfig};
use dyndepth::scenesim::{presets, render_triplet};
use dyndepth::temporal::reconstruction_error;

fn main() -> dyndepth::Result<()> {
    let tri = render_triplet(&presets::dynamic_scene(5))?;
    let cfg = OptimConfig {
        loss_mode: LossMode::Full,
        ..OptimConfig::default()
    };
    let prep = prepare(&tri, &cfg)?;
    let student = &prep.cost_volume_depth;
    let mode = cfg.loss_mode.reconstruction();

    let fused = fuse_target_depth(&prep.teacher, student, &tri, mode)?;
    let gt = tri.gt_depth();
    println!("teacher AbsRel {:.4}", abs_rel(&prep.teacher, gt, None).unwrap());
    println!("student AbsRel {:.4}", abs_rel(student, gt, None).unwrap());
    println!("target  AbsRel {:.4}", abs_rel(&fused.depth, gt, None).unwrap());
    println!("target takes the student at {} pixels", mask_count(&fused.from_student));

    let error = reconstruction_error(&tri, student, mode)?;
    let terms = original_loss(&error, student, &prep.teacher, &prep.mask, tri.current(), cfg.lambda_s)?;
    let distil = distillation_loss(student, &fused.depth, &prep.mask)?;
    println!(
        "reproj {:.4} consis {:.4} smooth {:.4} ori {:.4} distil {:.4} total {:.4}",
        terms.reproj,
        terms.consis,
        terms.smooth,
        terms.ori,
        distil,
        total_loss(terms.ori, distil, [0.5, 0.5])?
    );
    Ok(())
}
