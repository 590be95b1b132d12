//! Median-scaled depth metrics: a uniformly scaled prediction scores like the
//! ground truth, a locally wrong one does not.

use dyndepth::grid::PixelMask;
use dyndepth::harness::depth_metrics;
use dyndepth::scenesim::{presets, render_triplet};

fn main() -> dyndepth::Result<()> {
    let tri = render_triplet(&presets::dynamic_scene(0))?;
    let gt = tri.gt_depth();
    let valid = PixelMask::filled(gt.width(), gt.height(), true);
    let moving = tri.moving_mask();
    let scaled = gt.map(|d| 3.0 * d);
    let mut wrong = gt.clone();
    for (d, m) in wrong.as_mut_slice().iter_mut().zip(moving.as_slice()) {
        if *m {
            *d *= 2.5;
        }
    }
    for (name, pred) in [
        ("ground truth", gt),
        ("3 x ground truth", &scaled),
        ("objects 2.5x too far", &wrong),
    ] {
        let m = depth_metrics(pred, gt, &valid)?;
        println!(
            "{name:>20}: AbsRel {:.4} SqRel {:.4} RMSE {:.3} RMSElog {:.4} d1 {:.3} d2 {:.3} d3 {:.3}",
            m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.a1, m.a2, m.a3
        );
    }
    Ok(())
}
