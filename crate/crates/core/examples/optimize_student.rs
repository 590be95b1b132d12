//! Optimizes the student depth under every loss mode on one dynamic scene and
//! reports AbsRel over the whole image and inside the moving objects.
//!
//! `cargo run --release --example optimize_student -- [seed]`

use dyndepth::harness::Variant;
use dyndepth::optimizer::{abs_rel, prepare, run_student, LossMode, OptimConfig};
use dyndepth::scenesim::{presets, render_triplet};

fn main() -> dyndepth::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let tri = render_triplet(&presets::dynamic_scene(seed))?;
    let gt = tri.gt_depth();
    let moving = tri.moving_mask();
    for mode in [
        LossMode::Baseline,
        LossMode::Temporal,
        LossMode::Distill,
        LossMode::Full,
    ] {
        let cfg = OptimConfig {
            loss_mode: mode,
            ..OptimConfig::default()
        };
        let prep = prepare(&tri, &cfg)?;
        let run = run_student(&tri, &prep, &cfg)?;
        println!(
            "{:>13}: AbsRel all {:.4} moving {:.4}, {} iterations, weights [{:.3}, {:.3}]",
            Variant::label(&cfg),
            abs_rel(&run.depth, gt, None).unwrap(),
            abs_rel(&run.depth, gt, Some(&moving)).unwrap(),
            run.trace.rows.len(),
            run.final_weights[0],
            run.final_weights[1]
        );
    }
    Ok(())
}
