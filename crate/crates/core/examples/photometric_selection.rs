//! Compares two-way and four-way per-pixel selection on a dynamic scene at
//! the true depth, inside and outside the moving objects.

use dyndepth::grid::mask_complement;
use dyndepth::scenesim::{presets, render_triplet};
use dyndepth::temporal::{reconstruct, Reconstruction};

fn main() -> dyndepth::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let tri = render_triplet(&presets::dynamic_scene(seed))?;
    let moving = tri.moving_mask();
    let still = mask_complement(&moving);
    for mode in [Reconstruction::TwoWay, Reconstruction::FourWay] {
        let rec = reconstruct(&tri, tri.gt_depth(), mode, None)?;
        let e = rec.error();
        let mut counts = [0usize; 4];
        for (i, m) in moving.as_slice().iter().enumerate() {
            if let (true, Some(k)) = (*m, rec.selection.index.as_slice()[i]) {
                counts[k as usize] += 1;
            }
        }
        println!(
            "{:>8}: error moving {:.4} static {:.4}; moving pixels by source [prev, next, rect prev, rect next] {:?}",
            mode.name(),
            e.masked_mean(Some(&moving)).unwrap_or(f64::NAN),
            e.masked_mean(Some(&still)).unwrap_or(f64::NAN),
            &counts[..rec.candidates.len()]
        );
    }
    Ok(())
}
