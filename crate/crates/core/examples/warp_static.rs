//! Warps the neighbouring frames of a static scene into frame t with the true
//! depth and pose, then with a biased depth, and compares the residuals.

use dyndepth::geometry::warp_image;
use dyndepth::grid::{DepthMap, Image};
use dyndepth::scenesim::{presets, render_triplet, Triplet};

fn residual(tri: &Triplet, warped: &Image) -> f64 {
    let inner = tri.interior_mask(3);
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..warped.pixels.len() {
        if warped.valid.as_slice()[i] && inner.as_slice()[i] {
            let (a, b) = (warped.pixels.as_slice()[i], tri.current().pixels.as_slice()[i]);
            sum += (0..3).map(|c| (a[c] - b[c]).abs()).sum::<f64>() / 3.0;
            n += 1;
        }
    }
    sum / n as f64
}

fn main() -> dyndepth::Result<()> {
    let tri = render_triplet(&presets::static_scene(0))?;
    let k = tri.intrinsics();
    let biased: DepthMap = tri.gt_depth().map(|d| d * 1.2);
    for (name, depth) in [("true depth", tri.gt_depth()), ("depth x 1.2", &biased)] {
        let prev = warp_image(tri.prev(), depth, k, &tri.pose_prev)?;
        let next = warp_image(tri.next(), depth, k, &tri.pose_next)?;
        println!(
            "{name:>12}: mean abs residual prev {:.5} next {:.5}, valid {} / {}",
            residual(&tri, &prev),
            residual(&tri, &next),
            prev.valid_count(),
            prev.pixels.len()
        );
    }
    Ok(())
}
