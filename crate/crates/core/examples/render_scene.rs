//! Renders a dynamic triplet and writes frames, depth and instance labels.
//!
//! `cargo run --example render_scene -- [seed] [out_dir]`

use std::path::PathBuf;

use dyndepth::harness::write_scene;
use dyndepth::scenesim::{presets, render_triplet};

fn main() -> dyndepth::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs/render_scene"));

    let tri = render_triplet(&presets::dynamic_scene(seed))?;
    let gt = tri.gt_depth().as_slice();
    let (near, far) = gt
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), d| (a.min(*d), b.max(*d)));
    println!(
        "scene {seed}: {}x{} px, depth {near:.2}..{far:.2} m",
        tri.intrinsics().width,
        tri.intrinsics().height
    );
    println!("ego motion t-1: {:?}", tri.pose_prev.translation);
    println!("ego motion t+1: {:?}", tri.pose_next.translation);
    for (k, inst) in tri.instances[1].instances.iter().enumerate() {
        let moving = tri.config.objects[k].is_moving();
        println!(
            "object {} class {} bbox {:?} moving {moving} displacement {:?}",
            inst.id, inst.class_id, inst.bbox, tri.gt_displacements[k]
        );
    }
    write_scene(&tri, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
