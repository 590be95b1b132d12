//! Matches instances between the warped neighbours, estimates each object's
//! displacement and compares it with the simulator's ground truth.

use dyndepth::scenesim::{presets, render_triplet};
use dyndepth::temporal::{TemporalHints, Views};

fn main() -> dyndepth::Result<()> {
    for seed in 0..4 {
        let tri = render_triplet(&presets::dynamic_scene(seed))?;
        let views = Views::new(&tri, tri.gt_depth())?;
        let hints = TemporalHints::compute(&tri, &views);
        println!("scene {seed}");
        for m in &hints.motions {
            let c = &m.correspondence;
            let gt = tri.gt_displacements.get(c.prev).copied().flatten();
            println!(
                "  object {} <-> {}: IoU {:.2}, dh {:+.2} dv {:+.2}{}, simulator {:?}",
                c.prev,
                c.next,
                c.iou,
                m.displacement.dh,
                m.displacement.dv,
                if m.partial { " (truncated)" } else { "" },
                gt.map(|(h, v)| format!("{h:+.2} {v:+.2}"))
            );
        }
        hints.write_csv(std::io::stdout().lock())?;
    }
    Ok(())
}
