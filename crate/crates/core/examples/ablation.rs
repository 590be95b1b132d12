//! Runs the six-variant ablation on a few dynamic scenes and prints the mean
//! AbsRel per variant and region. Writes the full table to `runs/ablation`.
//!
//! `cargo run --release --example ablation -- [scenes]`

use std::collections::BTreeMap;

use dyndepth::harness::{ablate, RunConfig, ABLATION};

fn main() -> dyndepth::Result<()> {
    let scenes = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = RunConfig {
        scenes,
        out: "runs/ablation".into(),
        ..RunConfig::default()
    };
    let rows = ablate(&cfg)?;
    let mut sums: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    for r in &rows {
        let e = sums.entry((r.variant.as_str(), r.region)).or_default();
        e.0 += r.abs_rel;
        e.1 += 1;
    }
    println!("{:>14} {:>8} {:>8} {:>8}", "variant", "all", "moving", "static");
    for v in ABLATION {
        let mean = |region| sums.get(&(v.name, region)).map_or(f64::NAN, |(s, n)| s / *n as f64);
        println!(
            "{:>14} {:>8.4} {:>8.4} {:>8.4}",
            v.name,
            mean("all"),
            mean("moving"),
            mean("static")
        );
    }
    Ok(())
}
