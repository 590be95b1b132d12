//! Evaluation metrics, file formats, run configuration and the scenario
//! runner behind the command-line tool.
//!
//! Each scene writes into its own `scene_<seed>` directory; the summary CSVs
//! in the output root are written after all scenes finish, in scene order.

pub mod config;
pub mod io;
pub mod metrics;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{Preset, RunConfig, SceneSpec};
pub use metrics::{depth_metrics, region_metrics, MetricsReport};

use crate::balance::WeightMode;
use crate::error::{Error, Result};
use crate::grid::{mask_complement, DepthMap, PixelMask};
use crate::optimizer::{
    gradient_check, prepare, run_student, student_objective, GradientCheck, LossMode, OptimConfig, Preparation,
    StudentRun,
};
use crate::scenesim::{render_triplet, Triplet};

/// One configuration of the ablation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub name: &'static str,
    pub loss_mode: LossMode,
    pub weight_mode: WeightMode,
}

/// Baseline, temporal hints, distillation and both, the last two with fixed and rebalanced weights.
pub const ABLATION: [Variant; 6] = [
    Variant {
        name: "baseline",
        loss_mode: LossMode::Baseline,
        weight_mode: WeightMode::SumUp,
    },
    Variant {
        name: "temporal",
        loss_mode: LossMode::Temporal,
        weight_mode: WeightMode::SumUp,
    },
    Variant {
        name: "distill-sumup",
        loss_mode: LossMode::Distill,
        weight_mode: WeightMode::SumUp,
    },
    Variant {
        name: "distill-mlra",
        loss_mode: LossMode::Distill,
        weight_mode: WeightMode::Mlra,
    },
    Variant {
        name: "full-sumup",
        loss_mode: LossMode::Full,
        weight_mode: WeightMode::SumUp,
    },
    Variant {
        name: "full-mlra",
        loss_mode: LossMode::Full,
        weight_mode: WeightMode::Mlra,
    },
];

impl Variant {
    /// Name used in file names and CSV rows for an arbitrary configuration.
    pub fn label(cfg: &OptimConfig) -> String {
        match (cfg.loss_mode.distills(), cfg.weight_mode) {
            (false, _) => cfg.loss_mode.name().to_string(),
            (true, WeightMode::SumUp) => format!("{}-sumup", cfg.loss_mode.name()),
            (true, WeightMode::Mlra) => format!("{}-mlra", cfg.loss_mode.name()),
        }
    }

    pub fn apply(&self, cfg: &OptimConfig) -> OptimConfig {
        OptimConfig {
            loss_mode: self.loss_mode,
            weight_mode: self.weight_mode,
            ..cfg.clone()
        }
    }
}

/// Metrics CSV row. Column order is part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scene: String,
    pub seed: u64,
    pub variant: String,
    /// `all`, `moving` or `static`.
    pub region: &'static str,
    pub pixels: usize,
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub w1: f64,
    pub w2: f64,
    pub iterations: usize,
    pub stopped: String,
}

pub fn scene_id(seed: u64) -> String {
    format!("scene_{seed:04}")
}

/// Metric rows of `depth` for the whole image, the moving objects and the static rest.
pub fn evaluate_regions(tri: &Triplet, depth: &DepthMap) -> Result<Vec<(&'static str, usize, MetricsReport)>> {
    let gt = tri.gt_depth();
    let valid = PixelMask::filled(gt.width(), gt.height(), true);
    let moving = tri.moving_mask();
    let mut out = Vec::new();
    for (name, region) in [
        ("all", valid.clone()),
        ("moving", moving.clone()),
        ("static", mask_complement(&moving)),
    ] {
        let n = crate::grid::mask_count(&region);
        if n > 0 {
            out.push((name, n, region_metrics(depth, gt, &valid, &region)?));
        }
    }
    Ok(out)
}

fn result_rows(tri: &Triplet, variant: &str, run: &StudentRun) -> Result<Vec<ResultRow>> {
    let seed = tri.config.seed;
    Ok(evaluate_regions(tri, &run.depth)?
        .into_iter()
        .map(|(region, pixels, m)| ResultRow {
            scene: scene_id(seed),
            seed,
            variant: variant.to_string(),
            region,
            pixels,
            abs_rel: m.abs_rel,
            sq_rel: m.sq_rel,
            rmse: m.rmse,
            rmse_log: m.rmse_log,
            a1: m.a1,
            a2: m.a2,
            a3: m.a3,
            w1: run.final_weights[0],
            w2: run.final_weights[1],
            iterations: run.trace.rows.len(),
            stopped: run.trace.stopped.clone().unwrap_or_default(),
        })
        .collect())
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_rows_file<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    write_rows(rows, fs::File::create(path)?)
}

/// Renders frames, ground-truth depth and labels of `tri` into `dir`.
pub fn write_scene(tri: &Triplet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, img) in ["frame_prev", "frame_t", "frame_next"].iter().zip(&tri.frames) {
        io::write_ppm(&dir.join(format!("{name}.ppm")), img)?;
    }
    io::write_depth_pgm(&dir.join("gt_depth.pgm"), tri.gt_depth(), io::DEPTH_METERS_PER_UNIT)?;
    let (w, h) = tri.gt_depth().dims();
    for (name, set) in ["labels_prev", "labels_t", "labels_next"].iter().zip(&tri.instances) {
        io::write_labels_pgm(&dir.join(format!("{name}.pgm")), &io::label_map(w, h, set))?;
    }
    fs::write(
        dir.join("scene.toml"),
        toml::to_string(&tri.config).expect("scene serializes"),
    )?;
    Ok(())
}

/// Writes depth, trace and error heatmap of one student run.
fn write_run(
    tri: &Triplet,
    prep: &Preparation,
    cfg: &OptimConfig,
    run: &StudentRun,
    dir: &Path,
    label: &str,
) -> Result<()> {
    io::write_depth_pgm(
        &dir.join(format!("{label}_depth.pgm")),
        &run.depth,
        io::DEPTH_METERS_PER_UNIT,
    )?;
    run.trace
        .write_csv(fs::File::create(dir.join(format!("{label}_trace.csv")))?)?;
    let objective = student_objective(tri, prep, cfg)?;
    let e = objective.evaluate(&run.depth, run.final_weights, None, false)?;
    io::write_error_pgm(
        &dir.join(format!("{label}_error.pgm")),
        &e.reconstructed.selection.error,
        1.0,
    )?;
    Ok(())
}

fn write_preparation(prep: &Preparation, dir: &Path, tag: &str) -> Result<()> {
    io::write_depth_pgm(
        &dir.join(format!("teacher_{tag}.pgm")),
        &prep.teacher,
        io::DEPTH_METERS_PER_UNIT,
    )?;
    io::write_depth_pgm(
        &dir.join("cost_volume_depth.pgm"),
        &prep.cost_volume_depth,
        io::DEPTH_METERS_PER_UNIT,
    )?;
    io::write_mask_pgm(&dir.join(format!("uncertainty_{tag}.pgm")), &prep.mask)
}

/// Maps `f` over `0..n` on up to `available_parallelism` threads, keeping index order.
fn parallel_map<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |p| p.get())
        .min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let f = &f;
    let mut slots: Vec<Option<Result<T>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| s.spawn(move || (w..n).step_by(workers).map(|i| (i, f(i))).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("scene worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every index visited")).collect()
}

/// Renders every configured scene into `cfg.out`.
pub fn simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    parallel_map(cfg.scenes, |k| {
        let tri = render_triplet(&cfg.scene_config(k)?)?;
        let dir = cfg.out.join(scene_id(tri.config.seed));
        write_scene(&tri, &dir)?;
        Ok(dir)
    })
}

/// Renders the scenes, optimizes the configured student on each and writes `metrics.csv`.
pub fn run_scenario(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    cfg.optim.validate()?;
    let label = Variant::label(&cfg.optim);
    let per_scene = parallel_map(cfg.scenes, |k| {
        let tri = render_triplet(&cfg.scene_config(k)?)?;
        let dir = cfg.out.join(scene_id(tri.config.seed));
        write_scene(&tri, &dir)?;
        let prep = prepare(&tri, &cfg.optim)?;
        write_preparation(&prep, &dir, cfg.optim.loss_mode.reconstruction().name())?;
        let run = run_student(&tri, &prep, &cfg.optim)?;
        write_run(&tri, &prep, &cfg.optim, &run, &dir, &label)?;
        result_rows(&tri, &label, &run)
    })?;
    let rows: Vec<ResultRow> = per_scene.into_iter().flatten().collect();
    fs::create_dir_all(&cfg.out)?;
    write_rows_file(&rows, &cfg.out.join("metrics.csv"))?;
    Ok(rows)
}

/// Runs all six [`ABLATION`] variants per scene from shared preparations and writes `ablation.csv`.
pub fn ablate(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    cfg.optim.validate()?;
    let per_scene = parallel_map(cfg.scenes, |k| {
        let tri = render_triplet(&cfg.scene_config(k)?)?;
        let dir = cfg.out.join(scene_id(tri.config.seed));
        write_scene(&tri, &dir)?;
        let mut preps: Vec<(LossMode, Preparation)> = Vec::new();
        let mut rows = Vec::new();
        for v in ABLATION {
            let vcfg = v.apply(&cfg.optim);
            let rec = vcfg.loss_mode.reconstruction();
            let prep = match preps.iter().find(|(m, _)| m.reconstruction() == rec) {
                Some((_, p)) => p.clone(),
                None => {
                    let p = prepare(&tri, &vcfg)?;
                    write_preparation(&p, &dir, rec.name())?;
                    preps.push((vcfg.loss_mode, p.clone()));
                    p
                }
            };
            let run = run_student(&tri, &prep, &vcfg)?;
            write_run(&tri, &prep, &vcfg, &run, &dir, v.name)?;
            rows.extend(result_rows(&tri, v.name, &run)?);
        }
        Ok(rows)
    })?;
    let rows: Vec<ResultRow> = per_scene.into_iter().flatten().collect();
    fs::create_dir_all(&cfg.out)?;
    write_rows_file(&rows, &cfg.out.join("ablation.csv"))?;
    Ok(rows)
}

/// Loss terms, weights and mean selected error of one depth hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRow {
    pub scene: String,
    pub variant: String,
    pub reproj: f64,
    pub consis: f64,
    pub smooth: f64,
    pub ori: f64,
    pub distil: f64,
    pub total: f64,
    pub w1: f64,
    pub w2: f64,
    pub mean_error: f64,
    pub masked_fraction: f64,
}

/// Evaluates every loss term of `cfg.optim` at `depth` (ground truth when `None`) on scene `k`.
///
/// Writes the selected-error heatmap to `<out>/<scene>/<variant>_loss_error.pgm`.
pub fn loss_report(cfg: &RunConfig, k: usize, depth: Option<&DepthMap>) -> Result<LossRow> {
    cfg.optim.validate()?;
    let tri = render_triplet(&cfg.scene_config(k)?)?;
    let depth = depth.unwrap_or(tri.gt_depth());
    if !depth.same_dims(tri.gt_depth()) {
        return Err(Error::contract(format!(
            "depth is {}x{}, scene is {}x{}",
            depth.width(),
            depth.height(),
            tri.gt_depth().width(),
            tri.gt_depth().height()
        )));
    }
    let prep = prepare(&tri, &cfg.optim)?;
    let objective = student_objective(&tri, &prep, &cfg.optim)?;
    let weights = cfg.optim.weight_state()?.weights;
    let e = objective.evaluate(depth, weights, None, false)?;
    let label = Variant::label(&cfg.optim);
    let dir = cfg.out.join(scene_id(tri.config.seed));
    fs::create_dir_all(&dir)?;
    let error = &e.reconstructed.selection.error;
    io::write_error_pgm(&dir.join(format!("{label}_loss_error.pgm")), error, 1.0)?;
    Ok(LossRow {
        scene: scene_id(tri.config.seed),
        variant: label,
        reproj: e.terms.reproj,
        consis: e.terms.consis,
        smooth: e.terms.smooth,
        ori: e.terms.ori,
        distil: e.terms.distil,
        total: e.terms.total,
        w1: weights[0],
        w2: weights[1],
        mean_error: error.masked_mean(None).unwrap_or(f64::NAN),
        masked_fraction: crate::grid::mask_count(&prep.mask) as f64 / prep.mask.len() as f64,
    })
}

/// Analytic vs central-difference gradient of the configured student loss on scene `k`.
///
/// Checks at `depth`, or at the cost-volume depth the student starts from; writes
/// `<out>/<scene>/<variant>_gradcheck.csv`.
pub fn gradcheck_report(
    cfg: &RunConfig,
    k: usize,
    depth: Option<&DepthMap>,
    samples: usize,
    h: f64,
) -> Result<GradientCheck> {
    cfg.optim.validate()?;
    if !(h > 0.0) {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    let tri = render_triplet(&cfg.scene_config(k)?)?;
    let prep = prepare(&tri, &cfg.optim)?;
    let objective = student_objective(&tri, &prep, &cfg.optim)?;
    let at = depth.unwrap_or(&prep.cost_volume_depth);
    if !at.same_dims(tri.gt_depth()) {
        return Err(Error::contract("depth and scene dimensions differ"));
    }
    let weights = cfg.optim.weight_state()?.weights;
    let check = gradient_check(&objective, at, weights, h, samples, tri.config.seed)?;
    let dir = cfg.out.join(scene_id(tri.config.seed));
    fs::create_dir_all(&dir)?;
    write_rows_file(
        &check.checks,
        &dir.join(format!("{}_gradcheck.csv", Variant::label(&cfg.optim))),
    )?;
    Ok(check)
}
