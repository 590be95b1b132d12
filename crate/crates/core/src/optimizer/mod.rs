//! Direct per-pixel depth optimization standing in for the teacher and
//! student networks, plus finite-difference gradient verification.
//!
//! Selection operators (per-pixel candidate choice, uncertainty mask,
//! rectification plans and the fused distillation target) are held fixed
//! while differentiating an iterate, so the analytic gradient is that of the
//! active smooth piece.

mod gradcheck;
mod objective;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use gradcheck::{finite_difference_gradient, gradient_check, GradientCheck, PixelCheck};
pub use objective::{Evaluation, Frozen, Objective};

use crate::balance::{LambdaSchedule, WeightMode, WeightState, DEFAULT_WINDOW};
use crate::costvolume::{argmin_depth, build_cost_volume, uncertainty_mask, DepthPlanes};
use crate::distill::SMOOTHNESS_WEIGHT;
use crate::error::{Error, Result};
use crate::grid::{DepthMap, PixelMask};
use crate::scenesim::Triplet;
use crate::temporal::{reconstruction_error, Reconstruction};

/// Which hints enter the student loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    /// Two-way reconstruction, no distillation.
    Baseline,
    /// Four-way reconstruction, no distillation.
    Temporal,
    /// Two-way reconstruction with distillation.
    Distill,
    /// Four-way reconstruction with distillation.
    Full,
}

impl LossMode {
    pub fn reconstruction(&self) -> Reconstruction {
        match self {
            LossMode::Baseline | LossMode::Distill => Reconstruction::TwoWay,
            LossMode::Temporal | LossMode::Full => Reconstruction::FourWay,
        }
    }

    pub fn distills(&self) -> bool {
        matches!(self, LossMode::Distill | LossMode::Full)
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossMode::Baseline => "baseline",
            LossMode::Temporal => "temporal",
            LossMode::Distill => "distill",
            LossMode::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Per-pixel Adam.
    Adam,
    /// Plain projected gradient descent.
    GradientDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GradientMode {
    Analytic,
    FiniteDifference { h: f64 },
}

fn d_step() -> f64 {
    0.02
}
fn d_teacher_lambda_s() -> f64 {
    1e-2
}
fn d_relative() -> bool {
    true
}
fn d_final_step() -> f64 {
    0.05
}
fn d_iterations() -> usize {
    500
}
fn d_solver() -> Solver {
    Solver::Adam
}
fn d_gradient() -> GradientMode {
    GradientMode::Analytic
}
fn d_min() -> f64 {
    0.5
}
fn d_max() -> f64 {
    100.0
}
fn d_loss_mode() -> LossMode {
    LossMode::Full
}
fn d_weight_mode() -> WeightMode {
    WeightMode::Mlra
}
fn d_window() -> usize {
    DEFAULT_WINDOW
}
fn d_lambda_s() -> f64 {
    SMOOTHNESS_WEIGHT
}
fn d_teacher_init() -> f64 {
    15.0
}
fn d_patience() -> usize {
    10
}
fn d_planes() -> usize {
    32
}
fn d_plane_min() -> f64 {
    2.0
}
fn d_plane_max() -> f64 {
    40.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    /// Per-iteration step (Adam) or gradient scale (descent); a fraction of depth when `relative_step`.
    #[serde(default = "d_step")]
    pub step_size: f64,
    /// Scale each pixel's step by its current depth, so `step_size` is a fraction of depth.
    #[serde(default = "d_relative")]
    pub relative_step: bool,
    /// Step multiplier reached at the last iteration, decaying linearly from 1.
    #[serde(default = "d_final_step")]
    pub final_step_fraction: f64,
    #[serde(default = "d_iterations")]
    pub iterations: usize,
    #[serde(default = "d_solver")]
    pub solver: Solver,
    #[serde(default = "d_gradient")]
    pub gradient: GradientMode,
    #[serde(default = "d_min")]
    pub depth_min: f64,
    #[serde(default = "d_max")]
    pub depth_max: f64,
    #[serde(default = "d_loss_mode")]
    pub loss_mode: LossMode,
    #[serde(default = "d_weight_mode")]
    pub weight_mode: WeightMode,
    /// Observations per rebalancing window.
    #[serde(default = "d_window")]
    pub window: usize,
    #[serde(default = "d_lambda_s")]
    pub lambda_s: f64,
    /// Constant depth the teacher starts from.
    #[serde(default = "d_teacher_init")]
    pub teacher_init: f64,
    #[serde(default = "d_iterations")]
    pub teacher_iterations: usize,
    /// Smoothness weight of the teacher objective.
    #[serde(default = "d_teacher_lambda_s")]
    pub teacher_lambda_s: f64,
    /// Consecutive loss increases that stop a run.
    #[serde(default = "d_patience")]
    pub divergence_patience: usize,
    #[serde(default = "d_planes")]
    pub planes: usize,
    #[serde(default = "d_plane_min")]
    pub plane_min: f64,
    #[serde(default = "d_plane_max")]
    pub plane_max: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            step_size: d_step(),
            relative_step: d_relative(),
            final_step_fraction: d_final_step(),
            iterations: d_iterations(),
            solver: d_solver(),
            gradient: d_gradient(),
            depth_min: d_min(),
            depth_max: d_max(),
            loss_mode: d_loss_mode(),
            weight_mode: d_weight_mode(),
            window: d_window(),
            lambda_s: d_lambda_s(),
            teacher_init: d_teacher_init(),
            teacher_iterations: d_iterations(),
            teacher_lambda_s: d_teacher_lambda_s(),
            divergence_patience: d_patience(),
            planes: d_planes(),
            plane_min: d_plane_min(),
            plane_max: d_plane_max(),
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::contract("step_size must be positive"));
        }
        if !(self.final_step_fraction > 0.0 && self.final_step_fraction <= 1.0) {
            return Err(Error::contract("final_step_fraction must lie in (0, 1]"));
        }
        if !(self.depth_min > 0.0 && self.depth_min < self.depth_max) {
            return Err(Error::contract("depth bounds need 0 < depth_min < depth_max"));
        }
        if let GradientMode::FiniteDifference { h } = self.gradient {
            if !(h > 0.0) {
                return Err(Error::contract("finite-difference step must be positive"));
            }
        }
        if self.iterations == 0 || self.teacher_iterations == 0 || self.window == 0 {
            return Err(Error::contract("iterations and window must be positive"));
        }
        if !(self.teacher_init >= self.depth_min && self.teacher_init <= self.depth_max) {
            return Err(Error::contract("teacher_init must lie within the depth bounds"));
        }
        if !(self.lambda_s >= 0.0) {
            return Err(Error::contract("lambda_s must be non-negative"));
        }
        DepthPlanes::uniform(self.planes, self.plane_min, self.plane_max)?;
        Ok(())
    }

    pub fn depth_planes(&self) -> Result<DepthPlanes> {
        DepthPlanes::uniform(self.planes, self.plane_min, self.plane_max)
    }

    /// Weight state implied by the loss and weight modes.
    pub fn weight_state(&self) -> Result<WeightState> {
        if self.loss_mode.distills() {
            WeightState::for_mode(self.weight_mode, self.window)
        } else {
            WeightState::fixed([1.0, 0.0])
        }
    }
}

/// One row per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub total: f64,
    pub ori: f64,
    pub reproj: f64,
    pub consis: f64,
    pub smooth: f64,
    pub distil: f64,
    pub w1: f64,
    pub w2: f64,
    pub lambda: f64,
    /// Unscaled mean `|d - gt| / gt` over all pixels.
    pub abs_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimTrace {
    pub rows: Vec<TraceRow>,
    /// Set when the run stopped early.
    pub stopped: Option<String>,
}

impl OptimTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Iterations at which the weights changed.
    pub fn weight_updates(&self) -> Vec<usize> {
        self.rows
            .windows(2)
            .filter(|p| p[0].w1 != p[1].w1 || p[0].w2 != p[1].w2)
            .map(|p| p[1].iteration)
            .collect()
    }
}

/// Unscaled mean absolute relative error, optionally restricted to a mask.
pub fn abs_rel(pred: &DepthMap, gt: &DepthMap, mask: Option<&PixelMask>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (p, g)) in pred.as_slice().iter().zip(gt.as_slice()).enumerate() {
        if mask.map_or(true, |m| m.as_slice()[i]) {
            sum += (p - g).abs() / g;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

fn check_bounds(depth: &DepthMap, cfg: &OptimConfig) -> Result<()> {
    if let Some(d) = depth
        .as_slice()
        .iter()
        .find(|d| !(**d >= cfg.depth_min && **d <= cfg.depth_max))
    {
        return Err(Error::contract(format!(
            "initial depth {d} outside [{}, {}]",
            cfg.depth_min, cfg.depth_max
        )));
    }
    Ok(())
}

/// Zeroes gradient components that would push a bound-active pixel outside the box.
pub fn project_gradient(grad: &mut [f64], depth: &DepthMap, d_min: f64, d_max: f64) {
    for (g, d) in grad.iter_mut().zip(depth.as_slice()) {
        if (*d <= d_min && *g > 0.0) || (*d >= d_max && *g < 0.0) {
            *g = 0.0;
        }
    }
}

/// Projected first-order descent on the total loss; returns the final depth and the per-iteration trace.
pub fn optimize_depth(
    init: &DepthMap,
    objective: &Objective,
    cfg: &OptimConfig,
    weights: &mut WeightState,
) -> Result<(DepthMap, OptimTrace)> {
    cfg.validate()?;
    check_bounds(init, cfg)?;
    let schedule = LambdaSchedule::new(cfg.iterations)?;
    let gt = objective.tri.gt_depth();
    let mut depth = init.clone();
    let n = depth.len();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut trace = OptimTrace::default();
    let mut rising = 0usize;

    for it in 0..cfg.iterations {
        let lambda = schedule.at(it)?;
        let (terms, mut grad) = match cfg.gradient {
            GradientMode::Analytic => {
                let e = objective.evaluate(&depth, weights.weights, None, true)?;
                (e.terms, e.gradient.expect("requested"))
            }
            GradientMode::FiniteDifference { h } => {
                let e = objective.evaluate(&depth, weights.weights, None, false)?;
                let frozen = e.frozen();
                let all: Vec<usize> = (0..n).collect();
                let fd = finite_difference_gradient(objective, &depth, weights.weights, &frozen, &all, h)?;
                (e.terms, fd)
            }
        };
        if !terms.total.is_finite() {
            trace.stopped = Some(format!("non-finite loss at iteration {it}"));
            break;
        }
        if let Some(last) = trace.rows.last() {
            rising = if terms.total > last.total { rising + 1 } else { 0 };
        }
        trace.rows.push(TraceRow {
            iteration: it,
            total: terms.total,
            ori: terms.ori,
            reproj: terms.reproj,
            consis: terms.consis,
            smooth: terms.smooth,
            distil: terms.distil,
            w1: weights.weights[0],
            w2: weights.weights[1],
            lambda,
            abs_rel: abs_rel(&depth, gt, None).unwrap_or(f64::NAN),
        });
        if rising >= cfg.divergence_patience {
            trace.stopped = Some(format!(
                "loss increased {rising} consecutive iterations (last {:.6})",
                terms.total
            ));
            break;
        }
        if objective.distills() {
            weights.observe(
                [terms.ori.max(f64::MIN_POSITIVE), terms.distil.max(f64::MIN_POSITIVE)],
                lambda,
            )?;
        } else {
            weights.step += 1;
        }

        project_gradient(&mut grad, &depth, cfg.depth_min, cfg.depth_max);
        let t = (it + 1) as i32;
        let progress = if cfg.iterations > 1 {
            it as f64 / (cfg.iterations - 1) as f64
        } else {
            0.0
        };
        let rate = cfg.step_size * (1.0 - (1.0 - cfg.final_step_fraction) * progress);
        for (i, d) in depth.as_mut_slice().iter_mut().enumerate() {
            let g = grad[i];
            let step = match cfg.solver {
                Solver::GradientDescent => rate * g,
                Solver::Adam => {
                    m[i] = b1 * m[i] + (1.0 - b1) * g;
                    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                    let mh = m[i] / (1.0 - b1.powi(t));
                    let vh = v[i] / (1.0 - b2.powi(t));
                    rate * mh / (vh.sqrt() + eps)
                }
            };
            let step = if cfg.relative_step { step * *d } else { step };
            *d = (*d - step).clamp(cfg.depth_min, cfg.depth_max);
        }
    }
    Ok((depth, trace))
}

/// Matching-free depth: optimized from a constant depth on reprojection and smoothness only.
pub fn teacher_depth(tri: &Triplet, cfg: &OptimConfig) -> Result<(DepthMap, OptimTrace)> {
    cfg.validate()?;
    let (w, h) = tri.gt_depth().dims();
    let init = DepthMap::filled(w, h, cfg.teacher_init);
    let objective = Objective::unsupervised(tri, cfg.loss_mode.reconstruction(), cfg.teacher_lambda_s);
    let mut weights = WeightState::fixed([1.0, 0.0])?;
    let teacher_cfg = OptimConfig {
        iterations: cfg.teacher_iterations,
        ..cfg.clone()
    };
    optimize_depth(&init, &objective, &teacher_cfg, &mut weights)
}

/// Plane-sweep depth of frame `t` against `t-1`, clamped to the optimizer bounds.
pub fn cost_volume_depth(tri: &Triplet, cfg: &OptimConfig) -> Result<DepthMap> {
    let planes = cfg.depth_planes()?;
    let cv = build_cost_volume(tri.prev(), tri.current(), tri.intrinsics(), &tri.pose_prev, &planes)?;
    Ok(argmin_depth(&cv, &planes)?.map(|d| d.clamp(cfg.depth_min, cfg.depth_max)))
}

/// Teacher, cost-volume depth and uncertainty mask shared by student runs on one scene.
#[derive(Debug, Clone)]
pub struct Preparation {
    pub cost_volume_depth: DepthMap,
    pub teacher: DepthMap,
    pub teacher_trace: OptimTrace,
    pub mask: PixelMask,
}

pub fn prepare(tri: &Triplet, cfg: &OptimConfig) -> Result<Preparation> {
    let cost_volume_depth = cost_volume_depth(tri, cfg)?;
    let (teacher, teacher_trace) = teacher_depth(tri, cfg)?;
    let mask = uncertainty_mask(&cost_volume_depth, &teacher)?;
    Ok(Preparation {
        cost_volume_depth,
        teacher,
        teacher_trace,
        mask,
    })
}

/// Student objective for `cfg.loss_mode` given a prepared teacher and mask.
pub fn student_objective<'a>(tri: &'a Triplet, prep: &Preparation, cfg: &OptimConfig) -> Result<Objective<'a>> {
    let reconstruction = cfg.loss_mode.reconstruction();
    let teacher_error = if cfg.loss_mode.distills() {
        Some(reconstruction_error(tri, &prep.teacher, reconstruction)?)
    } else {
        None
    };
    Ok(Objective {
        tri,
        reconstruction,
        mask: prep.mask.clone(),
        teacher: Some(prep.teacher.clone()),
        teacher_error,
        lambda_s: cfg.lambda_s,
    })
}

#[derive(Debug, Clone)]
pub struct StudentRun {
    pub depth: DepthMap,
    pub trace: OptimTrace,
    pub final_weights: [f64; 2],
}

/// Optimizes the student from the cost-volume depth.
pub fn run_student(tri: &Triplet, prep: &Preparation, cfg: &OptimConfig) -> Result<StudentRun> {
    let objective = student_objective(tri, prep, cfg)?;
    let mut weights = cfg.weight_state()?;
    let (depth, trace) = optimize_depth(&prep.cost_volume_depth, &objective, cfg, &mut weights)?;
    Ok(StudentRun {
        depth,
        trace,
        final_weights: weights.weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenesim::{presets, render_triplet};

    #[test]
    fn config_validation() {
        assert!(OptimConfig::default().validate().is_ok());
        let bad = OptimConfig {
            depth_min: 5.0,
            depth_max: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimConfig {
            gradient: GradientMode::FiniteDifference { h: 0.0 },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_image_gives_zero_photometric_gradient() {
        let mut tri = render_triplet(&presets::static_scene(3)).unwrap();
        for f in tri.frames.iter_mut() {
            *f = crate::grid::Image::constant(f.width(), f.height(), [0.4; 3]);
        }
        let obj = Objective::unsupervised(&tri, Reconstruction::FourWay, 0.0);
        let d = DepthMap::filled(tri.gt_depth().width(), tri.gt_depth().height(), 10.0);
        let e = obj.evaluate(&d, [1.0, 0.0], None, true).unwrap();
        assert!(e.gradient.unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn gradient_vanishes_at_ground_truth() {
        let tri = render_triplet(&presets::static_scene(5)).unwrap();
        let obj = Objective::unsupervised(&tri, Reconstruction::TwoWay, 0.0);
        let e = obj.evaluate(tri.gt_depth(), [1.0, 0.0], None, true).unwrap();
        let g = e.gradient.unwrap();
        let interior = tri.interior_mask(3);
        let n = g.len() as f64;
        for (i, gi) in g.iter().enumerate() {
            if interior.as_slice()[i] {
                // per-pixel gradient of a mean, rescaled to a per-pixel loss
                assert!((gi * n).abs() < 1e-2, "pixel {i}: {}", gi * n);
            }
        }
    }

    #[test]
    fn bounds_are_respected() {
        let tri = render_triplet(&presets::static_scene(1)).unwrap();
        let cfg = OptimConfig {
            teacher_iterations: 20,
            step_size: 5.0,
            depth_min: 20.0,
            depth_max: 26.0,
            teacher_init: 22.0,
            ..Default::default()
        };
        let (d, trace) = teacher_depth(&tri, &cfg).unwrap();
        assert!(d.as_slice().iter().all(|v| *v >= 20.0 && *v <= 26.0));
        assert!(trace.rows.len() <= 20);
    }
}
