use crate::distill::{consistency_loss, distillation_loss, fuse_with_errors, total_loss, FusedTarget, LossTerms};
use crate::error::Result;
use crate::grid::{DepthMap, ErrorMap, Grid, PixelMask, Rgb};
use crate::photometric::{photometric_error_backward, reprojection_loss, smoothness_with_gradient};
use crate::scenesim::Triplet;
use crate::temporal::{reconstruct_impl, Reconstructed, Reconstruction, TemporalHints};

/// Fixed ingredients of a loss: scene, reconstruction rule, teacher and mask.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub tri: &'a Triplet,
    pub reconstruction: Reconstruction,
    /// Uncertainty mask `M`; consistency applies inside, reprojection and distillation outside.
    pub mask: PixelMask,
    pub teacher: Option<DepthMap>,
    /// Teacher reconstruction error, required for distillation.
    pub teacher_error: Option<ErrorMap>,
    pub lambda_s: f64,
}

/// Quantities held constant while differentiating one iterate.
#[derive(Debug, Clone, Default)]
pub struct Frozen {
    pub hints: Option<TemporalHints>,
    pub target: Option<DepthMap>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub terms: LossTerms,
    pub weights: [f64; 2],
    pub reconstructed: Reconstructed,
    pub fused: Option<FusedTarget>,
    /// `dL_total / dD`, when requested.
    pub gradient: Option<Vec<f64>>,
}

impl Evaluation {
    /// Hints and distillation target of this iterate, for re-evaluation at nearby depths.
    pub fn frozen(&self) -> Frozen {
        Frozen {
            hints: self.reconstructed.hints.clone(),
            target: self.fused.as_ref().map(|f| f.depth.clone()),
        }
    }
}

impl<'a> Objective<'a> {
    /// Plain reprojection + smoothness, as used for the teacher.
    pub fn unsupervised(tri: &'a Triplet, reconstruction: Reconstruction, lambda_s: f64) -> Self {
        let (w, h) = tri.gt_depth().dims();
        Self {
            tri,
            reconstruction,
            mask: PixelMask::filled(w, h, false),
            teacher: None,
            teacher_error: None,
            lambda_s,
        }
    }

    pub fn distills(&self) -> bool {
        self.teacher_error.is_some() && self.teacher.is_some()
    }

    /// Loss terms at `depth`; `frozen` pins hints and the distillation target.
    pub fn evaluate(
        &self,
        depth: &DepthMap,
        weights: [f64; 2],
        frozen: Option<&Frozen>,
        want_gradient: bool,
    ) -> Result<Evaluation> {
        let rec = reconstruct_impl(
            self.tri,
            depth,
            self.reconstruction,
            frozen.and_then(|f| f.hints.as_ref()),
            want_gradient,
        )?;
        let not_mask = self.mask.map(|m| !m);
        let error = &rec.selection.error;
        let reproj = reprojection_loss(error, &not_mask)?;
        let consis = match &self.teacher {
            Some(t) => consistency_loss(depth, t, &self.mask)?,
            None => 0.0,
        };
        let (smooth, smooth_grad) = smoothness_with_gradient(depth, self.tri.current(), want_gradient)?;
        let ori = reproj + consis + self.lambda_s * smooth;

        let fused = match (&self.teacher, &self.teacher_error) {
            (Some(t), Some(te)) => Some(match frozen.and_then(|f| f.target.as_ref()) {
                Some(target) => FusedTarget {
                    depth: target.clone(),
                    error: error.clone(),
                    from_student: Grid::filled(depth.width(), depth.height(), false),
                },
                None => fuse_with_errors(t, te, depth, error)?,
            }),
            _ => None,
        };
        let distil = match &fused {
            Some(f) => distillation_loss(depth, &f.depth, &self.mask)?,
            None => 0.0,
        };
        let total = total_loss(ori, distil, weights)?;
        let terms = LossTerms {
            reproj,
            consis,
            smooth,
            ori,
            distil,
            total,
            lambda_s: self.lambda_s,
        };

        let gradient =
            want_gradient.then(|| self.gradient(depth, weights, &rec, &not_mask, fused.as_ref(), &smooth_grad));
        Ok(Evaluation {
            terms,
            weights,
            reconstructed: rec,
            fused,
            gradient,
        })
    }

    fn gradient(
        &self,
        depth: &DepthMap,
        weights: [f64; 2],
        rec: &Reconstructed,
        not_mask: &PixelMask,
        fused: Option<&FusedTarget>,
        smooth_grad: &[f64],
    ) -> Vec<f64> {
        let n = depth.len();
        let d = depth.as_slice();
        let [w1, w2] = weights;
        let mut g: Vec<f64> = smooth_grad.iter().map(|s| w1 * self.lambda_s * s).collect();

        let sign = |x: f64| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        };
        if let Some(t) = &self.teacher {
            let count = self.mask.as_slice().iter().filter(|m| **m).count();
            if count > 0 {
                let k = w1 / count as f64;
                for (i, m) in self.mask.as_slice().iter().enumerate() {
                    if *m {
                        g[i] += k * sign(d[i] - t.as_slice()[i]);
                    }
                }
            }
        }
        if let Some(f) = fused {
            let count = not_mask.as_slice().iter().filter(|m| **m).count();
            if count > 0 {
                let k = w2 / count as f64;
                for (i, m) in not_mask.as_slice().iter().enumerate() {
                    if *m {
                        g[i] += k * sign(d[i] - f.depth.as_slice()[i]);
                    }
                }
            }
        }

        // reprojection: mean of the selected error over valid pixels outside the mask
        let sel = rec.selection.index.as_slice();
        let supervised: Vec<bool> = (0..n).map(|i| not_mask.as_slice()[i] && sel[i].is_some()).collect();
        let count = supervised.iter().filter(|s| **s).count();
        if count == 0 || w1 == 0.0 {
            return g;
        }
        let k = w1 / count as f64;
        let target = self.tri.current();
        let mut grad_prev = vec![[0.0; 3]; n];
        let mut grad_next = vec![[0.0; 3]; n];
        for (c, cand) in rec.candidates.iter().enumerate() {
            let upstream: Vec<f64> = (0..n)
                .map(|i| {
                    if supervised[i] && sel[i] == Some(c as u8) {
                        k
                    } else {
                        0.0
                    }
                })
                .collect();
            if upstream.iter().all(|u| *u == 0.0) {
                continue;
            }
            let mut grad_c = vec![[0.0; 3]; n];
            photometric_error_backward(cand, target, &upstream, &mut grad_c);
            match c {
                0 => accumulate(&mut grad_prev, &grad_c),
                1 => accumulate(&mut grad_next, &grad_c),
                _ => {
                    let hints = rec.hints.as_ref().expect("rectified candidates carry hints");
                    if c == 2 {
                        hints.plan_prev.backward(&grad_c, &mut grad_prev, &mut grad_next);
                    } else {
                        hints.plan_next.backward(&grad_c, &mut grad_next, &mut grad_prev);
                    }
                }
            }
        }
        let (dp, dn) = (&rec.views.deriv_prev, &rec.views.deriv_next);
        for i in 0..n {
            g[i] += dot(&grad_prev[i], &dp[i]) + dot(&grad_next[i], &dn[i]);
        }
        g
    }
}

#[inline]
fn dot(a: &Rgb, b: &Rgb) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn accumulate(acc: &mut [Rgb], g: &[Rgb]) {
    for (a, b) in acc.iter_mut().zip(g) {
        a[0] += b[0];
        a[1] += b[1];
        a[2] += b[2];
    }
}
