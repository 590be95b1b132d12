//! Two-term loss rebalancing driven by each term's descending rate and a
//! linearly scheduled exponent.
//!
//! Every `window` observations the mean of each term is compared with the
//! mean over the previous window. The rate `r = current / previous` is
//! clamped to `[1e-3, 1e3]` and the weights become `r^lambda / sum(r^lambda)`.
//! Positive `lambda` favors the slower-descending term, negative `lambda` the
//! faster one; `lambda` moves from 3 to -3 over training.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LAMBDA_START: f64 = 3.0;
pub const LAMBDA_END: f64 = -3.0;
pub const DEFAULT_WINDOW: usize = 100;
pub const RATE_MIN: f64 = 1e-3;
pub const RATE_MAX: f64 = 1e3;

/// `3 - 6 * step / total_steps`.
pub fn lambda_at(step: usize, total_steps: usize) -> Result<f64> {
    if total_steps == 0 || step > total_steps {
        return Err(Error::contract(format!(
            "schedule step {step} outside [0, {total_steps}]"
        )));
    }
    Ok(LAMBDA_START + (LAMBDA_END - LAMBDA_START) * step as f64 / total_steps as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSchedule {
    pub total_steps: usize,
}

impl LambdaSchedule {
    pub fn new(total_steps: usize) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::contract("schedule needs at least one step"));
        }
        Ok(Self { total_steps })
    }

    pub fn at(&self, step: usize) -> Result<f64> {
        lambda_at(step, self.total_steps)
    }
}

/// How the two loss terms are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Fixed equal weights.
    SumUp,
    /// Rate-driven rebalancing.
    Mlra,
}

/// Normalized `r_i^lambda` weights for already clamped rates.
pub fn rate_weights(rates: [f64; 2], lambda: f64) -> [f64; 2] {
    let a = rates[0].powf(lambda);
    let b = rates[1].powf(lambda);
    let s = a + b;
    [a / s, b / s]
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    pub weights: [f64; 2],
    pub window: usize,
    /// Observations of the window in progress.
    pub current: [Vec<f64>; 2],
    /// Means of the last completed window.
    pub previous: Option<[f64; 2]>,
    pub step: usize,
    adaptive: bool,
}

impl WeightState {
    /// Rebalancing state starting at equal weights.
    pub fn mlra(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::contract("rebalancing window must be positive"));
        }
        Ok(Self {
            weights: [0.5, 0.5],
            window,
            current: [Vec::new(), Vec::new()],
            previous: None,
            step: 0,
            adaptive: true,
        })
    }

    /// Weights that never change.
    pub fn fixed(weights: [f64; 2]) -> Result<Self> {
        if !(weights[0] >= 0.0 && weights[1] >= 0.0) {
            return Err(Error::contract(format!(
                "weights must be non-negative, got {weights:?}"
            )));
        }
        Ok(Self {
            weights,
            window: DEFAULT_WINDOW,
            current: [Vec::new(), Vec::new()],
            previous: None,
            step: 0,
            adaptive: false,
        })
    }

    pub fn for_mode(mode: WeightMode, window: usize) -> Result<Self> {
        match mode {
            WeightMode::SumUp => Self::fixed([0.5, 0.5]),
            WeightMode::Mlra => Self::mlra(window),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        self.adaptive
    }

    /// Records one evaluation of both terms; rebalances when a window closes.
    ///
    /// Returns whether the weights were recomputed.
    pub fn observe(&mut self, losses: [f64; 2], lambda: f64) -> Result<bool> {
        self.step += 1;
        if !self.adaptive {
            return Ok(false);
        }
        self.current[0].push(losses[0]);
        self.current[1].push(losses[1]);
        if self.current[0].len() < self.window {
            return Ok(false);
        }
        if self.previous.is_some() {
            *self = update_weights(self, lambda)?;
            Ok(true)
        } else {
            self.previous = Some([mean(&self.current[0]), mean(&self.current[1])]);
            self.current = [Vec::new(), Vec::new()];
            Ok(false)
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Recomputes weights from the current and previous windows and advances the window.
pub fn update_weights(state: &WeightState, lambda: f64) -> Result<WeightState> {
    let prev = state
        .previous
        .ok_or_else(|| Error::contract("no completed previous window"))?;
    if state.current[0].is_empty() || state.current[1].is_empty() {
        return Err(Error::contract("current window is empty"));
    }
    let cur = [mean(&state.current[0]), mean(&state.current[1])];
    if !(cur.iter().chain(&prev).all(|v| *v > 0.0 && v.is_finite())) {
        return Err(Error::contract(format!(
            "loss averages must be positive, got current {cur:?} previous {prev:?}"
        )));
    }
    let rates = [
        (cur[0] / prev[0]).clamp(RATE_MIN, RATE_MAX),
        (cur[1] / prev[1]).clamp(RATE_MIN, RATE_MAX),
    ];
    Ok(WeightState {
        weights: rate_weights(rates, lambda),
        previous: Some(cur),
        current: [Vec::new(), Vec::new()],
        ..state.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_endpoints() {
        assert_eq!(lambda_at(0, 500).unwrap(), 3.0);
        assert_eq!(lambda_at(500, 500).unwrap(), -3.0);
        assert_eq!(lambda_at(250, 500).unwrap(), 0.0);
        assert!(lambda_at(501, 500).is_err());
        assert!(lambda_at(0, 0).is_err());
    }

    #[test]
    fn declared_rule_examples() {
        assert_eq!(rate_weights([0.2, 5.0], 0.0), [0.5, 0.5]);
        let w = rate_weights([0.5, 1.0], 1.0);
        assert_relative_eq!(w[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], 2.0 / 3.0, epsilon = 1e-15);
        let w = rate_weights([0.5, 1.0], -1.0);
        assert_relative_eq!(w[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn windows_drive_updates() {
        let mut s = WeightState::mlra(2).unwrap();
        assert!(!s.observe([1.0, 1.0], 1.0).unwrap());
        assert!(!s.observe([1.0, 1.0], 1.0).unwrap());
        assert_eq!(s.previous, Some([1.0, 1.0]));
        assert!(!s.observe([0.5, 1.0], 1.0).unwrap());
        assert!(s.observe([0.5, 1.0], 1.0).unwrap());
        assert_relative_eq!(s.weights[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(s.previous, Some([0.5, 1.0]));
        assert_eq!(s.step, 4);
    }

    #[test]
    fn rates_are_clamped() {
        let mut s = WeightState::mlra(1).unwrap();
        s.observe([1.0, 1.0], 1.0).unwrap();
        s.observe([1e-9, 1.0], 1.0).unwrap();
        let expected = rate_weights([RATE_MIN, 1.0], 1.0);
        assert_eq!(s.weights, expected);
    }

    #[test]
    fn non_positive_averages_are_rejected() {
        let mut s = WeightState::mlra(1).unwrap();
        s.observe([1.0, 1.0], 1.0).unwrap();
        assert!(s.observe([0.0, 1.0], 1.0).is_err());
        assert!(update_weights(&WeightState::mlra(3).unwrap(), 1.0).is_err());
    }

    #[test]
    fn fixed_weights_never_move() {
        let mut s = WeightState::for_mode(WeightMode::SumUp, 1).unwrap();
        for i in 0..5 {
            assert!(!s.observe([1.0 / (i + 1) as f64, 2.0], 2.0).unwrap());
        }
        assert_eq!(s.weights, [0.5, 0.5]);
        assert!(WeightState::fixed([-1.0, 2.0]).is_err());
    }
}
