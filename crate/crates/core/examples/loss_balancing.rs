//! Rebalancing two synthetic loss curves: one stalls, one keeps falling.
//! Early on the stalled term gains weight, late in the schedule the falling one does.

use dyndepth::balance::{LambdaSchedule, WeightState};

fn main() -> dyndepth::Result<()> {
    let total = 600;
    let schedule = LambdaSchedule::new(total)?;
    let mut state = WeightState::mlra(50)?;
    for step in 0..total {
        let t = step as f64;
        let stalled = 1.0 + 0.5 * (-t / 40.0).exp();
        let falling = 2.0 * (-t / 200.0).exp();
        let lambda = schedule.at(step)?;
        if state.observe([stalled, falling], lambda)? {
            println!(
                "step {:>3}  lambda {:+.2}  weights [{:.3}, {:.3}]",
                step + 1,
                lambda,
                state.weights[0],
                state.weights[1]
            );
        }
    }
    Ok(())
}
