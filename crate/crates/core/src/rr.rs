//! Round-robin comparator: slot `i` is reserved for node `(i - 1) mod N`, so
//! collisions cannot occur. Inside its own slots a node still transmits with
//! a probability learned by the same update rule, fed with the statistics it
//! observes under the reserved schedule.

use crate::channel::Access;
use crate::error::{Error, Result};
use crate::learning::{LearningRun, Mode};
use crate::model::{GameConfig, Trajectory};

/// Runs the learning rule on the round-robin channel. Requires a fixed
/// roster.
pub fn simulate_rr(config: &GameConfig, frames: usize) -> Result<Trajectory> {
    if !config.churn_events.is_empty() {
        return Err(Error::ChurnInRoundRobin);
    }
    LearningRun::with_access(config, Mode::Stochastic, Access::RoundRobin)?.run(frames)
}

/// Per-slot average cost at probability `p`: one slot in `n` is usable.
pub fn rr_expected_cost(p: f64, cost: f64, n: usize) -> f64 {
    cost * p / n as f64
}

/// Age estimate `N E[s_a] / 2` with `E[s_a] = 1/p` reserved slots per
/// success, i.e. deliveries treated as evenly spaced `N/p` slots apart.
pub fn nominal_age(n: usize, p: f64) -> f64 {
    n as f64 / (2.0 * p)
}
