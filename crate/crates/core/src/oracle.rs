//! Ground-truth optimal control for the 1-D double integrator under the
//! linear scalarization w1 * time + w2 * fuel: closed-form symmetric
//! bang-off-bang profiles, plus an exhaustive discrete-action oracle that
//! replays candidate sequences through the exact environment dynamics.

use serde::{Deserialize, Serialize};

use crate::env::{self, EnvConfig};
use crate::replay::WeightVector;
use crate::{Error, Result};

/// A rest-to-rest profile: burn at |u|=1 for `burn_time`, coast for
/// `coast_time`, then burn the opposite way for `burn_time`.
///
/// `total_time` is infinite for w1 = 0 (the never-move profile); the
/// `time_unbounded` flag makes that case explicit for serialized output,
/// where IEEE infinities have no JSON representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalProfile {
    pub w1: f64,
    pub distance: f64,
    pub burn_time: f64,
    pub coast_time: f64,
    pub total_time: f64,
    pub total_fuel: f64,
    pub scalar_cost: f64,
    pub time_unbounded: bool,
}

/// Minimize w1*T + w2*F over symmetric bang-off-bang profiles covering
/// distance `d`, with T = t1 + d/t1 and F = 2*t1. The closed-form minimizer
/// is t1 = sqrt(w1 * d / (w1 + 2*w2)).
pub fn optimal_profile(w1: f64, distance: f64) -> Result<OptimalProfile> {
    if !(0.0..=1.0).contains(&w1) {
        return Err(Error::InvalidArgument(format!("w1 {w1} outside [0,1]")));
    }
    if distance <= 0.0 || !distance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "distance must be positive, got {distance}"
        )));
    }
    let w2 = 1.0 - w1;
    if w1 == 0.0 {
        // All weight on fuel: never move.
        return Ok(OptimalProfile {
            w1,
            distance,
            burn_time: 0.0,
            coast_time: f64::INFINITY,
            total_time: f64::INFINITY,
            total_fuel: 0.0,
            scalar_cost: 0.0,
            time_unbounded: true,
        });
    }
    let burn_time = (w1 * distance / (w1 + 2.0 * w2)).sqrt();
    let coast_time = (distance / burn_time - burn_time).max(0.0);
    let total_time = 2.0 * burn_time + coast_time;
    let total_fuel = 2.0 * burn_time;
    Ok(OptimalProfile {
        w1,
        distance,
        burn_time,
        coast_time,
        total_time,
        total_fuel,
        scalar_cost: w1 * total_time + w2 * total_fuel,
        time_unbounded: false,
    })
}

impl OptimalProfile {
    /// Signed acceleration of the profile at continuous time `t`, moving a
    /// distance `self.distance` in direction `direction` (+1 or -1).
    pub fn action_at(&self, t: f64, direction: f64) -> f64 {
        if self.time_unbounded || t >= self.total_time {
            0.0
        } else if t < self.burn_time {
            direction
        } else if t < self.burn_time + self.coast_time {
            0.0
        } else {
            -direction
        }
    }

    /// Velocity at continuous time `t` (rest-to-rest, direction-signed).
    pub fn velocity_at(&self, t: f64, direction: f64) -> f64 {
        if self.time_unbounded {
            return 0.0;
        }
        let t1 = self.burn_time;
        let tc = self.coast_time;
        let v = if t < t1 {
            t
        } else if t < t1 + tc {
            t1
        } else if t < self.total_time {
            t1 - (t - t1 - tc)
        } else {
            0.0
        };
        direction * v
    }

    /// Position offset from the start at continuous time `t`.
    pub fn position_at(&self, t: f64, direction: f64) -> f64 {
        if self.time_unbounded {
            return 0.0;
        }
        let t1 = self.burn_time;
        let tc = self.coast_time;
        let x = if t < t1 {
            0.5 * t * t
        } else if t < t1 + tc {
            0.5 * t1 * t1 + t1 * (t - t1)
        } else if t < self.total_time {
            let td = t - t1 - tc;
            0.5 * t1 * t1 + t1 * tc + t1 * td - 0.5 * td * td
        } else {
            self.distance
        };
        direction * x
    }
}

/// Apply [`optimal_profile`] across a w1 grid. T is non-increasing and F
/// non-decreasing in w1.
pub fn oracle_curves(distance: f64, w1_grid: &[f64]) -> Result<Vec<OptimalProfile>> {
    w1_grid.iter().map(|&w1| optimal_profile(w1, distance)).collect()
}

const BRUTE_FORCE_GUARD: u128 = 100_000_000;

/// Exhaustive search over quantized action sequences through the exact
/// environment dynamics (1-D only). Returns the minimum scalarized cost and
/// the minimizing sequence.
///
/// Cost accounting matches the continuous objective's units: each step not at
/// the goal costs w1 * dt and fuel costs w2 * |u| * dt, so refining dt keeps
/// costs comparable against the closed-form optimum.
pub fn brute_force_discrete(
    w: &WeightVector,
    config: &EnvConfig,
    action_grid_levels: usize,
    horizon: usize,
) -> Result<(f64, Vec<f64>)> {
    if config.dims != 1 {
        return Err(Error::InvalidArgument(
            "brute-force oracle is 1-D only".into(),
        ));
    }
    if w.len() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected a 2-component weight, got {}",
            w.len()
        )));
    }
    if action_grid_levels < 1 {
        return Err(Error::InvalidArgument("need at least one action level".into()));
    }
    let space = (action_grid_levels as u128).pow(horizon as u32);
    if space > BRUTE_FORCE_GUARD {
        return Err(Error::SearchSpaceExceeded(space, BRUTE_FORCE_GUARD));
    }
    let levels: Vec<f64> = if action_grid_levels == 1 {
        vec![0.0]
    } else {
        (0..action_grid_levels)
            .map(|i| -1.0 + 2.0 * i as f64 / (action_grid_levels - 1) as f64)
            .collect()
    };
    let w1 = w.as_slice()[0];
    let w2 = w.as_slice()[1];

    let mut best_cost = f64::INFINITY;
    let mut best_seq: Vec<f64> = Vec::new();
    let mut seq: Vec<f64> = Vec::new();

    // Depth-first over sequences with branch-and-bound: per-step costs are
    // non-negative, so a partial cost at or above the incumbent is pruned.
    fn dfs(
        state: &env::EnvState,
        cost: f64,
        depth: usize,
        horizon: usize,
        levels: &[f64],
        config: &EnvConfig,
        w1: f64,
        w2: f64,
        seq: &mut Vec<f64>,
        best_cost: &mut f64,
        best_seq: &mut Vec<f64>,
    ) {
        if cost >= *best_cost {
            return;
        }
        // Only goal-reaching sequences are candidates; running out of horizon
        // scores nothing. Otherwise fuel-heavy weights would "win" by idling
        // through the horizon, which has no continuous counterpart.
        if depth == horizon {
            return;
        }
        for &u in levels {
            let action = env::project_action(&[u], config.accel_budget);
            let (next, reward, done) = env::step(state, &action, config).expect("horizon exceeds max_steps");
            // Time component of the reward is -1 per paying step; convert to
            // time units with dt. Fuel is already -|u|*dt.
            let step_cost = w1 * (-reward.0[0]) * config.dt + w2 * (-reward.0[1]);
            seq.push(action.0[0]);
            if done && env::all_at_goal(&next, config) {
                let total = cost + step_cost;
                if total < *best_cost {
                    *best_cost = total;
                    *best_seq = seq.clone();
                }
            } else {
                dfs(
                    &next,
                    cost + step_cost,
                    depth + 1,
                    horizon,
                    levels,
                    config,
                    w1,
                    w2,
                    seq,
                    best_cost,
                    best_seq,
                );
            }
            seq.pop();
        }
    }

    let start = env::reset(config);
    if config.max_steps < horizon {
        return Err(Error::InvalidArgument(
            "horizon exceeds env max_steps".into(),
        ));
    }
    dfs(
        &start, 0.0, 0, horizon, &levels, config, w1, w2, &mut seq, &mut best_cost, &mut best_seq,
    );
    if !best_cost.is_finite() {
        return Err(Error::InvalidArgument(
            "no action sequence reaches the goal within the horizon".into(),
        ));
    }
    Ok((best_cost, best_seq))
}
