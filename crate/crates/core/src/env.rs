//! N-dimensional double-integrator environment with a 2N-dimensional reward:
//! per axis, a time component (-1 per step until the axis is at the goal) and
//! a fuel component (-|u| * dt). Acceleration is shared across axes through an
//! L1 budget.

use serde::{Deserialize, Serialize};

use crate::replay::WeightVector;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub dims: usize,
    pub start_position: Vec<f64>,
    pub goal_position: Vec<f64>,
    pub dt: f64,
    pub pos_tolerance: f64,
    pub vel_tolerance: f64,
    pub max_steps: usize,
    pub accel_budget: f64,
}

impl Default for EnvConfig {
    /// The 1-D setup: start at x = -90, goal at 0, unit timestep, unit
    /// acceleration budget.
    fn default() -> Self {
        Self {
            dims: 1,
            start_position: vec![-90.0],
            goal_position: vec![0.0],
            dt: 1.0,
            pos_tolerance: 0.5,
            vel_tolerance: 0.5,
            max_steps: 300,
            accel_budget: 1.0,
        }
    }
}

impl EnvConfig {
    /// The 2-D variant: both axes start at -90 with goal 0.
    pub fn default_2d() -> Self {
        Self {
            dims: 2,
            start_position: vec![-90.0, -90.0],
            goal_position: vec![0.0, 0.0],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::Config("dims must be >= 1".into()));
        }
        if self.start_position.len() != self.dims || self.goal_position.len() != self.dims {
            return Err(Error::Config(format!(
                "start/goal positions must have length dims={}",
                self.dims
            )));
        }
        if self.dt <= 0.0 || self.pos_tolerance <= 0.0 || self.vel_tolerance <= 0.0 {
            return Err(Error::Config("dt and tolerances must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be >= 1".into()));
        }
        if self.accel_budget <= 0.0 {
            return Err(Error::Config("accel_budget must be positive".into()));
        }
        Ok(())
    }

    /// Dimension of the reward vector (two components per axis).
    pub fn reward_dim(&self) -> usize {
        2 * self.dims
    }

    /// Dimension of the flattened observation (position then velocity).
    pub fn obs_dim(&self) -> usize {
        2 * self.dims
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub step_count: usize,
}

impl EnvState {
    /// Flattened observation: positions followed by velocities.
    pub fn observation(&self) -> Vec<f64> {
        let mut obs = self.position.clone();
        obs.extend_from_slice(&self.velocity);
        obs
    }
}

/// Per-axis acceleration, each component in [-1, 1]; after projection the
/// components also satisfy the L1 budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionVector(pub Vec<f64>);

impl ActionVector {
    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|u| u.abs()).sum()
    }
}

/// Length-2N reward: component 2i is the time reward of axis i (0 or -1),
/// component 2i+1 is the fuel reward of axis i (-|u_i| * dt).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardVector(pub Vec<f64>);

pub fn reset(config: &EnvConfig) -> EnvState {
    EnvState {
        position: config.start_position.clone(),
        velocity: vec![0.0; config.dims],
        step_count: 0,
    }
}

/// Rescale `u_raw` uniformly onto the L1 ball of radius `budget` (no-op when
/// already inside). Preserves direction.
pub fn project_action(u_raw: &[f64], budget: f64) -> ActionVector {
    let l1: f64 = u_raw.iter().map(|u| u.abs()).sum();
    if l1 <= budget {
        ActionVector(u_raw.to_vec())
    } else {
        let scale = budget / l1;
        ActionVector(u_raw.iter().map(|u| u * scale).collect())
    }
}

pub fn axis_at_goal(state: &EnvState, axis: usize, config: &EnvConfig) -> bool {
    (state.position[axis] - config.goal_position[axis]).abs() <= config.pos_tolerance
        && state.velocity[axis].abs() <= config.vel_tolerance
}

pub fn all_at_goal(state: &EnvState, config: &EnvConfig) -> bool {
    (0..config.dims).all(|i| axis_at_goal(state, i, config))
}

/// Semi-implicit Euler step: v += u*dt, then x += v*dt. Returns the next
/// state, the 2N-dimensional reward, and the done flag (all axes at goal, or
/// the step cap reached).
pub fn step(
    state: &EnvState,
    action: &ActionVector,
    config: &EnvConfig,
) -> Result<(EnvState, RewardVector, bool)> {
    if state.step_count >= config.max_steps {
        return Err(Error::TerminalState);
    }
    if action.0.len() != config.dims {
        return Err(Error::DimensionMismatch(format!(
            "action length {} != dims {}",
            action.0.len(),
            config.dims
        )));
    }
    let mut next = EnvState {
        position: state.position.clone(),
        velocity: state.velocity.clone(),
        step_count: state.step_count + 1,
    };
    for i in 0..config.dims {
        next.velocity[i] += action.0[i] * config.dt;
        next.position[i] += next.velocity[i] * config.dt;
    }
    let mut reward = Vec::with_capacity(config.reward_dim());
    for i in 0..config.dims {
        let time_reward = if axis_at_goal(&next, i, config) { 0.0 } else { -1.0 };
        reward.push(time_reward);
        reward.push(-action.0[i].abs() * config.dt);
    }
    let done = all_at_goal(&next, config) || next.step_count >= config.max_steps;
    Ok((next, RewardVector(reward), done))
}

/// Linear scalarization: w^T r.
pub fn scalarize(reward: &RewardVector, w: &WeightVector) -> Result<f64> {
    if reward.0.len() != w.as_slice().len() {
        return Err(Error::DimensionMismatch(format!(
            "reward dim {} != weight dim {}",
            reward.0.len(),
            w.as_slice().len()
        )));
    }
    Ok(reward.0.iter().zip(w.as_slice()).map(|(r, w)| r * w).sum())
}
