//! Experiment harness: flat key-value run configuration, versioned JSON
//! checkpoints, and the CSV-producing evaluation commands (weight sweeps,
//! augmentation-rate sweep, single rollouts).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentConfig, TrainLog};
use crate::env::EnvConfig;
use crate::oracle::{self, OptimalProfile};
use crate::replay::WeightVector;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    /// Number of w1 grid points (inclusive endpoints of [0, 1]).
    pub eval_grid: usize,
    pub eval_episodes: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            agent: AgentConfig::default(),
            eval_grid: 21,
            eval_episodes: 1,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        if self.eval_grid < 2 {
            return Err(Error::Config("eval_grid must be >= 2".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.agent.seed = seed;
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse value {value:?} for key {key}")))
}

fn parse_vec(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| parse_num(key, s.trim()))
        .collect()
}

fn parse_usize_vec(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| parse_num(key, s.trim()))
        .collect()
}

/// Parse the flat `key = value` run-configuration format. Unknown keys are
/// rejected so typos fail loudly. Lines starting with `#` are comments.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "dims" => cfg.env.dims = parse_num(key, value)?,
            "start_position" => cfg.env.start_position = parse_vec(key, value)?,
            "goal_position" => cfg.env.goal_position = parse_vec(key, value)?,
            "dt" => cfg.env.dt = parse_num(key, value)?,
            "pos_tolerance" => cfg.env.pos_tolerance = parse_num(key, value)?,
            "vel_tolerance" => cfg.env.vel_tolerance = parse_num(key, value)?,
            "max_steps" => cfg.env.max_steps = parse_num(key, value)?,
            "accel_budget" => cfg.env.accel_budget = parse_num(key, value)?,
            "gamma" => cfg.agent.gamma = parse_num(key, value)?,
            "tau" => cfg.agent.tau = parse_num(key, value)?,
            "batch_size" => cfg.agent.batch_size = parse_num(key, value)?,
            "actor_lr" => cfg.agent.actor_lr = parse_num(key, value)?,
            "critic_lr" => cfg.agent.critic_lr = parse_num(key, value)?,
            "noise_sigma" => cfg.agent.noise_sigma = parse_num(key, value)?,
            "warmup_steps" => cfg.agent.warmup_steps = parse_num(key, value)?,
            "train_every" => cfg.agent.train_every = parse_num(key, value)?,
            "k" => cfg.agent.k = parse_num(key, value)?,
            "episodes" => cfg.agent.episodes = parse_num(key, value)?,
            "seed" => {
                let seed = parse_num(key, value)?;
                cfg.set_seed(seed);
            }
            "hidden_sizes" => cfg.agent.hidden_sizes = parse_usize_vec(key, value)?,
            "buffer_capacity" => cfg.agent.buffer_capacity = parse_num(key, value)?,
            "eval_grid" => cfg.eval_grid = parse_num(key, value)?,
            "eval_episodes" => cfg.eval_episodes = parse_num(key, value)?,
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
    }
    // When the dimension changed but positions were left at their defaults,
    // broadcast the scalar default across axes.
    if cfg.env.start_position.len() == 1 && cfg.env.dims > 1 {
        cfg.env.start_position = vec![cfg.env.start_position[0]; cfg.env.dims];
    }
    if cfg.env.goal_position.len() == 1 && cfg.env.dims > 1 {
        cfg.env.goal_position = vec![cfg.env.goal_position[0]; cfg.env.dims];
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_run_config(&text)
}

/// Versioned persisted bundle: network specs and parameters for the actor,
/// critic, and both targets, plus the run configuration they were trained
/// under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub actor_spec: crate::nn::MlpSpec,
    pub critic_spec: crate::nn::MlpSpec,
    pub actor: crate::nn::MlpParams,
    pub actor_target: crate::nn::MlpParams,
    pub critic: crate::nn::MlpParams,
    pub critic_target: crate::nn::MlpParams,
    pub run_config: RunConfig,
    pub seed: u64,
    pub episodes_trained: usize,
}

impl Checkpoint {
    pub fn from_agent(agent: &Agent, run_config: &RunConfig, episodes_trained: usize) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            actor_spec: agent.actor_spec.clone(),
            critic_spec: agent.critic_spec.clone(),
            actor: agent.actor.clone(),
            actor_target: agent.actor_target.clone(),
            critic: agent.critic.clone(),
            critic_target: agent.critic_target.clone(),
            run_config: run_config.clone(),
            seed: run_config.seed,
            episodes_trained,
        }
    }

    pub fn into_agent(self) -> Result<Agent> {
        Agent::from_parts(
            &self.run_config.env,
            self.run_config.agent.clone(),
            self.actor,
            self.actor_target,
            self.critic,
            self.critic_target,
        )
    }

    pub fn dims(&self) -> usize {
        self.run_config.env.dims
    }
}

/// JSON with full-precision decimal floats; load(save(c)) is bit-exact.
pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let json = serde_json::to_string(checkpoint)
        .map_err(|e| Error::Malformed(format!("serialize checkpoint: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Malformed(e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Malformed("missing format_version".into()))? as u32;
    if found != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: CHECKPOINT_FORMAT_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| Error::Malformed(e.to_string()))
}

/// Inclusive linspace over [0, 1] with `resolution` points.
pub fn w1_grid(resolution: usize) -> Vec<f64> {
    (0..resolution)
        .map(|i| i as f64 / (resolution - 1) as f64)
        .collect()
}

pub fn goal_distance_1d(env: &EnvConfig) -> f64 {
    (env.goal_position[0] - env.start_position[0]).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub w1: f64,
    pub agent_time: f64,
    pub agent_fuel: f64,
    pub agent_cost: f64,
    pub oracle_time: f64,
    pub oracle_fuel: f64,
    pub oracle_cost: f64,
}

/// 1-D weight sweep: greedy episodes at w = (w1, 1-w1) over the grid, with
/// the closed-form oracle columns alongside.
pub fn eval_sweep(
    agent: &Agent,
    env: &EnvConfig,
    grid: &[f64],
    eval_episodes: usize,
) -> Result<Vec<SweepRow>> {
    if env.dims != 1 {
        return Err(Error::InvalidArgument(
            "eval-sweep needs a 1-D checkpoint (the oracle is 1-D)".into(),
        ));
    }
    let d = goal_distance_1d(env);
    let mut rows = Vec::with_capacity(grid.len());
    for &w1 in grid {
        let w = WeightVector::new(vec![w1, 1.0 - w1])
            .map_err(|_| Error::InvalidArgument(format!("grid value {w1} outside [0,1]")))?;
        let mut time = 0.0;
        let mut fuel = 0.0;
        let mut cost = 0.0;
        for _ in 0..eval_episodes {
            let r = agent.evaluate(env, &w)?;
            time += r.time_per_axis[0];
            fuel += r.fuel_per_axis[0];
            cost += r.scalar_cost;
        }
        let n = eval_episodes as f64;
        let p = oracle::optimal_profile(w1, d)?;
        rows.push(SweepRow {
            w1,
            agent_time: time / n,
            agent_fuel: fuel / n,
            agent_cost: cost / n,
            oracle_time: p.total_time,
            oracle_fuel: p.total_fuel,
            oracle_cost: p.scalar_cost,
        });
    }
    Ok(rows)
}

pub fn eval_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "w1,agent_time,agent_fuel,agent_cost,oracle_time,oracle_fuel,oracle_cost\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.w1, r.agent_time, r.agent_fuel, r.agent_cost, r.oracle_time, r.oracle_fuel,
            r.oracle_cost
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep2dRow {
    pub t: f64,
    pub axis1_time: f64,
    pub axis1_fuel: f64,
    pub axis2_time: f64,
    pub axis2_fuel: f64,
}

/// 2-D sweep along one axis's weight pair: for axis 1 the weights are
/// (t, 1-t, 0, 0), for axis 2 they are (0, 0, t, 1-t).
pub fn eval_sweep_2d(
    agent: &Agent,
    env: &EnvConfig,
    axis: usize,
    grid: &[f64],
) -> Result<Vec<Sweep2dRow>> {
    if env.dims != 2 {
        return Err(Error::InvalidArgument(
            "eval-sweep-2d needs a 2-D checkpoint".into(),
        ));
    }
    if axis != 1 && axis != 2 {
        return Err(Error::InvalidArgument("axis must be 1 or 2".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &t in grid {
        let w = if axis == 1 {
            WeightVector::new(vec![t, 1.0 - t, 0.0, 0.0])
        } else {
            WeightVector::new(vec![0.0, 0.0, t, 1.0 - t])
        }
        .map_err(|_| Error::InvalidArgument(format!("grid value {t} outside [0,1]")))?;
        let r = agent.evaluate(env, &w)?;
        rows.push(Sweep2dRow {
            t,
            axis1_time: r.time_per_axis[0],
            axis1_fuel: r.fuel_per_axis[0],
            axis2_time: r.time_per_axis[1],
            axis2_fuel: r.fuel_per_axis[1],
        });
    }
    Ok(rows)
}

pub fn eval_sweep_2d_csv(rows: &[Sweep2dRow]) -> String {
    let mut out = String::from("t,axis1_time,axis1_fuel,axis2_time,axis2_fuel\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.t, r.axis1_time, r.axis1_fuel, r.axis2_time, r.axis2_fuel
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: usize,
    pub mean_cost: f64,
    pub std_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepDetail {
    pub k: usize,
    pub seed: u64,
    pub mean_cost: f64,
}

/// Train one agent per (k, seed), evaluate the mean greedy cost over the w1
/// grid (excluding the w1 = 0 point), and aggregate across seeds.
pub fn k_sweep(
    base: &RunConfig,
    k_values: &[usize],
    seeds_per_k: usize,
) -> Result<(Vec<KSweepRow>, Vec<KSweepDetail>)> {
    base.validate()?;
    if base.env.dims != 1 {
        return Err(Error::InvalidArgument("k-sweep is defined for the 1-D env".into()));
    }
    if seeds_per_k == 0 {
        return Err(Error::InvalidArgument("need at least one seed per k".into()));
    }
    let grid: Vec<f64> = w1_grid(base.eval_grid)
        .into_iter()
        .filter(|&w1| w1 > 0.0)
        .collect();
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for &k in k_values {
        let mut costs = Vec::with_capacity(seeds_per_k);
        for s in 0..seeds_per_k {
            let seed = base.seed
                .wrapping_add(1000 * (k as u64 + 1))
                .wrapping_add(s as u64);
            let mut cfg = base.agent.clone();
            cfg.k = k;
            cfg.seed = seed;
            let mut agent = Agent::new(&base.env, cfg)?;
            agent.train(&base.env)?;
            let sweep = eval_sweep(&agent, &base.env, &grid, base.eval_episodes)?;
            let mean = sweep.iter().map(|r| r.agent_cost).sum::<f64>() / sweep.len() as f64;
            costs.push(mean);
            details.push(KSweepDetail { k, seed, mean_cost: mean });
        }
        let mean = costs.iter().sum::<f64>() / costs.len() as f64;
        let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / costs.len() as f64;
        rows.push(KSweepRow {
            k,
            mean_cost: mean,
            std_cost: var.sqrt(),
        });
    }
    Ok((rows, details))
}

pub fn k_sweep_csv(rows: &[KSweepRow]) -> String {
    let mut out = String::from("k,mean_cost,std_cost\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.k, r.mean_cost, r.std_cost).unwrap();
    }
    out
}

/// One greedy rollout as CSV rows of the pre-step state and the chosen
/// action, with the closed-form oracle trajectory sampled at dt alongside.
/// 1-D only.
pub fn rollout_csv(agent: &Agent, env: &EnvConfig, w: &WeightVector) -> Result<String> {
    if env.dims != 1 {
        return Err(Error::InvalidArgument(
            "rollout CSV needs a 1-D checkpoint (the oracle is 1-D)".into(),
        ));
    }
    let result = agent.evaluate(env, w)?;
    let d = goal_distance_1d(env);
    let profile = oracle::optimal_profile(w.as_slice()[0], d)?;
    let direction = (env.goal_position[0] - env.start_position[0]).signum();

    let oracle_rows = if profile.time_unbounded {
        0
    } else {
        (profile.total_time / env.dt).ceil() as usize
    };
    let n_rows = result.steps.max(oracle_rows);

    let mut out = String::from(
        "step,action,velocity,position,oracle_action,oracle_velocity,oracle_position\n",
    );
    // Pre-step agent state for row t: row 0 is the initial state.
    let mut pos = result.trajectory.initial_position[0];
    let mut vel = result.trajectory.initial_velocity[0];
    for t in 0..n_rows {
        let action = if t < result.steps {
            result.trajectory.steps[t].action[0]
        } else {
            0.0
        };
        let tau = t as f64 * env.dt;
        let o_action = profile.action_at(tau, direction);
        let o_vel = profile.velocity_at(tau, direction);
        let o_pos = env.start_position[0] + profile.position_at(tau, direction);
        writeln!(out, "{t},{action},{vel},{pos},{o_action},{o_vel},{o_pos}").unwrap();
        if t < result.steps {
            pos = result.trajectory.steps[t].position[0];
            vel = result.trajectory.steps[t].velocity[0];
        }
    }
    Ok(out)
}

pub fn oracle_csv(profiles: &[OptimalProfile]) -> String {
    let mut out = String::from("w1,burn_time,coast_time,total_time,total_fuel,scalar_cost\n");
    for p in profiles {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.w1, p.burn_time, p.coast_time, p.total_time, p.total_fuel, p.scalar_cost
        )
        .unwrap();
    }
    out
}

pub fn train_log_csv(log: &TrainLog) -> String {
    let mut out = String::from("episode,steps,scalar_cost,mean_critic_loss,behavior_weights\n");
    for e in &log.episodes {
        let w = e
            .behavior_weights
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(";");
        writeln!(
            out,
            "{},{},{},{},{}",
            e.episode, e.steps, e.scalar_cost, e.mean_critic_loss, w
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Agent;

    fn small_run_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.agent.hidden_sizes = vec![8];
        cfg.agent.episodes = 1;
        cfg.env.max_steps = 20;
        cfg
    }

    #[test]
    fn parse_round_trips_defaults_and_overrides() {
        let text = "\
# comment
dims = 1
start_position = -90
goal_position = 0
k = 2
seed = 9
episodes = 5
hidden_sizes = 16,16
out_dir = results
";
        let cfg = parse_run_config(text).unwrap();
        assert_eq!(cfg.agent.k, 2);
        assert_eq!(cfg.agent.seed, 9);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.agent.episodes, 5);
        assert_eq!(cfg.agent.hidden_sizes, vec![16, 16]);
        assert_eq!(cfg.out_dir, PathBuf::from("results"));
        // untouched defaults
        assert_eq!(cfg.agent.batch_size, 128);
        assert_eq!(cfg.env.max_steps, 300);
    }

    #[test]
    fn parse_rejects_unknown_keys_and_bad_values() {
        assert!(matches!(parse_run_config("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(parse_run_config("gamma = fast"), Err(Error::Config(_))));
        assert!(matches!(parse_run_config("no equals sign"), Err(Error::Config(_))));
        assert!(matches!(parse_run_config("gamma = 1.5"), Err(Error::Config(_))));
    }

    #[test]
    fn parse_broadcasts_positions_across_dims() {
        let cfg = parse_run_config("dims = 2").unwrap();
        assert_eq!(cfg.env.start_position, vec![-90.0, -90.0]);
        assert_eq!(cfg.env.goal_position, vec![0.0, 0.0]);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        use rand::Rng;
        use rand::SeedableRng;
        let run = small_run_config();
        let agent = Agent::new(&run.env, run.agent.clone()).unwrap();
        let ckpt = Checkpoint::from_agent(&agent, &run, 0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&path, &ckpt).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, ckpt);

        // Forward outputs identical to 0 ulp on random inputs.
        let restored = loaded.into_agent().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let obs = [rng.random_range(-100.0..10.0), rng.random_range(-5.0..5.0)];
            let w1: f64 = rng.random_range(0.0..1.0);
            let w = WeightVector::new(vec![w1, 1.0 - w1]).unwrap();
            let a = agent.policy_action(&obs, &w).unwrap();
            let b = restored.policy_action(&obs, &w).unwrap();
            assert!(a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn checkpoint_load_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();

        let missing = load_checkpoint(&dir.path().join("absent.json"));
        assert!(matches!(missing, Err(Error::Io(_))));

        let run = small_run_config();
        let agent = Agent::new(&run.env, run.agent.clone()).unwrap();
        let ckpt = Checkpoint::from_agent(&agent, &run, 0);
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&path, &ckpt).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let truncated = dir.path().join("truncated.json");
        std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_checkpoint(&truncated), Err(Error::Malformed(_))));

        let bumped = dir.path().join("bumped.json");
        std::fs::write(&bumped, text.replace("\"format_version\":1", "\"format_version\":2")).unwrap();
        assert!(matches!(
            load_checkpoint(&bumped),
            Err(Error::VersionMismatch { found: 2, .. })
        ));
    }

    #[test]
    fn sweep_grid_row_count_and_untrained_agent_columns() {
        let run = small_run_config();
        let mut agent = Agent::new(&run.env, run.agent.clone()).unwrap();
        agent.actor.set_zero();
        let grid = w1_grid(21);
        assert_eq!(grid.len(), 21);
        assert!((grid[1] - 0.05).abs() < 1e-12);
        let rows = eval_sweep(&agent, &run.env, &grid, 1).unwrap();
        assert_eq!(rows.len(), 21);
        for r in &rows {
            // zero actor: never moves, times out, burns no fuel
            assert_eq!(r.agent_time, run.env.max_steps as f64 * run.env.dt);
            assert_eq!(r.agent_fuel, 0.0);
        }
        let last = rows.last().unwrap();
        assert!((last.oracle_time - 18.9737).abs() < 1e-3);
        let csv = eval_sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 22);
        assert!(csv.starts_with("w1,agent_time"));
    }

    #[test]
    fn sweep_rejects_wrong_dimension() {
        let mut run = small_run_config();
        run.env = EnvConfig { max_steps: 20, ..EnvConfig::default_2d() };
        let agent = Agent::new(&run.env, run.agent.clone()).unwrap();
        assert!(eval_sweep(&agent, &run.env, &w1_grid(5), 1).is_err());

        let run1 = small_run_config();
        let agent1 = Agent::new(&run1.env, run1.agent.clone()).unwrap();
        assert!(eval_sweep_2d(&agent1, &run1.env, 1, &w1_grid(5)).is_err());
    }

    #[test]
    fn sweep_2d_rows_and_weight_layout() {
        let mut run = small_run_config();
        run.env = EnvConfig { max_steps: 20, ..EnvConfig::default_2d() };
        let agent = Agent::new(&run.env, run.agent.clone()).unwrap();
        let grid = w1_grid(5);
        let rows = eval_sweep_2d(&agent, &run.env, 1, &grid).unwrap();
        assert_eq!(rows.len(), 5);
        let rows2 = eval_sweep_2d(&agent, &run.env, 2, &grid).unwrap();
        assert_eq!(rows2.len(), 5);
        assert!(eval_sweep_2d(&agent, &run.env, 3, &grid).is_err());
    }

    #[test]
    fn rollout_csv_shape_and_oracle_columns() {
        let run = small_run_config();
        let mut agent = Agent::new(&run.env, run.agent.clone()).unwrap();
        agent.actor.set_zero();
        let w = WeightVector::new(vec![1.0, 0.0]).unwrap();
        let csv = rollout_csv(&agent, &run.env, &w).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("step,action"));
        // Row 0: position starts at -90, oracle action is +1 (bang phase).
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[3], "-90");
        assert_eq!(first[4], "1");
        // Oracle is bang-bang for w1=1: +1 burns then -1 burns, no coast.
        let actions: Vec<f64> = lines[1..]
            .iter()
            .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
            .collect();
        assert!(actions.iter().all(|&a| a == 1.0 || a == -1.0 || a == 0.0));
        let n_pos: usize = actions.iter().filter(|&&a| a == 1.0).count();
        let n_neg: usize = actions.iter().filter(|&&a| a == -1.0).count();
        assert!(n_pos >= 9 && n_neg >= 9);
        // Final oracle velocity ~ 0.
        let last_vel: f64 = lines
            .last()
            .unwrap()
            .split(',')
            .nth(5)
            .unwrap()
            .parse()
            .unwrap();
        assert!(last_vel.abs() <= 1.0);
    }

    #[test]
    fn k_sweep_single_cell() {
        let mut run = small_run_config();
        run.agent.warmup_steps = 10_000; // no gradient updates: keep it fast
        run.eval_grid = 3;
        let (rows, details) = k_sweep(&run, &[0], 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(details.len(), 1);
        assert_eq!(rows[0].k, 0);
        assert!(rows[0].mean_cost >= 0.0);
        assert_eq!(rows[0].std_cost, 0.0);
        let csv = k_sweep_csv(&rows);
        assert!(csv.starts_with("k,mean_cost,std_cost\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
