//! Weight-conditioned DDPG: an actor pi(s, w) and critic Q(s, w, a) with
//! target networks. Both networks take the reward-weight vector as part of
//! their input, so a single trained policy serves every point on the weight
//! simplex.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{self, ActionVector, EnvConfig, EnvState, RewardVector};
use crate::nn::{
    adam_step, backward_accumulate, backward_input, forward, init_mlp, soft_update, AdamState,
    MlpParams, MlpSpec, OutputActivation,
};
use crate::oracle;
use crate::replay::{sample_uniform_simplex, ReplayBuffer, Transition, WeightVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub noise_sigma: f64,
    pub warmup_steps: usize,
    pub train_every: usize,
    /// Augmentation rate: extra weight-resampled replay tuples per transition.
    pub k: usize,
    pub episodes: usize,
    pub seed: u64,
    pub hidden_sizes: Vec<usize>,
    pub buffer_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            tau: 0.005,
            batch_size: 128,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            noise_sigma: 0.2,
            warmup_steps: 1000,
            train_every: 1,
            k: 4,
            episodes: 2500,
            seed: 0,
            hidden_sizes: vec![32, 32],
            buffer_capacity: 1_000_000,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0,1)", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} outside (0,1]", self.tau)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        if self.train_every == 0 {
            return Err(Error::Config("train_every must be >= 1".into()));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::Config("buffer_capacity must be >= 1".into()));
        }
        Ok(())
    }
}

/// Totals and trajectory of one episode. `time_per_axis` counts the steps an
/// axis paid the -1 time reward (scaled by dt); `fuel_per_axis` is the
/// accumulated |u| * dt. `scalar_cost` is the undiscounted -sum(w^T r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub steps: usize,
    pub time_per_axis: Vec<f64>,
    pub fuel_per_axis: Vec<f64>,
    pub scalar_cost: f64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial_position: Vec<f64>,
    pub initial_velocity: Vec<f64>,
    pub steps: Vec<TrajectoryStep>,
}

/// State after applying `action`, together with the reward that step earned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub action: Vec<f64>,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub reward: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub behavior_weights: Vec<f64>,
    pub steps: usize,
    pub scalar_cost: f64,
    pub mean_critic_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeLog>,
    pub total_env_steps: usize,
    pub total_train_steps: usize,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub dims: usize,
    pub actor_spec: MlpSpec,
    pub actor: MlpParams,
    pub actor_target: MlpParams,
    pub critic_spec: MlpSpec,
    pub critic: MlpParams,
    pub critic_target: MlpParams,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    /// Per-component offset/scale applied to raw observations before they
    /// enter either network. Derived from the environment geometry so inputs
    /// stay O(1).
    pub obs_offset: Vec<f64>,
    pub obs_scale: Vec<f64>,
    pub accel_budget: f64,
    /// Multiplier on `noise_sigma`; the training loop anneals it so late
    /// episodes explore less and the replay sharpens around the greedy policy.
    noise_scale: f64,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(env_config: &EnvConfig, config: AgentConfig) -> Result<Self> {
        env_config.validate()?;
        config.validate()?;
        let n = env_config.dims;
        let obs_dim = env_config.obs_dim();
        let w_dim = env_config.reward_dim();

        let mut actor_sizes = vec![obs_dim + w_dim];
        actor_sizes.extend_from_slice(&config.hidden_sizes);
        actor_sizes.push(n);
        let actor_spec = MlpSpec::new(actor_sizes, OutputActivation::Tanh);

        let mut critic_sizes = vec![obs_dim + w_dim + n];
        critic_sizes.extend_from_slice(&config.hidden_sizes);
        critic_sizes.push(1);
        let critic_spec = MlpSpec::new(critic_sizes, OutputActivation::Linear);

        let actor = init_mlp(&actor_spec, config.seed.wrapping_add(1))?;
        let critic = init_mlp(&critic_spec, config.seed.wrapping_add(2))?;

        let span = (0..n)
            .map(|i| (env_config.start_position[i] - env_config.goal_position[i]).abs())
            .fold(1.0_f64, f64::max);
        let pos_scale = span;
        let vel_scale = span.sqrt().max(1.0);
        let mut obs_offset = env_config.goal_position.clone();
        obs_offset.extend(std::iter::repeat(0.0).take(n));
        let mut obs_scale = vec![pos_scale; n];
        obs_scale.extend(std::iter::repeat(vel_scale).take(n));

        Ok(Self {
            actor_opt: AdamState::new(&actor_spec, config.actor_lr),
            critic_opt: AdamState::new(&critic_spec, config.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            noise_scale: 1.0,
            dims: n,
            actor_spec,
            actor,
            critic_spec,
            critic,
            obs_offset,
            obs_scale,
            accel_budget: env_config.accel_budget,
            config,
        })
    }

    /// Rebuild an agent from persisted parts (checkpoint loading).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        env_config: &EnvConfig,
        config: AgentConfig,
        actor: MlpParams,
        actor_target: MlpParams,
        critic: MlpParams,
        critic_target: MlpParams,
    ) -> Result<Self> {
        let mut agent = Self::new(env_config, config)?;
        if !actor.matches_spec(&agent.actor_spec) || !critic.matches_spec(&agent.critic_spec) {
            return Err(Error::DimensionMismatch(
                "persisted parameters do not match the derived network shapes".into(),
            ));
        }
        agent.actor = actor;
        agent.actor_target = actor_target;
        agent.critic = critic;
        agent.critic_target = critic_target;
        Ok(agent)
    }

    fn scaled_obs(&self, obs: &[f64]) -> Vec<f64> {
        obs.iter()
            .zip(&self.obs_offset)
            .zip(&self.obs_scale)
            .map(|((&x, &off), &sc)| (x - off) / sc)
            .collect()
    }

    fn actor_input(&self, obs: &[f64], w: &WeightVector) -> Vec<f64> {
        let mut input = self.scaled_obs(obs);
        input.extend_from_slice(w.as_slice());
        input
    }

    fn critic_input(&self, obs: &[f64], w: &WeightVector, action: &[f64]) -> Vec<f64> {
        let mut input = self.actor_input(obs, w);
        input.extend_from_slice(action);
        input
    }

    /// The actor's tanh outputs already live in the signed action box; only
    /// the L1 budget projection remains.
    fn map_and_project(&self, tanh_out: &[f64]) -> ActionVector {
        env::project_action(tanh_out, self.accel_budget)
    }

    /// Greedy policy action (no exploration); pure in the agent.
    pub fn policy_action(&self, obs: &[f64], w: &WeightVector) -> Result<ActionVector> {
        let input = self.actor_input(obs, w);
        let (out, _) = forward(&self.actor, &self.actor_spec, &input)?;
        Ok(self.map_and_project(&out))
    }

    fn target_policy_action(&self, obs: &[f64], w: &WeightVector) -> Result<ActionVector> {
        let input = self.actor_input(obs, w);
        let (out, _) = forward(&self.actor_target, &self.actor_spec, &input)?;
        Ok(self.map_and_project(&out))
    }

    /// Policy action with optional Gaussian exploration noise, clipped to
    /// [-1, 1] and projected onto the budget.
    pub fn act(&mut self, obs: &[f64], w: &WeightVector, explore: bool) -> Result<ActionVector> {
        let input = self.actor_input(obs, w);
        let (out, _) = forward(&self.actor, &self.actor_spec, &input)?;
        let mut raw = out;
        if explore {
            let sigma = self.config.noise_sigma * self.noise_scale;
            for u in &mut raw {
                let z: f64 = self.rng.sample(StandardNormal);
                *u = (*u + sigma * z).clamp(-1.0, 1.0);
            }
        }
        Ok(env::project_action(&raw, self.accel_budget))
    }

    /// Bootstrapped critic targets:
    /// y = r + gamma * (1 - done) * Q_target(s', w, pi_target(s', w)).
    pub fn critic_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|t| {
                if t.done {
                    return Ok(t.scalar_reward);
                }
                let a = self.target_policy_action(&t.next_state, &t.weight)?;
                let input = self.critic_input(&t.next_state, &t.weight, &a.0);
                let (q, _) = forward(&self.critic_target, &self.critic_spec, &input)?;
                Ok(t.scalar_reward + self.config.gamma * q[0])
            })
            .collect()
    }

    /// One DDPG update: critic regression toward the bootstrapped targets,
    /// actor ascent on Q(s, w, pi(s, w)) through the critic's action input,
    /// then Polyak updates of both targets.
    pub fn train_step(&mut self, buffer: &ReplayBuffer) -> Result<StepDiagnostics> {
        // Minibatches are drawn with replacement, so any non-empty buffer is
        // enough; sample_minibatch rejects an empty one.
        let batch = buffer.sample_minibatch(self.config.batch_size, &mut self.rng)?;
        let b = batch.len() as f64;
        let targets = self.critic_targets(&batch)?;

        // Critic: minimize mean squared error to the targets.
        let mut critic_grads = MlpParams::zeros(&self.critic_spec);
        let mut critic_loss = 0.0;
        for (t, &y) in batch.iter().zip(&targets) {
            let input = self.critic_input(&t.state, &t.weight, &t.action.0);
            let (q, cache) = forward(&self.critic, &self.critic_spec, &input)?;
            let err = q[0] - y;
            critic_loss += err * err / b;
            backward_accumulate(
                &self.critic,
                &self.critic_spec,
                &cache,
                &[2.0 * err / b],
                &mut critic_grads,
            )?;
        }
        adam_step(&mut self.critic, &critic_grads, &mut self.critic_opt)?;

        // Actor: ascend mean Q(s, w, pi(s, w)). The gradient flows through the
        // critic's action input; the budget projection is treated as identity
        // for the gradient (it is the identity whenever the action is inside
        // the budget).
        let mut actor_grads = MlpParams::zeros(&self.actor_spec);
        let mut actor_objective = 0.0;
        let n = self.dims;
        for t in &batch {
            let ain = self.actor_input(&t.state, &t.weight);
            let (out, acache) = forward(&self.actor, &self.actor_spec, &ain)?;
            let action = self.map_and_project(&out);
            let cin = self.critic_input(&t.state, &t.weight, &action.0);
            let (q, ccache) = forward(&self.critic, &self.critic_spec, &cin)?;
            actor_objective += q[0] / b;
            let dq_din = backward_input(&self.critic, &self.critic_spec, &ccache, &[-1.0 / b])?;
            let action_grad = dq_din[dq_din.len() - n..].to_vec();
            backward_accumulate(&self.actor, &self.actor_spec, &acache, &action_grad, &mut actor_grads)?;
        }
        adam_step(&mut self.actor, &actor_grads, &mut self.actor_opt)?;

        soft_update(&mut self.critic_target, &self.critic, self.config.tau)?;
        soft_update(&mut self.actor_target, &self.actor, self.config.tau)?;

        Ok(StepDiagnostics {
            critic_loss,
            actor_objective,
        })
    }

    /// Roll one episode under `behavior_w`. When a buffer is supplied, each
    /// transition is inserted with the configured augmentation rate.
    pub fn run_episode(
        &mut self,
        env_config: &EnvConfig,
        behavior_w: &WeightVector,
        explore: bool,
        mut buffer: Option<&mut ReplayBuffer>,
    ) -> Result<EpisodeResult> {
        let k = self.config.k;
        self.rollout(env_config, behavior_w, explore, |agent, transition| {
            if let Some(buf) = buffer.as_deref_mut() {
                buf.insert_with_augmentation(transition, k, &mut agent.rng)?;
            }
            Ok(())
        })
    }

    /// Greedy evaluation episode; identical code path to the CLI/serve
    /// rollouts. Pure: does not touch the RNG.
    pub fn evaluate(&self, env_config: &EnvConfig, w: &WeightVector) -> Result<EpisodeResult> {
        if w.len() != env_config.reward_dim() {
            return Err(Error::DimensionMismatch(format!(
                "weight dim {} != reward dim {}",
                w.len(),
                env_config.reward_dim()
            )));
        }
        let mut state = env::reset(env_config);
        let mut result = EpisodeResult::empty(env_config, &state);
        loop {
            let obs = state.observation();
            let action = self.policy_action(&obs, w)?;
            let (next, reward, done) = env::step(&state, &action, env_config)?;
            result.record(env_config, w, &action, &next, &reward)?;
            state = next;
            if done {
                break;
            }
        }
        Ok(result)
    }

    fn rollout<F>(
        &mut self,
        env_config: &EnvConfig,
        w: &WeightVector,
        explore: bool,
        mut on_transition: F,
    ) -> Result<EpisodeResult>
    where
        F: FnMut(&mut Self, Transition) -> Result<()>,
    {
        if w.len() != env_config.reward_dim() {
            return Err(Error::DimensionMismatch(format!(
                "weight dim {} != reward dim {}",
                w.len(),
                env_config.reward_dim()
            )));
        }
        let mut state = env::reset(env_config);
        let mut result = EpisodeResult::empty(env_config, &state);
        loop {
            let obs = state.observation();
            let action = self.act(&obs, w, explore)?;
            let (next, reward, done) = env::step(&state, &action, env_config)?;
            let scalar = env::scalarize(&reward, w)?;
            // Stored transitions mark `done` only on goal termination. The
            // step cap truncates the episode without making the state
            // absorbing, so the critic still bootstraps past it; treating
            // timeouts as terminal makes any late-episode state look as good
            // as the goal.
            let transition = Transition {
                state: obs,
                action: action.clone(),
                weight: w.clone(),
                scalar_reward: scalar,
                raw_reward: reward.clone(),
                next_state: next.observation(),
                done: env::all_at_goal(&next, env_config),
            };
            on_transition(self, transition)?;
            result.record(env_config, w, &action, &next, &reward)?;
            state = next;
            if done {
                break;
            }
        }
        Ok(result)
    }

    /// Snapshot-selection score: mean greedy cost over a fixed probe set of
    /// weight vectors. On the 1-D task each probe cost is divided by the
    /// closed-form optimum for that weight, so the score measures relative
    /// excess everywhere on the trade-off; a raw mean would let a single
    /// compromise policy tie with a genuinely weight-conditioned one (slow
    /// low-thrust runs are cheap at fuel-heavy weights and expensive ones are
    /// cheap at time-heavy weights, and the two errors cancel).
    fn probe_cost(&self, env_config: &EnvConfig, probes: &[WeightVector]) -> Result<f64> {
        let normalize_1d = env_config.dims == 1;
        let distance = (env_config.goal_position[0] - env_config.start_position[0]).abs();
        let mut total = 0.0;
        for w in probes {
            let cost = self.evaluate(env_config, w)?.scalar_cost;
            if normalize_1d {
                let optimum = oracle::optimal_profile(w.as_slice()[0], distance)?.scalar_cost;
                total += cost / optimum.max(1e-9);
            } else {
                total += cost;
            }
        }
        Ok(total / probes.len() as f64)
    }

    /// Full training run: per episode, sample a behavior weight uniformly on
    /// the simplex, collect with exploration and augmentation, and run one
    /// gradient update per `train_every` environment steps once past warmup.
    ///
    /// Off-policy actor-critic training is not monotone: a run can peak and
    /// then degrade. Every `SNAPSHOT_EVERY` episodes the greedy policy is
    /// scored on fixed probe weights and the best-scoring parameters are kept;
    /// training ends by restoring that snapshot.
    pub fn train(&mut self, env_config: &EnvConfig) -> Result<TrainLog> {
        env_config.validate()?;
        let mut buffer = ReplayBuffer::new(self.config.buffer_capacity);
        let mut log = TrainLog::default();
        let w_dim = env_config.reward_dim();
        let mut total_steps = 0usize;

        const SNAPSHOT_EVERY: usize = 25;
        // Fixed validation weights for snapshot selection: an even spread
        // across the trade-off for two objectives, random simplex draws
        // otherwise. Probing runs greedy rollouts only, so it never touches
        // the training random stream: selection settings can change without
        // perturbing the learned trajectory.
        let probes: Vec<WeightVector> = if w_dim == 2 {
            (1..=10)
                .map(|i| {
                    let w1 = i as f64 / 10.0;
                    WeightVector::new(vec![w1, 1.0 - w1])
                })
                .collect::<Result<_>>()?
        } else {
            let mut probe_rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x50524f4245);
            (0..5)
                .map(|_| sample_uniform_simplex(w_dim, &mut probe_rng))
                .collect::<Result<_>>()?
        };
        let mut best: Option<(f64, MlpParams, MlpParams, MlpParams, MlpParams)> = None;
        for episode in 0..self.config.episodes {
            // Linearly anneal exploration noise to half over the first 80% of
            // training so late replay concentrates near the greedy policy and
            // the critic can sharpen the switching surface. A deeper floor
            // collapses weight conditioning: with little exploration the actor
            // drifts to one compromise policy for every weight.
            self.noise_scale = (1.0
                - episode as f64 / (0.8 * self.config.episodes.max(1) as f64))
                .clamp(0.5, 1.0);
            let behavior_w = sample_uniform_simplex(w_dim, &mut self.rng)?;
            let mut state = env::reset(env_config);
            let mut result = EpisodeResult::empty(env_config, &state);
            let mut loss_sum = 0.0;
            let mut loss_count = 0usize;
            loop {
                let obs = state.observation();
                let action = self.act(&obs, &behavior_w, true)?;
                let (next, reward, done) = env::step(&state, &action, env_config)?;
                let scalar = env::scalarize(&reward, &behavior_w)?;
                // Same time-limit masking as `rollout`: only goal termination
                // is absorbing for the critic.
                let transition = Transition {
                    state: obs,
                    action: action.clone(),
                    weight: behavior_w.clone(),
                    scalar_reward: scalar,
                    raw_reward: reward.clone(),
                    next_state: next.observation(),
                    done: env::all_at_goal(&next, env_config),
                };
                buffer.insert_with_augmentation(transition, self.config.k, &mut self.rng)?;
                result.record(env_config, &behavior_w, &action, &next, &reward)?;
                total_steps += 1;
                if total_steps > self.config.warmup_steps
                    && total_steps % self.config.train_every == 0
                    && buffer.len() >= self.config.batch_size
                {
                    let diag = self.train_step(&buffer)?;
                    loss_sum += diag.critic_loss;
                    loss_count += 1;
                    log.total_train_steps += 1;
                }
                state = next;
                if done {
                    break;
                }
            }
            log.episodes.push(EpisodeLog {
                episode,
                behavior_weights: behavior_w.as_slice().to_vec(),
                steps: result.steps,
                scalar_cost: result.scalar_cost,
                mean_critic_loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 },
            });
            if episode % SNAPSHOT_EVERY == SNAPSHOT_EVERY - 1
                || episode + 1 == self.config.episodes
            {
                let cost = self.probe_cost(env_config, &probes)?;
                if best.as_ref().is_none_or(|(c, ..)| cost < *c) {
                    best = Some((
                        cost,
                        self.actor.clone(),
                        self.critic.clone(),
                        self.actor_target.clone(),
                        self.critic_target.clone(),
                    ));
                }
            }
        }
        self.noise_scale = 1.0;
        if let Some((_, actor, critic, actor_target, critic_target)) = best {
            self.actor = actor;
            self.critic = critic;
            self.actor_target = actor_target;
            self.critic_target = critic_target;
        }
        log.total_env_steps = total_steps;
        Ok(log)
    }
}

impl EpisodeResult {
    fn empty(env_config: &EnvConfig, state: &EnvState) -> Self {
        Self {
            steps: 0,
            time_per_axis: vec![0.0; env_config.dims],
            fuel_per_axis: vec![0.0; env_config.dims],
            scalar_cost: 0.0,
            trajectory: Trajectory {
                initial_position: state.position.clone(),
                initial_velocity: state.velocity.clone(),
                steps: Vec::new(),
            },
        }
    }

    fn record(
        &mut self,
        env_config: &EnvConfig,
        w: &WeightVector,
        action: &ActionVector,
        next: &EnvState,
        reward: &RewardVector,
    ) -> Result<()> {
        self.steps += 1;
        for i in 0..env_config.dims {
            if reward.0[2 * i] < 0.0 {
                self.time_per_axis[i] += env_config.dt;
            }
            self.fuel_per_axis[i] += action.0[i].abs() * env_config.dt;
        }
        self.scalar_cost -= env::scalarize(reward, w)?;
        self.trajectory.steps.push(TrajectoryStep {
            action: action.0.clone(),
            position: next.position.clone(),
            velocity: next.velocity.clone(),
            reward: reward.0.clone(),
        });
        Ok(())
    }
}
