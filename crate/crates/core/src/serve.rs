//! Read-only rollout service over a trained checkpoint: run a greedy episode
//! for a requested weight vector and return the trajectory with an oracle
//! comparison. The handlers are pure over an immutable agent, so concurrent
//! requests are trivially consistent.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::env::EnvConfig;
use crate::harness::{self, Checkpoint};
use crate::oracle;
use crate::replay::WeightVector;

pub struct ServeState {
    pub agent: Agent,
    pub env: EnvConfig,
    pub checkpoint_version: u32,
    pub episodes_trained: usize,
}

impl ServeState {
    pub fn from_checkpoint(checkpoint: Checkpoint) -> crate::Result<Self> {
        let env = checkpoint.run_config.env.clone();
        let checkpoint_version = checkpoint.format_version;
        let episodes_trained = checkpoint.episodes_trained;
        Ok(Self {
            agent: checkpoint.into_agent()?,
            env,
            checkpoint_version,
            episodes_trained,
        })
    }
}

#[derive(Debug, Serialize)]
struct ApiError {
    error: &'static str,
    message: String,
}

impl ApiError {
    fn response(status: StatusCode, error: &'static str, message: String) -> Response {
        (status, Json(ApiError { error, message })).into_response()
    }
}

#[derive(Debug, Serialize)]
struct MetaResponse {
    dims: usize,
    reward_dim: usize,
    env: EnvConfig,
    checkpoint_version: u32,
    episodes_trained: usize,
}

#[derive(Debug, Deserialize)]
pub struct RolloutRequest {
    pub weights: Vec<f64>,
    #[serde(default)]
    pub start_position: Option<Vec<f64>>,
    /// Accepted for forward compatibility; greedy rollouts are deterministic
    /// and do not consume randomness.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct RolloutTotals {
    time_per_axis: Vec<f64>,
    fuel_per_axis: Vec<f64>,
    scalar_cost: f64,
}

#[derive(Debug, Serialize)]
struct OracleTrajectory {
    actions: Vec<f64>,
    velocities: Vec<f64>,
    positions: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct OracleBlock {
    /// `null` when the profile never reaches the goal (w1 = 0).
    total_time: Option<f64>,
    time_unbounded: bool,
    total_fuel: f64,
    scalar_cost: f64,
    trajectory: OracleTrajectory,
}

#[derive(Debug, Serialize)]
struct RolloutResponse {
    positions: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    rewards: Vec<Vec<f64>>,
    totals: RolloutTotals,
    oracle: Option<OracleBlock>,
}

const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

fn validate_weights(weights: &[f64], expect_dim: usize) -> Result<WeightVector, Response> {
    if weights.len() != expect_dim {
        return Err(ApiError::response(
            StatusCode::BAD_REQUEST,
            "weight_dimension",
            format!("expected {expect_dim} weights, got {}", weights.len()),
        ));
    }
    if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(ApiError::response(
            StatusCode::BAD_REQUEST,
            "simplex_violation",
            format!("weight components must lie in [0,1]: {weights:?}"),
        ));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(ApiError::response(
            StatusCode::BAD_REQUEST,
            "simplex_violation",
            format!("weights must sum to 1, got {sum}"),
        ));
    }
    // Renormalize exactly so downstream simplex checks (tolerance 1e-9) pass.
    let normalized: Vec<f64> = weights.iter().map(|w| w / sum).collect();
    WeightVector::new(normalized).map_err(|e| {
        ApiError::response(StatusCode::BAD_REQUEST, "simplex_violation", e.to_string())
    })
}

async fn meta(State(state): State<Arc<ServeState>>) -> Json<MetaResponse> {
    Json(MetaResponse {
        dims: state.env.dims,
        reward_dim: state.env.reward_dim(),
        env: state.env.clone(),
        checkpoint_version: state.checkpoint_version,
        episodes_trained: state.episodes_trained,
    })
}

async fn rollout(
    State(state): State<Arc<ServeState>>,
    body: Result<Json<RolloutRequest>, JsonRejection>,
) -> Response {
    let Json(request) = match body {
        Ok(b) => b,
        Err(rej) => {
            return ApiError::response(
                StatusCode::BAD_REQUEST,
                "malformed_body",
                rej.body_text(),
            )
        }
    };
    let w = match validate_weights(&request.weights, state.env.reward_dim()) {
        Ok(w) => w,
        Err(resp) => return resp,
    };
    let mut env = state.env.clone();
    if let Some(start) = request.start_position {
        if start.len() != env.dims {
            return ApiError::response(
                StatusCode::BAD_REQUEST,
                "start_position_dimension",
                format!("expected {} components, got {}", env.dims, start.len()),
            );
        }
        env.start_position = start;
    }
    let result = match state.agent.evaluate(&env, &w) {
        Ok(r) => r,
        Err(e) => {
            return ApiError::response(
                StatusCode::INTERNAL_SERVER_ERROR,
                "rollout_failed",
                e.to_string(),
            )
        }
    };
    let oracle_block = if env.dims == 1 {
        match build_oracle_block(&env, w.as_slice()[0]) {
            Ok(b) => Some(b),
            Err(e) => {
                return ApiError::response(
                    StatusCode::INTERNAL_SERVER_ERROR,
                    "oracle_failed",
                    e.to_string(),
                )
            }
        }
    } else {
        None
    };
    let mut positions = vec![result.trajectory.initial_position.clone()];
    let mut velocities = vec![result.trajectory.initial_velocity.clone()];
    let mut actions = Vec::with_capacity(result.steps);
    let mut rewards = Vec::with_capacity(result.steps);
    for s in &result.trajectory.steps {
        positions.push(s.position.clone());
        velocities.push(s.velocity.clone());
        actions.push(s.action.clone());
        rewards.push(s.reward.clone());
    }
    Json(RolloutResponse {
        positions,
        velocities,
        actions,
        rewards,
        totals: RolloutTotals {
            time_per_axis: result.time_per_axis,
            fuel_per_axis: result.fuel_per_axis,
            scalar_cost: result.scalar_cost,
        },
        oracle: oracle_block,
    })
    .into_response()
}

fn build_oracle_block(env: &EnvConfig, w1: f64) -> crate::Result<OracleBlock> {
    let d = harness::goal_distance_1d(env);
    let profile = oracle::optimal_profile(w1, d)?;
    let direction = (env.goal_position[0] - env.start_position[0]).signum();
    let samples = if profile.time_unbounded {
        0
    } else {
        (profile.total_time / env.dt).ceil() as usize + 1
    };
    let mut trajectory = OracleTrajectory {
        actions: Vec::with_capacity(samples),
        velocities: Vec::with_capacity(samples),
        positions: Vec::with_capacity(samples),
    };
    for t in 0..samples {
        let tau = t as f64 * env.dt;
        trajectory.actions.push(profile.action_at(tau, direction));
        trajectory.velocities.push(profile.velocity_at(tau, direction));
        trajectory
            .positions
            .push(env.start_position[0] + profile.position_at(tau, direction));
    }
    Ok(OracleBlock {
        total_time: if profile.time_unbounded { None } else { Some(profile.total_time) },
        time_unbounded: profile.time_unbounded,
        total_fuel: profile.total_fuel,
        scalar_cost: profile.scalar_cost,
        trajectory,
    })
}

#[derive(Debug, Deserialize)]
struct OracleQuery {
    w1: f64,
    d: f64,
}

async fn oracle_endpoint(Query(q): Query<OracleQuery>) -> Response {
    match oracle::optimal_profile(q.w1, q.d) {
        Ok(profile) => Json(profile).into_response(),
        Err(e) => ApiError::response(StatusCode::BAD_REQUEST, "invalid_parameters", e.to_string()),
    }
}

async fn preflight() -> StatusCode {
    StatusCode::NO_CONTENT
}

/// Permissive same-host CORS so the browser console can call the API.
async fn with_cors(request: axum::extract::Request, next: axum::middleware::Next) -> Response {
    let method = request.method().clone();
    let mut response = next.run(request).await;
    let headers = response.headers_mut();
    headers.insert(
        header::ACCESS_CONTROL_ALLOW_ORIGIN,
        HeaderValue::from_static("*"),
    );
    headers.insert(
        header::ACCESS_CONTROL_ALLOW_METHODS,
        HeaderValue::from_static("GET, POST, OPTIONS"),
    );
    headers.insert(
        header::ACCESS_CONTROL_ALLOW_HEADERS,
        HeaderValue::from_static("content-type"),
    );
    if method == Method::OPTIONS {
        *response.status_mut() = StatusCode::NO_CONTENT;
    }
    response
}

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/meta", get(meta))
        .route("/rollout", post(rollout).options(preflight))
        .route("/oracle", get(oracle_endpoint))
        .layer(axum::middleware::from_fn(with_cors))
        .with_state(state)
}

/// Blocking entry point for the `serve` CLI subcommand.
pub fn run(state: ServeState, port: u16) -> crate::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async move {
        let app = router(Arc::new(state));
        let addr = std::net::SocketAddr::from(([127, 0, 0, 1], port));
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("serving on http://{addr}");
        axum::serve(listener, app).await?;
        Ok(())
    })
}
