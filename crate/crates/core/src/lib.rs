//! Weight-conditioned DDPG on multi-objective double-integrator environments.
//!
//! The crate is organized around a small dense-network engine ([`nn`]), the
//! N-dimensional double-integrator environment with a vector reward ([`env`]),
//! a replay dataset that stores each transition together with extra
//! weight-resampled copies ([`replay`]), the weight-conditioned actor-critic
//! ([`agent`]), a closed-form optimal-control baseline for the 1-D case
//! ([`oracle`]), the CLI experiment harness ([`harness`]), and a read-only
//! rollout HTTP service ([`serve`]).

pub mod agent;
pub mod env;
pub mod harness;
pub mod nn;
pub mod oracle;
pub mod replay;
pub mod serve;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite gradient encountered: {0}")]
    NonFiniteGradient(String),
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("cannot step a terminal environment state")]
    TerminalState,
    #[error("brute-force search space too large: {0} sequences (limit {1})")]
    SearchSpaceExceeded(u128, u128),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("checkpoint format version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("bad config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
