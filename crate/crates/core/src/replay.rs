//! Replay dataset with weight augmentation: every environment transition is
//! stored under its behavior weight plus `k` copies carrying freshly sampled
//! weight vectors and the correspondingly re-scalarized reward.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionVector, RewardVector};
use crate::{Error, Result};

/// A point on the reward-weight simplex: components in [0, 1] summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if w.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidArgument(format!(
                "weight components must lie in [0,1]: {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        Ok(Self(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Uniform sample on the standard (dim-1)-simplex via exponential
/// normalization: draw dim independent Exp(1) variates and normalize.
pub fn sample_uniform_simplex<R: Rng>(dim: usize, rng: &mut R) -> Result<WeightVector> {
    if dim == 0 {
        return Err(Error::InvalidArgument("simplex dimension must be >= 1".into()));
    }
    if dim == 1 {
        return Ok(WeightVector(vec![1.0]));
    }
    let mut e: Vec<f64> = (0..dim)
        .map(|_| {
            let u: f64 = rng.random::<f64>();
            // u in [0,1); 1-u in (0,1] keeps the log finite.
            -(1.0 - u).ln()
        })
        .collect();
    let sum: f64 = e.iter().sum();
    for x in &mut e {
        *x /= sum;
    }
    // Exact renormalization so the invariant holds to tight tolerance.
    let s: f64 = e.iter().sum();
    for x in &mut e {
        *x /= s;
    }
    WeightVector::new(e)
}

/// Symmetric Dirichlet(alpha) sample via gamma normalization. alpha = 1 is
/// the uniform simplex distribution; alpha < 1 pushes mass toward the corners
/// where the optimal policies differ most.
pub fn sample_symmetric_dirichlet<R: Rng>(
    dim: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<WeightVector> {
    if dim == 0 {
        return Err(Error::InvalidArgument("simplex dimension must be >= 1".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dirichlet alpha must be positive, got {alpha}"
        )));
    }
    if dim == 1 {
        return Ok(WeightVector(vec![1.0]));
    }
    let gamma = rand_distr::Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("gamma distribution: {e}")))?;
    // Underflow guard: tiny alpha can round a variate down to exactly zero.
    let mut g: Vec<f64> = (0..dim).map(|_| rng.sample(gamma).max(1e-300)).collect();
    let sum: f64 = g.iter().sum();
    for x in &mut g {
        *x /= sum;
    }
    let s: f64 = g.iter().sum();
    for x in &mut g {
        *x /= s;
    }
    WeightVector::new(g)
}

/// One replay record: the flattened observation pair, the action, the weight
/// the record is scalarized under, both the scalar and the raw vector reward,
/// and the done flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: ActionVector,
    pub weight: WeightVector,
    pub scalar_reward: f64,
    pub raw_reward: RewardVector,
    pub next_state: Vec<f64>,
    pub done: bool,
}

impl Transition {
    pub fn validate(&self) -> Result<()> {
        let expect = crate::env::scalarize(&self.raw_reward, &self.weight)?;
        if (self.scalar_reward - expect).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "scalar_reward {} != w^T r {}",
                self.scalar_reward, expect
            )));
        }
        Ok(())
    }
}

/// Bounded ring of transitions; once full, each insert evicts the oldest.
#[derive(Debug)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            data: Vec::new(),
            capacity,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data.iter()
    }

    /// Insert the behavior-weight transition plus `k` weight-resampled copies
    /// sharing everything but (weight, scalar_reward). Returns k + 1.
    pub fn insert_with_augmentation<R: Rng>(
        &mut self,
        transition: Transition,
        k: usize,
        rng: &mut R,
    ) -> Result<usize> {
        transition.validate()?;
        let dim = transition.weight.len();
        for _ in 0..k {
            let w = sample_uniform_simplex(dim, rng)?;
            let scalar = crate::env::scalarize(&transition.raw_reward, &w)?;
            self.push(Transition {
                weight: w,
                scalar_reward: scalar,
                ..transition.clone()
            });
        }
        self.push(transition);
        Ok(k + 1)
    }

    /// `batch_size` records drawn uniformly with replacement.
    pub fn sample_minibatch<R: Rng>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<&Transition>> {
        if self.data.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..batch_size)
            .map(|_| &self.data[rng.random_range(0..self.data.len())])
            .collect())
    }
}
