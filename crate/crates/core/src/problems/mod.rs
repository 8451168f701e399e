//! Loss oracles for the online and stochastic experiments.
//!
//! An oracle is immutable. Each run asks it for a [`RoundSampler`] seeded
//! from the run's seed; the sampler draws the per-round randomness (a
//! Bernoulli branch, a minibatch) as a [`Round`], which can be replayed
//! later to evaluate the same `f_t` at another point, e.g. the comparator
//! in a regret computation.

mod dataset;
mod quadratic;
mod reddi;
mod softmax;

pub use dataset::{gaussian_blobs, load_csv, load_dataset, load_idx, parse_csv, parse_idx_images, parse_idx_labels, Dataset, DatasetFormat, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use quadratic::Quadratic;
pub use reddi::{ReddiOnline, ReddiStochastic, REDDI_BIG_SLOPE, REDDI_PERIOD, REDDI_PROBABILITY, REDDI_SMALL_SLOPE};
pub use softmax::{softmax_objective, softmax_objective_on, MinibatchSoftmax, SoftmaxLayout};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::feasible::FeasibleSet;
use crate::numerics::Vector;

/// The random source every run uses: ChaCha with 8 rounds, seeded through
/// `SeedableRng::seed_from_u64`.
pub type RunRng = ChaCha8Rng;

pub fn run_rng(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Randomness realized for one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Draw {
    Fixed,
    /// `true` selects the rare branch.
    Branch(bool),
    /// Sample indices, ascending.
    Batch(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    pub t: u64,
    pub draw: Draw,
}

pub trait RoundSampler: Send {
    fn next_round(&mut self, t: u64) -> Round;
}

/// Sampler for oracles whose loss depends on `t` only.
#[derive(Debug, Default, Clone)]
pub struct FixedRounds;

impl RoundSampler for FixedRounds {
    fn next_round(&mut self, t: u64) -> Round {
        Round { t, draw: Draw::Fixed }
    }
}

pub trait LossOracle: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Whether rounds carry randomness that must be recorded for replay.
    fn is_stochastic(&self) -> bool;

    fn sampler(&self, seed: u64) -> Box<dyn RoundSampler>;

    /// `(f_t(x), g)` with `g` a subgradient of `f_t` at `x`.
    fn evaluate(&self, round: &Round, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// A minimizer of the cumulative loss over `set`, when known in closed form.
    fn optimum(&self, _set: &FeasibleSet) -> Option<Vector> {
        None
    }
}
