//! Weighted adaptive gradient methods for online convex optimization.
//!
//! The optimizers in this crate share one update: a momentum average of
//! the gradients and a weighted average of their powers,
//!
//! ```text
//! m_t = b1t m_{t-1} + (1 - b1t) g_t
//! V_t = (sum_i gamma_i g_i^p1 / sum_i gamma_i)^(1/p2) + eps
//! x_{t+1} = Proj_F(x_t - a_t m_t / V_t)
//! ```
//!
//! Different weight sequences `gamma` recover AdaGrad, RMSProp, Adam and
//! the linearly weighted WADA variants; see [`optimizers`] for the presets.

pub mod analysis;
pub mod driver;
pub mod error;
pub mod feasible;
pub mod numerics;
pub mod optimizers;
pub mod problems;
pub mod schedules;
pub mod wagmf;

pub use error::{Error, Result};
pub use feasible::FeasibleSet;
pub use numerics::{DiagonalMetric, Vector};
pub use optimizers::{make_preset, Overrides, Preset, PresetName};
pub use wagmf::{OptimizerConfig, OptimizerState};
