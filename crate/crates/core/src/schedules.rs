//! Scalar schedules: step sizes, momentum decay, past-gradient weights and
//! the balance term that turns a weighted sum into a weighted average.

use serde::{Deserialize, Serialize};

/// How the base step size decays over rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// `alpha / sqrt(t)`
    InvSqrt,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizeSchedule {
    pub base_alpha: f64,
    pub kind: StepKind,
}

impl StepSizeSchedule {
    pub fn inv_sqrt(base_alpha: f64) -> Self {
        Self { base_alpha, kind: StepKind::InvSqrt }
    }

    pub fn constant(base_alpha: f64) -> Self {
        Self { base_alpha, kind: StepKind::Constant }
    }

    pub fn alpha(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        match self.kind {
            StepKind::InvSqrt => self.base_alpha / (t as f64).sqrt(),
            StepKind::Constant => self.base_alpha,
        }
    }
}

/// `beta_{1t} = beta1 * lambda^(t-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumSchedule {
    pub beta1: f64,
    pub lambda: f64,
}

impl MomentumSchedule {
    pub fn constant(beta1: f64) -> Self {
        Self { beta1, lambda: 1.0 }
    }

    pub fn beta1_at(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        if self.lambda == 1.0 || self.beta1 == 0.0 {
            return self.beta1;
        }
        self.beta1 * self.lambda.powf((t - 1) as f64)
    }
}

/// Weight `gamma_t` attached to the t-th powered gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSchedule {
    Equal,
    Linear,
    /// `(1 / beta2)^t`; overflows f64 near `t = 709 / ln(1 / beta2)`.
    Exponential { beta2: f64 },
    /// `1 / t^eta`
    HyperHarmonic { eta: f64 },
}

impl WeightSchedule {
    pub fn gamma(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        let tf = t as f64;
        match *self {
            WeightSchedule::Equal => 1.0,
            WeightSchedule::Linear => tf,
            WeightSchedule::Exponential { beta2 } => (1.0 / beta2).powf(tf),
            WeightSchedule::HyperHarmonic { eta } => tf.powf(-eta),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightSchedule::Equal => "equal",
            WeightSchedule::Linear => "linear",
            WeightSchedule::Exponential { .. } => "exponential",
            WeightSchedule::HyperHarmonic { .. } => "hyper_harmonic",
        }
    }
}

/// `b_t = 1 / sum_{i<=t} gamma_i`, given the running sum kept by the caller.
#[inline]
pub fn balance(running_sum: f64) -> f64 {
    debug_assert!(running_sum > 0.0);
    1.0 / running_sum
}

/// True iff `b_curr^(-p2) / alpha_curr >= b_prev^(-p2) / alpha_prev`.
///
/// Evaluated as `(b_prev / b_curr)^p2 >= alpha_curr / alpha_prev` so large
/// weight sums do not overflow.
pub fn check_nonincrease(b_prev: f64, b_curr: f64, alpha_prev: f64, alpha_curr: f64, p2: u32) -> bool {
    (b_prev / b_curr).powi(p2 as i32) >= alpha_curr / alpha_prev
}
