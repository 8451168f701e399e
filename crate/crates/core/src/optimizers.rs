//! Named optimizer presets.
//!
//! Defaults follow the convex experiments: `beta1 = 0.9`, `lambda = 1`,
//! `beta2 = 0.999` for the EMA methods, `eps = 1e-7` added to `V_t`, and an
//! `alpha / sqrt(t)` step size.
//!
//! | name          | engine        | weights            | p1 | p2 | beta1 |
//! |---------------|---------------|--------------------|----|----|-------|
//! | `sgd`         | plain_sgd     | -                  | -  | -  | 0.9   |
//! | `sign_sgd`    | sign          | -                  | -  | -  | 0.9   |
//! | `adagrad`     | wagmf_sum     | equal              | 2  | 2  | 0     |
//! | `rmsprop`     | ema           | -                  | 2  | 2  | 0     |
//! | `rmsprop_avg` | wagmf_sum     | equal              | 2  | 2  | 0     |
//! | `adam`        | ema           | -                  | 2  | 2  | 0.9   |
//! | `adamnc`      | wagmf_sum     | equal              | 2  | 2  | 0.9   |
//! | `amsgrad`     | amsgrad       | -                  | 2  | 2  | 0.9   |
//! | `wada`        | wagmf_stable  | linear             | 2  | 4  | 0.9   |
//! | `wada_v3`     | wagmf_stable  | linear             | 3  | 4  | 0.9   |
//! | `wada_v4`     | wagmf_stable  | linear             | 4  | 4  | 0.9   |
//! | `nostalgic(η)`| wagmf_sum     | hyper_harmonic(η)  | 2  | 2  | 0.9   |
//!
//! `adagrad` and `rmsprop_avg` coincide: `sqrt(sum g^2 / t)` with
//! `alpha / sqrt(t)` is AdaGrad's `sqrt(sum g^2)` with a constant `alpha`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::schedules::{MomentumSchedule, StepKind, StepSizeSchedule, WeightSchedule};
use crate::wagmf::{self, Engine, OptimizerConfig, OptimizerState, StepReport};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PresetName {
    Sgd,
    SignSgd,
    Adagrad,
    Rmsprop,
    RmspropAvg,
    Adam,
    AdamNc,
    Amsgrad,
    Wada,
    WadaV3,
    WadaV4,
    Nostalgic { eta: f64 },
}

impl PresetName {
    pub const ALL_FIXED: [PresetName; 11] = [
        PresetName::Sgd,
        PresetName::SignSgd,
        PresetName::Adagrad,
        PresetName::Rmsprop,
        PresetName::RmspropAvg,
        PresetName::Adam,
        PresetName::AdamNc,
        PresetName::Amsgrad,
        PresetName::Wada,
        PresetName::WadaV3,
        PresetName::WadaV4,
    ];

    /// Methods whose effective learning rate can grow on adversarial streams.
    pub fn may_diverge(&self) -> bool {
        matches!(self, PresetName::Adam | PresetName::Rmsprop | PresetName::SignSgd)
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PresetName::Sgd => "sgd",
            PresetName::SignSgd => "sign_sgd",
            PresetName::Adagrad => "adagrad",
            PresetName::Rmsprop => "rmsprop",
            PresetName::RmspropAvg => "rmsprop_avg",
            PresetName::Adam => "adam",
            PresetName::AdamNc => "adamnc",
            PresetName::Amsgrad => "amsgrad",
            PresetName::Wada => "wada",
            PresetName::WadaV3 => "wada_v3",
            PresetName::WadaV4 => "wada_v4",
            PresetName::Nostalgic { eta } => return write!(f, "nostalgic({eta})"),
        };
        f.write_str(s)
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let name = s.trim();
        if let Some(inner) = name.strip_prefix("nostalgic(").and_then(|r| r.strip_suffix(')')) {
            let eta: f64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::UnknownPreset(name.to_string()))?;
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(Error::UnknownPreset(name.to_string()));
            }
            return Ok(PresetName::Nostalgic { eta });
        }
        PresetName::ALL_FIXED
            .iter()
            .copied()
            .find(|p| p.to_string() == name)
            .ok_or_else(|| Error::UnknownPreset(name.to_string()))
    }
}

/// Optional adjustments applied on top of a preset's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub beta1: Option<f64>,
    pub lambda: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub step: Option<StepKind>,
    pub bias_correction: Option<bool>,
    pub p1: Option<u32>,
}

impl Overrides {
    /// Set one field from its textual form, e.g. `("beta1", "0")`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidOverride { key: key.to_string(), reason: reason.to_string() };
        let real = || value.trim().parse::<f64>().map_err(|_| invalid("expected a number"));
        match key {
            "beta1" => self.beta1 = Some(real()?),
            "lambda" => self.lambda = Some(real()?),
            "beta2" => self.beta2 = Some(real()?),
            "epsilon" => self.epsilon = Some(real()?),
            "p1" => self.p1 = Some(value.trim().parse().map_err(|_| invalid("expected a positive integer"))?),
            "bias_correction" => {
                self.bias_correction = Some(value.trim().parse().map_err(|_| invalid("expected true or false"))?)
            }
            "step" => {
                self.step = Some(match value.trim() {
                    "inv_sqrt" => StepKind::InvSqrt,
                    "constant" => StepKind::Constant,
                    _ => return Err(invalid("expected inv_sqrt or constant")),
                })
            }
            _ => return Err(invalid("unknown key")),
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        let invalid = |key: &str, reason: &str| Err(Error::InvalidOverride { key: key.into(), reason: reason.into() });
        if let Some(b) = self.beta1 {
            if !(0.0..1.0).contains(&b) {
                return invalid("beta1", "must lie in [0, 1)");
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l <= 1.0) {
                return invalid("lambda", "must lie in (0, 1]");
            }
        }
        if let Some(b) = self.beta2 {
            if !(b > 0.0 && b < 1.0) {
                return invalid("beta2", "must lie in (0, 1)");
            }
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return invalid("epsilon", "must be >= 0");
            }
        }
        if self.p1 == Some(0) {
            return invalid("p1", "must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: PresetName,
    pub config: OptimizerConfig,
}

/// Build a preset with the default hyper-parameters and step size `alpha`.
pub fn make_preset(name: PresetName, alpha: f64, overrides: Option<&Overrides>) -> Result<Preset> {
    use PresetName::*;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha must be > 0 (got {alpha})")));
    }
    let (engine, weight, p1, p2, beta1) = match name {
        Sgd => (Engine::PlainSgd, WeightSchedule::Equal, 2, 2, DEFAULT_BETA1),
        SignSgd => (Engine::Sign, WeightSchedule::Equal, 2, 2, DEFAULT_BETA1),
        Adagrad | RmspropAvg => (Engine::WagmfSum, WeightSchedule::Equal, 2, 2, 0.0),
        Rmsprop => (Engine::Ema, WeightSchedule::Equal, 2, 2, 0.0),
        Adam => (Engine::Ema, WeightSchedule::Equal, 2, 2, DEFAULT_BETA1),
        AdamNc => (Engine::WagmfSum, WeightSchedule::Equal, 2, 2, DEFAULT_BETA1),
        Amsgrad => (Engine::Amsgrad, WeightSchedule::Equal, 2, 2, DEFAULT_BETA1),
        Wada => (Engine::WagmfStable, WeightSchedule::Linear, 2, 4, DEFAULT_BETA1),
        WadaV3 => (Engine::WagmfStable, WeightSchedule::Linear, 3, 4, DEFAULT_BETA1),
        WadaV4 => (Engine::WagmfStable, WeightSchedule::Linear, 4, 4, DEFAULT_BETA1),
        Nostalgic { eta } => (Engine::WagmfSum, WeightSchedule::HyperHarmonic { eta }, 2, 2, DEFAULT_BETA1),
    };
    let mut config = OptimizerConfig {
        weight,
        p1,
        p2,
        step: StepSizeSchedule::inv_sqrt(alpha),
        momentum: MomentumSchedule::constant(beta1),
        beta2: DEFAULT_BETA2,
        epsilon: DEFAULT_EPSILON,
        bias_correction: false,
        engine,
    };
    if let Some(o) = overrides {
        o.check()?;
        if let Some(b) = o.beta1 {
            config.momentum.beta1 = b;
        }
        if let Some(l) = o.lambda {
            config.momentum.lambda = l;
        }
        if let Some(b) = o.beta2 {
            config.beta2 = b;
        }
        if let Some(e) = o.epsilon {
            config.epsilon = e;
        }
        if let Some(k) = o.step {
            config.step.kind = k;
        }
        if let Some(b) = o.bias_correction {
            config.bias_correction = b;
        }
        if let Some(p) = o.p1 {
            config.p1 = p;
        }
    }
    config.validate()?;
    Ok(Preset { name, config })
}

impl Preset {
    pub fn step(&self, state: &mut OptimizerState, g: &[f64], set: &FeasibleSet) -> Result<StepReport> {
        wagmf::step(state, g, &self.config, set)
    }
}
