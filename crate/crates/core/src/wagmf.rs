//! Update engines for the weighted adaptive gradient framework.
//!
//! Three families share one state layout:
//!
//! * [`wagmf_step`]: the weighted-sum form. `v_t = v_{t-1} + gamma_t * g^p1`,
//!   `V_t = (b_t * v_t)^(1/p2) + eps` with `b_t = 1 / sum gamma_i`.
//! * [`stable_step`]: the normalized recursion for linear weights and
//!   `p2 = 4`, `v_t = (1 - 2/(t+1)) v_{t-1} + 2/(t+1) g^p1`, which tracks
//!   `b_t * v_t` without ever forming the `O(t^2)` sum.
//! * [`generic_step`]: EMA (Adam/RMSProp), AMSGrad, sign descent and plain SGD.
//!
//! Every engine uses the momentum `m_t = beta_{1t} m_{t-1} + (1 - beta_{1t}) g_t`
//! (ignored by the sign engine) and ends with a projection onto the feasible
//! set. `eps` is added after the root.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::numerics::{check_dim, pow_scalar, root_scalar, Vector};
use crate::schedules::{balance, check_nonincrease, MomentumSchedule, StepSizeSchedule, WeightSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    WagmfSum,
    WagmfStable,
    Ema,
    Amsgrad,
    Sign,
    PlainSgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub weight: WeightSchedule,
    pub p1: u32,
    pub p2: u32,
    pub step: StepSizeSchedule,
    pub momentum: MomentumSchedule,
    /// EMA decay for the `ema` and `amsgrad` engines.
    pub beta2: f64,
    pub epsilon: f64,
    /// Adam-style `1 / (1 - beta^t)` rescaling, `ema` engine only.
    pub bias_correction: bool,
    pub engine: Engine,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.p1 < 1 || self.p2 < 1 {
            return bad(format!("p1, p2 must be >= 1 (got {}, {})", self.p1, self.p2));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be >= 0 (got {})", self.epsilon));
        }
        if !(self.step.base_alpha > 0.0 && self.step.base_alpha.is_finite()) {
            return bad(format!("alpha must be > 0 (got {})", self.step.base_alpha));
        }
        if !(0.0..1.0).contains(&self.momentum.beta1) {
            return bad(format!("beta1 must lie in [0, 1) (got {})", self.momentum.beta1));
        }
        if !(self.momentum.lambda > 0.0 && self.momentum.lambda <= 1.0) {
            return bad(format!("lambda must lie in (0, 1] (got {})", self.momentum.lambda));
        }
        if matches!(self.engine, Engine::Ema | Engine::Amsgrad) && !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad(format!("beta2 must lie in (0, 1) (got {})", self.beta2));
        }
        match self.weight {
            WeightSchedule::Exponential { beta2 } if !(beta2 > 0.0 && beta2 < 1.0) => {
                return bad(format!("exponential weight beta2 must lie in (0, 1) (got {beta2})"));
            }
            WeightSchedule::HyperHarmonic { eta } if !(eta >= 0.0 && eta.is_finite()) => {
                return bad(format!("hyper-harmonic eta must be >= 0 (got {eta})"));
            }
            _ => {}
        }
        if self.engine == Engine::WagmfStable && (self.weight != WeightSchedule::Linear || self.p2 != 4) {
            return bad("the stable recursion requires linear weights and p2 = 4".into());
        }
        Ok(())
    }
}

/// Per-run optimizer state. `m`, `v` start at zero; `t` counts completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    t: u64,
    x: Vector,
    m: Vector,
    v: Vector,
    v_hat: Option<Vector>,
    weight_sum: f64,
    precond: Option<Vector>,
    alpha: f64,
    balance: f64,
}

impl OptimizerState {
    pub fn new(x0: Vector) -> Self {
        let d = x0.dim();
        Self {
            t: 0,
            x: x0,
            m: Vector::zeros(d),
            v: Vector::zeros(d),
            v_hat: None,
            weight_sum: 0.0,
            precond: None,
            alpha: 0.0,
            balance: 0.0,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// The current iterate `x_{t+1}` (or `x_1` before the first step).
    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn m(&self) -> &Vector {
        &self.m
    }

    pub fn v(&self) -> &Vector {
        &self.v
    }

    pub fn v_hat(&self) -> Option<&Vector> {
        self.v_hat.as_ref()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    /// Diagonal of `V_t` from the last step.
    pub fn precond(&self) -> Option<&Vector> {
        self.precond.as_ref()
    }

    /// `alpha_t` from the last step.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `b_t` from the last weighted-sum step (0 for other engines).
    pub fn balance(&self) -> f64 {
        self.balance
    }
}

/// What a single step used, for trace recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub t: u64,
    pub alpha: f64,
    pub beta1: f64,
}

fn validate_gradient(state: &OptimizerState, g: &[f64]) -> Result<()> {
    check_dim(state.dim(), g.len())?;
    match g.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteGradient { index }),
        None => Ok(()),
    }
}

fn require_engine(cfg: &OptimizerConfig, allowed: &[Engine]) -> Result<()> {
    if !allowed.contains(&cfg.engine) {
        return Err(Error::InvalidConfig(format!("engine {:?} not handled here", cfg.engine)));
    }
    Ok(())
}

/// `g^p` for even `p`, `|g|^p` for odd `p`; the accumulators stay non-negative
/// so the even root that follows is always defined.
#[inline]
fn powered(g: f64, p: u32) -> f64 {
    if p.is_multiple_of(2) {
        pow_scalar(g, p)
    } else {
        pow_scalar(g.abs(), p)
    }
}

fn momentum(m: &[f64], g: &[f64], beta1t: f64) -> Vec<f64> {
    m.iter().zip(g).map(|(m, g)| beta1t * m + (1.0 - beta1t) * g).collect()
}

fn root_plus_eps(values: &[f64], p: u32, eps: f64) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            root_scalar(value, p)
                .map(|r| r + eps)
                .ok_or(Error::NegativeRadicand { index, value })
        })
        .collect()
}

/// `P_F(x - alpha * m / V)`, with `0 / 0` read as no movement.
fn descend(x: &[f64], m: &[f64], precond: &[f64], alpha: f64, set: &FeasibleSet, t: u64) -> Result<Vec<f64>> {
    let mut next: Vec<f64> = x
        .iter()
        .zip(m.iter().zip(precond))
        .map(|(x, (m, p))| if *m == 0.0 { *x } else { x - alpha * m / p })
        .collect();
    set.project_in_place(&mut next)?;
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged { t });
    }
    Ok(next)
}

fn ensure_finite(values: &[f64], t: u64) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged { t });
    }
    Ok(())
}

/// One step of the weighted-sum framework.
pub fn wagmf_step(state: &mut OptimizerState, g: &[f64], cfg: &OptimizerConfig, set: &FeasibleSet) -> Result<StepReport> {
    require_engine(cfg, &[Engine::WagmfSum])?;
    validate_gradient(state, g)?;
    let t = state.t + 1;
    let alpha = cfg.step.alpha(t);
    let beta1t = cfg.momentum.beta1_at(t);

    let gamma = cfg.weight.gamma(t);
    let weight_sum = state.weight_sum + gamma;
    if !gamma.is_finite() || !weight_sum.is_finite() {
        return Err(Error::WeightOverflow { t });
    }
    let b = balance(weight_sum);
    if t >= 2 {
        debug_assert!(
            check_nonincrease(state.balance, b, state.alpha, alpha, cfg.p2),
            "learning-rate non-increase condition failed at t = {t}"
        );
    }

    let m = momentum(state.m.as_slice(), g, beta1t);
    let v: Vec<f64> = state
        .v
        .iter()
        .zip(g)
        .map(|(v, g)| v + gamma * powered(*g, cfg.p1))
        .collect();
    ensure_finite(&v, t)?;
    let averaged: Vec<f64> = v.iter().map(|v| v * b).collect();
    let precond = root_plus_eps(&averaged, cfg.p2, cfg.epsilon)?;
    let x = descend(state.x.as_slice(), &m, &precond, alpha, set, t)?;

    state.t = t;
    state.m = Vector::from_vec_unchecked(m);
    state.v = Vector::from_vec_unchecked(v);
    state.weight_sum = weight_sum;
    state.balance = b;
    state.alpha = alpha;
    state.precond = Some(Vector::from_vec_unchecked(precond));
    state.x = Vector::from_vec_unchecked(x);
    Ok(StepReport { t, alpha, beta1: beta1t })
}

/// One step of the normalized linear-weight recursion. Here `v` holds the
/// weighted average `b_t * v_t` directly.
pub fn stable_step(state: &mut OptimizerState, g: &[f64], cfg: &OptimizerConfig, set: &FeasibleSet) -> Result<StepReport> {
    require_engine(cfg, &[Engine::WagmfStable])?;
    validate_gradient(state, g)?;
    let t = state.t + 1;
    let alpha = cfg.step.alpha(t);
    let beta1t = cfg.momentum.beta1_at(t);

    let mix = 2.0 / (t as f64 + 1.0);
    let keep = 1.0 - mix;
    let m = momentum(state.m.as_slice(), g, beta1t);
    let v: Vec<f64> = state
        .v
        .iter()
        .zip(g)
        .map(|(v, g)| keep * v + mix * powered(*g, cfg.p1))
        .collect();
    ensure_finite(&v, t)?;
    let precond = root_plus_eps(&v, 4, cfg.epsilon)?;
    let x = descend(state.x.as_slice(), &m, &precond, alpha, set, t)?;

    state.t = t;
    state.m = Vector::from_vec_unchecked(m);
    state.v = Vector::from_vec_unchecked(v);
    state.weight_sum += t as f64;
    state.balance = balance(state.weight_sum);
    state.alpha = alpha;
    state.precond = Some(Vector::from_vec_unchecked(precond));
    state.x = Vector::from_vec_unchecked(x);
    Ok(StepReport { t, alpha, beta1: beta1t })
}

/// EMA, AMSGrad, sign and plain SGD updates.
pub fn generic_step(state: &mut OptimizerState, g: &[f64], cfg: &OptimizerConfig, set: &FeasibleSet) -> Result<StepReport> {
    require_engine(cfg, &[Engine::Ema, Engine::Amsgrad, Engine::Sign, Engine::PlainSgd])?;
    validate_gradient(state, g)?;
    let t = state.t + 1;
    let alpha = cfg.step.alpha(t);
    let beta1t = cfg.momentum.beta1_at(t);
    let m = momentum(state.m.as_slice(), g, beta1t);
    let eps = cfg.epsilon;

    let mut v_next = None;
    let mut v_hat_next = None;
    let (direction, precond): (Vec<f64>, Vec<f64>) = match cfg.engine {
        Engine::Ema | Engine::Amsgrad => {
            let beta2 = cfg.beta2;
            let v: Vec<f64> = state
                .v
                .iter()
                .zip(g)
                .map(|(v, g)| beta2 * v + (1.0 - beta2) * g * g)
                .collect();
            ensure_finite(&v, t)?;
            let (dir, pre) = if cfg.engine == Engine::Amsgrad {
                let v_hat: Vec<f64> = match &state.v_hat {
                    Some(prev) => prev.iter().zip(&v).map(|(a, b)| a.max(*b)).collect(),
                    None => v.clone(),
                };
                let pre = root_plus_eps(&v_hat, 2, eps)?;
                v_hat_next = Some(v_hat);
                (m.clone(), pre)
            } else if cfg.bias_correction {
                let c1 = 1.0 - cfg.momentum.beta1.powf(t as f64);
                let c2 = 1.0 - beta2.powf(t as f64);
                let corrected: Vec<f64> = v.iter().map(|v| v / c2).collect();
                (m.iter().map(|m| m / c1).collect(), root_plus_eps(&corrected, 2, eps)?)
            } else {
                (m.clone(), root_plus_eps(&v, 2, eps)?)
            };
            v_next = Some(v);
            (dir, pre)
        }
        // V_t = diag(|g_t|) turns g / V into sign(g).
        Engine::Sign => (
            g.iter().map(|g| if *g == 0.0 { 0.0 } else { g.signum() }).collect(),
            g.iter().map(|g| g.abs() + eps).collect(),
        ),
        Engine::PlainSgd => (m.clone(), vec![1.0; g.len()]),
        Engine::WagmfSum | Engine::WagmfStable => unreachable!(),
    };

    let x = if cfg.engine == Engine::Sign {
        let ones = vec![1.0; g.len()];
        descend(state.x.as_slice(), &direction, &ones, alpha, set, t)?
    } else {
        descend(state.x.as_slice(), &direction, &precond, alpha, set, t)?
    };

    state.t = t;
    state.m = Vector::from_vec_unchecked(m);
    if let Some(v) = v_next {
        state.v = Vector::from_vec_unchecked(v);
    }
    if let Some(v_hat) = v_hat_next {
        state.v_hat = Some(Vector::from_vec_unchecked(v_hat));
    }
    state.alpha = alpha;
    state.precond = Some(Vector::from_vec_unchecked(precond));
    state.x = Vector::from_vec_unchecked(x);
    Ok(StepReport { t, alpha, beta1: beta1t })
}

/// Dispatch on `cfg.engine`.
pub fn step(state: &mut OptimizerState, g: &[f64], cfg: &OptimizerConfig, set: &FeasibleSet) -> Result<StepReport> {
    match cfg.engine {
        Engine::WagmfSum => wagmf_step(state, g, cfg, set),
        Engine::WagmfStable => stable_step(state, g, cfg, set),
        _ => generic_step(state, g, cfg, set),
    }
}

/// True iff `V_curr / alpha_curr >= V_prev / alpha_prev` in every coordinate,
/// i.e. the effective per-coordinate step `alpha_t / V_t` did not grow.
/// Compared up to a few ulps of rounding.
pub fn effective_rate_nonincrease(prev: &[f64], alpha_prev: f64, curr: &[f64], alpha_curr: f64) -> bool {
    prev.iter().zip(curr).all(|(p, c)| {
        let lhs = c * alpha_prev;
        let rhs = p * alpha_curr;
        lhs >= rhs - 4.0 * f64::EPSILON * rhs.abs()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(engine: Engine, weight: WeightSchedule, p1: u32, p2: u32, beta1: f64, alpha: f64, eps: f64) -> OptimizerConfig {
        OptimizerConfig {
            weight,
            p1,
            p2,
            step: StepSizeSchedule::constant(alpha),
            momentum: MomentumSchedule::constant(beta1),
            beta2: 0.999,
            epsilon: eps,
            bias_correction: false,
            engine,
        }
    }

    fn state(x: &[f64]) -> OptimizerState {
        OptimizerState::new(Vector::new(x.to_vec()).unwrap())
    }

    #[test]
    fn wada_single_step_by_hand() {
        let c = cfg(Engine::WagmfSum, WeightSchedule::Linear, 2, 4, 0.0, 1.0, 0.0);
        let mut s = state(&[0.0]);
        wagmf_step(&mut s, &[2.0], &c, &FeasibleSet::Unconstrained).unwrap();
        assert_eq!(s.m().as_slice(), &[2.0]);
        assert_eq!(s.v().as_slice(), &[4.0]);
        assert_eq!(s.balance(), 1.0);
        let sqrt2 = 2f64.sqrt();
        assert!((s.precond().unwrap()[0] - sqrt2).abs() < 1e-15);
        assert!((s.x()[0] + sqrt2).abs() < 1e-15);
    }

    #[test]
    fn zero_gradients_never_move() {
        let c = cfg(Engine::WagmfSum, WeightSchedule::Linear, 2, 4, 0.9, 0.5, 1e-7);
        let mut s = state(&[0.3, -0.2]);
        for _ in 0..50 {
            wagmf_step(&mut s, &[0.0, 0.0], &c, &FeasibleSet::Unconstrained).unwrap();
        }
        assert_eq!(s.x().as_slice(), &[0.3, -0.2]);
        assert_eq!(s.v().as_slice(), &[0.0, 0.0]);
        assert_eq!(s.precond().unwrap().as_slice(), &[1e-7, 1e-7]);

        // eps = 0 reads 0/0 as no movement
        let c0 = cfg(Engine::WagmfStable, WeightSchedule::Linear, 2, 4, 0.9, 0.5, 0.0);
        let mut s = state(&[0.3]);
        stable_step(&mut s, &[0.0], &c0, &FeasibleSet::Unconstrained).unwrap();
        assert_eq!(s.x().as_slice(), &[0.3]);
    }

    #[test]
    fn equal_weights_give_root_mean_square() {
        let c = cfg(Engine::WagmfSum, WeightSchedule::Equal, 2, 2, 0.0, 0.1, 0.0);
        let mut s = state(&[0.0]);
        let gs = [1.0, -3.0, 2.0, 0.5];
        let mut sum_sq = 0.0;
        for (i, g) in gs.iter().enumerate() {
            wagmf_step(&mut s, &[*g], &c, &FeasibleSet::Unconstrained).unwrap();
            sum_sq += g * g;
            let expected = (sum_sq / (i + 1) as f64).sqrt();
            assert!((s.precond().unwrap()[0] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn stable_first_step_and_two_step_equivalence() {
        let c = cfg(Engine::WagmfStable, WeightSchedule::Linear, 2, 4, 0.0, 0.1, 0.0);
        let mut s = state(&[0.0]);
        stable_step(&mut s, &[2.0], &c, &FeasibleSet::Unconstrained).unwrap();
        assert_eq!(s.v().as_slice(), &[4.0]);
        stable_step(&mut s, &[1.0], &c, &FeasibleSet::Unconstrained).unwrap();
        // (1/3)*4 + (2/3)*1 = 2, and (4 + 2*1) / 6 = 2
        assert!((s.v()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn stable_constant_gradient_is_fixed_point() {
        let c = cfg(Engine::WagmfStable, WeightSchedule::Linear, 2, 4, 0.9, 0.01, 0.0);
        let mut s = state(&[0.0]);
        for _ in 0..1000 {
            stable_step(&mut s, &[1.5], &c, &FeasibleSet::Unconstrained).unwrap();
            assert!((s.v()[0] - 2.25).abs() < 1e-13);
        }
    }

    #[test]
    fn odd_power_accumulates_magnitudes() {
        let c = cfg(Engine::WagmfStable, WeightSchedule::Linear, 3, 4, 0.0, 0.1, 0.0);
        let mut s = state(&[0.0]);
        stable_step(&mut s, &[-2.0], &c, &FeasibleSet::Unconstrained).unwrap();
        assert_eq!(s.v().as_slice(), &[8.0]);
        // moved in the descent direction of a negative gradient
        assert!(s.x()[0] > 0.0);
    }

    #[test]
    fn amsgrad_keeps_running_max() {
        let c = cfg(Engine::Amsgrad, WeightSchedule::Equal, 2, 2, 0.9, 0.1, 0.0);
        let mut s = state(&[0.0]);
        let mut last = 0.0;
        for g in [5.0, 0.1, 0.1, 0.1, 0.1, 0.2] {
            generic_step(&mut s, &[g], &c, &FeasibleSet::Unconstrained).unwrap();
            let p = s.precond().unwrap()[0];
            assert!(p >= last);
            last = p;
        }
        assert!((s.v_hat().unwrap()[0] - 0.025).abs() < 1e-15);
    }

    #[test]
    fn ema_tends_to_gradient_magnitude() {
        let c = cfg(Engine::Ema, WeightSchedule::Equal, 2, 2, 0.9, 1e-6, 1e-7);
        let mut s = state(&[0.0]);
        for _ in 0..40_000 {
            generic_step(&mut s, &[3.0], &c, &FeasibleSet::Unconstrained).unwrap();
        }
        // 9 * (1 - 0.999^40000) within 1e-15 relative
        assert!((s.v()[0] - 9.0).abs() < 1e-12);
        assert!((s.precond().unwrap()[0] - (3.0 + 1e-7)).abs() < 1e-12);
    }

    #[test]
    fn sign_step() {
        let c = cfg(Engine::Sign, WeightSchedule::Equal, 2, 2, 0.9, 0.1, 0.0);
        let mut s = state(&[0.0]);
        generic_step(&mut s, &[-3.7], &c, &FeasibleSet::Unconstrained).unwrap();
        assert!((s.x()[0] - 0.1).abs() < 1e-16);
    }

    #[test]
    fn plain_sgd_uses_identity() {
        let c = cfg(Engine::PlainSgd, WeightSchedule::Equal, 2, 2, 0.0, 0.5, 0.0);
        let mut s = state(&[1.0]);
        generic_step(&mut s, &[4.0], &c, &FeasibleSet::cube(1, -1.0, 1.0).unwrap()).unwrap();
        assert_eq!(s.x().as_slice(), &[-1.0]);
        assert_eq!(s.precond().unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn errors_leave_state_untouched() {
        let c = cfg(Engine::WagmfSum, WeightSchedule::Linear, 2, 4, 0.0, 1.0, 0.0);
        let mut s = state(&[0.0, 1.0]);
        let before = s.clone();
        assert!(matches!(
            wagmf_step(&mut s, &[1.0], &c, &FeasibleSet::Unconstrained),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(
            wagmf_step(&mut s, &[1.0, f64::INFINITY], &c, &FeasibleSet::Unconstrained),
            Err(Error::NonFiniteGradient { index: 1 })
        ));
        assert_eq!(s, before);
    }

    #[test]
    fn exponential_weights_overflow_is_reported() {
        let c = cfg(Engine::WagmfSum, WeightSchedule::Exponential { beta2: 0.5 }, 2, 2, 0.0, 0.1, 1e-7);
        let mut s = state(&[0.0]);
        let err = (0..2000)
            .map(|_| wagmf_step(&mut s, &[1.0], &c, &FeasibleSet::Unconstrained))
            .find_map(|r| r.err())
            .unwrap();
        // gamma_1023 = 2^1023 is finite, but the running sum 2^1024 - 2 rounds to inf
        assert_eq!(err, Error::WeightOverflow { t: 1023 });
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(Engine::WagmfStable, WeightSchedule::Equal, 2, 4, 0.9, 0.1, 0.0);
        assert!(c.validate().is_err());
        c.weight = WeightSchedule::Linear;
        assert!(c.validate().is_ok());
        c.p2 = 2;
        assert!(c.validate().is_err());
        let mut c = cfg(Engine::Ema, WeightSchedule::Equal, 2, 2, 1.0, 0.1, 0.0);
        assert!(c.validate().is_err());
        c.momentum.beta1 = 0.9;
        c.epsilon = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn wrong_engine_is_rejected() {
        let c = cfg(Engine::Ema, WeightSchedule::Equal, 2, 2, 0.0, 0.1, 0.0);
        let mut s = state(&[0.0]);
        assert!(matches!(
            stable_step(&mut s, &[1.0], &c, &FeasibleSet::Unconstrained),
            Err(Error::InvalidConfig(_))
        ));
    }
}
