//! The online loop: play `x_t`, reveal `f_t`, step, repeat.

use crate::analysis::{RunTrace, TraceMeta};
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::numerics::Vector;
use crate::optimizers::Preset;
use crate::problems::{LossOracle, Round};
use crate::wagmf::OptimizerState;

/// Everything observable about round `t`.
#[derive(Debug)]
pub struct StepView<'a> {
    pub t: u64,
    /// The point played this round, `x_t`.
    pub x: &'a [f64],
    pub g: &'a [f64],
    pub loss: f64,
    /// `f_t(x*)` when a comparator was supplied.
    pub comparator_loss: Option<f64>,
    pub alpha: f64,
    pub beta1: f64,
    pub precond: &'a [f64],
    pub round: &'a Round,
    /// `x_{t+1}` after the update.
    pub next_x: &'a [f64],
}

pub struct Simulation<'a> {
    pub preset: &'a Preset,
    pub oracle: &'a dyn LossOracle,
    pub set: &'a FeasibleSet,
    pub x0: Vector,
    pub rounds: u64,
    pub seed: u64,
    pub comparator: Option<&'a Vector>,
}

impl Simulation<'_> {
    /// Run all rounds, calling `observe` after every step.
    pub fn run(self, mut observe: impl FnMut(&StepView) -> Result<()>) -> Result<OptimizerState> {
        let dim = self.oracle.dim();
        if self.x0.dim() != dim {
            return Err(Error::DimMismatch { expected: dim, got: self.x0.dim() });
        }
        if !self.set.contains(self.x0.as_slice()) {
            return Err(Error::InvalidConfig("starting point lies outside the feasible set".into()));
        }
        let mut sampler = self.oracle.sampler(self.seed);
        let mut state = OptimizerState::new(self.x0);
        for t in 1..=self.rounds {
            let round = sampler.next_round(t);
            let x_t = state.x().clone();
            let (loss, g) = self.oracle.evaluate(&round, x_t.as_slice())?;
            let comparator_loss = match self.comparator {
                Some(c) => Some(self.oracle.evaluate(&round, c.as_slice())?.0),
                None => None,
            };
            let report = self.preset.step(&mut state, &g, self.set)?;
            let precond = state.precond().expect("a step always sets V_t");
            observe(&StepView {
                t,
                x: x_t.as_slice(),
                g: &g,
                loss,
                comparator_loss,
                alpha: report.alpha,
                beta1: report.beta1,
                precond: precond.as_slice(),
                round: &round,
                next_x: state.x().as_slice(),
            })?;
        }
        Ok(state)
    }

    /// Run and keep the full in-memory trace.
    pub fn record(self) -> Result<(RunTrace, OptimizerState)> {
        let meta = TraceMeta {
            preset: self.preset.name.to_string(),
            seed: self.seed,
            problem: self.oracle.name().to_string(),
            dim: self.oracle.dim(),
        };
        let keep_rounds = self.oracle.is_stochastic();
        let mut trace = RunTrace::new(meta, keep_rounds);
        let state = self.run(|view| {
            trace.push(view);
            Ok(())
        })?;
        Ok((trace, state))
    }
}
