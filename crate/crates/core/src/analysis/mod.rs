//! Regret, theoretical bound evaluators and verification helpers.

mod bounds;
mod gradcheck;
mod lemma;
mod regret;
mod ttest;

pub use bounds::{adagrad_dd_term, corollary1_bound, thm1_bound, weighted_dd_term, BoundReport};
pub use gradcheck::fd_gradient_check;
pub use lemma::{lemma3_check, Lemma3Outcome};
pub use regret::{regret, RegretPoint};
pub use ttest::{students_t_test, TTest};

use crate::driver::StepView;
use crate::problems::Round;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceMeta {
    pub preset: String,
    pub seed: u64,
    pub problem: String,
    pub dim: usize,
}

/// Per-step record of a run, stored column-wise. Step `i` (0-based) is
/// round `t = i + 1`.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub meta: TraceMeta,
    xs: Vec<f64>,
    gs: Vec<f64>,
    preconds: Vec<f64>,
    losses: Vec<f64>,
    alphas: Vec<f64>,
    rounds: Option<Vec<Round>>,
}

impl RunTrace {
    pub fn new(meta: TraceMeta, keep_rounds: bool) -> Self {
        Self {
            meta,
            xs: Vec::new(),
            gs: Vec::new(),
            preconds: Vec::new(),
            losses: Vec::new(),
            alphas: Vec::new(),
            rounds: keep_rounds.then(Vec::new),
        }
    }

    pub fn push(&mut self, view: &StepView) {
        let d = self.meta.dim;
        assert!(view.x.len() == d && view.g.len() == d && view.precond.len() == d);
        assert_eq!(view.t as usize, self.len() + 1, "trace rounds must be consecutive");
        self.xs.extend_from_slice(view.x);
        self.gs.extend_from_slice(view.g);
        self.preconds.extend_from_slice(view.precond);
        self.losses.push(view.loss);
        self.alphas.push(view.alpha);
        if let Some(r) = self.rounds.as_mut() {
            r.push(view.round.clone());
        }
    }

    /// Drop recorded round realizations.
    pub fn forget_rounds(&mut self) {
        self.rounds = None;
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        let d = self.meta.dim;
        &self.xs[i * d..(i + 1) * d]
    }

    pub fn g(&self, i: usize) -> &[f64] {
        let d = self.meta.dim;
        &self.gs[i * d..(i + 1) * d]
    }

    pub fn precond(&self, i: usize) -> &[f64] {
        let d = self.meta.dim;
        &self.preconds[i * d..(i + 1) * d]
    }

    pub fn loss(&self, i: usize) -> f64 {
        self.losses[i]
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.alphas[i]
    }

    pub fn rounds(&self) -> Option<&[Round]> {
        self.rounds.as_deref()
    }

    pub fn gradients(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.gs.chunks_exact(self.meta.dim)
    }

    /// `max_{t,i} |g_{t,i}|`
    pub fn g_inf(&self) -> f64 {
        self.gs.iter().fold(0.0, |acc, g| acc.max(g.abs()))
    }
}
