//! The one-dimensional linear counterexample on which EMA methods fail:
//! `f_t(x) = 1010 x` on a rare round, `-10 x` otherwise, with `F = [-1, 1]`.

use rand::Rng;

use super::{run_rng, Draw, FixedRounds, LossOracle, Round, RoundSampler, RunRng};
use crate::error::Result;
use crate::feasible::FeasibleSet;
use crate::numerics::{check_dim, Vector};

pub const REDDI_BIG_SLOPE: f64 = 1010.0;
pub const REDDI_SMALL_SLOPE: f64 = -10.0;
pub const REDDI_PROBABILITY: f64 = 0.01;
pub const REDDI_PERIOD: u64 = 101;

fn linear(slope: f64, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim(1, x.len())?;
    Ok((slope * x[0], vec![slope]))
}

/// Expected slope is positive, so the comparator is the lower end of the box.
fn lower_end(set: &FeasibleSet) -> Option<Vector> {
    match set {
        FeasibleSet::Box { lo, .. } => Some(lo.clone()),
        FeasibleSet::Unconstrained => None,
    }
}

/// Stochastic variant: the rare branch is drawn with probability 0.01.
#[derive(Debug, Default, Clone)]
pub struct ReddiStochastic;

impl ReddiStochastic {
    /// Draw a branch from `rng` and evaluate at `x`.
    pub fn sample(&self, x: &[f64], rng: &mut RunRng) -> Result<(f64, Vec<f64>)> {
        linear(Self::slope(draw_branch(rng)), x)
    }

    pub fn slope(rare: bool) -> f64 {
        if rare {
            REDDI_BIG_SLOPE
        } else {
            REDDI_SMALL_SLOPE
        }
    }
}

fn draw_branch(rng: &mut RunRng) -> bool {
    rng.random::<f64>() < REDDI_PROBABILITY
}

struct BernoulliRounds(RunRng);

impl RoundSampler for BernoulliRounds {
    fn next_round(&mut self, t: u64) -> Round {
        Round { t, draw: Draw::Branch(draw_branch(&mut self.0)) }
    }
}

impl LossOracle for ReddiStochastic {
    fn name(&self) -> &str {
        "reddi_stochastic"
    }

    fn dim(&self) -> usize {
        1
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn sampler(&self, seed: u64) -> Box<dyn RoundSampler> {
        Box::new(BernoulliRounds(run_rng(seed)))
    }

    fn evaluate(&self, round: &Round, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let rare = match round.draw {
            Draw::Branch(b) => b,
            _ => return Err(crate::error::Error::MissingBranchRecord),
        };
        linear(Self::slope(rare), x)
    }

    fn optimum(&self, set: &FeasibleSet) -> Option<Vector> {
        lower_end(set)
    }
}

/// Deterministic variant: the rare branch fires when `t mod 101 == 1`.
#[derive(Debug, Default, Clone)]
pub struct ReddiOnline;

impl ReddiOnline {
    pub fn slope_at(t: u64) -> f64 {
        if t % REDDI_PERIOD == 1 {
            REDDI_BIG_SLOPE
        } else {
            REDDI_SMALL_SLOPE
        }
    }
}

impl LossOracle for ReddiOnline {
    fn name(&self) -> &str {
        "reddi_online"
    }

    fn dim(&self) -> usize {
        1
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    fn sampler(&self, _seed: u64) -> Box<dyn RoundSampler> {
        Box::new(FixedRounds)
    }

    fn evaluate(&self, round: &Round, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        linear(Self::slope_at(round.t), x)
    }

    fn optimum(&self, set: &FeasibleSet) -> Option<Vector> {
        lower_end(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_slope_is_positive() {
        let expected = REDDI_PROBABILITY * REDDI_BIG_SLOPE + (1.0 - REDDI_PROBABILITY) * REDDI_SMALL_SLOPE;
        assert!((expected - 0.2).abs() < 1e-12);
    }

    #[test]
    fn losses_at_lower_end() {
        let o = ReddiStochastic;
        let rare = o.evaluate(&Round { t: 1, draw: Draw::Branch(true) }, &[-1.0]).unwrap();
        let common = o.evaluate(&Round { t: 1, draw: Draw::Branch(false) }, &[-1.0]).unwrap();
        assert_eq!(rare, (-1010.0, vec![1010.0]));
        assert_eq!(common, (10.0, vec![-10.0]));
    }

    #[test]
    fn rare_branch_frequency() {
        let mut rng = run_rng(7);
        let hits = (0..1_000_000).filter(|_| draw_branch(&mut rng)).count();
        let freq = hits as f64 / 1e6;
        assert!((freq - 0.01).abs() <= 0.001, "{freq}");
    }

    #[test]
    fn sampler_is_reproducible() {
        let o = ReddiStochastic;
        let a: Vec<Round> = {
            let mut s = o.sampler(3);
            (1..500).map(|t| s.next_round(t)).collect()
        };
        let mut s = o.sampler(3);
        for r in &a {
            assert_eq!(&s.next_round(r.t), r);
        }
    }

    #[test]
    fn online_schedule() {
        assert_eq!(ReddiOnline::slope_at(1), 1010.0);
        for t in 2..=101 {
            assert_eq!(ReddiOnline::slope_at(t), -10.0);
        }
        assert_eq!(ReddiOnline::slope_at(102), 1010.0);
        // any window of 101 consecutive rounds sums to 1010 - 100 * 10
        for start in 1..300 {
            let s: f64 = (start..start + 101).map(ReddiOnline::slope_at).sum();
            assert_eq!(s, 10.0);
        }
    }

    #[test]
    fn optimum_is_lower_end() {
        let f = FeasibleSet::cube(1, -1.0, 1.0).unwrap();
        assert_eq!(ReddiOnline.optimum(&f).unwrap().as_slice(), &[-1.0]);
        assert!(ReddiStochastic.optimum(&FeasibleSet::Unconstrained).is_none());
    }

    #[test]
    fn stochastic_needs_branch() {
        assert!(ReddiStochastic.evaluate(&Round { t: 1, draw: Draw::Fixed }, &[0.0]).is_err());
    }
}
