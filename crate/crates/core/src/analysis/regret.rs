use super::RunTrace;
use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::problems::{Draw, LossOracle, Round};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretPoint {
    pub t: u64,
    /// `R(t) = sum_{s<=t} f_s(x_s) - f_s(x*)`
    pub regret: f64,
    pub average: f64,
}

/// Regret series against a fixed comparator. Stochastic rounds are replayed
/// from the realizations stored in the trace, so `f_s(x*)` uses the same
/// sampled branch or batch as `f_s(x_s)`.
pub fn regret(trace: &RunTrace, oracle: &dyn LossOracle, x_star: &Vector) -> Result<Vec<RegretPoint>> {
    let rounds = match (trace.rounds(), oracle.is_stochastic()) {
        (Some(r), _) => Some(r),
        (None, true) => return Err(Error::MissingBranchRecord),
        (None, false) => None,
    };
    let mut cumulative = 0.0;
    (0..trace.len())
        .map(|i| {
            let t = i as u64 + 1;
            let fixed;
            let round = match rounds {
                Some(r) => &r[i],
                None => {
                    fixed = Round { t, draw: Draw::Fixed };
                    &fixed
                }
            };
            let (best, _) = oracle.evaluate(round, x_star.as_slice())?;
            cumulative += trace.loss(i) - best;
            Ok(RegretPoint { t, regret: cumulative, average: cumulative / t as f64 })
        })
        .collect()
}
