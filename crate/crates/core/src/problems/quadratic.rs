use super::{FixedRounds, LossOracle, Round, RoundSampler};
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::numerics::{check_dim, DiagonalMetric, Vector};

/// `f(x) = 1/2 sum_i a_i (x_i - x*_i)^2`, the same every round.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: Vector,
    x_star: Vector,
}

impl Quadratic {
    pub fn new(a_diag: Vector, x_star: Vector) -> Result<Self> {
        check_dim(a_diag.dim(), x_star.dim())?;
        DiagonalMetric::new(a_diag.clone())
            .map_err(|_| Error::InvalidConfig("quadratic curvature must be > 0".into()))?;
        Ok(Self { a: a_diag, x_star })
    }

    pub fn x_star(&self) -> &Vector {
        &self.x_star
    }

    pub fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.a.dim(), x.len())?;
        let mut loss = 0.0;
        let grad = x
            .iter()
            .zip(self.a.iter().zip(self.x_star.iter()))
            .map(|(x, (a, s))| {
                let r = x - s;
                loss += 0.5 * a * r * r;
                a * r
            })
            .collect();
        Ok((loss, grad))
    }
}

impl LossOracle for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    fn sampler(&self, _seed: u64) -> Box<dyn RoundSampler> {
        Box::new(FixedRounds)
    }

    fn evaluate(&self, _round: &Round, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.value_and_grad(x)
    }

    /// The separable objective is minimized over a box by clamping `x*`.
    fn optimum(&self, set: &FeasibleSet) -> Option<Vector> {
        let mut x = self.x_star.clone();
        set.project_in_place(x.as_mut_slice()).ok()?;
        Some(x)
    }
}
