//! Feasible sets and the metric-weighted projection onto them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{check_dim, DiagonalMetric, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibleSet {
    Unconstrained,
    Box { lo: Vector, hi: Vector },
}

impl FeasibleSet {
    pub fn new_box(lo: Vector, hi: Vector) -> Result<Self> {
        check_dim(lo.dim(), hi.dim())?;
        for (index, (&l, &h)) in lo.iter().zip(hi.iter()).enumerate() {
            if l > h {
                return Err(Error::InvalidBox { index, lo: l, hi: h });
            }
        }
        Ok(FeasibleSet::Box { lo, hi })
    }

    /// `[lo, hi]^dim`
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(Vector::new(vec![lo; dim])?, Vector::new(vec![hi; dim])?)
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, FeasibleSet::Box { .. })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            FeasibleSet::Unconstrained => true,
            FeasibleSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(v, (l, h))| *l <= *v && *v <= *h),
        }
    }

    /// `max_i (hi_i - lo_i)`, or `None` for an unbounded set.
    pub fn diameter_inf(&self) -> Option<f64> {
        match self {
            FeasibleSet::Unconstrained => None,
            FeasibleSet::Box { lo, hi } => Some(
                lo.iter()
                    .zip(hi.iter())
                    .fold(0.0, |acc, (l, h)| acc.max(h - l)),
            ),
        }
    }

    /// `argmin_{x in F} ||x - y||_V^2`.
    ///
    /// With a diagonal metric the objective separates per coordinate, so on a
    /// box the minimizer is the clamp of `y` whatever the metric.
    pub fn project(&self, metric: &DiagonalMetric, y: &Vector) -> Result<Vector> {
        check_dim(metric.dim(), y.dim())?;
        let mut out = y.clone();
        self.project_in_place(out.as_mut_slice())?;
        Ok(out)
    }

    pub(crate) fn project_in_place(&self, y: &mut [f64]) -> Result<()> {
        if let FeasibleSet::Box { lo, hi } = self {
            check_dim(lo.dim(), y.len())?;
            for ((v, l), h) in y.iter_mut().zip(lo.iter()).zip(hi.iter()) {
                *v = v.clamp(*l, *h);
            }
        }
        Ok(())
    }
}
