//! Dense vectors, diagonal metrics and the element-wise power/root maps used
//! by every preconditioner in the crate.
//!
//! All arithmetic is `f64`. The linearly weighted accumulator of the WADA
//! family grows like `t^2 * G^2`, so narrower storage would make the
//! weighted-sum and stable recursions diverge long before rounding does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense vector whose entries are all finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::ShapeMismatch("vector must have dim >= 1".into()));
        }
        check_finite(&entries)?;
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector must have dim >= 1");
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        assert!(dim > 0 && value.is_finite());
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Mutable access for the update engines; callers re-check finiteness.
    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty() && entries.iter().all(|v| v.is_finite()));
        Self(entries)
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Diagonal of a positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMetric(Vector);

impl DiagonalMetric {
    pub fn new(diag: Vector) -> Result<Self> {
        if let Some((index, &value)) = diag.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(Error::NonPositiveMetric { index, value });
        }
        Ok(Self(diag))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Vector::filled(dim, 1.0))
    }

    pub fn diag(&self) -> &Vector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimMismatch { expected, got });
    }
    Ok(())
}

/// `x^p` for a positive integer power.
#[inline]
pub fn pow_scalar(x: f64, p: u32) -> f64 {
    x.powi(p as i32)
}

/// `x^(1/p)`. Powers of two go through repeated square roots; odd roots keep
/// the sign of `x`. Returns `None` for an even root of a negative number.
#[inline]
pub fn root_scalar(x: f64, p: u32) -> Option<f64> {
    debug_assert!(p >= 1);
    if p == 1 {
        return Some(x);
    }
    if p.is_multiple_of(2) && x < 0.0 {
        return None;
    }
    if p.is_power_of_two() {
        let mut r = x;
        let mut k = p;
        while k > 1 {
            r = r.sqrt();
            k >>= 1;
        }
        return Some(r);
    }
    if p == 3 {
        return Some(x.cbrt());
    }
    Some(x.signum() * x.abs().powf(1.0 / p as f64))
}

pub fn elem_pow(v: &Vector, p: u32) -> Result<Vector> {
    assert!(p >= 1, "power must be a positive integer");
    let out: Vec<f64> = v.iter().map(|&x| pow_scalar(x, p)).collect();
    check_finite(&out)?;
    Ok(Vector(out))
}

pub fn elem_root(v: &Vector, p: u32) -> Result<Vector> {
    assert!(p >= 1, "root must be a positive integer");
    v.iter()
        .enumerate()
        .map(|(index, &value)| root_scalar(value, p).ok_or(Error::NegativeRadicand { index, value }))
        .collect::<Result<Vec<_>>>()
        .map(Vector)
}

/// `sum_i V_ii * x_i^2`, the squared norm induced by a diagonal metric.
pub fn weighted_norm_sq(x: &Vector, metric: &DiagonalMetric) -> Result<f64> {
    check_dim(metric.dim(), x.dim())?;
    Ok(x.iter()
        .zip(metric.diag().iter())
        .map(|(xi, vi)| vi * xi * xi)
        .sum())
}
