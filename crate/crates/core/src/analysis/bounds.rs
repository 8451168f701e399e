use serde::Serialize;

use super::RunTrace;
use crate::error::{Error, Result};

/// The three-term regret bound evaluated on a recorded run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub total: f64,
    pub d_inf: f64,
    pub g_inf: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub lambda: f64,
}

fn check_momentum(beta1: f64, lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta1) {
        return Err(Error::InvalidConfig(format!("beta1 must lie in [0, 1) (got {beta1})")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be positive (got {lambda})")));
    }
    Ok(())
}

/// ```text
/// term1 = D^2 / (2 a_T (1 - b1)) * sum_i V_{T,i}
/// term2 = D^2 / 2 * sum_t sum_i b1t V_{t-1,i} / ((1 - b1t) a_t)      (V_0 = 0)
/// term3 = sum_t a_t / (1 - b1) * sum_i m_{t,i}^2 / V_{t,i}
/// ```
///
/// `m_t` is rebuilt from the recorded gradients with `b1t = beta1 *
/// lambda^(t-1)`. `V_t` is taken as recorded, epsilon included. A
/// coordinate with `m = 0` contributes nothing to term3 even when `V = 0`.
pub fn thm1_bound(trace: &RunTrace, d_inf: Option<f64>, beta1: f64, lambda: f64) -> Result<BoundReport> {
    let d_inf = d_inf.ok_or(Error::UnboundedSet)?;
    check_momentum(beta1, lambda)?;
    if trace.is_empty() {
        return Err(Error::InsufficientSamples(0));
    }
    let d = trace.dim();
    let d2 = d_inf * d_inf;
    let mut m = vec![0.0; d];
    let mut b1t = beta1;
    let (mut term2, mut term3) = (0.0, 0.0);
    for s in 0..trace.len() {
        if s > 0 {
            b1t *= lambda;
        }
        let alpha = trace.alpha(s);
        let v = trace.precond(s);
        if s > 0 && b1t > 0.0 {
            let prev: f64 = trace.precond(s - 1).iter().sum();
            term2 += b1t * prev / ((1.0 - b1t) * alpha);
        }
        let mut q = 0.0;
        for ((mi, gi), vi) in m.iter_mut().zip(trace.g(s)).zip(v) {
            *mi = b1t * *mi + (1.0 - b1t) * gi;
            if *mi != 0.0 {
                q += *mi * *mi / vi;
            }
        }
        term3 += alpha / (1.0 - beta1) * q;
    }
    let last = trace.len() - 1;
    let term1 = d2 / (2.0 * trace.alpha(last) * (1.0 - beta1)) * trace.precond(last).iter().sum::<f64>();
    let term2 = d2 / 2.0 * term2;
    Ok(BoundReport {
        term1,
        term2,
        term3,
        total: term1 + term2 + term3,
        d_inf,
        g_inf: trace.g_inf(),
        alpha: trace.alpha(0),
        beta1,
        lambda,
    })
}

/// Closed-form bound for WADA with `b1t = beta1 * lambda^(t-1)`:
///
/// ```text
/// D^2 / (2 (1 - b1)) * W + b1 D^2 sqrt(G) / (2 (1 - b1) (1 - lambda)^2) + a d G / (1 - b1)^2 * W
/// ```
///
/// with `W` the weighted data-dependent term of `grads`.
pub fn corollary1_bound<'a>(
    grads: impl IntoIterator<Item = &'a [f64]>,
    d_inf: f64,
    g_inf: f64,
    alpha: f64,
    beta1: f64,
    lambda: f64,
    d: usize,
) -> Result<f64> {
    if lambda >= 1.0 {
        return Err(Error::LambdaOne);
    }
    check_momentum(beta1, lambda)?;
    let w = weighted_dd_term(grads);
    let d2 = d_inf * d_inf;
    let one_minus = 1.0 - beta1;
    Ok(d2 / (2.0 * one_minus) * w
        + beta1 * d2 * g_inf.sqrt() / (2.0 * one_minus * (1.0 - lambda).powi(2))
        + alpha * d as f64 * g_inf / (one_minus * one_minus) * w)
}

fn column_sums<'a>(grads: impl IntoIterator<Item = &'a [f64]>, weighted: bool) -> Vec<f64> {
    let mut sums: Vec<f64> = Vec::new();
    for (j, g) in grads.into_iter().enumerate() {
        if sums.is_empty() {
            sums.resize(g.len(), 0.0);
        }
        assert_eq!(g.len(), sums.len(), "gradient dimension changed mid-stream");
        let w = if weighted { (j + 1) as f64 } else { 1.0 };
        for (s, gi) in sums.iter_mut().zip(g) {
            *s += w * gi * gi;
        }
    }
    sums
}

/// `sum_i (sum_j j g_{j,i}^2)^(1/4)`
pub fn weighted_dd_term<'a>(grads: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    column_sums(grads, true).iter().map(|s| s.sqrt().sqrt()).sum()
}

/// `sum_i ||g_{1:T,i}||_2`
pub fn adagrad_dd_term<'a>(grads: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    column_sums(grads, false).iter().map(|s| s.sqrt()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_nonzero_entry() {
        let g: Vec<Vec<f64>> = vec![vec![0.0], vec![0.0], vec![3.0]];
        let it = || g.iter().map(Vec::as_slice);
        assert!((weighted_dd_term(it()) - (3.0f64 * 9.0).powf(0.25)).abs() < 1e-15);
        assert_eq!(adagrad_dd_term(it()), 3.0);
    }

    #[test]
    fn zero_stream() {
        let g = vec![vec![0.0; 3]; 10];
        assert_eq!(weighted_dd_term(g.iter().map(Vec::as_slice)), 0.0);
        assert_eq!(adagrad_dd_term(g.iter().map(Vec::as_slice)), 0.0);
        assert_eq!(corollary1_bound(g.iter().map(Vec::as_slice), 2.0, 0.0, 0.1, 0.9, 0.5, 3).unwrap(), 0.0);
    }

    #[test]
    fn geometric_stream_matches_reference() {
        let g: Vec<[f64; 1]> = (1..=50).map(|t| [0.5f64.powi(t)]).collect();
        let w = weighted_dd_term(g.iter().map(|r| &r[..]));
        assert!((w - 0.816496580927726).abs() < 1e-14, "{w}");
    }

    #[test]
    fn constant_stream_closed_forms() {
        let (d, t, gi) = (3usize, 400usize, 2.0f64);
        let g = vec![vec![gi; d]; t];
        let a = adagrad_dd_term(g.iter().map(Vec::as_slice));
        let w = weighted_dd_term(g.iter().map(Vec::as_slice));
        let tf = t as f64;
        assert!((a - d as f64 * gi * tf.sqrt()).abs() < 1e-10);
        assert!((w - d as f64 * gi.sqrt() * (tf * (tf + 1.0) / 2.0).powf(0.25)).abs() < 1e-10);
    }

    #[test]
    fn lambda_one_is_rejected() {
        let g = [vec![1.0]];
        assert_eq!(
            corollary1_bound(g.iter().map(Vec::as_slice), 1.0, 1.0, 0.1, 0.9, 1.0, 1),
            Err(Error::LambdaOne)
        );
    }
}
