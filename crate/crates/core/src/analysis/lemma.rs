use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma3Outcome {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Evaluate both sides of
///
/// ```text
/// sum_i x_i / (sum_{j<=i} j x_j)^(1/4)  <=  M (sum_i i x_i)^(1/4)
/// ```
///
/// for `0 <= x_i <= M^2`, `M >= 1`. Terms with a zero prefix sum (hence a
/// zero numerator) contribute nothing. `holds` allows `1e-12` of slack.
pub fn lemma3_check(xs: &[f64], m: f64) -> Result<Lemma3Outcome> {
    if !(m >= 1.0 && m.is_finite()) {
        return Err(Error::InvalidConfig(format!("M must be >= 1 (got {m})")));
    }
    let cap = m * m;
    if let Some((index, &value)) = xs.iter().enumerate().find(|(_, x)| !(**x >= 0.0 && **x <= cap)) {
        return Err(Error::DomainViolation { index, value });
    }
    let mut prefix = 0.0;
    let mut lhs = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        prefix += (i + 1) as f64 * x;
        if prefix > 0.0 {
            lhs += x / prefix.sqrt().sqrt();
        }
    }
    let rhs = m * prefix.sqrt().sqrt();
    Ok(Lemma3Outcome { holds: lhs <= rhs + 1e-12, lhs, rhs })
}
