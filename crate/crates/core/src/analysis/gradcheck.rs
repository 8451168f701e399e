use crate::error::Result;

/// Largest relative error between `f`'s analytic gradient at `x` and central
/// differences `(f(x + h e_i) - f(x - h e_i)) / 2h`. The denominator is
/// `max(|analytic|, |numeric|)` floored at `1e-12`.
pub fn fd_gradient_check<F>(f: F, x: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    assert!(h > 0.0, "step must be positive");
    let (_, analytic) = f(x)?;
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let (up, _) = f(&probe)?;
        probe[i] = x[i] - h;
        let (down, _) = f(&probe)?;
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-12);
        worst = worst.max((numeric - analytic[i]).abs() / scale);
    }
    Ok(worst)
}
