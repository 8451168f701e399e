//! L2-regularized softmax regression.
//!
//! Parameters are flattened as `[w_1, ..., w_K, b]`: `K` weight rows of
//! length `d` followed by the `K` biases. The objective is
//!
//! ```text
//! F(W, b) = -(1/n) sum_i log softmax(W x_i + b)_{y_i} + reg * sum_k ||w_k||^2
//! ```
//!
//! Biases are not regularized.

use std::sync::Arc;

use rand::seq::SliceRandom;

use super::{run_rng, Dataset, Draw, LossOracle, Round, RoundSampler, RunRng};
use crate::error::{Error, Result};
use crate::numerics::check_finite;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SoftmaxLayout {
    pub k: usize,
    pub d: usize,
}

impl SoftmaxLayout {
    pub fn of(data: &Dataset) -> Self {
        Self { k: data.k(), d: data.d() }
    }

    pub fn len(&self) -> usize {
        self.k * self.d + self.k
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights<'a>(&self, params: &'a [f64], class: usize) -> &'a [f64] {
        &params[class * self.d..(class + 1) * self.d]
    }

    pub fn bias_offset(&self) -> usize {
        self.k * self.d
    }
}

/// Full-data objective and gradient.
pub fn softmax_objective(params: &[f64], data: &Dataset, reg: f64) -> Result<(f64, Vec<f64>)> {
    objective(params, data, reg, 0..data.n())
}

/// Objective over the samples in `indices` (plus the full regularizer).
pub fn softmax_objective_on(params: &[f64], data: &Dataset, reg: f64, indices: &[usize]) -> Result<(f64, Vec<f64>)> {
    if let Some(&bad) = indices.iter().find(|i| **i >= data.n()) {
        return Err(Error::ShapeMismatch(format!("sample index {bad} out of range")));
    }
    objective(params, data, reg, indices.iter().copied())
}

fn objective(params: &[f64], data: &Dataset, reg: f64, samples: impl ExactSizeIterator<Item = usize>) -> Result<(f64, Vec<f64>)> {
    let layout = SoftmaxLayout::of(data);
    if params.len() != layout.len() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} parameters for K = {}, d = {}, got {}",
            layout.len(),
            layout.k,
            layout.d,
            params.len()
        )));
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::InvalidConfig(format!("reg must be >= 0 (got {reg})")));
    }
    check_finite(params)?;

    let count = samples.len();
    if count == 0 {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    let scale = 1.0 / count as f64;
    let (k, d) = (layout.k, layout.d);
    let bias = layout.bias_offset();
    let mut grad = vec![0.0; layout.len()];
    let mut logits = vec![0.0; k];
    // Neumaier-compensated, so finite differences of the loss stay near one ulp
    let (mut nll, mut carry) = (0.0f64, 0.0f64);

    for i in samples {
        let x = data.row(i);
        let y = data.label(i);
        for (c, z) in logits.iter_mut().enumerate() {
            let w = layout.weights(params, c);
            *z = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + params[bias + c];
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted_y = logits[y] - max;
        let mut norm = 0.0;
        for z in logits.iter_mut() {
            *z = (*z - max).exp();
            norm += *z;
        }
        // -log p_y = log(sum exp(z - max)) - (z_y - max)
        let term = norm.ln() - shifted_y;
        let sum = nll + term;
        carry += if nll.abs() >= term.abs() { (nll - sum) + term } else { (term - sum) + nll };
        nll = sum;
        for c in 0..k {
            let residual = (logits[c] / norm - if c == y { 1.0 } else { 0.0 }) * scale;
            let row = &mut grad[c * d..(c + 1) * d];
            for (g, xv) in row.iter_mut().zip(x) {
                *g += residual * xv;
            }
            grad[bias + c] += residual;
        }
    }

    let mut penalty = 0.0;
    for (g, w) in grad[..bias].iter_mut().zip(&params[..bias]) {
        penalty += w * w;
        *g += 2.0 * reg * w;
    }
    Ok(((nll + carry) * scale + reg * penalty, grad))
}

/// Minibatch oracle: each epoch is a fresh permutation of the data cut into
/// consecutive batches (the last one may be short).
#[derive(Debug, Clone)]
pub struct MinibatchSoftmax {
    data: Arc<Dataset>,
    batch_size: usize,
    reg: f64,
}

impl MinibatchSoftmax {
    pub fn new(data: Arc<Dataset>, batch_size: usize, reg: f64) -> Result<Self> {
        if batch_size == 0 || batch_size > data.n() {
            return Err(Error::InvalidConfig(format!(
                "batch size must lie in [1, {}] (got {batch_size})",
                data.n()
            )));
        }
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::InvalidConfig(format!("reg must be >= 0 (got {reg})")));
        }
        Ok(Self { data, batch_size, reg })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.data.n().div_ceil(self.batch_size)
    }

    pub fn full_objective(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        softmax_objective(params, &self.data, self.reg)
    }
}

struct EpochBatches {
    rng: RunRng,
    order: Vec<usize>,
    cursor: usize,
    batch_size: usize,
}

impl RoundSampler for EpochBatches {
    fn next_round(&mut self, t: u64) -> Round {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let mut batch = self.order[self.cursor..end].to_vec();
        batch.sort_unstable();
        self.cursor = end;
        Round { t, draw: Draw::Batch(batch) }
    }
}

impl LossOracle for MinibatchSoftmax {
    fn name(&self) -> &str {
        "softmax"
    }

    fn dim(&self) -> usize {
        SoftmaxLayout::of(&self.data).len()
    }

    fn is_stochastic(&self) -> bool {
        self.batch_size < self.data.n()
    }

    fn sampler(&self, seed: u64) -> Box<dyn RoundSampler> {
        let n = self.data.n();
        Box::new(EpochBatches {
            rng: run_rng(seed),
            order: (0..n).collect(),
            cursor: n,
            batch_size: self.batch_size,
        })
    }

    fn evaluate(&self, round: &Round, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        match &round.draw {
            Draw::Batch(indices) => softmax_objective_on(x, &self.data, self.reg, indices),
            _ if !self.is_stochastic() => self.full_objective(x),
            _ => Err(Error::MissingBranchRecord),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::gaussian_blobs;

    #[test]
    fn zero_parameters_give_log_k() {
        let data = gaussian_blobs(60, 4, 3, 1.0, 1).unwrap();
        let params = vec![0.0; SoftmaxLayout::of(&data).len()];
        let (loss, _) = softmax_objective(&params, &data, 0.0).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn balanced_binary_bias_gradient_vanishes() {
        let data = Dataset::new(vec![1.0, -2.0, 0.5, 3.0], vec![0, 1, 1, 0], 1, 2).unwrap();
        let (_, g) = softmax_objective(&[0.0; 4], &data, 0.0).unwrap();
        assert_eq!(&g[2..], &[0.0, 0.0]);
    }

    #[test]
    fn regularizer_has_no_half() {
        let data = Dataset::new(vec![0.0], vec![0], 1, 2).unwrap();
        // w = [1, 2], b = [0, 0]; logits are zero at x = 0
        let (loss, g) = softmax_objective(&[1.0, 2.0, 0.0, 0.0], &data, 0.5).unwrap();
        assert!((loss - (2f64.ln() + 0.5 * 5.0)).abs() < 1e-12);
        assert_eq!(&g[..2], &[1.0, 2.0]);
    }

    #[test]
    fn shape_errors() {
        let data = gaussian_blobs(10, 2, 2, 1.0, 1).unwrap();
        assert!(matches!(softmax_objective(&[0.0; 5], &data, 0.0), Err(Error::ShapeMismatch(_))));
        assert!(matches!(softmax_objective(&[f64::NAN; 6], &data, 0.0), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn full_batch_rounds_match_full_objective() {
        let data = Arc::new(gaussian_blobs(50, 3, 3, 1.0, 2).unwrap());
        let o = MinibatchSoftmax::new(data.clone(), 50, 1e-3).unwrap();
        let params: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let full = o.full_objective(&params).unwrap();
        let mut s = o.sampler(9);
        for t in 1..5 {
            let r = s.next_round(t);
            assert_eq!(o.evaluate(&r, &params).unwrap(), full);
        }
    }

    #[test]
    fn epochs_cover_every_sample_once() {
        let data = Arc::new(gaussian_blobs(50, 2, 2, 1.0, 3).unwrap());
        let o = MinibatchSoftmax::new(data, 16, 0.0).unwrap();
        assert_eq!(o.batches_per_epoch(), 4);
        let mut s = o.sampler(1);
        let mut seen = Vec::new();
        for t in 1..=4 {
            if let Draw::Batch(b) = s.next_round(t).draw {
                seen.extend(b);
            }
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_batch_size() {
        let data = Arc::new(gaussian_blobs(10, 2, 2, 1.0, 3).unwrap());
        assert!(MinibatchSoftmax::new(data.clone(), 0, 0.0).is_err());
        assert!(MinibatchSoftmax::new(data, 11, 0.0).is_err());
    }
}
