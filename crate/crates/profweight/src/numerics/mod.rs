//! Dense numerical kernel: softmax, weighted cross-entropy, seeded SGD with
//! momentum, finite-difference gradient verification, and the shared
//! feed-forward network engine every model in this crate is built on.
//!
//! Everything is f64 and deterministic: batch order is a pure function of the
//! config seed (ChaCha8), reductions are sequential, and no operation may
//! produce a NaN/Inf without reporting an error.

pub mod matrix;
pub mod net;
pub mod sgd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use matrix::Matrix;
pub use net::{Activation, NetObjective, NetShape};
pub use sgd::{gradient_check, sgd_train, Objective, SgdConfig, SgdRun};

/// Probabilities are clamped to this floor before taking logarithms, so a
/// confidently wrong prediction yields a large but finite loss.
pub const PROB_CLAMP: f64 = 1e-12;

/// A probability vector over classes: entries in [0, 1] summing to 1
/// within 1e-9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("empty probability vector".into()));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "probability {p} outside [0, 1]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {sum}, expected 1 within 1e-9"
            )));
        }
        Ok(SimplexVector(probs))
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, class: usize) -> f64 {
        self.0[class]
    }

    /// Index of the largest probability; ties resolve to the lowest class.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }
}

/// Largest-value index with ties resolved to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax: exp(z_i - max z) / sum_j exp(z_j - max z).
pub fn softmax(logits: &[f64]) -> Result<SimplexVector> {
    if logits.is_empty() {
        return Err(Error::InvalidArgument("softmax of empty input".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "softmax of non-finite input".into(),
        ));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    for e in &mut exps {
        *e /= sum;
    }
    SimplexVector::new(exps)
}

/// Weighted mean cross-entropy: (1/sum w_i) * sum_i w_i * (-ln p_i[y_i]),
/// with probabilities clamped at [`PROB_CLAMP`] before the logarithm.
pub fn weighted_cross_entropy(
    probs: &[SimplexVector],
    labels: &[usize],
    weights: &[f64],
) -> Result<f64> {
    if probs.len() != labels.len() || probs.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "cross-entropy over {} probs, {} labels, {} weights",
            probs.len(),
            labels.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(Error::InvalidArgument(
            "weights must be finite and non-negative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let mut acc = 0.0;
    for ((p, &y), &w) in probs.iter().zip(labels).zip(weights) {
        if y >= p.len() {
            return Err(Error::InvalidArgument(format!(
                "label {y} out of range for {} classes",
                p.len()
            )));
        }
        acc += w * -(p.get(y).max(PROB_CLAMP)).ln();
    }
    Ok(acc / total)
}
