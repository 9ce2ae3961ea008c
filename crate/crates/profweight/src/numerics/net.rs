//! Shared dense feed-forward engine.
//!
//! One parameter layout and one hand-derived backprop serve every trainable
//! model in the crate: the complex network, linear probes (zero hidden
//! layers), simple logistic/MLP students, the distillation student, and the
//! scalar weight net. Parameters are a flat `Vec<f64>`: for each affine map,
//! weights in row-major (out x in) order followed by the bias.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::sgd::Objective;
use super::PROB_CLAMP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }
}

/// Architecture of a dense feed-forward network. The output affine is
/// always linear; classifiers apply softmax on top of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetShape {
    pub input_dim: usize,
    pub hidden: Vec<(usize, Activation)>,
    pub output_dim: usize,
}

impl NetShape {
    pub fn linear(input_dim: usize, output_dim: usize) -> Self {
        NetShape {
            input_dim,
            hidden: Vec::new(),
            output_dim,
        }
    }

    pub fn mlp(input_dim: usize, hidden_widths: &[usize], output_dim: usize) -> Self {
        NetShape {
            input_dim,
            hidden: hidden_widths
                .iter()
                .map(|&w| (w, Activation::Relu))
                .collect(),
            output_dim,
        }
    }

    /// (in, out) dimensions of each affine map, output affine included.
    pub fn affine_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &(width, _) in &self.hidden {
            dims.push((prev, width));
            prev = width;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    /// Flat parameter offset of each affine block.
    fn offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::new();
        let mut at = 0;
        for (inp, out) in self.affine_dims() {
            offsets.push(at);
            at += out * inp + out;
        }
        offsets
    }

    pub fn num_params(&self) -> usize {
        self.affine_dims()
            .iter()
            .map(|(inp, out)| out * inp + out)
            .sum()
    }

    /// Seeded scaled-uniform initialization: weights uniform on
    /// (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(self.num_params());
        for (inp, out) in self.affine_dims() {
            let bound = 1.0 / (inp as f64).sqrt();
            for _ in 0..out * inp {
                params.push(rng.random_range(-bound..bound));
            }
            params.extend(std::iter::repeat_n(0.0, out));
        }
        params
    }

    /// Forward pass returning every post-activation hidden vector followed
    /// by the output (pre-softmax) vector.
    pub fn forward_collect(&self, params: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(params.len(), self.num_params());
        debug_assert_eq!(x.len(), self.input_dim);
        let dims = self.affine_dims();
        let offsets = self.offsets();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(dims.len());
        for (layer, &(inp, out)) in dims.iter().enumerate() {
            let input: &[f64] = if layer == 0 { x } else { &acts[layer - 1] };
            let base = offsets[layer];
            let bias_base = base + out * inp;
            let mut z = Vec::with_capacity(out);
            for o in 0..out {
                let row = &params[base + o * inp..base + (o + 1) * inp];
                let mut acc = params[bias_base + o];
                for (w, v) in row.iter().zip(input) {
                    acc += w * v;
                }
                z.push(acc);
            }
            if layer < self.hidden.len() {
                let act = self.hidden[layer].1;
                for v in &mut z {
                    *v = act.apply(*v);
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Output (pre-softmax) vector only.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        self.forward_collect(params, x)
            .pop()
            .expect("at least the output layer")
    }

    /// Accumulate d(loss)/d(params) into `grad` for one sample, given the
    /// loss gradient with respect to the network output.
    ///
    /// `acts` must come from `forward_collect` on the same params and input.
    /// ReLU derivative at exactly zero is taken as zero.
    pub fn backprop_sample(
        &self,
        params: &[f64],
        x: &[f64],
        acts: &[Vec<f64>],
        output_grad: &[f64],
        grad: &mut [f64],
    ) {
        let dims = self.affine_dims();
        let offsets = self.offsets();
        let mut delta = output_grad.to_vec();
        for layer in (0..dims.len()).rev() {
            let (inp, out) = dims[layer];
            let input: &[f64] = if layer == 0 { x } else { &acts[layer - 1] };
            let base = offsets[layer];
            let bias_base = base + out * inp;
            for o in 0..out {
                let d = delta[o];
                let grow = &mut grad[base + o * inp..base + (o + 1) * inp];
                for (g, v) in grow.iter_mut().zip(input) {
                    *g += d * v;
                }
                grad[bias_base + o] += d;
            }
            if layer > 0 {
                let mut prev = vec![0.0; inp];
                for o in 0..out {
                    let d = delta[o];
                    let row = &params[base + o * inp..base + (o + 1) * inp];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                // Post-activation values identify the ReLU mask: a > 0 iff z > 0.
                if self.hidden[layer - 1].1 == Activation::Relu {
                    for (p, a) in prev.iter_mut().zip(&acts[layer - 1]) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                }
                delta = prev;
            }
        }
    }
}

/// In-place numerically stable softmax; non-finite inputs propagate as NaN
/// so the trainer's divergence detection fires.
pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Weighted softmax cross-entropy objective over rows of a feature matrix.
///
/// Loss over a batch B:
///   (1 / sum_{i in B} w_i) * sum_{i in B} w_i * (-ln p_i[y_i])
///   + 0.5 * l2 * ||params||^2
pub struct NetObjective<'a> {
    pub shape: &'a NetShape,
    pub features: &'a Matrix,
    pub labels: &'a [usize],
    pub weights: &'a [f64],
    pub l2: f64,
}

impl Objective for NetObjective<'_> {
    fn num_samples(&self) -> usize {
        self.features.rows()
    }

    fn loss_and_grad(&self, params: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; params.len()];
        let batch_weight: f64 = batch.iter().map(|&i| self.weights[i]).sum();
        if batch_weight <= 0.0 {
            return (f64::NAN, grad);
        }
        let mut loss = 0.0;
        for &i in batch {
            let w = self.weights[i];
            if w == 0.0 {
                continue;
            }
            let x = self.features.row(i);
            let acts = self.shape.forward_collect(params, x);
            let mut probs = acts.last().expect("output layer").clone();
            softmax_in_place(&mut probs);
            let y = self.labels[i];
            loss += w * -(probs[y].max(PROB_CLAMP)).ln();
            let scale = w / batch_weight;
            let mut dout = probs;
            dout[y] -= 1.0;
            for d in &mut dout {
                *d *= scale;
            }
            self.shape.backprop_sample(params, x, &acts, &dout, &mut grad);
        }
        loss /= batch_weight;
        if self.l2 > 0.0 {
            let mut sq = 0.0;
            for (g, p) in grad.iter_mut().zip(params) {
                sq += p * p;
                *g += self.l2 * p;
            }
            loss += 0.5 * self.l2 * sq;
        }
        (loss, grad)
    }
}

/// Soft-target cross-entropy objective for distillation. Targets are full
/// distributions; the loss is the mean over the batch of
/// -sum_y q[y] ln p[y], plus the l2 term.
pub struct DistillObjective<'a> {
    pub shape: &'a NetShape,
    pub features: &'a Matrix,
    pub soft_targets: &'a Matrix,
    pub l2: f64,
}

impl Objective for DistillObjective<'_> {
    fn num_samples(&self) -> usize {
        self.features.rows()
    }

    fn loss_and_grad(&self, params: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; params.len()];
        if batch.is_empty() {
            return (f64::NAN, grad);
        }
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &i in batch {
            let x = self.features.row(i);
            let q = self.soft_targets.row(i);
            let acts = self.shape.forward_collect(params, x);
            let mut probs = acts.last().expect("output layer").clone();
            softmax_in_place(&mut probs);
            for (qy, py) in q.iter().zip(&probs) {
                if *qy > 0.0 {
                    loss -= qy * (py.max(PROB_CLAMP)).ln();
                }
            }
            let dout: Vec<f64> = probs.iter().zip(q).map(|(p, q)| scale * (p - q)).collect();
            self.shape.backprop_sample(params, x, &acts, &dout, &mut grad);
        }
        loss *= scale;
        if self.l2 > 0.0 {
            let mut sq = 0.0;
            for (g, p) in grad.iter_mut().zip(params) {
                sq += p * p;
                *g += self.l2 * p;
            }
            loss += 0.5 * self.l2 * sq;
        }
        (loss, grad)
    }
}
