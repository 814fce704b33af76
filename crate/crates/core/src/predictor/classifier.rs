//! The success-predictor classifier: a small fully connected network
//! `d → h1 → h2 → 1` with batch normalization on the first hidden layer,
//! ELU activations, and a sigmoid output, trained with Adam on binary
//! cross entropy.
//!
//! Everything is plain f64 ndarray math so gradients can be validated
//! against central finite differences exactly.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN_1: usize = 256;
pub const DEFAULT_HIDDEN_2: usize = 128;
const BN_EPS: f64 = 1e-5;
/// running = BN_MOMENTUM * running + (1 - BN_MOMENTUM) * batch
const BN_MOMENTUM: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Batch statistics for the normalization layer.
    Train,
    /// Running statistics for the normalization layer.
    Infer,
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable BCE from the logit: equals
/// `-(y ln σ(s) + (1-y) ln(1-σ(s)))`.
fn bce_from_logit(s: f64, y: f64) -> f64 {
    s.max(0.0) - s * y + (1.0 + (-s.abs()).exp()).ln()
}

/// Per-tensor gradients of the mean BCE over a batch.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array1<f64>,
    pub b3: f64,
}

impl Gradients {
    /// Same flat layout as [`NeuralClassifier::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.gamma.iter());
        out.extend(self.beta.iter());
        out.extend(self.w2.iter());
        out.extend(self.b2.iter());
        out.extend(self.w3.iter());
        out.push(self.b3);
        out
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    m_w1: Array2<f64>,
    v_w1: Array2<f64>,
    m_b1: Array1<f64>,
    v_b1: Array1<f64>,
    m_gamma: Array1<f64>,
    v_gamma: Array1<f64>,
    m_beta: Array1<f64>,
    v_beta: Array1<f64>,
    m_w2: Array2<f64>,
    v_w2: Array2<f64>,
    m_b2: Array1<f64>,
    v_b2: Array1<f64>,
    m_w3: Array1<f64>,
    v_w3: Array1<f64>,
    m_b3: f64,
    v_b3: f64,
    t: u64,
}

#[derive(Debug, Clone)]
pub struct NeuralClassifier {
    input_dim: usize,
    h1: usize,
    h2: usize,
    w1: Array2<f64>,
    b1: Array1<f64>,
    gamma: Array1<f64>,
    beta: Array1<f64>,
    running_mean: Array1<f64>,
    running_var: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
    w3: Array1<f64>,
    b3: f64,
    adam: Moments,
}

/// Uniform fan-in scaled init: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
fn init_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let limit = (6.0 / rows as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape matches data length")
}

fn init_vector(fan_in: usize, len: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    Array1::from_iter((0..len).map(|_| rng.random_range(-limit..limit)))
}

impl NeuralClassifier {
    /// Classifier with the default hidden sizes (256, 128).
    pub fn new(input_dim: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Self::with_hidden(input_dim, DEFAULT_HIDDEN_1, DEFAULT_HIDDEN_2, rng)
    }

    pub fn with_hidden(
        input_dim: usize,
        h1: usize,
        h2: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if input_dim < 1 || h1 < 1 || h2 < 1 {
            return Err(Error::invalid("dims", "layer sizes must be >= 1"));
        }
        let mut c = NeuralClassifier {
            input_dim,
            h1,
            h2,
            w1: Array2::zeros((input_dim, h1)),
            b1: Array1::zeros(h1),
            gamma: Array1::ones(h1),
            beta: Array1::zeros(h1),
            running_mean: Array1::zeros(h1),
            running_var: Array1::ones(h1),
            w2: Array2::zeros((h1, h2)),
            b2: Array1::zeros(h2),
            w3: Array1::zeros(h2),
            b3: 0.0,
            adam: Moments::default(),
        };
        c.reinitialize(rng);
        Ok(c)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Fresh random weights from the same scheme; Adam moments, running
    /// statistics, and the step counter are reset.
    pub fn reinitialize(&mut self, rng: &mut ChaCha8Rng) {
        self.w1 = init_matrix(self.input_dim, self.h1, rng);
        self.w2 = init_matrix(self.h1, self.h2, rng);
        self.w3 = init_vector(self.h2, self.h2, rng);
        self.b1 = Array1::zeros(self.h1);
        self.b2 = Array1::zeros(self.h2);
        self.b3 = 0.0;
        self.gamma = Array1::ones(self.h1);
        self.beta = Array1::zeros(self.h1);
        self.running_mean = Array1::zeros(self.h1);
        self.running_var = Array1::ones(self.h1);
        self.adam = Moments {
            m_w1: Array2::zeros((self.input_dim, self.h1)),
            v_w1: Array2::zeros((self.input_dim, self.h1)),
            m_b1: Array1::zeros(self.h1),
            v_b1: Array1::zeros(self.h1),
            m_gamma: Array1::zeros(self.h1),
            v_gamma: Array1::zeros(self.h1),
            m_beta: Array1::zeros(self.h1),
            v_beta: Array1::zeros(self.h1),
            m_w2: Array2::zeros((self.h1, self.h2)),
            v_w2: Array2::zeros((self.h1, self.h2)),
            m_b2: Array1::zeros(self.h2),
            v_b2: Array1::zeros(self.h2),
            m_w3: Array1::zeros(self.h2),
            v_w3: Array1::zeros(self.h2),
            m_b3: 0.0,
            v_b3: 0.0,
            t: 0,
        };
    }

    /// Set all weights and biases to zero (test hook: the output of the
    /// network is then sigmoid(0) = 0.5 for any input).
    #[cfg(test)]
    pub(crate) fn zero_weights(&mut self) {
        self.w1.fill(0.0);
        self.b1.fill(0.0);
        self.w2.fill(0.0);
        self.b2.fill(0.0);
        self.w3.fill(0.0);
        self.b3 = 0.0;
        self.beta.fill(0.0);
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: cols });
        }
        Ok(())
    }

    /// Named spans of the flat parameter layout (see [`Self::parameters`]).
    pub fn tensor_spans(&self) -> Vec<(&'static str, std::ops::Range<usize>)> {
        let sizes = [
            ("w1", self.input_dim * self.h1),
            ("b1", self.h1),
            ("gamma", self.h1),
            ("beta", self.h1),
            ("w2", self.h1 * self.h2),
            ("b2", self.h2),
            ("w3", self.h2),
            ("b3", 1),
        ];
        let mut spans = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for (name, len) in sizes {
            spans.push((name, start..start + len));
            start += len;
        }
        spans
    }

    /// All learnable parameters flattened in a fixed order:
    /// w1 (row-major), b1, gamma, beta, w2 (row-major), w3, b3.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.gamma.iter());
        out.extend(self.beta.iter());
        out.extend(self.w2.iter());
        out.extend(self.b2.iter());
        out.extend(self.w3.iter());
        out.push(self.b3);
        out
    }

    /// Writes parameters back from the flat layout of [`Self::parameters`].
    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.tensor_spans().last().map(|(_, r)| r.end).unwrap_or(0);
        if flat.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: flat.len() });
        }
        let mut it = flat.iter();
        for v in self.w1.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.b1.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.gamma.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.beta.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.w2.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.b2.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.w3.iter_mut() {
            *v = *it.next().unwrap();
        }
        self.b3 = *it.next().unwrap();
        Ok(())
    }

    /// Internal forward pass keeping every intermediate needed by backprop.
    fn forward_cached(&self, x: &ArrayView2<f64>, mode: ForwardMode) -> Cache {
        let a1 = x.dot(&self.w1) + &self.b1;
        let (mean, var) = match mode {
            ForwardMode::Train => {
                let mean = a1.mean_axis(Axis(0)).expect("nonempty batch");
                let var = a1.map_axis(Axis(0), |col| {
                    let m = col.mean().expect("nonempty batch");
                    col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64
                });
                (mean, var)
            }
            ForwardMode::Infer => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let xhat = (&a1 - &mean) * &inv_std;
        let n1 = &xhat * &self.gamma + &self.beta;
        let h1o = n1.mapv(elu);
        let a2 = h1o.dot(&self.w2) + &self.b2;
        let h2o = a2.mapv(elu);
        let logits = h2o.dot(&self.w3) + self.b3;
        Cache { inv_std, xhat, n1, h1o, a2, h2o, logits }
    }

    /// Forward pass returning probabilities in (0, 1).
    pub fn forward_batch(&self, x: ArrayView2<f64>, mode: ForwardMode) -> Result<Array1<f64>> {
        self.check_input(x.ncols())?;
        Ok(self.forward_cached(&x, mode).logits.mapv(sigmoid))
    }

    /// Inference score for a single latent vector.
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        self.check_input(z.len())?;
        let x = ArrayView2::from_shape((1, z.len()), z).expect("contiguous slice");
        Ok(self.forward_batch(x, ForwardMode::Infer)?[0])
    }

    /// Inference scores for many latent vectors at once.
    pub fn score_batch(&self, latents: &[&[f64]]) -> Result<Vec<f64>> {
        if latents.is_empty() {
            return Ok(Vec::new());
        }
        let mut flat = Vec::with_capacity(latents.len() * self.input_dim);
        for z in latents {
            self.check_input(z.len())?;
            flat.extend_from_slice(z);
        }
        let x = Array2::from_shape_vec((latents.len(), self.input_dim), flat)
            .expect("shape matches data length");
        Ok(self.forward_batch(x.view(), ForwardMode::Infer)?.to_vec())
    }

    /// Mean BCE of the batch without touching any state (used by the
    /// finite-difference oracle).
    pub fn batch_loss(&self, x: ArrayView2<f64>, y: &[f64], mode: ForwardMode) -> Result<f64> {
        self.check_input(x.ncols())?;
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        let cache = self.forward_cached(&x, mode);
        let total: f64 =
            cache.logits.iter().zip(y).map(|(&s, &label)| bce_from_logit(s, label)).sum();
        Ok(total / y.len() as f64)
    }

    /// Mean BCE and its gradient w.r.t. every parameter tensor, in train
    /// mode (batch statistics).
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, y: &[f64]) -> Result<(f64, Gradients)> {
        self.check_input(x.ncols())?;
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        let b = x.nrows() as f64;
        let cache = self.forward_cached(&x, ForwardMode::Train);
        let probs = cache.logits.mapv(sigmoid);
        let loss = cache
            .logits
            .iter()
            .zip(y)
            .map(|(&s, &label)| bce_from_logit(s, label))
            .sum::<f64>()
            / b;

        // d loss / d logit_i = (sigmoid(s_i) - y_i) / B
        let dlogits = Array1::from_iter(probs.iter().zip(y).map(|(&p, &label)| (p - label) / b));

        let grad_w3 = cache.h2o.t().dot(&dlogits);
        let grad_b3 = dlogits.sum();
        // dh2o[i,j] = dlogits[i] * w3[j]
        let dh2o = outer(&dlogits, &self.w3);
        let da2 = &dh2o * &cache.a2.mapv(elu_grad);
        let grad_w2 = cache.h1o.t().dot(&da2);
        let grad_b2 = da2.sum_axis(Axis(0));
        let dh1o = da2.dot(&self.w2.t());
        let dn1 = &dh1o * &cache.n1.mapv(elu_grad);

        let grad_gamma = (&dn1 * &cache.xhat).sum_axis(Axis(0));
        let grad_beta = dn1.sum_axis(Axis(0));
        // batchnorm backward (batch statistics)
        let dxhat = &dn1 * &self.gamma;
        let sum_dxhat = dxhat.sum_axis(Axis(0));
        let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
        let mut da1 = Array2::zeros(dxhat.raw_dim());
        Zip::indexed(&mut da1).for_each(|(i, j), out| {
            *out = cache.inv_std[j] / b
                * (b * dxhat[(i, j)] - sum_dxhat[j] - cache.xhat[(i, j)] * sum_dxhat_xhat[j]);
        });
        let grad_w1 = x.t().dot(&da1);
        let grad_b1 = da1.sum_axis(Axis(0));

        Ok((
            loss,
            Gradients {
                w1: grad_w1,
                b1: grad_b1,
                gamma: grad_gamma,
                beta: grad_beta,
                w2: grad_w2,
                b2: grad_b2,
                w3: grad_w3,
                b3: grad_b3,
            },
        ))
    }

    fn adam_apply(&mut self, g: &Gradients, lr: f64) {
        self.adam.t += 1;
        let t = self.adam.t as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);

        fn update_array<D: ndarray::Dimension>(
            p: &mut ndarray::Array<f64, D>,
            g: &ndarray::Array<f64, D>,
            m: &mut ndarray::Array<f64, D>,
            v: &mut ndarray::Array<f64, D>,
            lr: f64,
            bc1: f64,
            bc2: f64,
        ) {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            });
        }

        update_array(&mut self.w1, &g.w1, &mut self.adam.m_w1, &mut self.adam.v_w1, lr, bc1, bc2);
        update_array(&mut self.b1, &g.b1, &mut self.adam.m_b1, &mut self.adam.v_b1, lr, bc1, bc2);
        update_array(
            &mut self.gamma,
            &g.gamma,
            &mut self.adam.m_gamma,
            &mut self.adam.v_gamma,
            lr,
            bc1,
            bc2,
        );
        update_array(
            &mut self.beta,
            &g.beta,
            &mut self.adam.m_beta,
            &mut self.adam.v_beta,
            lr,
            bc1,
            bc2,
        );
        update_array(&mut self.w2, &g.w2, &mut self.adam.m_w2, &mut self.adam.v_w2, lr, bc1, bc2);
        update_array(&mut self.b2, &g.b2, &mut self.adam.m_b2, &mut self.adam.v_b2, lr, bc1, bc2);
        update_array(&mut self.w3, &g.w3, &mut self.adam.m_w3, &mut self.adam.v_w3, lr, bc1, bc2);
        {
            let m = &mut self.adam.m_b3;
            let v = &mut self.adam.v_b3;
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g.b3;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g.b3 * g.b3;
            self.b3 -= lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
        }
    }

    fn update_running_stats(&mut self, x: &ArrayView2<f64>) {
        let a1 = x.dot(&self.w1) + &self.b1;
        let mean = a1.mean_axis(Axis(0)).expect("nonempty batch");
        let var = a1.map_axis(Axis(0), |col| {
            let m = col.mean().expect("nonempty batch");
            col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64
        });
        self.running_mean = BN_MOMENTUM * &self.running_mean + (1.0 - BN_MOMENTUM) * &mean;
        self.running_var = BN_MOMENTUM * &self.running_var + (1.0 - BN_MOMENTUM) * &var;
    }

    /// One shuffled epoch over the labeled set in minibatches (the last one
    /// may be short). Returns the epoch-mean BCE as observed at each step.
    pub fn train_epoch(
        &mut self,
        inputs: &[&[f64]],
        labels: &[bool],
        lr: f64,
        batch_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        if inputs.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), got: labels.len() });
        }
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if batch_size < 1 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        let n = inputs.len();
        let mut order: Vec<usize> = (0..n).collect();
        // Fisher-Yates with the caller's stream
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch_size) {
            let mut flat = Vec::with_capacity(chunk.len() * self.input_dim);
            let mut y = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                self.check_input(inputs[idx].len())?;
                flat.extend_from_slice(inputs[idx]);
                y.push(if labels[idx] { 1.0 } else { 0.0 });
            }
            let x = Array2::from_shape_vec((chunk.len(), self.input_dim), flat)
                .expect("shape matches data length");
            let (loss, grads) = self.loss_and_gradients(x.view(), &y)?;
            self.adam_apply(&grads, lr);
            self.update_running_stats(&x.view());
            loss_sum += loss * chunk.len() as f64;
        }
        Ok(loss_sum / n as f64)
    }
}

struct Cache {
    inv_std: Array1<f64>,
    xhat: Array2<f64>,
    n1: Array2<f64>,
    h1o: Array2<f64>,
    a2: Array2<f64>,
    h2o: Array2<f64>,
    logits: Array1<f64>,
}

fn outer(col: &Array1<f64>, row: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((col.len(), row.len()));
    Zip::indexed(&mut out).for_each(|(i, j), v| *v = col[i] * row[j]);
    out
}
