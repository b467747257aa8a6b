//! Bradley-Terry reward model: a three-hidden-layer tanh MLP with a bias-free
//! linear head.
//!
//! Parameters live in one flat vector so gradients, the optimizer and the
//! checkpoint format all share the same layout:
//!
//! ```text
//! W1 (H×in, row-major) | b1 (H) | W2 (H×H) | b2 (H) | W3 (H×H) | b3 (H) | head (H)
//! ```

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{ComparisonPair, LabeledDataset};

pub const HIDDEN_LAYERS: usize = 3;

/// Logistic function, evaluated without overflow for large |z|.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Bernoulli variance `σ(z)(1−σ(z))`, accurate in both tails.
pub fn bernoulli_variance(z: f64) -> f64 {
    sigmoid(z) * sigmoid(-z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    input_dim: usize,
    hidden: usize,
}

impl Layout {
    fn w1(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.input_dim
    }
    fn b1(&self) -> std::ops::Range<usize> {
        let s = self.w1().end;
        s..s + self.hidden
    }
    fn w2(&self) -> std::ops::Range<usize> {
        let s = self.b1().end;
        s..s + self.hidden * self.hidden
    }
    fn b2(&self) -> std::ops::Range<usize> {
        let s = self.w2().end;
        s..s + self.hidden
    }
    fn w3(&self) -> std::ops::Range<usize> {
        let s = self.b2().end;
        s..s + self.hidden * self.hidden
    }
    fn b3(&self) -> std::ops::Range<usize> {
        let s = self.w3().end;
        s..s + self.hidden
    }
    fn head(&self) -> std::ops::Range<usize> {
        let s = self.b3().end;
        s..s + self.hidden
    }
    fn len(&self) -> usize {
        self.head().end
    }
}

/// Hidden activations of one forward pass, kept for backpropagation.
struct Activations {
    h1: Vec<f64>,
    h2: Vec<f64>,
    h3: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    layout: Layout,
    params: Vec<f64>,
}

impl RewardModel {
    /// All-zero model. Its head annihilates every feature, so every reward is 0.
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let layout = Layout { input_dim, hidden };
        Self {
            params: vec![0.0; layout.len()],
            layout,
        }
    }

    /// Seeded fan-in uniform initialization: every weight and bias feeding a
    /// unit with fan-in `f` is drawn from `U(-1/√f, 1/√f)`.
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut model = Self::zeros(input_dim, hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = model.layout;
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, params: &mut [f64]| {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-bound..bound);
            }
        };
        fill(l.w1(), input_dim, &mut model.params);
        fill(l.b1(), input_dim, &mut model.params);
        fill(l.w2(), hidden, &mut model.params);
        fill(l.b2(), hidden, &mut model.params);
        fill(l.w3(), hidden, &mut model.params);
        fill(l.b3(), hidden, &mut model.params);
        fill(l.head(), hidden, &mut model.params);
        model
    }

    pub fn from_params(input_dim: usize, hidden: usize, params: Vec<f64>) -> Result<Self> {
        let layout = Layout { input_dim, hidden };
        if params.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("non-finite model parameter".into()));
        }
        Ok(Self { layout, params })
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.layout.hidden
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn head(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.params[self.layout.head()])
    }

    pub fn head_slice(&self) -> &[f64] {
        &self.params[self.layout.head()]
    }

    pub fn set_head(&mut self, head: &[f64]) -> Result<()> {
        let range = self.layout.head();
        if head.len() != range.len() {
            return Err(Error::DimensionMismatch {
                expected: range.len(),
                actual: head.len(),
            });
        }
        self.params[range].copy_from_slice(head);
        Ok(())
    }

    /// Zeroes all hidden-layer weights and biases, leaving the head alone.
    pub fn zero_hidden(&mut self) {
        let end = self.layout.b3().end;
        self.params[..end].fill(0.0);
    }

    /// Start/end offsets of each parameter block in the flat layout, in order
    /// `w1, b1, w2, b2, w3, b3, head`.
    pub fn block_ranges(&self) -> [std::ops::Range<usize>; 7] {
        let l = self.layout;
        [l.w1(), l.b1(), l.w2(), l.b2(), l.w3(), l.b3(), l.head()]
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.layout.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.layout.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn dense_tanh(&self, w: std::ops::Range<usize>, b: std::ops::Range<usize>, x: &[f64]) -> Vec<f64> {
        let w = &self.params[w];
        let b = &self.params[b];
        let n_in = x.len();
        b.iter()
            .enumerate()
            .map(|(row, bias)| {
                let wr = &w[row * n_in..(row + 1) * n_in];
                let z = wr.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + bias;
                z.tanh()
            })
            .collect()
    }

    fn forward(&self, x: &[f64]) -> Activations {
        let l = self.layout;
        let h1 = self.dense_tanh(l.w1(), l.b1(), x);
        let h2 = self.dense_tanh(l.w2(), l.b2(), &h1);
        let h3 = self.dense_tanh(l.w3(), l.b3(), &h2);
        Activations { h1, h2, h3 }
    }

    fn head_dot(&self, h: &[f64]) -> f64 {
        self.head_slice().iter().zip(h).map(|(a, b)| a * b).sum()
    }

    pub fn last_layer_features(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(DVector::from_vec(self.forward(x).h3))
    }

    pub fn reward(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.head_dot(&self.forward(x).h3))
    }

    /// Probability that the left item is preferred.
    pub fn pref_prob(&self, pair: &ComparisonPair) -> Result<f64> {
        Ok(sigmoid(self.reward_gap(pair)?))
    }

    /// `reward(left) − reward(right)`.
    pub fn reward_gap(&self, pair: &ComparisonPair) -> Result<f64> {
        Ok(self.reward(pair.left.as_slice())? - self.reward(pair.right.as_slice())?)
    }

    /// Mean negative log-likelihood of the labels under the BT model.
    pub fn bt_loss(&self, data: &LabeledDataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut total = 0.0;
        for (pair, label) in data.entries() {
            let z = self.reward_gap(pair)?;
            total += if label.left_preferred {
                softplus(-z)
            } else {
                softplus(z)
            };
        }
        Ok(total / data.len() as f64)
    }

    /// Exact gradient of [`bt_loss`](Self::bt_loss) in the flat parameter layout.
    pub fn grad_bt_loss(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let entries: Vec<_> = data
            .entries()
            .iter()
            .map(|(p, l)| (p, l.left_preferred))
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_grad(&entries, &mut grad)?;
        Ok(grad)
    }

    /// Adds the gradient of the mean pair NLL over `batch` into `grad` and
    /// returns the mean loss.
    pub(crate) fn accumulate_grad(
        &self,
        batch: &[(&ComparisonPair, bool)],
        grad: &mut [f64],
    ) -> Result<f64> {
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &(pair, left_preferred) in batch {
            self.check_dim(pair.left.as_slice())?;
            self.check_dim(pair.right.as_slice())?;
            let act_l = self.forward(pair.left.as_slice());
            let act_r = self.forward(pair.right.as_slice());
            let z = self.head_dot(&act_l.h3) - self.head_dot(&act_r.h3);
            let y = if left_preferred { 1.0 } else { 0.0 };
            loss += if left_preferred { softplus(-z) } else { softplus(z) };
            let dz = (sigmoid(z) - y) * scale;
            self.backprop(pair.left.as_slice(), &act_l, dz, grad);
            self.backprop(pair.right.as_slice(), &act_r, -dz, grad);
        }
        Ok(loss * scale)
    }

    fn backprop(&self, x: &[f64], act: &Activations, d_reward: f64, grad: &mut [f64]) {
        let l = self.layout;
        let h = l.hidden;
        let head = self.head_slice();

        for (g, a) in grad[l.head()].iter_mut().zip(&act.h3) {
            *g += d_reward * a;
        }
        let delta3: Vec<f64> = (0..h)
            .map(|j| d_reward * head[j] * (1.0 - act.h3[j] * act.h3[j]))
            .collect();
        let delta2 = self.dense_backward(l.w3(), l.b3(), &delta3, &act.h2, grad);
        let delta2: Vec<f64> = delta2
            .iter()
            .zip(&act.h2)
            .map(|(d, a)| d * (1.0 - a * a))
            .collect();
        let delta1 = self.dense_backward(l.w2(), l.b2(), &delta2, &act.h1, grad);
        let delta1: Vec<f64> = delta1
            .iter()
            .zip(&act.h1)
            .map(|(d, a)| d * (1.0 - a * a))
            .collect();
        self.dense_backward(l.w1(), l.b1(), &delta1, x, grad);
    }

    /// Accumulates weight/bias gradients of one dense layer given the
    /// pre-activation deltas and returns the delta w.r.t. the layer input.
    fn dense_backward(
        &self,
        w: std::ops::Range<usize>,
        b: std::ops::Range<usize>,
        delta: &[f64],
        input: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64> {
        let n_in = input.len();
        let weights = &self.params[w.clone()];
        let mut upstream = vec![0.0; n_in];
        for (row, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let gw = &mut grad[w.start + row * n_in..w.start + (row + 1) * n_in];
            for (g, v) in gw.iter_mut().zip(input) {
                *g += d * v;
            }
            grad[b.start + row] += d;
            let wr = &weights[row * n_in..(row + 1) * n_in];
            for (u, wv) in upstream.iter_mut().zip(wr) {
                *u += d * wv;
            }
        }
        upstream
    }
}
