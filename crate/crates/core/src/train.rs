//! From-scratch training of [`RewardModel`] with AdamW.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RewardModel;
use crate::types::{ComparisonPair, LabeledDataset};

/// Keeps the minibatch order stream independent of the weight-init stream.
const SHUFFLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Cosine decay target as a fraction of `learning_rate`; 1.0 keeps it constant.
    pub final_lr_fraction: f64,
    /// Upper bound on the minibatch size; the effective size is `min(this, n)`.
    pub minibatch: usize,
    /// Decoupled weight-decay coefficient.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 500,
            learning_rate: 1e-3,
            final_lr_fraction: 1.0,
            minibatch: 256,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    /// Settings used for the two-dimensional bimodal world (16 hidden units).
    pub fn world_2d() -> Self {
        Self {
            hidden: 16,
            learning_rate: 1e-2,
            final_lr_fraction: 0.1,
            epochs: 300,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("train.{what} must be positive")));
        if self.hidden == 0 {
            return bad("hidden");
        }
        if self.epochs == 0 {
            return bad("epochs");
        }
        if self.minibatch == 0 {
            return bad("minibatch");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate");
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "train.final_lr_fraction must be in (0, 1]".into(),
            ));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig("train.weight_decay must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0
        {
            return Err(Error::InvalidConfig("train: invalid Adam moments".into()));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        if self.final_lr_fraction >= 1.0 || self.epochs <= 1 {
            return self.learning_rate;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        let cos = 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
        self.learning_rate * (self.final_lr_fraction + (1.0 - self.final_lr_fraction) * cos)
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: RewardModel,
    /// Full-data BT loss after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Trains a freshly initialized model; no state is carried over from earlier
/// rounds. Deterministic in `(data order, config, seed)`.
pub fn train(data: &LabeledDataset, config: &TrainConfig, seed: u64) -> Result<RewardModel> {
    fit(data, config, seed, false).map(|r| r.model)
}

/// Like [`train`], additionally recording the full-data loss after every epoch.
pub fn train_with_report(data: &LabeledDataset, config: &TrainConfig, seed: u64) -> Result<TrainReport> {
    fit(data, config, seed, true)
}

fn fit(data: &LabeledDataset, config: &TrainConfig, seed: u64, trace: bool) -> Result<TrainReport> {
    config.validate()?;
    let dim = data.dim().ok_or(Error::EmptyDataset)?;
    let mut model = RewardModel::init(dim, config.hidden, seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed ^ SHUFFLE_SALT);

    let entries: Vec<(&ComparisonPair, bool)> = data
        .entries()
        .iter()
        .map(|(p, l)| (p, l.left_preferred))
        .collect();
    let batch_size = config.minibatch.min(entries.len());
    let mut order: Vec<usize> = (0..entries.len()).collect();

    let n_params = model.num_params();
    let mut m1 = vec![0.0; n_params];
    let mut m2 = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut batch = Vec::with_capacity(batch_size);
    let mut step = 0i32;
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| entries[i]));
            grad.fill(0.0);
            let loss = model.accumulate_grad(&batch, &mut grad)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            step += 1;
            let bc1 = 1.0 - config.beta1.powi(step);
            let bc2 = 1.0 - config.beta2.powi(step);
            for (((p, g), a), b) in model
                .params_mut()
                .iter_mut()
                .zip(&grad)
                .zip(m1.iter_mut())
                .zip(m2.iter_mut())
            {
                *a = config.beta1 * *a + (1.0 - config.beta1) * g;
                *b = config.beta2 * *b + (1.0 - config.beta2) * g * g;
                let update = (*a / bc1) / ((*b / bc2).sqrt() + config.eps);
                *p -= lr * (update + config.weight_decay * *p);
            }
        }
        if trace {
            let loss = model.bt_loss(data)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            loss_trace.push(loss);
        }
    }
    Ok(TrainReport { model, loss_trace })
}
