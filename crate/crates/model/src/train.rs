//! Optimization loop with plateau learning-rate decay and early stopping.

use aqa_autodiff::Adam;
use aqa_core::seed::{derive_seed, rng_for};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Ablation, SplitData};
use crate::error::{ModelError, Result};
use crate::eval::{argmax_rows, predict};
use crate::network::{Graph, Naaqa};

pub const DEFAULT_SEEDS: [u64; 5] = [876_944, 189_369, 682_421, 175_326, 427_438];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub lr: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub weight_decay: f64,
    pub dropout_p: f64,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub ablation: Ablation,
    /// Stop as soon as validation accuracy reaches this value.
    #[serde(default)]
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 40,
            early_stop_patience: 6,
            lr: 3e-4,
            plateau_factor: 0.1,
            plateau_patience: 3,
            weight_decay: 5e-6,
            dropout_p: 0.25,
            batch_size: 128,
            seeds: DEFAULT_SEEDS.to_vec(),
            ablation: Ablation::None,
            target_accuracy: None,
        }
    }
}

impl TrainConfig {
    /// Defaults with the batch size used for desk-scale runs.
    pub fn desk() -> Self {
        Self { batch_size: 16, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.max_epochs >= 1
            && self.early_stop_patience >= 1
            && self.plateau_patience >= 1
            && self.batch_size >= 1
            && self.lr > 0.0
            && self.plateau_factor > 0.0
            && self.plateau_factor < 1.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.dropout_p);
        if ok {
            Ok(())
        } else {
            Err(ModelError::Config(format!("invalid training config {self:?}")))
        }
    }
}

/// What the scheduler decided after one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub improved: bool,
    pub lr_reduced: bool,
    pub stop: bool,
}

/// Epoch-level plateau detection. An epoch improves only if its validation
/// loss is strictly below the best so far.
#[derive(Clone, Debug)]
pub struct Scheduler {
    pub lr: f64,
    pub best: f64,
    factor: f64,
    plateau_patience: usize,
    stop_patience: usize,
    since_best: usize,
    since_reduce: usize,
}

impl Scheduler {
    pub fn new(cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.lr,
            best: f64::INFINITY,
            factor: cfg.plateau_factor,
            plateau_patience: cfg.plateau_patience,
            stop_patience: cfg.early_stop_patience,
            since_best: 0,
            since_reduce: 0,
        }
    }

    pub fn observe(&mut self, val_loss: f64) -> Decision {
        if val_loss < self.best {
            self.best = val_loss;
            self.since_best = 0;
            self.since_reduce = 0;
            return Decision { improved: true, lr_reduced: false, stop: false };
        }
        self.since_best += 1;
        self.since_reduce += 1;
        let lr_reduced = self.since_reduce >= self.plateau_patience;
        if lr_reduced {
            self.lr *= self.factor;
            self.since_reduce = 0;
        }
        Decision { improved: false, lr_reduced, stop: self.since_best >= self.stop_patience }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the training-mode forward passes during the epoch.
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
}

pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: Naaqa<f32>,
    pub history: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Trains `model` on `train`, selecting on `val`. Everything random derives
/// from `seed`.
pub fn train(
    mut model: Naaqa<f32>,
    train: &SplitData,
    val: &SplitData,
    cfg: &TrainConfig,
    seed: u64,
    pad_id: usize,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(ModelError::Data("training and validation splits must be non-empty".into()));
    }
    if model.config().dropout_p != cfg.dropout_p {
        return Err(ModelError::Config(format!(
            "model dropout {} differs from training dropout {}",
            model.config().dropout_p,
            cfg.dropout_p
        )));
    }
    let mut adam = Adam::<f32>::new(cfg.lr, (0.9, 0.999), 1e-8, cfg.weight_decay);
    let mut sched = Scheduler::new(cfg);
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut step: u64 = 0;
    for epoch in 1..=cfg.max_epochs {
        adam.lr = sched.lr as f32;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng_for(seed, "shuffle", epoch as u64));
        let (mut loss_sum, mut hits) = (0.0f64, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train.batch::<f32>(chunk, pad_id)?;
            let mut g = Graph::training(derive_seed(seed, "dropout", step));
            step += 1;
            let logits = model.forward(&mut g, &batch)?;
            let targets: Vec<usize> = chunk.iter().map(|&i| train.examples[i].label).collect();
            let loss = g.tape.softmax_cross_entropy(logits, &targets)?;
            let lv = g.tape.value(loss).item() as f64;
            if !lv.is_finite() {
                return Err(ModelError::NonFinite {
                    epoch,
                    lr: sched.lr,
                    batch: chunk.iter().map(|&i| train.examples[i].question_id.clone()).collect(),
                });
            }
            hits += argmax_rows(&g.tape, logits).iter().zip(&targets).filter(|(p, t)| p == t).count();
            loss_sum += lv * chunk.len() as f64;
            let grads = g.tape.backward(loss);
            model.params_mut().zero_grad();
            grads.accumulate_into(&g.tape, model.params_mut());
            adam.step(model.params_mut());
            model.commit_batch_stats(&mut g);
        }
        let (val_loss, predictions) = predict(&model, val, cfg.batch_size, pad_id)?;
        if !val_loss.is_finite() {
            return Err(ModelError::NonFinite {
                epoch,
                lr: sched.lr,
                batch: vec![format!("validation split {}", val.name)],
            });
        }
        let val_hits = predictions.iter().zip(&val.examples).filter(|(p, e)| **p == e.label).count();
        let log = EpochLog {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: hits as f64 / train.len() as f64,
            val_loss,
            val_acc: val_hits as f64 / val.len() as f64,
            lr: sched.lr,
        };
        on_epoch(&log);
        let decision = sched.observe(val_loss);
        if decision.improved {
            best = model.clone();
            best_epoch = epoch;
        }
        let reached = cfg.target_accuracy.is_some_and(|t| log.val_acc >= t);
        history.push(log);
        if decision.stop || reached {
            break;
        }
    }
    Ok(TrainOutcome { model: best, history, best_epoch, best_val_loss: sched.best })
}
