//! Minibatch Adam with validation-based early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Batch, MffbmModel, Sample};
use crate::tensor::{Tape, Tensor};
use crate::train::metrics::argmax_rows;
use crate::train::optim::{adam_step, cross_entropy_loss, AdamConfig, AdamState};
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean minibatch loss before each update.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Accuracy of the minibatch predictions made during the epoch.
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were restored.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Loss of `samples` under the current parameters, without recording
/// gradients.
pub fn dataset_loss(model: &MffbmModel, samples: &[&Sample]) -> Result<f64> {
    let probs = model.predict_samples(samples)?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    cross_entropy_loss(&probs, &labels)
}

pub fn accuracy(model: &MffbmModel, samples: &[&Sample]) -> Result<f64> {
    let probs = model.predict_samples(samples)?;
    let pred = argmax_rows(&probs);
    let hits = pred.iter().zip(samples).filter(|(p, s)| **p == s.label).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Trains in place and restores the parameters of the best monitored epoch.
///
/// The monitored loss is the validation loss when `val` is nonempty and the
/// epoch's mean training loss otherwise. After each non-improving epoch a
/// counter grows; training stops once it reaches `patience` (so patience 0
/// stops at the first non-improving epoch).
pub fn train(model: &mut MffbmModel, train: &[&Sample], val: &[&Sample], cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let n_classes = model.config().n_classes;
    if let Some(s) = train.iter().chain(val).find(|s| s.label >= n_classes) {
        return Err(Error::Subject {
            subject: s.subject_id.clone(),
            reason: format!("label {} out of range for {n_classes} classes", s.label),
        });
    }
    let adam = AdamConfig::with_lr(cfg.learning_rate);
    let mut state = AdamState::new(model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = History::default();
    let mut best = f64::INFINITY;
    let mut best_params: Vec<Tensor> = model.params().to_vec();
    let mut wait = 0usize;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let members: Vec<&Sample> = chunk.iter().map(|&i| train[i]).collect();
            let batch = Batch::from_samples(model.config(), &members)?;
            let mut tape = Tape::new();
            let out = model.forward(&mut tape, &batch)?;
            let loss = tape.nll(out.probs, &batch.labels)?;
            let lv = tape.value(loss).data()[0];
            if !lv.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += lv * members.len() as f64;
            let pred = argmax_rows(tape.value(out.probs));
            hits += pred.iter().zip(&batch.labels).filter(|(p, y)| p == y).count();
            let grads = tape.backward(loss)?;
            let g: Vec<Tensor> = out
                .params
                .iter()
                .map(|v| grads.get(*v).cloned().expect("every parameter has a gradient"))
                .collect();
            adam_step(model.params_mut(), &g, &mut state, &adam)?;
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_loss = if val.is_empty() {
            None
        } else {
            let v = dataset_loss(model, val)?;
            if !v.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            Some(v)
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            train_accuracy: hits as f64 / train.len() as f64,
        });
        let monitored = val_loss.unwrap_or(train_loss);
        if monitored < best {
            best = monitored;
            best_params.clone_from_slice(model.params());
            history.best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
            if wait >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    model.params_mut().clone_from_slice(&best_params);
    Ok(history)
}
