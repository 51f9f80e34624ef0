use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::featurizer::MaskedInput;
use crate::neural::{AdamState, ModelParams};
use crate::scalar::Scalar;

/// One encoded example: model input and target ids ending in `<eos>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: MaskedInput,
    pub target: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    EpochCap,
}

/// History of one training run and the parameters of its best epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun<T> {
    pub fold: Option<usize>,
    pub history: Vec<EpochLog>,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub stop: StopReason,
    pub params: ModelParams<T>,
}

impl<T> TrainRun<T> {
    pub fn best_validation_loss(&self) -> f64 {
        self.history[self.best_epoch - 1].validation_loss
    }

    pub fn log(&self) -> TrainLog {
        TrainLog {
            fold: self.fold,
            best_epoch: self.best_epoch,
            epochs: self.history.len(),
            stop: self.stop,
            history: self.history.clone(),
        }
    }
}

/// Serializable summary of a [`TrainRun`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub fold: Option<usize>,
    pub best_epoch: usize,
    pub epochs: usize,
    pub stop: StopReason,
    pub history: Vec<EpochLog>,
}

/// Mean loss over `samples`, summed in index order.
pub fn mean_loss<T: Scalar>(params: &ModelParams<T>, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Usage("cannot average a loss over no samples".into()));
    }
    let losses = samples
        .par_iter()
        .map(|s| params.loss(&s.input, &s.target))
        .collect::<Result<Vec<T>>>()?;
    Ok(losses.iter().map(|l| l.as_f64()).sum::<f64>() / samples.len() as f64)
}

/// Averaged gradient and summed loss of one batch. Per-example work runs in
/// parallel; the reduction follows batch order so results do not depend on
/// thread count.
fn batch_gradient<T: Scalar>(params: &ModelParams<T>, batch: &[&Sample]) -> Result<(ModelParams<T>, f64)> {
    let parts = batch
        .par_iter()
        .map(|s| params.loss_and_grad(&s.input, &s.target))
        .collect::<Result<Vec<_>>>()?;
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &parts {
        grad.add_scaled(&g.params, T::one());
        loss += l.as_f64();
    }
    grad.scale(T::one() / T::of(batch.len() as f64));
    if let Some(name) = grad.first_non_finite() {
        return Err(Error::NonFinite(format!("gradient of {name}")));
    }
    Ok((grad, loss))
}

/// Mini-batch Adam with early stopping on validation loss. Returns the
/// parameters of the best validation epoch.
pub fn train<T: Scalar>(
    init: ModelParams<T>,
    train_set: &[Sample],
    validation: &[Sample],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    fold: Option<usize>,
) -> Result<TrainRun<T>> {
    if train_set.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    if validation.is_empty() {
        return Err(Error::Usage("validation set is empty".into()));
    }
    let mut params = init;
    let mut adam = AdamState::new(&params, cfg.optimizer);
    let mut best = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stop = StopReason::EpochCap;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (grad, loss) = batch_gradient(&params, &batch)?;
            adam.update(&mut params, &grad)?;
            total += loss;
        }
        if let Some(name) = params.first_non_finite() {
            return Err(Error::NonFinite(name));
        }
        let validation_loss = mean_loss(&params, validation)?;
        history.push(EpochLog {
            epoch,
            train_loss: total / train_set.len() as f64,
            validation_loss,
        });
        if validation_loss < best_loss {
            best_loss = validation_loss;
            best_epoch = epoch;
            best.clone_from(&params);
        } else if epoch - best_epoch > cfg.patience {
            stop = StopReason::Patience;
            break;
        }
    }
    Ok(TrainRun {
        fold,
        history,
        best_epoch,
        stop,
        params: best,
    })
}
