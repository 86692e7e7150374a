use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::siamese::{batch_loss, batch_loss_and_gradients, MatrixPair, PairExample, SiameseModel};
use super::RnnError;
use crate::evalproto::compute_eer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Std of the Gaussian initialization; used when a fresh model is built.
    pub init_std: f64,
    pub batch_size: usize,
    /// Epoch counter value at which training stops (resumed runs continue
    /// from the model's `epochs_trained`).
    pub epochs: usize,
    pub early_stop_patience: usize,
    /// Stops as soon as the validation EER drops below this value.
    #[serde(default)]
    pub target_val_eer: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_std: 0.05,
            batch_size: 16,
            epochs: 200,
            early_stop_patience: 20,
            target_val_eer: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RnnError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(RnnError::Config("learning rate must be >= 0".into()));
        }
        if !(self.init_std > 0.0) {
            return Err(RnnError::Config("init_std must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(RnnError::Config("batch size must be >= 1".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch counter.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Pair-level EER of the validation scores.
    pub val_eer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: Option<f64>,
    pub stopped_early: bool,
    /// Training ended because the validation EER reached the target.
    #[serde(default)]
    pub reached_target: bool,
}

/// Model plus optimizer moments: everything needed to resume.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: SiameseModel,
    pub adam: AdamState,
}

impl TrainState {
    pub fn fresh(model: SiameseModel) -> Self {
        let adam = AdamState::new(&model.params);
        TrainState { model, adam }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Lowest validation loss seen (the last epoch without validation data).
    pub best: TrainState,
    pub last: TrainState,
    pub log: TrainingLog,
}

fn epoch_seed(model_seed: u64, epoch: usize) -> u64 {
    model_seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains from scratch; returns the best-validation model and the log.
pub fn train(
    model: SiameseModel,
    train_pairs: &[PairExample],
    val_pairs: &[PairExample],
    cfg: &TrainConfig,
) -> Result<(SiameseModel, TrainingLog), RnnError> {
    let out = train_from(TrainState::fresh(model), train_pairs, val_pairs, cfg)?;
    Ok((out.best.model, out.log))
}

/// Continues training from `state` up to `cfg.epochs`.
pub fn train_from(
    state: TrainState,
    train_pairs: &[PairExample],
    val_pairs: &[PairExample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, RnnError> {
    cfg.validate()?;
    if train_pairs.is_empty() {
        return Err(RnnError::EmptyBatch);
    }
    let train_m = train_pairs
        .iter()
        .map(MatrixPair::from_example)
        .collect::<Result<Vec<_>, _>>()?;
    let val_m = val_pairs
        .iter()
        .map(MatrixPair::from_example)
        .collect::<Result<Vec<_>, _>>()?;
    let adam_cfg = cfg.adam();

    let mut current = state;
    let mut best = current.clone();
    let mut best_loss: Option<f64> = None;
    let mut log = TrainingLog {
        best_epoch: current.model.epochs_trained,
        ..Default::default()
    };
    let mut since_best = 0usize;
    let mut order: Vec<usize> = (0..train_m.len()).collect();

    while current.model.epochs_trained < cfg.epochs {
        let epoch = current.model.epochs_trained + 1;
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(
            current.model.seed,
            epoch,
        )));

        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&MatrixPair> = idx.iter().map(|&i| &train_m[i]).collect();
            let (loss, grad) = batch_loss_and_gradients(&current.model.params, &batch)?;
            if !loss.is_finite() || !grad.all_finite() {
                return Err(RnnError::Diverged {
                    epoch,
                    batch: b,
                    loss,
                });
            }
            loss_sum += loss * batch.len() as f64;
            current
                .adam
                .update(&mut current.model.params, &grad, &adam_cfg);
        }
        if !current.model.params.all_finite() {
            return Err(RnnError::Diverged {
                epoch,
                batch: 0,
                loss: f64::NAN,
            });
        }
        current.model.epochs_trained = epoch;
        let train_loss = loss_sum / train_m.len() as f64;

        let (val_loss, val_eer) = if val_m.is_empty() {
            (None, None)
        } else {
            let l = batch_loss(&current.model.params, &val_m)?;
            (Some(l), Some(validation_eer(&current.model, &val_m)?))
        };
        log::info!(
            "epoch {epoch}: train loss {train_loss:.5} val loss {} val eer {}",
            val_loss.map_or("-".into(), |v| format!("{v:.5}")),
            val_eer.map_or("-".into(), |v| format!("{:.2}%", 100.0 * v)),
        );
        log.records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_eer,
        });

        match val_loss {
            None => {
                best = current.clone();
                log.best_epoch = epoch;
            }
            Some(l) => {
                if best_loss.is_none_or(|b| l < b) {
                    best_loss = Some(l);
                    best = current.clone();
                    log.best_epoch = epoch;
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best > cfg.early_stop_patience {
                        log.stopped_early = true;
                        break;
                    }
                }
            }
        }
        if let (Some(t), Some(e)) = (cfg.target_val_eer, val_eer) {
            if e < t {
                log.reached_target = true;
                break;
            }
        }
    }
    log.best_val_loss = best_loss;
    Ok(TrainOutcome {
        best,
        last: current,
        log,
    })
}

fn validation_eer(model: &SiameseModel, pairs: &[MatrixPair]) -> Result<f64, RnnError> {
    let scores: Vec<Result<f64, RnnError>> =
        pairs.par_iter().map(|p| model.score_matrices(p)).collect();
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (p, s) in pairs.iter().zip(scores) {
        let s = s?;
        if p.label == 1.0 {
            genuine.push(s);
        } else {
            impostor.push(s);
        }
    }
    if genuine.is_empty() || impostor.is_empty() {
        return Ok(f64::NAN);
    }
    Ok(compute_eer(&genuine, &impostor)
        .map(|e| e.eer)
        .unwrap_or(f64::NAN))
}

/// Pair-level EER of `model` on labeled pairs.
pub fn pair_eer(model: &SiameseModel, pairs: &[PairExample]) -> Result<f64, RnnError> {
    let m = pairs
        .iter()
        .map(MatrixPair::from_example)
        .collect::<Result<Vec<_>, _>>()?;
    validation_eer(model, &m)
}
