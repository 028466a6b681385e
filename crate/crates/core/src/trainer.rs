//! Single-model training: Adam on the MSE of ln γ∞, plateau learning-rate
//! decay, early stopping on validation MSE, and restoration of the best
//! validation state at exit.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{batches, Dataset, TemperatureScale};
use crate::error::{DataError, TrainError};
use crate::model::{predict_records, Regressor};
use crate::tensor::{adam_step, exact_sum, AdamConfig, AdamState, Tape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub lr_decay: f64,
    /// Epochs without validation improvement before the rate is reduced.
    pub lr_patience: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before training stops.
    pub early_stop_patience: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Optional cap on optimizer steps across all epochs.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 0.001,
            lr_decay: 0.8,
            lr_patience: 3,
            batch_size: 64,
            max_epochs: 300,
            early_stop_patience: 25,
            dropout: 0.0,
            seed: 0,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Data(DataError::Invalid(m.to_string())));
        if !(self.initial_lr > 0.0) {
            return bad("initial_lr must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if self.lr_patience == 0 || self.early_stop_patience == 0 {
            return bad("patience values must be at least one epoch");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Reduce-on-plateau learning rate. The rate after `k` reductions is
/// `initial · decay^k`, computed from `k` so repeated decays do not
/// accumulate rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub initial_lr: f64,
    pub decay: f64,
    pub patience: usize,
    best: f64,
    bad_epochs: usize,
    reductions: i32,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f64, decay: f64, patience: usize) -> Self {
        PlateauScheduler {
            initial_lr,
            decay,
            patience,
            best: f64::INFINITY,
            bad_epochs: 0,
            reductions: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.initial_lr * self.decay.powi(self.reductions)
    }

    pub fn reductions(&self) -> i32 {
        self.reductions
    }

    /// Feeds one epoch's validation loss and returns the rate for the next
    /// epoch. Any strict decrease is an improvement; the bad-epoch counter
    /// resets on improvement and after each reduction.
    pub fn step(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                self.reductions += 1;
                self.bad_epochs = 0;
            }
        }
        self.lr()
    }
}

/// Stops once validation loss has not strictly improved for `patience`
/// consecutive epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    best: f64,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Returns true when training should stop after this epoch.
    pub fn step(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
        }
        self.bad_epochs >= self.patience
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_mae: f64,
    /// Rate used during this epoch.
    pub lr: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopping,
    MaxEpochs,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub steps: usize,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.epochs {
            w.serialize(e)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn mse_mae(pred: &[f64], target: &[f64]) -> (f64, f64) {
    let n = pred.len() as f64;
    let mse = exact_sum(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t))) / n;
    let mae = exact_sum(pred.iter().zip(target).map(|(p, t)| (p - t).abs())) / n;
    (mse, mae)
}

/// Validation MSE and MAE of `model` on `indices`.
pub fn evaluate_loss<M: Regressor + ?Sized>(
    model: &M,
    data: &Dataset,
    indices: &[usize],
) -> Result<(f64, f64), TrainError> {
    let records = data.select(indices);
    let pred = predict_records(model, &data.graphs, &records)?;
    Ok(mse_mae(&pred, &data.targets(indices)))
}

/// Trains `model` in place and leaves it holding the parameters of the epoch
/// with the lowest validation loss. The temperature scale is frozen from the
/// training records.
pub fn train<M: Regressor + ?Sized>(
    model: &mut M,
    data: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    config: &TrainConfig,
) -> Result<TrainHistory, TrainError> {
    config.validate()?;
    if train_idx.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    if val_idx.is_empty() {
        return Err(TrainError::EmptyValidation);
    }
    let scale = TemperatureScale::from_records(data.select(train_idx))?;
    model.set_temperature_scale(scale);
    model.set_dropout(config.dropout);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model.params(), AdamConfig::default());
    let mut scheduler = PlateauScheduler::new(config.initial_lr, config.lr_decay, config.lr_patience);
    let mut stopper = EarlyStopping::new(config.early_stop_patience);
    let mut best = (f64::INFINITY, 0, model.params().values().to_vec());
    let mut epochs = Vec::new();
    let mut steps = 0;
    let mut stop_reason = StopReason::MaxEpochs;
    let started = Instant::now();

    for epoch in 1..=config.max_epochs {
        let lr = scheduler.lr();
        let mut losses = Vec::new();
        let mut seen = 0;
        let mut out_of_steps = false;
        for (b, batch) in batches(train_idx, config.batch_size, &mut rng).into_iter().enumerate() {
            let samples = data.samples(&batch, &scale);
            let targets = data.targets(&batch);
            let mut tape = Tape::new();
            let pred = model.forward_batch(&mut tape, &samples, true, &mut rng)?;
            let loss = tape.mse(pred, &targets).map_err(crate::error::ModelError::from)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: b,
                    loss: value,
                });
            }
            let grads = tape.backward(loss).map_err(crate::error::ModelError::from)?;
            let grads = grads.for_params(&tape, model.params());
            adam_step(model.params_mut(), &grads, &mut adam, lr);
            losses.push(value * batch.len() as f64);
            seen += batch.len();
            steps += 1;
            if config.max_steps.is_some_and(|m| steps >= m) {
                out_of_steps = true;
                break;
            }
        }
        let train_loss = exact_sum(losses.iter().copied()) / seen as f64;
        let (val_loss, val_mae) = evaluate_loss(model, data, val_idx)?;
        if !val_loss.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                batch: usize::MAX,
                loss: val_loss,
            });
        }
        if val_loss < best.0 {
            best = (val_loss, epoch, model.params().values().to_vec());
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_mae,
            lr,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6} lr {lr:e}");
        scheduler.step(val_loss);
        if out_of_steps {
            stop_reason = StopReason::MaxSteps;
            break;
        }
        if stopper.step(val_loss) {
            stop_reason = StopReason::EarlyStopping;
            break;
        }
    }
    model.params_mut().assign(&best.2);
    Ok(TrainHistory {
        epochs,
        best_epoch: best.1,
        best_val_loss: best.0,
        steps,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strictly_improving_losses_keep_the_rate() {
        let mut s = PlateauScheduler::new(0.001, 0.8, 3);
        for k in 0..20 {
            assert_eq!(s.step(1.0 - k as f64 * 0.01), 0.001);
        }
    }

    #[test]
    fn two_plateaus_give_two_reductions() {
        let mut s = PlateauScheduler::new(0.001, 0.8, 3);
        s.step(1.0);
        let lrs: Vec<f64> = (0..6).map(|_| s.step(1.0)).collect();
        assert_eq!(lrs[..2], [0.001, 0.001]);
        assert_eq!(lrs[2], 0.001 * 0.8);
        assert_eq!(lrs[5], 0.001 * 0.8f64.powi(2));
        // 0.001 · 0.64 rounds one unit in the last place above the literal 0.00064
        assert!((lrs[5] - 0.00064).abs() < 1e-18);
    }

    #[test]
    fn equal_loss_is_not_an_improvement() {
        let mut e = EarlyStopping::new(2);
        assert!(!e.step(1.0));
        assert!(!e.step(1.0));
        assert!(e.step(1.0));
    }

    #[test]
    fn monotone_worsening_stops_after_patience() {
        let mut e = EarlyStopping::new(25);
        let stop = (1..=300).find(|&epoch| e.step(epoch as f64)).unwrap();
        assert_eq!(stop, 26);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
