//! Minibatch training loop with early stopping on validation MSE.

use ndarray::{Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use super::adam::Adam;
use super::loss::{mse, mse_grad};
use super::model::CnnModel;
use crate::dataset::SamplePair;
use crate::error::{Error, Result};
use crate::seeding::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub l2_lambda: f64,
    pub dropout_rate: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 500,
            l2_lambda: 1e-6,
            dropout_rate: 0.1,
            patience: 60,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter("learning_rate must be > 0".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidParameter("batch_size must be >= 2 (batch norm)".into()));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidParameter("max_epochs and patience must be > 0".into()));
        }
        if self.l2_lambda < 0.0 {
            return Err(Error::InvalidParameter("l2_lambda must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidParameter("dropout_rate must be in [0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub train_mse: f64,
    pub val_mse: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
}

impl TrainingHistory {
    pub fn best_val_mse(&self) -> Option<f64> {
        self.epochs.get(self.best_epoch).map(|e| e.val_mse)
    }

    /// Loss trajectories only; wall times are run-dependent.
    pub fn mse_curves(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.epochs.iter().map(|e| e.train_mse).collect(),
            self.epochs.iter().map(|e| e.val_mse).collect(),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse,seconds\n");
        for (i, e) in self.epochs.iter().enumerate() {
            writeln!(out, "{i},{},{},{}", e.train_mse, e.val_mse, e.seconds).expect("string write");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn to_arrays(pairs: &[&SamplePair], len: usize) -> Result<(Array3<f64>, Array2<f64>)> {
    let n = pairs.len();
    let mut x = Array3::zeros((n, 1, len));
    let mut y = Array2::zeros((n, len));
    for (i, pair) in pairs.iter().enumerate() {
        if pair.input.len() != len || pair.target.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "sample {i} has vectors of length {}/{} for a {len}-point model",
                pair.input.len(),
                pair.target.len()
            )));
        }
        x.as_slice_mut().unwrap()[i * len..(i + 1) * len].copy_from_slice(&pair.input);
        y.as_slice_mut().unwrap()[i * len..(i + 1) * len].copy_from_slice(&pair.target);
    }
    Ok((x, y))
}

fn gather_batch(
    x: &Array3<f64>,
    y: &Array2<f64>,
    ids: &[usize],
    len: usize,
) -> (Array3<f64>, Array2<f64>) {
    let mut bx = Array3::zeros((ids.len(), 1, len));
    let mut by = Array2::zeros((ids.len(), len));
    let xs = x.as_slice().unwrap();
    let ys = y.as_slice().unwrap();
    for (row, &id) in ids.iter().enumerate() {
        bx.as_slice_mut().unwrap()[row * len..(row + 1) * len]
            .copy_from_slice(&xs[id * len..(id + 1) * len]);
        by.as_slice_mut().unwrap()[row * len..(row + 1) * len]
            .copy_from_slice(&ys[id * len..(id + 1) * len]);
    }
    (bx, by)
}

/// Learning-rate multipliers applied on successive validation plateaus.
const PLATEAU_DECAYS: [f64; 3] = [1.0, 0.1, 0.01];

/// Minimize the MSE + L2 objective over minibatches. Validation runs in
/// inference mode after every epoch and the parameters of the best
/// validation epoch are restored at the end.
///
/// When the validation MSE has not improved for `patience` epochs, the
/// best parameters are restored and optimization resumes with the
/// learning rate cut by 10x (twice at most); the third plateau, or
/// `max_epochs`, stops training. The coarse rate learns the structure
/// quickly but orbits the optimum; the refinement stages are what pull
/// noisy-input models below the pass-through-noise plateau.
pub fn train(
    model: &mut CnnModel,
    train_pairs: &[&SamplePair],
    val_pairs: &[&SamplePair],
    cfg: &TrainConfig,
) -> Result<TrainingHistory> {
    cfg.validate()?;
    if train_pairs.is_empty() || val_pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let len = model.input_len();
    if model.output_len() != len {
        return Err(Error::ShapeMismatch(format!(
            "model maps {} -> {}, but targets have length {len}",
            len,
            model.output_len()
        )));
    }
    let (tx, ty) = to_arrays(train_pairs, len)?;
    let (vx, vy) = to_arrays(val_pairs, len)?;

    let mut optimizer = Adam::new(cfg.learning_rate);
    let mut history = TrainingHistory::default();
    let mut best_val = f64::INFINITY;
    let mut best_state = model.snapshot_state();
    let mut epochs_since_best = 0usize;
    let mut stage = 0usize;
    let mut indices: Vec<usize> = (0..train_pairs.len()).collect();

    for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let mut shuffle_rng = stream(cfg.seed, Domain::TrainShuffle, epoch as u64);
        for i in (1..indices.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            indices.swap(i, j);
        }

        let mut weighted_mse = 0.0;
        let mut seen = 0usize;
        for batch_ids in indices.chunks(cfg.batch_size) {
            if batch_ids.len() < 2 {
                // Batch norm cannot normalize a single sample; skip the remainder.
                continue;
            }
            let (bx, by) = gather_batch(&tx, &ty, batch_ids, len);
            let pred = model.forward_train(bx)?;
            let batch_mse = mse(&pred, &by)?;
            if !batch_mse.is_finite() {
                return Err(Error::Divergence { epoch, loss: batch_mse });
            }
            weighted_mse += batch_mse * batch_ids.len() as f64;
            seen += batch_ids.len();
            let grad = mse_grad(&pred, &by)?;
            model.backward(grad)?;
            optimizer.step(model, cfg.l2_lambda);
        }
        let train_mse = weighted_mse / seen as f64;

        let val_pred = model.infer_batch(&vx)?;
        let val_mse = mse(&val_pred, &vy)?;
        if !val_mse.is_finite() {
            return Err(Error::Divergence { epoch, loss: val_mse });
        }
        history.epochs.push(EpochStats {
            train_mse,
            val_mse,
            seconds: started.elapsed().as_secs_f64(),
        });

        if val_mse < best_val {
            best_val = val_mse;
            best_state = model.snapshot_state();
            history.best_epoch = epoch;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience {
                stage += 1;
                if stage >= PLATEAU_DECAYS.len() {
                    break;
                }
                model.restore_state(&best_state)?;
                optimizer = Adam::new(cfg.learning_rate * PLATEAU_DECAYS[stage]);
                epochs_since_best = 0;
            }
        }
    }

    model.restore_state(&best_state)?;
    Ok(history)
}
