//! Synthetic sequence classification used to check that the KCP cell trains.
//!
//! Each sequence holds `length` standard-normal vectors in `R^256`; its label
//! is the sign of `Σ_t ⟨v, x_t⟩` for a fixed unit vector `v` that is an outer
//! product of four length-4 vectors. The model is a KCP-LSTM cell with
//! `m = (4,4,4,4)`, `n = (2,2,2,2)`, two branches of rank 2 on each side, a
//! logistic readout on the last hidden state, and minibatch SGD on the
//! binary cross-entropy.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{sequence_backward, sequence_loss, CellGradients, LstmCellWeights, Readout};
use crate::error::{KcpError, Result};
use crate::format::KcpConfig;
use crate::tensor::outer;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub sequences: usize,
    pub length: usize,
    pub batch: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 200,
            lr: 0.2,
            sequences: 128,
            length: 5,
            batch: 16,
        }
    }
}

impl ToyConfig {
    pub fn cell_config() -> KcpConfig {
        KcpConfig::uniform(vec![4, 4, 4, 4], vec![2, 2, 2, 2], 2, 2, 2).expect("valid toy shape")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTask {
    pub inputs: Vec<Vec<Vec<f64>>>,
    pub labels: Vec<f64>,
    /// The rank-1 direction defining the labels.
    pub direction: Vec<f64>,
}

pub fn generate_toy_task(seed: u64, sequences: usize, length: usize) -> ToyTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..4).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let refs: Vec<&[f64]> = parts.iter().map(Vec::as_slice).collect();
    let mut direction = outer(&refs).expect("non-empty factors").into_data();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);

    let mut inputs = Vec::with_capacity(sequences);
    let mut labels = Vec::with_capacity(sequences);
    for _ in 0..sequences {
        let seq: Vec<Vec<f64>> = (0..length)
            .map(|_| {
                (0..direction.len())
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect()
            })
            .collect();
        let score: f64 = seq
            .iter()
            .map(|x| x.iter().zip(&direction).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        labels.push(if score >= 0.0 { 1.0 } else { 0.0 });
        inputs.push(seq);
    }
    ToyTask {
        inputs,
        labels,
        direction,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub rows: Vec<EpochRow>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,train_accuracy\n");
        for r in &self.rows {
            writeln!(out, "{},{:.6},{:.4}", r.epoch, r.loss, r.train_accuracy)
                .expect("string write");
        }
        out
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.rows.last().map(|r| r.train_accuracy)
    }

    pub fn best_accuracy(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.train_accuracy).reduce(f64::max)
    }
}

/// Mean loss and accuracy over the whole training set.
fn evaluate(cell: &LstmCellWeights, readout: &Readout, task: &ToyTask) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (xs, &y) in task.inputs.iter().zip(&task.labels) {
        let (l, logit) = sequence_loss(cell, readout, xs, y)?;
        loss += l;
        if (logit >= 0.0) == (y >= 0.5) {
            correct += 1;
        }
    }
    let n = task.labels.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

fn sgd_step(
    cell: &mut LstmCellWeights,
    readout: &mut Readout,
    g: &CellGradients,
    lr: f64,
) -> Result<()> {
    cell.map_factors(|j, t| {
        let mut out = t.clone();
        for (v, d) in out.data_mut().iter_mut().zip(g.factors[j].data()) {
            *v -= lr * d;
        }
        out
    })?;
    for gate in 0..4 {
        for (v, d) in cell
            .recurrent_mut(gate)
            .data_mut()
            .iter_mut()
            .zip(g.u[gate].data())
        {
            *v -= lr * d;
        }
        for (v, d) in cell.bias_mut(gate).iter_mut().zip(&g.b[gate]) {
            *v -= lr * d;
        }
    }
    for (v, d) in readout.weights.iter_mut().zip(&g.readout) {
        *v -= lr * d;
    }
    readout.bias -= lr * g.readout_bias;
    Ok(())
}

/// Trains the toy model and logs loss and accuracy on the training set after
/// every epoch.
pub fn train_toy(config: &ToyConfig) -> Result<TrainLog> {
    if config.epochs == 0 {
        return Err(KcpError::InvalidConfig(
            "at least one epoch is required".into(),
        ));
    }
    if config.sequences == 0 || config.length == 0 {
        return Err(KcpError::EmptyInput("toy training set"));
    }
    if config.batch == 0 {
        return Err(KcpError::InvalidConfig(
            "batch size must be positive".into(),
        ));
    }
    if !config.lr.is_finite() || config.lr < 0.0 {
        return Err(KcpError::InvalidConfig(format!(
            "learning rate {} is not usable",
            config.lr
        )));
    }
    let task = generate_toy_task(config.seed, config.sequences, config.length);
    let cfg = ToyConfig::cell_config();
    let mut cell = LstmCellWeights::random_unshared(&cfg, config.seed.wrapping_add(1));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let normal = Normal::new(0.0, 0.1).expect("valid std");
    let mut readout = Readout {
        weights: (0..cell.hidden_size())
            .map(|_| normal.sample(&mut rng))
            .collect(),
        bias: 0.0,
    };

    let mut log = TrainLog::default();
    let mut record = |epoch: usize, cell: &LstmCellWeights, readout: &Readout| -> Result<()> {
        let (loss, acc) = evaluate(cell, readout, &task)?;
        if !loss.is_finite() {
            return Err(KcpError::Divergence { epoch, loss });
        }
        log.rows.push(EpochRow {
            epoch,
            loss,
            train_accuracy: acc,
        });
        Ok(())
    };
    let mut order: Vec<usize> = (0..config.sequences).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch) {
            let mut mean = CellGradients::zeros(&cell, &cell.factor_slots());
            let weight = 1.0 / batch.len() as f64;
            for &s in batch {
                let (_, _, g) =
                    sequence_backward(&cell, &readout, &task.inputs[s], task.labels[s])?;
                mean.add_scaled(&g, weight);
            }
            sgd_step(&mut cell, &mut readout, &mean, config.lr)?;
        }
        record(epoch, &cell, &readout)?;
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_direction() {
        let task = generate_toy_task(4, 20, 3);
        assert_eq!(task.inputs.len(), 20);
        assert_eq!(task.inputs[0].len(), 3);
        assert_eq!(task.inputs[0][0].len(), 256);
        let norm: f64 = task.direction.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let positives = task.labels.iter().filter(|&&y| y == 1.0).count();
        assert!(positives > 0 && positives < 20);
    }

    #[test]
    fn zero_rate_keeps_loss() {
        let cfg = ToyConfig {
            epochs: 2,
            lr: 0.0,
            sequences: 8,
            length: 2,
            batch: 4,
            ..ToyConfig::default()
        };
        let log = train_toy(&cfg).unwrap();
        assert_eq!(log.rows.len(), 2);
        assert_eq!(log.rows[0].loss, log.rows[1].loss);
        assert!(log.to_csv().starts_with("epoch,loss,train_accuracy\n1,"));
    }

    #[test]
    fn nan_rate_is_rejected() {
        let cfg = ToyConfig {
            epochs: 3,
            lr: f64::NAN,
            ..ToyConfig::default()
        };
        assert!(matches!(train_toy(&cfg), Err(KcpError::InvalidConfig(_))));
    }
}
