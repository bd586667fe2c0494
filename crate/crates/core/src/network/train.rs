use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{argmax, Network};
use crate::diff::{ParamStore, Tape, Tensor};
use crate::error::{Error, Result};
use crate::skeleton::SkeletonSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub cosine: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            nesterov: true,
            weight_decay: 0.0005,
            epochs: 120,
            batch_size: 16,
            cosine: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay < 0.0 {
            return Err(Error::config(
                "momentum must lie in [0, 1) and weight decay be non-negative",
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch size must be positive"));
        }
        Ok(())
    }

    /// Learning rate used during epoch `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.cosine {
            cosine_lr(self.learning_rate, epoch, self.epochs)
        } else {
            self.learning_rate
        }
    }
}

/// `η₀·(1 + cos(π·t/t_max))/2`.
pub fn cosine_lr(base: f64, t: usize, t_max: usize) -> f64 {
    base * (1.0 + (PI * t as f64 / t_max as f64).cos()) / 2.0
}

/// SGD with (optionally Nesterov) momentum and L2 weight decay.
#[derive(Debug, Clone)]
pub struct Sgd {
    momentum: f64,
    nesterov: bool,
    weight_decay: f64,
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new(store: &ParamStore, momentum: f64, nesterov: bool, weight_decay: f64) -> Self {
        Sgd {
            momentum,
            nesterov,
            weight_decay,
            velocity: store.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect(),
        }
    }

    /// Applies one update with learning rate `lr` using the gradients held in
    /// `store`.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) {
        for (p, v) in store.iter_mut().zip(&mut self.velocity) {
            if !p.requires_grad {
                continue;
            }
            let w = p.value.data_mut();
            for ((wi, &gi), vi) in w.iter_mut().zip(p.grad.data()).zip(v.data_mut()) {
                let g = gi + self.weight_decay * *wi;
                *vi = self.momentum * *vi + g;
                let update = if self.nesterov {
                    g + self.momentum * *vi
                } else {
                    *vi
                };
                *wi -= lr * update;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch at which a non-finite loss stopped training. Parameters are
    /// rolled back to the end of the previous epoch.
    pub diverged_at: Option<usize>,
}

fn sample_input(seq: &SkeletonSequence) -> Result<(Tensor, usize)> {
    let label = seq
        .label()
        .ok_or_else(|| Error::InsufficientData("training sequence has no label".into()))?;
    if seq.persons() != 1 {
        return Err(Error::shape(format!(
            "training expects single-person sequences, got {} persons",
            seq.persons()
        )));
    }
    Ok((seq.person(0), label))
}

/// Mini-batch training with cross-entropy loss. Samples within a batch are
/// reduced in a fixed order, so a seed fully determines the run.
pub fn train(net: &mut Network, data: &[SkeletonSequence], tc: &TrainConfig) -> Result<TrainLog> {
    tc.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let samples = data.iter().map(sample_input).collect::<Result<Vec<_>>>()?;
    let classes = net.config().num_classes;
    if let Some((_, l)) = samples.iter().find(|(_, l)| *l >= classes) {
        return Err(Error::Index(format!("label {l} out of range for {classes} classes")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut opt = Sgd::new(net.store(), tc.momentum, tc.nesterov, tc.weight_decay);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = TrainLog::default();

    for epoch in 0..tc.epochs {
        let checkpoint = net.store().clone();
        let lr = tc.lr_at(epoch);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        let mut diverged = false;
        for batch in order.chunks(tc.batch_size) {
            let mut store = net.store().clone();
            store.zero_grad();
            for &i in batch {
                let (x, label) = &samples[i];
                let mut tape = Tape::new();
                let xv = tape.constant(x.clone());
                let logits = net.forward(&mut tape, &store, xv)?;
                if argmax(tape.value(logits).data()) == *label {
                    correct += 1;
                }
                let loss = tape.softmax_cross_entropy(logits, *label)?;
                let l = tape.value(loss).data()[0];
                if !l.is_finite() {
                    diverged = true;
                    break;
                }
                loss_sum += l;
                tape.backward(loss)?.accumulate_into(&tape, &mut store);
            }
            if diverged {
                break;
            }
            let scale = 1.0 / batch.len() as f64;
            for p in store.iter_mut() {
                for g in p.grad.data_mut() {
                    *g *= scale;
                }
            }
            opt.step(&mut store, lr);
            *net.store_mut() = store;
        }
        if diverged {
            *net.store_mut() = checkpoint;
            log.diverged_at = Some(epoch);
            break;
        }
        let n = samples.len() as f64;
        log.epochs.push(EpochLog {
            epoch,
            learning_rate: lr,
            loss: loss_sum / n,
            accuracy: correct as f64 / n,
        });
    }
    Ok(log)
}

/// Fraction of labelled sequences classified correctly.
pub fn evaluate(net: &Network, data: &[SkeletonSequence]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empty evaluation set".into()));
    }
    let mut correct = 0;
    for seq in data {
        let (x, label) = sample_input(seq)?;
        if net.predict(&x)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints() {
        assert_eq!(cosine_lr(0.1, 0, 50), 0.1);
        assert!(cosine_lr(0.1, 50, 50).abs() < 1e-18);
        assert!((cosine_lr(0.1, 25, 50) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn nesterov_step_matches_hand_computation() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::new(&[1], vec![1.0]).unwrap());
        store.get_mut(id).grad = Tensor::new(&[1], vec![0.5]).unwrap();
        let mut opt = Sgd::new(&store, 0.9, true, 0.1);
        opt.step(&mut store, 0.1);
        // g = 0.5 + 0.1·1 = 0.6; v = 0.6; update = 0.6 + 0.9·0.6 = 1.14
        assert!((store.value(id).data()[0] - (1.0 - 0.114)).abs() < 1e-15);
        opt.step(&mut store, 0.1);
        let w1 = 1.0 - 0.114;
        let g = 0.5 + 0.1 * w1;
        let v = 0.9 * 0.6 + g;
        let expected = w1 - 0.1 * (g + 0.9 * v);
        assert!((store.value(id).data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn frozen_parameters_untouched() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::new(&[1], vec![1.0]).unwrap());
        store.get_mut(id).grad = Tensor::new(&[1], vec![0.5]).unwrap();
        store.get_mut(id).requires_grad = false;
        let mut opt = Sgd::new(&store, 0.9, true, 0.0);
        opt.step(&mut store, 1.0);
        assert_eq!(store.value(id).data(), &[1.0]);
    }
}
