//! Instance pooling: fuses `I` person skeletons into one before the network.
//!
//! `Y = emb(X)`, `Y' = P_g(relu(P_c(Y) + Y))` with `P_c` a concat-then-project
//! map broadcast over persons and `P_g` an elementwise max over persons.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::skeleton::SkeletonSequence;
use crate::transform::fan_in_uniform;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IPConfig {
    /// Fixed person count after padding or cropping.
    pub persons: usize,
    /// Embedding channels, which become the network's input channels.
    pub channels: usize,
    /// Crop surplus persons instead of failing.
    pub crop: bool,
}

impl Default for IPConfig {
    fn default() -> Self {
        IPConfig {
            persons: 10,
            channels: 64,
            crop: true,
        }
    }
}

impl IPConfig {
    pub fn validate(&self) -> Result<()> {
        if self.persons == 0 || self.channels == 0 {
            return Err(Error::config("person count and embedding channels must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IPParams {
    /// `C_in × C`
    pub embed_weight: ParamId,
    pub embed_bias: ParamId,
    /// `J × C` keypoint positional encoding.
    pub encoding: ParamId,
    /// `I·C × C`
    pub pool_weight: ParamId,
    pub pool_bias: ParamId,
}

/// Instance pooling parameters together with their shapes.
#[derive(Debug, Clone)]
pub struct InstancePooling {
    cfg: IPConfig,
    joints: usize,
    in_channels: usize,
    params: IPParams,
}

impl InstancePooling {
    /// Embedding weights are drawn from a fan-in uniform range, the encoding
    /// starts at zero and `P_c` starts as the mean over persons.
    pub fn new(
        cfg: &IPConfig,
        joints: usize,
        in_channels: usize,
        store: &mut ParamStore,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (i_n, c) = (cfg.persons, cfg.channels);
        let mut pool = Tensor::zeros(&[i_n * c, c]);
        for i in 0..i_n {
            for k in 0..c {
                pool.set(&[i * c + k, k], 1.0 / i_n as f64);
            }
        }
        let params = IPParams {
            embed_weight: store.add(
                "ip.embed.weight",
                fan_in_uniform(&mut rng, &[in_channels, c], in_channels),
            ),
            embed_bias: store.add("ip.embed.bias", Tensor::zeros(&[c])),
            encoding: store.add("ip.encoding", Tensor::zeros(&[joints, c])),
            pool_weight: store.add("ip.pool.weight", pool),
            pool_bias: store.add("ip.pool.bias", Tensor::zeros(&[c])),
        };
        Ok(InstancePooling {
            cfg: cfg.clone(),
            joints,
            in_channels,
            params,
        })
    }

    pub fn config(&self) -> &IPConfig {
        &self.cfg
    }

    pub fn params(&self) -> IPParams {
        self.params
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    /// `I×J×T×C_in` input to `I×J×T×C` embedding.
    pub fn embed(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 4 || shape[1] != self.joints || shape[3] != self.in_channels {
            return Err(Error::shape(format!(
                "instance pooling expects (I, {}, T, {}), got {shape:?}",
                self.joints, self.in_channels
            )));
        }
        if shape[0] > self.cfg.persons {
            return Err(Error::shape(format!(
                "{} persons exceed the configured {}",
                shape[0], self.cfg.persons
            )));
        }
        let (i_n, j, t) = (shape[0], shape[1], shape[2]);
        let c = self.cfg.channels;
        let flat = tape.reshape(x, &[i_n * j * t, self.in_channels])?;
        let w = tape.param(store, self.params.embed_weight);
        let b = tape.param(store, self.params.embed_bias);
        let y = tape.matmul(flat, w)?;
        let y = tape.bias_add(y, b)?;
        let y = tape.reshape(y, &[i_n, j, t, c])?;
        let enc = tape.param(store, self.params.encoding);
        tape.add_joint_encoding(y, enc)
    }

    /// `P_c`: concatenates the person features of each (joint, frame) and
    /// projects them back to `C`; output is `1×J×T×C`.
    pub fn concat_pool(&self, tape: &mut Tape, store: &ParamStore, y: Var) -> Result<Var> {
        let shape = tape.value(y).shape().to_vec();
        let c = self.cfg.channels;
        if shape.len() != 4 || shape[0] != self.cfg.persons || shape[3] != c {
            return Err(Error::shape(format!(
                "concat pool expects ({}, J, T, {c}), got {shape:?}",
                self.cfg.persons
            )));
        }
        let (j, t) = (shape[1], shape[2]);
        let stacked = tape.instances_to_channels(y)?;
        let rows = tape.reshape(stacked, &[j * t, self.cfg.persons * c])?;
        let w = tape.param(store, self.params.pool_weight);
        let b = tape.param(store, self.params.pool_bias);
        let out = tape.matmul(rows, w)?;
        let out = tape.bias_add(out, b)?;
        tape.reshape(out, &[1, j, t, c])
    }

    /// `P_g(relu(P_c(Y) + Y))` for a padded `I×J×T×C_in` input; returns
    /// `J×T×C`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let padded = tape.value(x).shape()[0] == self.cfg.persons;
        if !padded {
            return Err(Error::shape(format!(
                "pad or crop to {} persons before pooling, got {}",
                self.cfg.persons,
                tape.value(x).shape()[0]
            )));
        }
        let y = self.embed(tape, store, x)?;
        let pc = self.concat_pool(tape, store, y)?;
        let z = tape.add(pc, y)?;
        let z = tape.relu(z);
        group_pool(tape, z)
    }

    /// Pads or crops a sequence's persons and runs [`Self::forward`].
    pub fn pool_sequence(&self, store: &ParamStore, seq: &SkeletonSequence) -> Result<Tensor> {
        let x = fit_persons(seq.data(), &self.cfg)?;
        let mut tape = Tape::new();
        let xv = tape.constant(x);
        let out = self.forward(&mut tape, store, xv)?;
        Ok(tape.value(out).clone())
    }
}

/// `P_g`: elementwise max over the person axis.
pub fn group_pool(tape: &mut Tape, z: Var) -> Result<Var> {
    tape.max_leading(z)
}

/// Zero-pads missing persons, and crops surplus ones when the config allows.
/// Cropping keeps the leading persons.
pub fn fit_persons(x: &Tensor, cfg: &IPConfig) -> Result<Tensor> {
    let shape = x.shape();
    if shape.len() != 4 {
        return Err(Error::shape(format!("expected (I, J, T, C), got {shape:?}")));
    }
    let (i_n, per) = (shape[0], x.len() / shape[0]);
    if i_n > cfg.persons && !cfg.crop {
        return Err(Error::shape(format!(
            "{i_n} persons exceed the configured {}",
            cfg.persons
        )));
    }
    let keep = i_n.min(cfg.persons);
    let mut data = x.data()[..keep * per].to_vec();
    data.resize(cfg.persons * per, 0.0);
    Tensor::new(&[cfg.persons, shape[1], shape[2], shape[3]], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(persons: usize, c: usize) -> (InstancePooling, ParamStore) {
        let mut store = ParamStore::new();
        let cfg = IPConfig {
            persons,
            channels: c,
            crop: false,
        };
        let ip = InstancePooling::new(&cfg, 4, 3, &mut store, 5).unwrap();
        (ip, store)
    }

    fn input(persons: usize) -> Tensor {
        let n = persons * 4 * 5 * 3;
        Tensor::new(&[persons, 4, 5, 3], (0..n).map(|i| ((i * 7 % 13) as f64) / 13.0 - 0.4).collect())
            .unwrap()
    }

    #[test]
    fn zero_weights_give_zero_embedding() {
        let (ip, mut store) = setup(2, 4);
        store.set_value(ip.params().embed_weight, Tensor::zeros(&[3, 4])).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(input(2));
        let y = ip.embed(&mut tape, &store, x).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_person_identity_pool_keeps_embedding() {
        let (ip, store) = setup(1, 4);
        let mut tape = Tape::new();
        let x = tape.constant(input(1));
        let y = ip.embed(&mut tape, &store, x).unwrap();
        let p = ip.concat_pool(&mut tape, &store, y).unwrap();
        assert_eq!(tape.value(p), tape.value(y));
    }

    #[test]
    fn output_drops_person_axis() {
        for persons in [1, 3] {
            let (ip, store) = setup(persons, 6);
            let mut tape = Tape::new();
            let x = tape.constant(input(persons));
            let out = ip.forward(&mut tape, &store, x).unwrap();
            assert_eq!(tape.value(out).shape(), &[4, 5, 6]);
        }
    }

    #[test]
    fn fit_persons_pads_and_crops() {
        let cfg = IPConfig {
            persons: 3,
            channels: 2,
            crop: true,
        };
        let padded = fit_persons(&input(2), &cfg).unwrap();
        assert_eq!(padded.shape(), &[3, 4, 5, 3]);
        assert!(padded.data()[120..].iter().all(|&v| v == 0.0));
        let cropped = fit_persons(&input(5), &cfg).unwrap();
        assert_eq!(cropped.data(), &input(5).data()[..180]);
        let strict = IPConfig { crop: false, ..cfg };
        assert!(fit_persons(&input(5), &strict).is_err());
    }
}
