use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::NetworkConfig;
use crate::diff::{check_gradients, kernels, GradCheckReport, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::skeleton::{
    add_self_links, build_adjacency, normalize_adjacency, AdjacencyMatrix, KeypointLayout,
    SkeletonSequence,
};
use crate::transform::{
    fan_in_uniform, init_downsample_matrix, transform_adjacency_dense, BlockConfig, BlockKind,
    GroupedMappingBlock, PartitionMap,
};

/// Output shape of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockShape {
    pub index: usize,
    pub kind: BlockKind,
    pub joints_in: usize,
    pub joints_out: usize,
    pub frames_in: usize,
    pub frames_out: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub groups: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classifier {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// A stack of grouped mapping blocks with a pooled linear classifier.
#[derive(Debug, Clone)]
pub struct Network {
    cfg: NetworkConfig,
    skelet: bool,
    store: ParamStore,
    blocks: Vec<GroupedMappingBlock>,
    /// `A + I` per stage (before normalisation).
    stage_adjacency: Vec<AdjacencyMatrix>,
    classifier: Classifier,
}

/// Builds a network.
///
/// With `skelet` the blocks listed in `cfg.downsample_blocks` fuse joints
/// through `partitions` (one per downsample) and every other block re-weights
/// joints. Without it, every block is a plain baseline block on the full joint
/// set; frames are still halved at the downsample positions.
pub fn build_network(
    cfg: &NetworkConfig,
    layout: &KeypointLayout,
    partitions: &[PartitionMap],
    skelet: bool,
    seed: u64,
) -> Result<Network> {
    cfg.validate()?;
    if layout.count() != cfg.joints[0] {
        return Err(Error::config(format!(
            "layout '{}' has {} joints, config expects {}",
            layout.id(),
            layout.count(),
            cfg.joints[0]
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();

    let base = add_self_links(&build_adjacency(layout)?)?;
    let mut stage_adjacency = vec![base];
    if skelet {
        if partitions.len() != cfg.downsample_blocks.len() {
            return Err(Error::config(format!(
                "{} downsample blocks but {} partitions",
                cfg.downsample_blocks.len(),
                partitions.len()
            )));
        }
        for (s, p) in partitions.iter().enumerate() {
            if p.source_count() != cfg.joints[s] || p.target_count() != cfg.joints[s + 1] {
                return Err(Error::config(format!(
                    "partition {s} maps {} -> {}, schedule needs {} -> {}",
                    p.source_count(),
                    p.target_count(),
                    cfg.joints[s],
                    cfg.joints[s + 1]
                )));
            }
            let next = transform_adjacency_dense(&stage_adjacency[s], &init_downsample_matrix(p))?;
            stage_adjacency.push(next);
        }
    }
    let normalized = stage_adjacency
        .iter()
        .map(|a| normalize_adjacency(a, cfg.normalization))
        .collect::<Result<Vec<_>>>()?;

    let mut blocks = Vec::with_capacity(cfg.block_count());
    let mut in_channels = cfg.in_channels;
    let mut joints = cfg.joints[0];
    for (i, &out_channels) in cfg.channels.iter().enumerate() {
        let index = i + 1;
        let down = cfg.is_downsample(index);
        let stage = cfg.stage_of(index);
        let bc = if skelet {
            BlockConfig {
                index,
                kind: if down {
                    BlockKind::Downsample
                } else {
                    BlockKind::Normal
                },
                in_channels,
                out_channels,
                groups: cfg.groups[stage],
                stride: if down { 2 } else { 1 },
                kernel_size: cfg.kernel_size,
                partition: down.then(|| partitions[stage - 1].clone()),
                order: cfg.activation_order,
            }
        } else {
            BlockConfig {
                index,
                kind: BlockKind::Baseline,
                in_channels,
                out_channels,
                groups: 1,
                stride: if down { 2 } else { 1 },
                kernel_size: cfg.kernel_size,
                partition: None,
                order: cfg.activation_order,
            }
        };
        let adjacency = &normalized[if skelet { stage } else { 0 }];
        let block = GroupedMappingBlock::new(bc, joints, adjacency, &mut store, &mut rng)?;
        joints = block.target_joints();
        in_channels = out_channels;
        blocks.push(block);
    }
    let classifier = Classifier {
        weight: store.add(
            "classifier.weight",
            fan_in_uniform(&mut rng, &[in_channels, cfg.num_classes], in_channels),
        ),
        bias: store.add("classifier.bias", Tensor::zeros(&[cfg.num_classes])),
    };
    Ok(Network {
        cfg: cfg.clone(),
        skelet,
        store,
        blocks,
        stage_adjacency,
        classifier,
    })
}

impl Network {
    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn is_skelet(&self) -> bool {
        self.skelet
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn blocks(&self) -> &[GroupedMappingBlock] {
        &self.blocks
    }

    pub fn stage_adjacency(&self) -> &[AdjacencyMatrix] {
        &self.stage_adjacency
    }

    pub fn classifier(&self) -> Classifier {
        self.classifier
    }

    pub fn input_joints(&self) -> usize {
        self.cfg.joints[0]
    }

    /// Per-block shapes for an input of `frames` frames.
    pub fn trace(&self, frames: usize) -> Vec<BlockShape> {
        let mut t = frames;
        self.blocks
            .iter()
            .map(|b| {
                let c = b.config();
                let (j_out, t_out) = b.output_dims(t);
                let s = BlockShape {
                    index: c.index,
                    kind: c.kind,
                    joints_in: b.source_joints(),
                    joints_out: j_out,
                    frames_in: t,
                    frames_out: t_out,
                    in_channels: c.in_channels,
                    out_channels: c.out_channels,
                    groups: c.groups,
                };
                t = t_out;
                s
            })
            .collect()
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let want = [self.input_joints(), self.cfg.frames, self.cfg.in_channels];
        if shape != want {
            return Err(Error::shape(format!(
                "network expects input {want:?}, got {shape:?}"
            )));
        }
        Ok(())
    }

    /// Logits for a single-person `J×T×C` input already on the tape.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        self.check_input(tape.value(x).shape())?;
        let mut h = x;
        for b in &self.blocks {
            h = b.forward(tape, store, h)?;
        }
        let pooled = tape.mean_pool(h);
        let c = tape.value(pooled).len();
        let row = tape.reshape(pooled, &[1, c])?;
        let w = tape.param(store, self.classifier.weight);
        let b = tape.param(store, self.classifier.bias);
        let logits = tape.matmul(row, w)?;
        let logits = tape.bias_add(logits, b)?;
        tape.reshape(logits, &[self.cfg.num_classes])
    }

    /// Cross-entropy loss of one labelled input.
    pub fn loss(&self, tape: &mut Tape, store: &ParamStore, x: Var, label: usize) -> Result<Var> {
        let logits = self.forward(tape, store, x)?;
        tape.softmax_cross_entropy(logits, label)
    }

    /// Logits for a `J×T×C` tensor using the network's own parameters.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let out = self.forward(&mut tape, &self.store, xv)?;
        Ok(tape.value(out).clone())
    }

    /// Logits for a single-person sequence.
    pub fn infer(&self, seq: &SkeletonSequence) -> Result<Tensor> {
        if seq.persons() != 1 {
            return Err(Error::shape(format!(
                "forward takes one person, sequence has {}; pool instances first",
                seq.persons()
            )));
        }
        self.logits(&seq.person(0))
    }

    /// Class probabilities for a `J×T×C` input.
    pub fn predict_proba(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(kernels::softmax(self.logits(x)?.data()))
    }

    pub fn predict(&self, x: &Tensor) -> Result<usize> {
        let logits = self.logits(x)?;
        Ok(argmax(logits.data()))
    }

    /// Finite-difference check of the loss on one labelled input with respect
    /// to every trainable parameter.
    pub fn gradcheck(&self, x: &Tensor, label: usize) -> Result<GradCheckReport> {
        let mut store = self.store.clone();
        check_gradients(&mut store, |tape, st| {
            let xv = tape.constant(x.clone());
            self.loss(tape, st, xv, label)
        })
    }

    /// Sets every mapping matrix to `requires_grad = false` (or back).
    pub fn freeze_mappings(&mut self, frozen: bool) {
        let ids: Vec<ParamId> = self
            .blocks
            .iter()
            .flat_map(|b| b.params().mappings.iter().map(|m| m.param()))
            .collect();
        for id in ids {
            self.store.get_mut(id).requires_grad = !frozen;
        }
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}
