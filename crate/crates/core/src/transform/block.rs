//! The grouped mapping block: per-group joint mapping and graph convolution,
//! a shared channel map, a temporal convolution and a residual path.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mapping::{MappingKind, MappingMatrix};
use super::partition::PartitionMap;
use crate::diff::{kernels, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::skeleton::AdjacencyMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Keeps joints and frames; diagonal re-weighting per group.
    Normal,
    /// Fuses joints through a partition-initialised matrix and halves frames.
    Downsample,
    /// Plain graph/temporal block without any mapping matrix.
    Baseline,
}

/// Where the shared channel map sits relative to the activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationOrder {
    /// `σ(concat · W)`
    #[default]
    WeightThenActivation,
    /// `σ(concat) · W`
    ActivationThenWeight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockConfig {
    /// 1-based position in the network.
    pub index: usize,
    pub kind: BlockKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub groups: usize,
    pub stride: usize,
    pub kernel_size: usize,
    pub partition: Option<PartitionMap>,
    pub order: ActivationOrder,
}

impl BlockConfig {
    pub fn validate(&self) -> Result<()> {
        let b = self.index;
        if self.groups == 0
            || self.in_channels % self.groups != 0
            || self.out_channels % self.groups != 0
        {
            return Err(Error::config(format!(
                "block {b}: {} groups must divide {} input and {} output channels",
                self.groups, self.in_channels, self.out_channels
            )));
        }
        kernels::check_temporal_kernel(self.kernel_size, self.stride)?;
        match self.kind {
            BlockKind::Downsample => {
                if self.partition.is_none() || self.stride != 2 {
                    return Err(Error::config(format!(
                        "block {b}: downsample blocks need a partition and stride 2"
                    )));
                }
            }
            BlockKind::Normal => {
                if self.partition.is_some() || self.stride != 1 {
                    return Err(Error::config(format!(
                        "block {b}: normal blocks take no partition and stride 1"
                    )));
                }
            }
            BlockKind::Baseline => {
                if self.partition.is_some() || self.groups != 1 {
                    return Err(Error::config(format!(
                        "block {b}: baseline blocks take one group and no partition"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn in_group_width(&self) -> usize {
        self.in_channels / self.groups
    }

    pub fn out_group_width(&self) -> usize {
        self.out_channels / self.groups
    }
}

/// Uniform in `±√(3/fan_in)`, giving unit variance per input unit.
pub(crate) fn fan_in_uniform(rng: &mut impl Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = (3.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("shape")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelAffine {
    pub scale: ParamId,
    pub bias: ParamId,
}

impl ChannelAffine {
    fn new(store: &mut ParamStore, prefix: &str, channels: usize) -> Self {
        ChannelAffine {
            scale: store.add(format!("{prefix}.scale"), Tensor::full(&[channels], 1.0)),
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[channels])),
        }
    }

    fn apply(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let s = tape.param(store, self.scale);
        let b = tape.param(store, self.bias);
        tape.channel_affine(x, s, b)
    }
}

/// Pointwise channel projection on the residual path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    /// One mapping per group; empty for baseline blocks.
    pub mappings: Vec<MappingMatrix>,
    /// One `C_in/K × C_out/K` graph weight per group.
    pub graph_weights: Vec<ParamId>,
    /// Shared `C_out × C_out` channel map.
    pub shared_weight: ParamId,
    pub graph_affine: ChannelAffine,
    /// `k × C_out × C_out` temporal kernel.
    pub temporal_kernel: ParamId,
    pub temporal_affine: ChannelAffine,
    pub residual: Option<Projection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedMappingBlock {
    cfg: BlockConfig,
    source_joints: usize,
    target_joints: usize,
    /// Normalised adjacency over the block's output joints.
    adjacency: Tensor,
    params: BlockParams,
}

impl GroupedMappingBlock {
    /// Creates a block and registers its parameters in `store`.
    ///
    /// `adjacency` is the normalised graph the group convolutions run on; for
    /// downsample blocks it must already be over the partition's target joints.
    pub fn new(
        cfg: BlockConfig,
        source_joints: usize,
        adjacency: &AdjacencyMatrix,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let prefix = format!("block{}", cfg.index);
        let target_joints = match &cfg.partition {
            Some(p) => {
                if p.source_count() != source_joints {
                    return Err(Error::shape(format!(
                        "block {}: partition maps {} joints, input has {source_joints}",
                        cfg.index,
                        p.source_count()
                    )));
                }
                p.target_count()
            }
            None => source_joints,
        };
        if adjacency.joints() != target_joints {
            return Err(Error::shape(format!(
                "block {}: adjacency over {} joints, block outputs {target_joints}",
                cfg.index,
                adjacency.joints()
            )));
        }
        let k = cfg.groups;
        let mappings = (0..k)
            .filter_map(|g| {
                let name = format!("{prefix}.mapping{g}");
                match cfg.kind {
                    BlockKind::Baseline => None,
                    BlockKind::Normal => {
                        Some(MappingMatrix::reweight(store, name, source_joints))
                    }
                    BlockKind::Downsample => Some(MappingMatrix::downsample(
                        store,
                        name,
                        cfg.partition.as_ref().expect("validated"),
                    )),
                }
            })
            .collect();
        let (gi, go) = (cfg.in_group_width(), cfg.out_group_width());
        let graph_weights = (0..k)
            .map(|g| store.add(format!("{prefix}.graph{g}"), fan_in_uniform(rng, &[gi, go], gi)))
            .collect();
        let c = cfg.out_channels;
        let shared_weight = store.add(format!("{prefix}.shared"), fan_in_uniform(rng, &[c, c], c));
        let graph_affine = ChannelAffine::new(store, &format!("{prefix}.graph_affine"), c);
        let ks = cfg.kernel_size;
        let temporal_kernel = store.add(
            format!("{prefix}.temporal"),
            fan_in_uniform(rng, &[ks, c, c], ks * c),
        );
        let temporal_affine = ChannelAffine::new(store, &format!("{prefix}.temporal_affine"), c);
        let residual = (cfg.in_channels != cfg.out_channels).then(|| Projection {
            weight: store.add(
                format!("{prefix}.residual.weight"),
                fan_in_uniform(rng, &[cfg.in_channels, c], cfg.in_channels),
            ),
            bias: store.add(format!("{prefix}.residual.bias"), Tensor::zeros(&[c])),
        });
        Ok(GroupedMappingBlock {
            cfg,
            source_joints,
            target_joints,
            adjacency: adjacency.to_tensor(),
            params: BlockParams {
                mappings,
                graph_weights,
                shared_weight,
                graph_affine,
                temporal_kernel,
                temporal_affine,
                residual,
            },
        })
    }

    pub fn config(&self) -> &BlockConfig {
        &self.cfg
    }

    pub fn params(&self) -> &BlockParams {
        &self.params
    }

    pub fn adjacency(&self) -> &Tensor {
        &self.adjacency
    }

    pub fn source_joints(&self) -> usize {
        self.source_joints
    }

    pub fn target_joints(&self) -> usize {
        self.target_joints
    }

    /// Output `(joints, frames)` for an input of `frames` frames.
    pub fn output_dims(&self, frames: usize) -> (usize, usize) {
        (self.target_joints, kernels::strided_len(frames, self.cfg.stride))
    }

    /// Every parameter id owned by this block.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let p = &self.params;
        let mut ids: Vec<ParamId> = p.mappings.iter().map(MappingMatrix::param).collect();
        ids.extend(&p.graph_weights);
        ids.extend([
            p.shared_weight,
            p.graph_affine.scale,
            p.graph_affine.bias,
            p.temporal_kernel,
            p.temporal_affine.scale,
            p.temporal_affine.bias,
        ]);
        if let Some(r) = p.residual {
            ids.extend([r.weight, r.bias]);
        }
        ids
    }

    /// Forward pass on `x[J_i × T × C_in]`, producing `[J' × T' × C_out]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let shape = tape.value(x).shape().to_vec();
        let cfg = &self.cfg;
        if shape.len() != 3 || shape[0] != self.source_joints || shape[2] != cfg.in_channels {
            return Err(Error::shape(format!(
                "block {} expects ({}, T, {}) input, got {:?}",
                cfg.index, self.source_joints, cfg.in_channels, shape
            )));
        }
        let frames = shape[1];
        let (jo, k) = (self.target_joints, cfg.groups);
        let gi = cfg.in_group_width();
        let adjacency = tape.constant(self.adjacency.clone());

        let mut mapped = Vec::with_capacity(k);
        let mut group_out = Vec::with_capacity(k);
        for g in 0..k {
            let xg = if k == 1 {
                x
            } else {
                tape.slice_last(x, g * gi, (g + 1) * gi)?
            };
            let mg = match self.params.mappings.get(g) {
                Some(m) => m.apply(tape, store, xg)?,
                None => xg,
            };
            mapped.push(mg);
            let flat = tape.reshape(mg, &[jo, frames * gi])?;
            let agg = tape.matmul(adjacency, flat)?;
            let rows = tape.reshape(agg, &[jo * frames, gi])?;
            let w = tape.param(store, self.params.graph_weights[g]);
            group_out.push(tape.matmul(rows, w)?);
        }
        let cat = tape.concat_last(&group_out)?;
        let shared = tape.param(store, self.params.shared_weight);
        let c = cfg.out_channels;
        let h = match cfg.order {
            ActivationOrder::WeightThenActivation => {
                let y = tape.matmul(cat, shared)?;
                let y = self.params.graph_affine.apply(tape, store, y)?;
                tape.relu(y)
            }
            ActivationOrder::ActivationThenWeight => {
                let y = self.params.graph_affine.apply(tape, store, cat)?;
                let y = tape.relu(y);
                tape.matmul(y, shared)?
            }
        };
        let h = tape.reshape(h, &[jo, frames, c])?;
        let kernel = tape.param(store, self.params.temporal_kernel);
        let t = tape.conv1d_temporal(h, kernel, cfg.stride)?;
        let t = self.params.temporal_affine.apply(tape, store, t)?;

        let res = match cfg.kind {
            BlockKind::Downsample => tape.concat_last(&mapped)?,
            BlockKind::Normal | BlockKind::Baseline => x,
        };
        let res = tape.subsample_frames(res, cfg.stride)?;
        let res = match self.params.residual {
            Some(p) => {
                let t_out = kernels::strided_len(frames, cfg.stride);
                let rows = tape.reshape(res, &[jo * t_out, cfg.in_channels])?;
                let w = tape.param(store, p.weight);
                let b = tape.param(store, p.bias);
                let y = tape.matmul(rows, w)?;
                let y = tape.bias_add(y, b)?;
                tape.reshape(y, &[jo, t_out, c])?
            }
            None => res,
        };
        tape.add(t, res)
    }

    /// Mapping kinds present in the block, for reporting.
    pub fn mapping_kind(&self) -> Option<MappingKind> {
        self.params.mappings.first().map(MappingMatrix::kind)
    }
}
