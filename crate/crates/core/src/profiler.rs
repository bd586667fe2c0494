//! Closed-form multiply-accumulate and parameter accounting.
//!
//! Counts follow the kernels one to one, so a forward pass under
//! [`crate::diff::counter::count_macs`] records exactly the reported total.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{BlockShape, Network};
use crate::pooling::IPConfig;
use crate::transform::{BlockKind, GroupedMappingBlock};

/// Cost of one block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockCost {
    pub index: usize,
    pub kind: &'static str,
    pub joints_in: usize,
    pub joints_out: usize,
    pub frames_in: usize,
    pub frames_out: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub groups: usize,
    pub mapping_macs: u64,
    pub graph_macs: u64,
    pub pointwise_macs: u64,
    pub temporal_macs: u64,
    pub residual_macs: u64,
    pub macs: u64,
    pub params: u64,
    /// Activation, affine, bias and residual-add element operations. Not part
    /// of `macs`.
    pub elementwise: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub blocks: Vec<BlockCost>,
    pub classifier_macs: u64,
    pub classifier_params: u64,
    pub total_macs: u64,
    pub total_params: u64,
    pub flops_per_mac: u64,
}

impl CostReport {
    /// Total in the report's FLOP unit.
    pub fn flops(&self) -> u64 {
        self.total_macs * self.flops_per_mac
    }

    pub fn block_macs(&self) -> u64 {
        self.blocks.iter().map(|b| b.macs).sum()
    }

    /// Switches between 1 and 2 FLOPs per MAC.
    pub fn with_flops_per_mac(mut self, n: u64) -> Self {
        self.flops_per_mac = n;
        self
    }

    /// Aligned text table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>5} {:>10} {:>9} {:>9} {:>7} {:>7} {:>6} {:>14} {:>10}\n",
            "block", "kind", "J", "T", "C_in", "C_out", "K", "FLOPs", "params"
        );
        for b in &self.blocks {
            out.push_str(&format!(
                "{:>5} {:>10} {:>9} {:>9} {:>7} {:>7} {:>6} {:>14} {:>10}\n",
                b.index,
                b.kind,
                format!("{}->{}", b.joints_in, b.joints_out),
                format!("{}->{}", b.frames_in, b.frames_out),
                b.in_channels,
                b.out_channels,
                b.groups,
                b.macs * self.flops_per_mac,
                b.params
            ));
        }
        out.push_str(&format!(
            "{:>5} {:>10} {:>59} {:>10}\n",
            "-",
            "classifier",
            self.classifier_macs * self.flops_per_mac,
            self.classifier_params
        ));
        out.push_str(&format!(
            "{:>5} {:>10} {:>59} {:>10}\n",
            "",
            "total",
            self.flops(),
            self.total_params
        ));
        out
    }

    /// One JSON object per block, then one for the totals.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            out.push_str(&serde_json::to_string(b).expect("serialisable"));
            out.push('\n');
        }
        let total = serde_json::json!({
            "record": "total",
            "classifier_macs": self.classifier_macs,
            "classifier_params": self.classifier_params,
            "total_macs": self.total_macs,
            "total_params": self.total_params,
            "flops": self.flops(),
            "flops_per_mac": self.flops_per_mac,
        });
        out.push_str(&total.to_string());
        out.push('\n');
        out
    }
}

fn kind_name(kind: BlockKind) -> &'static str {
    match kind {
        BlockKind::Normal => "normal",
        BlockKind::Downsample => "downsample",
        BlockKind::Baseline => "baseline",
    }
}

/// `J·T·C_in·C_out`.
pub fn pointwise_macs(joints: usize, frames: usize, c_in: usize, c_out: usize) -> u64 {
    (joints * frames * c_in * c_out) as u64
}

/// Cost of one block for an input of `shape.frames_in` frames.
pub fn block_cost(block: &GroupedMappingBlock, shape: &BlockShape) -> BlockCost {
    let cfg = block.config();
    let (ji, jo) = (shape.joints_in, shape.joints_out);
    let (t, t_out) = (shape.frames_in, shape.frames_out);
    let (k, c_in, c) = (cfg.groups, cfg.in_channels, cfg.out_channels);
    let (gi, go) = (cfg.in_group_width(), cfg.out_group_width());
    let ks = cfg.kernel_size;
    let kk = k as u64;

    let (mapping_macs, mapping_params) = match cfg.kind {
        BlockKind::Downsample => (kk * (ji * jo * t * gi) as u64, kk * (ji * jo) as u64),
        BlockKind::Normal => (kk * (ji * t * gi) as u64, kk * ji as u64),
        BlockKind::Baseline => (0, 0),
    };
    let graph_macs = kk * ((jo * jo * t * gi) as u64 + pointwise_macs(jo, t, gi, go));
    let pointwise = pointwise_macs(jo, t, c, c);
    let temporal_macs = (jo * t_out * ks * c * c) as u64;
    let residual_macs = if c_in != c {
        pointwise_macs(jo, t_out, c_in, c)
    } else {
        0
    };
    let residual_params = if c_in != c { (c_in * c + c) as u64 } else { 0 };
    let params = mapping_params
        + kk * (gi * go) as u64
        + (c * c) as u64
        + 2 * c as u64
        + (ks * c * c) as u64
        + 2 * c as u64
        + residual_params;
    let before = (jo * t * c) as u64;
    let after = (jo * t_out * c) as u64;
    let elementwise = 2 * before + 2 * after + if c_in != c { after } else { 0 };
    BlockCost {
        index: cfg.index,
        kind: kind_name(cfg.kind),
        joints_in: ji,
        joints_out: jo,
        frames_in: t,
        frames_out: t_out,
        in_channels: c_in,
        out_channels: c,
        groups: k,
        mapping_macs,
        graph_macs,
        pointwise_macs: pointwise,
        temporal_macs,
        residual_macs,
        macs: mapping_macs + graph_macs + pointwise + temporal_macs + residual_macs,
        params,
        elementwise,
    }
}

/// Per-block and total MACs and parameters for an input of `frames` frames.
pub fn count_flops(net: &Network, frames: usize) -> Result<CostReport> {
    let trace = net.trace(frames);
    let mut joints = net.input_joints();
    let mut channels = net.config().in_channels;
    for s in &trace {
        if s.joints_in != joints || s.in_channels != channels {
            return Err(Error::shape(format!(
                "block {} takes ({}, C={}) but receives ({joints}, C={channels})",
                s.index, s.joints_in, s.in_channels
            )));
        }
        joints = s.joints_out;
        channels = s.out_channels;
    }
    let blocks: Vec<BlockCost> = net
        .blocks()
        .iter()
        .zip(&trace)
        .map(|(b, s)| block_cost(b, s))
        .collect();
    let classes = net.config().num_classes;
    let classifier_macs = (channels * classes) as u64;
    let classifier_params = (channels * classes + classes) as u64;
    Ok(CostReport {
        total_macs: blocks.iter().map(|b| b.macs).sum::<u64>() + classifier_macs,
        total_params: blocks.iter().map(|b| b.params).sum::<u64>() + classifier_params,
        blocks,
        classifier_macs,
        classifier_params,
        flops_per_mac: 1,
    })
}

/// Parameter counts; the same report as [`count_flops`] at the configured
/// frame count.
pub fn count_params(net: &Network) -> Result<CostReport> {
    count_flops(net, net.config().frames)
}

/// Graph-convolution parameters (per-group graph weights and mappings) of a
/// network.
pub fn graph_params(net: &Network) -> u64 {
    net.blocks()
        .iter()
        .map(|b| {
            let p = b.params();
            let mapping: usize = p.mappings.iter().map(|m| m.scalar_count()).sum();
            let graph: usize = p
                .graph_weights
                .iter()
                .map(|&id| net.store().value(id).len())
                .sum();
            (mapping + graph) as u64
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IPCost {
    pub persons: usize,
    pub embed_macs: u64,
    pub concat_pool_macs: u64,
    /// Max over persons; comparisons only.
    pub group_pool_macs: u64,
    pub ip_params: u64,
    /// Network fed by the pooled `J×T×C` tensor; independent of `persons`.
    pub network_macs: u64,
    pub total_macs: u64,
}

/// Cost of instance pooling `persons` people followed by one network pass.
/// `net` must take `cfg.channels` input channels.
pub fn count_ip_flops(
    cfg: &IPConfig,
    persons: usize,
    joints: usize,
    frames: usize,
    in_channels: usize,
    net: &Network,
) -> Result<IPCost> {
    if net.config().in_channels != cfg.channels {
        return Err(Error::config(format!(
            "network takes {} input channels, instance pooling emits {}",
            net.config().in_channels,
            cfg.channels
        )));
    }
    let c = cfg.channels;
    let embed_macs = pointwise_macs(persons * joints, frames, in_channels, c);
    let concat_pool_macs = pointwise_macs(joints, frames, persons * c, c);
    let network_macs = count_flops(net, frames)?.total_macs;
    Ok(IPCost {
        persons,
        embed_macs,
        concat_pool_macs,
        group_pool_macs: 0,
        ip_params: (in_channels * c + c + joints * c + persons * c * c + c) as u64,
        network_macs,
        total_macs: embed_macs + concat_pool_macs + network_macs,
    })
}

/// Cost of running a network once per person without instance pooling.
pub fn count_without_ip(persons: usize, net: &Network, frames: usize) -> Result<u64> {
    Ok(persons as u64 * count_flops(net, frames)?.total_macs)
}
