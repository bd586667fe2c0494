use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::NetworkConfig;
use super::train::TrainConfig;
use crate::diff::Tensor;
use crate::error::Result;
use crate::skeleton::{KeypointLayout, SkeletonSequence};
use crate::transform::PartitionMap;

/// Open chain over `joints` points.
pub fn chain_layout(id: &str, joints: usize) -> KeypointLayout {
    let edges = (1..joints).map(|j| (j - 1, j)).collect();
    KeypointLayout::custom(id, joints, edges).expect("chain layout is valid")
}

/// Fuses neighbouring joints pairwise: `{0,1}, {2,3}, …`.
pub fn pair_partition(joints: usize) -> PartitionMap {
    let parts = (0..joints.div_ceil(2))
        .map(|k| (2 * k..(2 * k + 2).min(joints)).collect())
        .collect();
    PartitionMap::new(joints, parts).expect("pair partition is valid")
}

/// Everything needed to build the three-block toy network.
pub fn toy_setup() -> (NetworkConfig, KeypointLayout, Vec<PartitionMap>) {
    (
        NetworkConfig::toy(),
        chain_layout("toy6", 6),
        vec![pair_partition(6)],
    )
}

/// Small SkeleT configuration over the synthetic 12-joint chain.
pub fn synthetic_config() -> NetworkConfig {
    NetworkConfig {
        joints: vec![SYNTH_JOINTS, SYNTH_JOINTS / 2],
        frames: SYNTH_FRAMES,
        ..NetworkConfig::toy()
    }
}

pub const SYNTH_JOINTS: usize = 12;
pub const SYNTH_FRAMES: usize = 16;
pub const SYNTH_CLASSES: usize = 4;

/// Layout, network config and partitions matching [`synthetic_dataset`].
pub fn synthetic_setup() -> (NetworkConfig, KeypointLayout, Vec<PartitionMap>) {
    (
        synthetic_config(),
        chain_layout("synth12", SYNTH_JOINTS),
        vec![pair_partition(SYNTH_JOINTS)],
    )
}

/// Optimiser settings that fit [`synthetic_dataset`] with the network from
/// [`synthetic_setup`].
pub fn synthetic_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.005,
        batch_size: 8,
        epochs: 200,
        seed,
        ..TrainConfig::default()
    }
}

/// Seeded tensor with entries uniform in `[-1, 1)`.
pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("non-empty shape")
}

/// Seeded four-class dataset. In class `c` the three joints `3c..3c+3`
/// oscillate vertically with `c + 1` cycles per sequence while the rest of
/// the chain only jitters.
pub fn synthetic_dataset(count: usize, seed: u64) -> Result<Vec<SkeletonSequence>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (j_n, t_n) = (SYNTH_JOINTS, SYNTH_FRAMES);
    let per_class = j_n / SYNTH_CLASSES;
    (0..count)
        .map(|s| {
            let label = s % SYNTH_CLASSES;
            let phase = rng.gen_range(0.0..2.0 * PI);
            let amp = rng.gen_range(0.8..1.2);
            let cycles = (label + 1) as f64;
            let mut data = Vec::with_capacity(j_n * t_n * 3);
            for j in 0..j_n {
                let active = j / per_class == label;
                for t in 0..t_n {
                    let wave = if active {
                        amp * (2.0 * PI * cycles * t as f64 / t_n as f64 + phase).sin()
                    } else {
                        0.0
                    };
                    data.push(0.1 * (j as f64 - 5.5) + rng.gen_range(-0.02..0.02));
                    data.push(wave + rng.gen_range(-0.02..0.02));
                    data.push(1.0);
                }
            }
            SkeletonSequence::single("synth12", Tensor::new(&[j_n, t_n, 3], data)?, Some(label))
        })
        .collect()
}
