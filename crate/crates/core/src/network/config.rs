use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::Normalization;
use crate::transform::ActivationOrder;

/// Block-level architecture description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Output channels of each block.
    pub channels: Vec<usize>,
    /// 1-based indices of the downsampling blocks, ascending.
    pub downsample_blocks: Vec<usize>,
    /// Joint count per stage; one more entry than there are downsample blocks.
    pub joints: Vec<usize>,
    /// Group count per stage.
    pub groups: Vec<usize>,
    pub kernel_size: usize,
    pub in_channels: usize,
    pub num_classes: usize,
    pub frames: usize,
    pub normalization: Normalization,
    pub activation_order: ActivationOrder,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            channels: vec![64, 64, 64, 64, 128, 128, 128, 256, 256, 256],
            downsample_blocks: vec![5, 8],
            joints: vec![65, 27, 11],
            groups: vec![1, 2, 4],
            kernel_size: 5,
            in_channels: 3,
            num_classes: 120,
            frames: 100,
            normalization: Normalization::Row,
            activation_order: ActivationOrder::WeightThenActivation,
        }
    }
}

impl NetworkConfig {
    /// Three-block configuration over six joints, small enough for exhaustive
    /// gradient checks.
    pub fn toy() -> Self {
        NetworkConfig {
            channels: vec![8, 16, 16],
            downsample_blocks: vec![2],
            joints: vec![6, 3],
            groups: vec![1, 2],
            kernel_size: 3,
            in_channels: 3,
            num_classes: 4,
            frames: 8,
            ..Self::default()
        }
    }

    pub fn block_count(&self) -> usize {
        self.channels.len()
    }

    pub fn is_downsample(&self, block: usize) -> bool {
        self.downsample_blocks.contains(&block)
    }

    /// Stage a block's output belongs to (0-based).
    pub fn stage_of(&self, block: usize) -> usize {
        self.downsample_blocks.iter().filter(|&&d| d <= block).count()
    }

    /// Ratio between consecutive group counts (1 when there is one stage).
    pub fn group_expand(&self) -> usize {
        match self.groups.as_slice() {
            [a, b, ..] => b / a,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.channels.len();
        if self.channels.iter().any(|&c| c == 0) {
            return Err(Error::config("block channels must be positive"));
        }
        if self.in_channels == 0 || self.num_classes == 0 || self.frames == 0 {
            return Err(Error::config(
                "input channels, class count and frames must be positive",
            ));
        }
        if !self.downsample_blocks.windows(2).all(|w| w[0] < w[1])
            || self.downsample_blocks.iter().any(|&d| d == 0 || d > m)
        {
            return Err(Error::config(format!(
                "downsample blocks {:?} must be ascending and within 1..={m}",
                self.downsample_blocks
            )));
        }
        let stages = self.downsample_blocks.len() + 1;
        if self.joints.len() != stages || self.groups.len() != stages {
            return Err(Error::config(format!(
                "{} downsample blocks need {stages} joint and group entries, got {} and {}",
                self.downsample_blocks.len(),
                self.joints.len(),
                self.groups.len()
            )));
        }
        if self.joints.iter().any(|&j| j == 0) || self.groups.iter().any(|&k| k == 0) {
            return Err(Error::config("joint and group counts must be positive"));
        }
        let c = self.group_expand();
        if c == 0 || self.groups.windows(2).any(|w| w[1] != c * w[0]) {
            return Err(Error::config(format!(
                "group schedule {:?} must grow by a constant integer factor",
                self.groups
            )));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::config(format!(
                "temporal kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        Ok(())
    }
}
