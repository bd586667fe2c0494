//! Joint partitions, learnable mapping matrices and the grouped mapping block.

mod block;
mod mapping;
mod partition;

pub use block::{
    ActivationOrder, BlockConfig, BlockKind, BlockParams, ChannelAffine, GroupedMappingBlock,
    Projection,
};
pub(crate) use block::fan_in_uniform;
pub use mapping::{
    init_downsample_matrix, init_reweight_matrix, transform_adjacency, transform_adjacency_dense,
    MappingKind, MappingMatrix,
};
pub use partition::PartitionMap;
