//! Keypoint layouts, skeleton graphs and skeleton sequences.

mod adjacency;
mod layout;
mod sequence;

pub use adjacency::{
    add_self_links, build_adjacency, normalize_adjacency, AdjacencyMatrix, Normalization,
};
pub use layout::{
    parse_edge_table, KeypointLayout, Region, EXPRESSIVE_COUNT, FACE_RANGE, WHOLEBODY_COUNT,
};
pub use sequence::SkeletonSequence;
