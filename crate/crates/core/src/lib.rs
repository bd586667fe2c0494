//! Expressive-keypoint skeleton action recognition with learnable joint
//! downsampling.
//!
//! The crate is layered bottom-up:
//!
//! * [`diff`]: dense tensors, an operation tape and finite-difference checks.
//! * [`skeleton`]: keypoint layouts, adjacency matrices, skeleton sequences.
//! * [`selection`]: keypoint statistics and the 133 → 65 point selection.
//! * [`transform`]: partitions, mapping matrices and the grouped mapping block.
//! * [`network`]: the block stack, training loop and temporal sampling.
//! * [`pooling`]: multi-person instance pooling.
//! * [`profiler`]: closed-form MAC and parameter accounting.
//! * [`io`]: sequence and parameter files, keypoint import, run configs.

pub mod diff;
pub mod error;
pub mod io;
pub mod network;
pub mod pooling;
pub mod profiler;
pub mod selection;
pub mod skeleton;
pub mod transform;

pub use error::{Error, Result};
