//! Sequence and parameter files, keypoint import and run configuration.
//!
//! Both binary formats are little-endian. A sequence file is
//!
//! ```text
//! magic     8 bytes  "SKLTSEQ\0"
//! version   u32      1
//! I J T C   4 × u32
//! layout    u16 length + UTF-8 bytes
//! label     u8 flag (0 or 1), then u64 when the flag is 1
//! payload   I·J·T·C × f64, row-major (I, J, T, C)
//! ```
//!
//! A parameter file is
//!
//! ```text
//! magic     8 bytes  "SKLTPRM\0"
//! version   u32      1
//! hash      u64      FNV-1a of the network configuration
//! count     u32
//! tensors   count × { u16 length + name, u8 rank, rank × u32 extent, f64 data }
//! ```

mod bytes;
mod config;
mod keypoints;
mod params;
mod sequence_file;

pub use bytes::fnv1a;
pub use config::{Paths, RunConfig};
pub use keypoints::{import_keypoint_json, parse_keypoint_jsonl};
pub use params::{network_hash, read_params, write_params, ParamFile, PARAMS_MAGIC, PARAMS_VERSION};
pub use sequence_file::{
    decode_sequence, encode_sequence, read_sequence, write_sequence, SEQUENCE_MAGIC,
    SEQUENCE_VERSION,
};
