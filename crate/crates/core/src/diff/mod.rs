//! Dense `f64` tensors with a recorded tape and hand-written backward rules.

pub mod counter;
pub mod gradcheck;
pub mod kernels;
mod param;
mod tape;
mod tensor;

pub use gradcheck::{check_gradients, GradCheckReport};
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{Gradients, OpRecord, Tape, Var};
pub use tensor::Tensor;
