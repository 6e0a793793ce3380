//! Dense tensors, tape-based reverse-mode differentiation, attention and Adam.

pub mod attention;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use attention::{scaled_dot_attention, Attended};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use tape::{Tape, Var};
pub use tensor::{Param, ParamId, ParamKind, ParamStore, Tensor};
