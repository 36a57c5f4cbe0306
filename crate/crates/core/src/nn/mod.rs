//! Small reverse-mode differentiable kernel: just the operations the
//! resolver needs, over 64-bit floats.

pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod mlp;
pub mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckOptions, GradCheckReport};
pub use loss::{argmax_last, cross_entropy, softmax, LOG_FLOOR};
pub use lstm::{lstm_run, lstm_step, LstmParams};
pub use mlp::{mlp_forward, MlpParams};
pub use optim::{sgd_step, sgd_step_where};
pub use params::{Param, ParamId, ParamStore};
pub use tape::{Gradients, ParamGrad, Tape, Var};
pub use tensor::Tensor;
