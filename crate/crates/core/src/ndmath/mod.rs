//! Dense `f64` tensors, a reverse-mode tape, Adam, and a finite-difference
//! gradient oracle. Sized for small MLPs.

mod adam;
mod finite_diff;
mod gaussian;
pub mod mlp;
mod tape;
mod tensor;

pub use adam::{adam_step, clip_grad_norm, AdamConfig, AdamState};
pub use finite_diff::finite_diff_grad;
pub use gaussian::{gaussian_entropy, gaussian_logprob, HALF_LN_2PI, HALF_LN_2PI_E};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
