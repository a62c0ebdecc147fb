//! Dense tensors, reverse-mode differentiation, initialization, dropout,
//! AdamW and a finite-difference gradient checker.

mod gradcheck;
pub mod kernels;
mod optim;
mod rng;
mod scalar;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_detailed, GradCheck};
pub use optim::{adamw_step, AdamWConfig, OptimState};
pub use rng::{normal_tensor, xavier_init, SplitRng};
pub use scalar::{Precision, Scalar};
pub use tape::{dropout_apply, Gradients, Tape, Unary, Var, BCE_CLAMP};
pub use tensor::Tensor;
