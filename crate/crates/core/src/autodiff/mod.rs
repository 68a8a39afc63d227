//! Dense `f64` tensors with a reverse-mode tape, Adam, and a
//! finite-difference gradient checker.
//!
//! The tape records the fixed operation set the recommender needs
//! (`matvec`, `vecmat`, `matmul`, `mul`, `add`, `concat`, `relu`, `sigmoid`,
//! `softmax`, `mean`, `bce_loss`). A tape is built per forward pass and
//! discarded after [`Tape::backward`].

mod adam;
mod gradcheck;
pub(crate) mod kernels;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckReport, Selection};
pub use tape::{Gradients, Tape, Var, BCE_CLAMP};
pub use tensor::Tensor;

pub(crate) use tape::{sigmoid_scalar, softmax};
