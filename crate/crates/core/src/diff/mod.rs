//! Minimal dense/sparse numeric kernel with reverse-mode gradients.
//!
//! Everything is 64-bit and two-dimensional; column and row vectors are
//! `n×1` and `1×n` tensors. Gradients come from an explicit [`Tape`] of
//! primitive applications: build the forward pass on a fresh tape, call
//! [`Tape::backward`], and read gradients of the leaves you care about.

mod adam;
mod gradcheck;
mod params;
mod sparse;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::gradient_check;
pub use params::{ParamId, Params};
pub use sparse::SparseMatrix;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
