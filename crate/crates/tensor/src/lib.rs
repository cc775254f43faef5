//! Dense tensors with reverse-mode differentiation for volumetric CNNs.
//!
//! The crate is organised around three pieces:
//!
//! - [`Tensor`]: an owned row-major array of rank 1..5 with an optional
//!   gradient buffer. Parameters live as tensors between training steps.
//! - [`Graph`]: a tape that records differentiable operations on [`Var`]
//!   handles. A graph is built per forward pass and dropped afterwards.
//! - [`Adam`]: bias-corrected Adam over a list of parameter tensors.
//!
//! Every operation is generic over [`Real`], implemented for `f32` (training)
//! and `f64` (finite-difference gradient checks). Reductions run in a fixed
//! order, so identical inputs produce bit-identical outputs.

mod adam;
mod error;
pub mod gradcheck;
mod graph;
mod kernels;
mod ops;
mod real;
#[cfg(feature = "reference")]
pub mod reference;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use error::{Result, TensorError};
pub use graph::{Gradients, Graph, OpKind, Var};
pub use ops::activation::Activation;
pub use ops::norm::BatchNormState;
pub use real::Real;
pub use tensor::{Shape, Tensor, MAX_RANK};
