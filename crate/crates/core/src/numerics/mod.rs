//! Dense kernels for Forward-Forward training: matrices, ReLU, Kaiming
//! initialization, Adam, gradient clipping and a finite-difference oracle.
//!
//! Products are backed by `matrixmultiply`'s blocked GEMM, which is
//! single-threaded and deterministic for fixed inputs.

mod gradcheck;
mod matrix;
mod optim;
mod random;

pub use gradcheck::{finite_diff_grad, relative_error};
pub use matrix::{matmul, relu, Matrix, Real};
pub use optim::{adam_step, clip_grad_norm, global_norm, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use random::{kaiming_init, seeded_rng, stream_rng, RngStream, SeededRng};
