//! Dense reverse-mode differentiation, sparse propagation and optimization.

mod matrix;
pub mod nn;
mod optim;
mod sparse;
mod tape;

pub use matrix::{gemm, Matrix};
pub use optim::Adam;
pub use sparse::CsrMatrix;
pub use tape::{row_sq_errors, sigmoid, Activation, Gradients, Tape, Var, PROB_CLAMP};

#[cfg(test)]
mod tests;
