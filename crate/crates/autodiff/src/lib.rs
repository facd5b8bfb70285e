//! Reverse-mode automatic differentiation over small dense tensors.
//!
//! Supplies the operators needed by FiLM-style audio question answering
//! networks: convolutions, pooling, batch normalization, FiLM, GRU, linear
//! layers and a softmax cross-entropy loss. Everything is generic over
//! [`Real`] so gradients can be checked in `f64`.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod ops;
pub mod optim;
pub mod params;
mod real;
pub mod suite;
pub mod tape;
mod tensor;

pub use checkpoint::Checkpoint;
pub use error::{AutodiffError, Result};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use ops::conv::conv_output_len;
pub use ops::pool::pool_output_len;
pub use ops::{softmax, BatchNormMode, BatchStats, Padding};
pub use optim::Adam;
pub use params::{ParamId, ParamStore, Parameter};
pub use real::{matmul, Real};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
