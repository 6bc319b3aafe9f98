//! Dense tensor math with recorded-graph reverse-mode differentiation.
//!
//! The op set is exactly what a CNN-BiLSTM tagger needs: matrix multiply,
//! elementwise arithmetic, concatenation, row gather, 1-D convolution over
//! character sequences, max-over-time pooling, the usual activations,
//! softmax/log-softmax, seeded dropout, `stop_gradient`, and masked
//! reductions. Every forward op records a backward rule on a [`Tape`];
//! [`Tape::backward`] writes gradients into [`ParamStore`] accumulators.
//!
//! Precision is generic over [`Real`] (`f32` for training, `f64` for
//! gradient checking). With the `parallel` feature enabled, kernels split
//! work across rayon only over disjoint output slices, each reduced in a
//! fixed sequential order, so results are bitwise identical whether or not
//! threads are used. [`set_parallel`] toggles the parallel path at runtime.

pub mod error;
pub mod gradcheck;
mod kernels;
pub mod optim;
pub mod par;
pub mod params;
pub mod payload;
pub mod real;
pub mod tape;
pub mod tensor;

pub use error::NdiffError;
pub use gradcheck::{grad_check, grad_check_grouped, GradCheckEntry, GradCheckReport};
pub use optim::{lr_schedule, SgdConfig, SgdMomentum};
pub use par::{parallel_enabled, set_parallel};
pub use params::{ParamId, ParamStore, Parameter};
pub use payload::{load_payload, save_payload, PayloadEntry};
pub use real::Real;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
