//! Cost-sensitive low-rank plus sparse matrix completion for one-class
//! recommendation.
//!
//! The model splits the predicted preference matrix into a low-rank part
//! (nuclear-norm penalised, or bilinearly factored) and a sparse part
//! (l1 penalised), trained against an asymmetric loss on observed positives
//! and unobserved negatives.

pub mod bf;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod model_file;
pub mod nnm;
pub mod prox;
pub mod synth;

pub use error::{CsrrError, Result};
pub use losses::{CostModel, LossVariant};
pub use matrix::{DenseMatrix, ObservationMatrix};
