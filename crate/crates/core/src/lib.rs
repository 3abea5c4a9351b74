//! Multi-view feature fusion by pairwise canonical correlation analysis,
//! squared-hinge linear SVM classification, evaluation metrics, a
//! pixel-replacement noise protocol with synthetic benchmarks, and conv-stack
//! architecture arithmetic.

// `!(x >= 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cca;
pub mod cli;
pub mod codec;
pub mod config;
pub mod error;
pub mod matrixio;
pub mod mcca;
pub mod metrics;
pub mod netspec;
pub mod noise;
pub mod pipeline;
pub mod seed;
pub mod svm;

pub use error::{Error, Result};
