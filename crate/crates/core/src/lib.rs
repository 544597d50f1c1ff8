//! Node classification on HTML tables with a bidirectional tree-structured
//! LSTM, plus extraction of the classified cells into one unified table.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the usual choices.

pub mod dom;
pub mod encoder;
pub mod error;
pub mod extract;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod seed;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision model, used for training and gradient checks.
pub type HtmlLstm64 = model::HtmlLstm<f64>;
/// Single-precision model for inference.
pub type HtmlLstm32 = model::HtmlLstm<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type ParamStore64 = tensor::ParamStore<f64>;
pub type TrainOutcome64 = train::TrainOutcome<f64>;
