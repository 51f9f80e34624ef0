pub mod codec;
pub mod config;
pub mod dataset;
pub mod error;
pub mod scalar;
pub mod featurizer;
pub mod neural;
pub mod pipeline;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use config::RunConfig;

/// Double-precision model; what the pipeline trains and checkpoints.
pub type Model = neural::ModelParams<f64>;
/// Single-precision model, e.g. for cheaper inference after `cast`.
pub type ModelF32 = neural::ModelParams<f32>;
pub type Tensor = neural::Tensor<f64>;
pub type TensorF32 = neural::Tensor<f32>;
pub type Adam = neural::AdamState<f64>;
pub type Gradients = neural::Gradients<f64>;
