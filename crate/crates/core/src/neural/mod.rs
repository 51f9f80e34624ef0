//! Encoder–decoder network with additive attention, trained by exact
//! reverse-mode gradients and Adam.

pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod gru;
pub mod model;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use attention::{attend, AttentionParams, Memory};
pub use checkpoint::{Checkpoint, TrainingInfo};
pub use gru::{gru_backward, gru_cell, gru_forward, GruCache, GruParams};
pub use model::{AttentionKeys, ForwardCache, Gradients, ModelConfig, ModelParams};
pub use tensor::{argmax, log_softmax_at, softmax, NamedTensor, Tensor};
