//! Minimal differentiable kernel: dense matrices, hand-differentiated layers,
//! the feature denoiser MLP, a graph-transformer attention layer, losses and
//! Adam.

mod adam;
mod attention;
pub mod gradcheck;
mod layers;
mod loss;
mod matrix;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use attention::{AttentionCache, AttentionLayer};
pub use layers::{
    apply_mask, dropout_mask, relu, relu_backward, silu, silu_backward, softmax_rows,
    timestep_embedding, LayerNorm, LayerNormCache, Linear, Parameters,
};
pub use loss::{cross_entropy, cross_entropy_indices, mse};
pub use matrix::Matrix;
pub use mlp::{InputStem, MlpBlock, MlpCache, MlpConfig, MlpDenoiser};
