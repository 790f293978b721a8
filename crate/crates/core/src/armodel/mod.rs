//! Autoregressive transformer over rasterized latent tokens: causal
//! self-attention (exact or FAVOR+), per-layer cross-attention over a
//! conditioning sequence, cross-entropy training.

mod attention;
mod favor_graph;
mod model;
mod train;

pub use attention::{
    causal_self_attention, cross_attention, favor_attention, favor_features, favor_projection,
};
pub use model::{
    ar_forward, next_token_distribution, token_likelihoods, ArConfig, ArTransformer, AttnBackend,
};
pub use train::{load_checkpoint, mean_nll, save_checkpoint, train_ar, ArLogRow, ArTrainConfig};
