//! Single-head attention kernels and their multi-head assemblies.

mod config;
mod differential;
mod gated;
mod layers;
mod linear;
mod softmax;

pub use config::{Components, FeatureMap, GateKind, HeadConfig};
pub use differential::{
    diff_attention, diff_attention_heads, diff_attention_multihead, diff_attention_weights,
    diff_attention_with_lambda, lambda_init, DiffAttnLayer, DiffAttnParams,
};
pub use gated::{
    diff_linear_attention, diff_linear_branches, gated_head, gated_head_from_projections,
    gated_head_with, gdla_multihead, gdla_multihead_with, GdlaHeadParams,
};
pub use layers::{AttentionLayer, HeadProjections, Kernel};
pub use linear::{linear_attention, linear_attention_weights, LinearMode, Z_FLOOR};
pub use softmax::{softmax_attention, softmax_weights};
