//! The GDLA mixer block and its feed-forward variants.

mod block;
mod ffn;
mod gdla;
mod local;

pub use block::{
    block_forward_traced, gdla_block_forward, Block, BlockConfig, BlockTrace, MixerKind,
    MixerWeights, TokenMixer,
};
pub use ffn::{ffn_forward, FfnConfig, FfnKind, FfnWeights};
pub use gdla::{fuse, GdlaMixer};
pub use local::{local_branch, local_branch_with, local_mix, LocalMixer, LocalMixers};
