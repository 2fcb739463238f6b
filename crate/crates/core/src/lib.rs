//! Gated differential linear attention (GDLA) and the attention mechanisms
//! it is built from, on a small deterministic `f64` tensor substrate.

pub mod attention;
pub mod bench;
pub mod conv;
pub mod diagnostics;
mod error;
pub mod io;
pub mod mixer;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;

/// Guide chapters, compiled as doctests.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/tensors.md")]
    pub struct Tensors;
    #[doc = include_str!("../../../book/src/attention.md")]
    pub struct Attention;
    #[doc = include_str!("../../../book/src/differential.md")]
    pub struct Differential;
    #[doc = include_str!("../../../book/src/gdla.md")]
    pub struct Gdla;
    #[doc = include_str!("../../../book/src/block.md")]
    pub struct Block;
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    pub struct Diagnostics;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
