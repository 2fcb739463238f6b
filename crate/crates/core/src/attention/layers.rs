//! Multi-head softmax and linear attention layers: per-head projections,
//! concatenation, output projection.

use super::config::HeadConfig;
use super::linear::{linear_attention, LinearMode};
use super::softmax::softmax_attention;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{concat_channels_all, matmul, Tensor};

/// Query/key/value projections of one head, each `d_model × d_head`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadProjections {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
}

impl HeadProjections {
    pub fn init(cfg: &HeadConfig, rng: &mut Rng) -> Self {
        Self {
            w_q: rng.fan_in_matrix(cfg.d_model, cfg.d_head),
            w_k: rng.fan_in_matrix(cfg.d_model, cfg.d_head),
            w_v: rng.fan_in_matrix(cfg.d_model, cfg.d_head),
        }
    }

    pub fn zeros(cfg: &HeadConfig) -> Self {
        let z = Tensor::zeros(&[cfg.d_model, cfg.d_head]);
        Self {
            w_q: z.clone(),
            w_k: z.clone(),
            w_v: z,
        }
    }

    pub fn project(&self, x: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        Ok((
            matmul(x, &self.w_q)?,
            matmul(x, &self.w_k)?,
            matmul(x, &self.w_v)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Softmax,
    Linear,
}

/// Standard multi-head attention with a swappable single-head kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayer {
    pub heads: Vec<HeadProjections>,
    /// `d_k × d_model`
    pub w_o: Tensor,
}

impl AttentionLayer {
    /// Draw order: per head (W_Q, W_K, W_V), then W^O.
    pub fn init(cfg: &HeadConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let heads = (0..cfg.heads)
            .map(|_| HeadProjections::init(cfg, rng))
            .collect();
        let w_o = rng.fan_in_matrix(cfg.d_k(), cfg.d_model);
        Ok(Self { heads, w_o })
    }

    pub fn zeros(cfg: &HeadConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            heads: vec![HeadProjections::zeros(cfg); cfg.heads],
            w_o: Tensor::zeros(&[cfg.d_k(), cfg.d_model]),
        })
    }

    pub fn forward(&self, x: &Tensor, kernel: Kernel) -> Result<Tensor> {
        if self.heads.is_empty() {
            return Err(Error::Config(
                "attention layer needs at least one head".into(),
            ));
        }
        let outs = self
            .heads
            .iter()
            .map(|h| {
                let (q, k, v) = h.project(x)?;
                match kernel {
                    Kernel::Softmax => softmax_attention(&q, &k, &v),
                    Kernel::Linear => linear_attention(&q, &k, &v, LinearMode::Associative),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        matmul(&concat_channels_all(&outs)?, &self.w_o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_shapes() {
        let cfg = HeadConfig::new(8, 2, 4).unwrap();
        let layer = AttentionLayer::init(&cfg, &mut Rng::new(0)).unwrap();
        let x = Rng::new(1).gaussian_matrix(9, 8);
        for kernel in [Kernel::Softmax, Kernel::Linear] {
            assert_eq!(layer.forward(&x, kernel).unwrap().shape(), &[9, 8]);
        }
    }

    #[test]
    fn zero_layer_outputs_zero() {
        let cfg = HeadConfig::new(4, 2, 2).unwrap();
        let layer = AttentionLayer::zeros(&cfg).unwrap();
        let x = Rng::new(1).gaussian_matrix(5, 4);
        assert_eq!(layer.forward(&x, Kernel::Linear).unwrap().max_abs(), 0.0);
    }
}
