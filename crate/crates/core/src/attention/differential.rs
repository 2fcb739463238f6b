//! Softmax differential attention: two attention maps over complementary
//! query/key subspaces, combined as `(A₁ − λA₂)V`.

use super::config::HeadConfig;
use super::layers::HeadProjections;
use super::softmax::{check_qkv, softmax_weights};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{
    concat_channels_all, matmul, rmsnorm_rows, scale, split_halves, sub, Tensor, RMS_EPS,
};

/// `0.8 − 0.6·exp(−0.3·(l − 1))` for a 1-based layer index `l`.
///
/// Evaluated as `0.2 + 0.6·(1 − exp(·))` so that the first layer gets
/// exactly `0.2`; `0.8 − 0.6` rounds to `0.20000000000000007`.
pub fn lambda_init(layer_index: u32) -> Result<f64> {
    if layer_index < 1 {
        return Err(Error::Config("layer_index must be at least 1".into()));
    }
    Ok(0.2 - 0.6 * (-0.3 * f64::from(layer_index - 1)).exp_m1())
}

/// Reparameterized subtraction coefficient of a differential attention layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffAttnParams {
    pub lambda_q1: Vec<f64>,
    pub lambda_k1: Vec<f64>,
    pub lambda_q2: Vec<f64>,
    pub lambda_k2: Vec<f64>,
    pub lambda_init: f64,
}

impl DiffAttnParams {
    /// Vectors of length `half_width` drawn from `N(0, 0.1²)`, in the order
    /// q1, k1, q2, k2.
    pub fn init(layer_index: u32, half_width: usize, rng: &mut Rng) -> Result<Self> {
        let mut draw = || (0..half_width).map(|_| 0.1 * rng.gaussian()).collect();
        Ok(Self {
            lambda_q1: draw(),
            lambda_k1: draw(),
            lambda_q2: draw(),
            lambda_k2: draw(),
            lambda_init: lambda_init(layer_index)?,
        })
    }

    /// All four vectors zero, so the effective λ equals `lambda_init`.
    pub fn zeros(layer_index: u32, half_width: usize) -> Result<Self> {
        Ok(Self {
            lambda_q1: vec![0.0; half_width],
            lambda_k1: vec![0.0; half_width],
            lambda_q2: vec![0.0; half_width],
            lambda_k2: vec![0.0; half_width],
            lambda_init: lambda_init(layer_index)?,
        })
    }

    pub fn half_width(&self) -> usize {
        self.lambda_q1.len()
    }

    /// `exp(λ_q1·λ_k1) − exp(λ_q2·λ_k2) + λ_init`.
    pub fn lambda(&self) -> f64 {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0, |s, (x, y)| s + x * y);
        (dot(&self.lambda_q1, &self.lambda_k1)).exp()
            - (dot(&self.lambda_q2, &self.lambda_k2)).exp()
            + self.lambda_init
    }

    fn check(&self, half: usize) -> Result<()> {
        let lens = [
            self.lambda_q1.len(),
            self.lambda_k1.len(),
            self.lambda_q2.len(),
            self.lambda_k2.len(),
        ];
        if lens.iter().any(|&l| l != half) {
            return Err(Error::Config(format!(
                "λ vectors must have length {half}, got {lens:?}"
            )));
        }
        Ok(())
    }
}

/// Combined weight matrix `A₁ − λA₂`. Rows sum to `1 − λ`.
pub fn diff_attention_weights(q: &Tensor, k: &Tensor, lambda: f64) -> Result<Tensor> {
    let (q1, q2) = split_halves("diff_attention", q)?;
    let (k1, k2) = split_halves("diff_attention", k)?;
    // softmax_weights scales by 1/√(width), here width = d_h / 2.
    let a1 = softmax_weights(&q1, &k1)?;
    let a2 = softmax_weights(&q2, &k2)?;
    sub(&a1, &scale(&a2, lambda)?)
}

/// `(A₁ − λA₂)V` with an explicit scalar λ.
pub fn diff_attention_with_lambda(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    lambda: f64,
) -> Result<Tensor> {
    check_qkv("diff_attention", q, k, v)?;
    matmul(&diff_attention_weights(q, k, lambda)?, v)
}

pub fn diff_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    params: &DiffAttnParams,
) -> Result<Tensor> {
    if !q.cols().is_multiple_of(2) {
        return Err(Error::OddWidth {
            op: "diff_attention",
            width: q.cols(),
        });
    }
    params.check(q.cols() / 2)?;
    diff_attention_with_lambda(q, k, v, params.lambda())
}

/// Multi-head differential attention with a layer-shared λ, per-head
/// `(1 − λ_init)·RMSNorm` rescale and output projection `W^O: d_k×d_model`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffAttnLayer {
    pub heads: Vec<HeadProjections>,
    pub params: DiffAttnParams,
    pub w_o: Tensor,
}

impl DiffAttnLayer {
    /// Draw order: per head (W_Q, W_K, W_V), then λ vectors, then W^O.
    pub fn init(cfg: &HeadConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let heads = (0..cfg.heads)
            .map(|_| HeadProjections::init(cfg, rng))
            .collect();
        let params = DiffAttnParams::init(cfg.layer_index, cfg.d_head / 2, rng)?;
        let w_o = rng.fan_in_matrix(cfg.d_k(), cfg.d_model);
        Ok(Self { heads, params, w_o })
    }

    pub fn zeros(cfg: &HeadConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            heads: vec![HeadProjections::zeros(cfg); cfg.heads],
            params: DiffAttnParams::zeros(cfg.layer_index, cfg.d_head / 2)?,
            w_o: Tensor::zeros(&[cfg.d_k(), cfg.d_model]),
        })
    }
}

/// Head outputs after the `(1 − λ_init)·RMSNorm` rescale, concatenated but
/// not yet projected.
pub fn diff_attention_heads(x: &Tensor, layer: &DiffAttnLayer) -> Result<Tensor> {
    if layer.heads.is_empty() {
        return Err(Error::Config(
            "differential attention needs at least one head".into(),
        ));
    }
    let rescale = 1.0 - layer.params.lambda_init;
    let outs = layer
        .heads
        .iter()
        .map(|h| {
            let (q, k, v) = h.project(x)?;
            let head = diff_attention(&q, &k, &v, &layer.params)?;
            scale(&rmsnorm_rows(&head, RMS_EPS)?, rescale)
        })
        .collect::<Result<Vec<_>>>()?;
    concat_channels_all(&outs)
}

pub fn diff_attention_multihead(x: &Tensor, layer: &DiffAttnLayer) -> Result<Tensor> {
    let concat = diff_attention_heads(x, layer)?;
    if concat.cols() != layer.w_o.rows() {
        return Err(Error::ShapeMismatch {
            op: "diff_attention_multihead",
            left: concat.shape().to_vec(),
            right: layer.w_o.shape().to_vec(),
        });
    }
    matmul(&concat, &layer.w_o)
}
