//! Feed-forward variants for the block: two-layer MLP, SwiGLU and Mix-FFN.
//!
//! All three expand to `d_hidden = round(α · d_model)` channels.
//!
//! - `mlp`: `SiLU(X W₁) W₂`
//! - `swiglu`: `(SiLU(X W₁) ⊙ X W₂) W₃`
//! - `mixffn`: `[X̂; G] = DWC(SiLU(X W_in))` with `W_in: d_model × 2·d_hidden`,
//!   output `(X̂ ⊙ SiLU(G)) W_out`. `X̂` is the first `d_hidden` channels.

use std::fmt;
use std::str::FromStr;

use crate::conv::{dwconv2d, GridShape};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{activation, hadamard, matmul, split_halves, Activation, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FfnKind {
    Mlp,
    SwiGlu,
    #[default]
    MixFfn,
}

impl FfnKind {
    pub const ALL: [FfnKind; 3] = [FfnKind::Mlp, FfnKind::SwiGlu, FfnKind::MixFfn];

    pub fn name(self) -> &'static str {
        match self {
            FfnKind::Mlp => "mlp",
            FfnKind::SwiGlu => "swiglu",
            FfnKind::MixFfn => "mixffn",
        }
    }
}

impl FromStr for FfnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(FfnKind::Mlp),
            "swiglu" => Ok(FfnKind::SwiGlu),
            "mixffn" => Ok(FfnKind::MixFfn),
            _ => Err(Error::UnknownKind {
                what: "ffn",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for FfnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FfnConfig {
    pub kind: FfnKind,
    /// Expansion ratio α.
    pub alpha: f64,
    /// Depthwise kernel size for `mixffn`.
    pub dw_kernel: usize,
}

impl Default for FfnConfig {
    fn default() -> Self {
        Self {
            kind: FfnKind::MixFfn,
            alpha: 4.0,
            dw_kernel: 3,
        }
    }
}

impl FfnConfig {
    pub fn new(kind: FfnKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn d_hidden(&self, d_model: usize) -> usize {
        ((self.alpha * d_model as f64).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!(
                "alpha = {} must be positive",
                self.alpha
            )));
        }
        if self.dw_kernel.is_multiple_of(2) {
            return Err(Error::EvenKernel(self.dw_kernel));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FfnWeights {
    Mlp {
        /// `d_model × d_hidden`
        w1: Tensor,
        /// `d_hidden × d_model`
        w2: Tensor,
    },
    SwiGlu {
        w1: Tensor,
        w2: Tensor,
        /// `d_hidden × d_model`
        w3: Tensor,
    },
    MixFfn {
        /// `d_model × 2·d_hidden`
        w_in: Tensor,
        /// `2·d_hidden × k × k`
        dw: Tensor,
        /// `d_hidden × d_model`
        w_out: Tensor,
    },
}

impl FfnWeights {
    /// Draws the matrices in declaration order.
    pub fn init(cfg: &FfnConfig, d_model: usize, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let dh = cfg.d_hidden(d_model);
        Ok(match cfg.kind {
            FfnKind::Mlp => FfnWeights::Mlp {
                w1: rng.fan_in_matrix(d_model, dh),
                w2: rng.fan_in_matrix(dh, d_model),
            },
            FfnKind::SwiGlu => FfnWeights::SwiGlu {
                w1: rng.fan_in_matrix(d_model, dh),
                w2: rng.fan_in_matrix(d_model, dh),
                w3: rng.fan_in_matrix(dh, d_model),
            },
            FfnKind::MixFfn => {
                let w_in = rng.fan_in_matrix(d_model, 2 * dh);
                let k = cfg.dw_kernel;
                let bound = 1.0 / k as f64;
                let taps = (0..2 * dh * k * k)
                    .map(|_| rng.uniform_in(-bound, bound))
                    .collect();
                FfnWeights::MixFfn {
                    w_in,
                    dw: Tensor::new(vec![2 * dh, k, k], taps)?,
                    w_out: rng.fan_in_matrix(dh, d_model),
                }
            }
        })
    }

    pub fn zeros(cfg: &FfnConfig, d_model: usize) -> Result<Self> {
        cfg.validate()?;
        let dh = cfg.d_hidden(d_model);
        Ok(match cfg.kind {
            FfnKind::Mlp => FfnWeights::Mlp {
                w1: Tensor::zeros(&[d_model, dh]),
                w2: Tensor::zeros(&[dh, d_model]),
            },
            FfnKind::SwiGlu => FfnWeights::SwiGlu {
                w1: Tensor::zeros(&[d_model, dh]),
                w2: Tensor::zeros(&[d_model, dh]),
                w3: Tensor::zeros(&[dh, d_model]),
            },
            FfnKind::MixFfn => FfnWeights::MixFfn {
                w_in: Tensor::zeros(&[d_model, 2 * dh]),
                dw: Tensor::zeros(&[2 * dh, cfg.dw_kernel, cfg.dw_kernel]),
                w_out: Tensor::zeros(&[dh, d_model]),
            },
        })
    }

    pub fn kind(&self) -> FfnKind {
        match self {
            FfnWeights::Mlp { .. } => FfnKind::Mlp,
            FfnWeights::SwiGlu { .. } => FfnKind::SwiGlu,
            FfnWeights::MixFfn { .. } => FfnKind::MixFfn,
        }
    }
}

pub fn ffn_forward(
    x: &Tensor,
    grid: Option<GridShape>,
    cfg: &FfnConfig,
    weights: &FfnWeights,
) -> Result<Tensor> {
    if weights.kind() != cfg.kind {
        return Err(Error::Config(format!(
            "ffn config is {} but weights are {}",
            cfg.kind,
            weights.kind()
        )));
    }
    let silu = |t: &Tensor| activation(t, Activation::Silu);
    match weights {
        FfnWeights::Mlp { w1, w2 } => matmul(&silu(&matmul(x, w1)?)?, w2),
        FfnWeights::SwiGlu { w1, w2, w3 } => {
            let gated = hadamard(&silu(&matmul(x, w1)?)?, &matmul(x, w2)?)?;
            matmul(&gated, w3)
        }
        FfnWeights::MixFfn { w_in, dw, w_out } => {
            let grid = grid.ok_or_else(|| Error::Config("mixffn requires a token grid".into()))?;
            let hidden = dwconv2d(&silu(&matmul(x, w_in)?)?, grid, dw)?;
            let (x_hat, gate) = split_halves("ffn_forward", &hidden)?;
            matmul(&hadamard(&x_hat, &silu(&gate)?)?, w_out)
        }
    }
}
