//! Block wiring: pre-norm residual mixer followed by a pre-norm residual FFN.
//!
//! ```text
//! Y₁ = X  + mixer(RMSNorm(X))
//! Y₂ = Y₁ + ffn(RMSNorm(Y₁))
//! ```

use std::fmt;
use std::str::FromStr;

use super::ffn::{ffn_forward, FfnConfig, FfnWeights};
use super::gdla::GdlaMixer;
use crate::attention::{
    diff_attention_multihead, AttentionLayer, Components, DiffAttnLayer, HeadConfig, Kernel,
};
use crate::conv::GridShape;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{add, rmsnorm_rows, Tensor, RMS_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixerKind {
    Softmax,
    Linear,
    Diff,
    Gdla,
}

impl MixerKind {
    pub const ALL: [MixerKind; 4] = [
        MixerKind::Softmax,
        MixerKind::Linear,
        MixerKind::Diff,
        MixerKind::Gdla,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MixerKind::Softmax => "softmax",
            MixerKind::Linear => "linear",
            MixerKind::Diff => "diff",
            MixerKind::Gdla => "gdla",
        }
    }
}

impl FromStr for MixerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(MixerKind::Softmax),
            "linear" => Ok(MixerKind::Linear),
            "diff" => Ok(MixerKind::Diff),
            "gdla" => Ok(MixerKind::Gdla),
            _ => Err(Error::UnknownKind {
                what: "mixer",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for MixerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Token mixer of a block, one of the four attention mechanisms.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum TokenMixer {
    Softmax(AttentionLayer),
    Linear(AttentionLayer),
    Diff(DiffAttnLayer),
    Gdla(GdlaMixer),
}

impl TokenMixer {
    pub fn init(
        kind: MixerKind,
        cfg: &HeadConfig,
        dwc_kernel: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(match kind {
            MixerKind::Softmax => TokenMixer::Softmax(AttentionLayer::init(cfg, rng)?),
            MixerKind::Linear => TokenMixer::Linear(AttentionLayer::init(cfg, rng)?),
            MixerKind::Diff => TokenMixer::Diff(DiffAttnLayer::init(cfg, rng)?),
            MixerKind::Gdla => TokenMixer::Gdla(GdlaMixer::init(cfg, dwc_kernel, rng)?),
        })
    }

    pub fn zeros(kind: MixerKind, cfg: &HeadConfig, dwc_kernel: usize) -> Result<Self> {
        Ok(match kind {
            MixerKind::Softmax => TokenMixer::Softmax(AttentionLayer::zeros(cfg)?),
            MixerKind::Linear => TokenMixer::Linear(AttentionLayer::zeros(cfg)?),
            MixerKind::Diff => TokenMixer::Diff(DiffAttnLayer::zeros(cfg)?),
            MixerKind::Gdla => TokenMixer::Gdla(GdlaMixer::zeros(cfg, dwc_kernel)?),
        })
    }

    pub fn kind(&self) -> MixerKind {
        match self {
            TokenMixer::Softmax(_) => MixerKind::Softmax,
            TokenMixer::Linear(_) => MixerKind::Linear,
            TokenMixer::Diff(_) => MixerKind::Diff,
            TokenMixer::Gdla(_) => MixerKind::Gdla,
        }
    }

    /// Arguments of the `ELU + 1` feature map for input `x`; empty for the
    /// softmax-based mixers.
    pub fn feature_map_inputs(&self, x: &Tensor, grid: GridShape) -> Result<Vec<f64>> {
        match self {
            TokenMixer::Softmax(_) | TokenMixer::Diff(_) => Ok(Vec::new()),
            TokenMixer::Linear(l) => {
                let mut out = Vec::new();
                for h in &l.heads {
                    let (q, k, _) = h.project(x)?;
                    out.extend_from_slice(q.data());
                    out.extend_from_slice(k.data());
                }
                Ok(out)
            }
            TokenMixer::Gdla(m) => m.feature_map_inputs(x, grid),
        }
    }

    /// Pre-residual update for input `x`.
    pub fn forward(&self, x: &Tensor, grid: GridShape, cfg: &HeadConfig) -> Result<Tensor> {
        match self {
            TokenMixer::Softmax(l) => l.forward(x, Kernel::Softmax),
            TokenMixer::Linear(l) => l.forward(x, Kernel::Linear),
            TokenMixer::Diff(l) => diff_attention_multihead(x, l),
            TokenMixer::Gdla(m) => m.forward(x, grid, cfg),
        }
    }
}

/// All learnable arrays of one GDLA block.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerWeights {
    pub mixer: GdlaMixer,
    pub ffn: FfnWeights,
}

impl MixerWeights {
    pub fn init(
        cfg: &HeadConfig,
        ffn_cfg: &FfnConfig,
        dwc_kernel: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(Self {
            mixer: GdlaMixer::init(cfg, dwc_kernel, rng)?,
            ffn: FfnWeights::init(ffn_cfg, cfg.d_model, rng)?,
        })
    }

    pub fn zeros(cfg: &HeadConfig, ffn_cfg: &FfnConfig, dwc_kernel: usize) -> Result<Self> {
        Ok(Self {
            mixer: GdlaMixer::zeros(cfg, dwc_kernel)?,
            ffn: FfnWeights::zeros(ffn_cfg, cfg.d_model)?,
        })
    }
}

/// Intermediate tensors of one block evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTrace {
    pub input: Tensor,
    /// Mixer output before the residual add.
    pub update: Tensor,
    /// `input + update`
    pub mixed: Tensor,
    pub output: Tensor,
}

/// Pre-norm residual wiring around an arbitrary mixer.
pub fn block_forward_traced(
    x: &Tensor,
    grid: GridShape,
    ffn_cfg: &FfnConfig,
    ffn: &FfnWeights,
    mixer: impl FnOnce(&Tensor) -> Result<Tensor>,
) -> Result<BlockTrace> {
    grid.check(x.rows())?;
    let update = mixer(&rmsnorm_rows(x, RMS_EPS)?)?;
    let mixed = add(x, &update)?;
    let ff = ffn_forward(&rmsnorm_rows(&mixed, RMS_EPS)?, Some(grid), ffn_cfg, ffn)?;
    let output = add(&mixed, &ff)?;
    Ok(BlockTrace {
        input: x.clone(),
        update,
        mixed,
        output,
    })
}

pub fn gdla_block_forward(
    x: &Tensor,
    grid: GridShape,
    weights: &MixerWeights,
    cfg: &HeadConfig,
    ffn_cfg: &FfnConfig,
) -> Result<Tensor> {
    cfg.validate_block()?;
    let trace = block_forward_traced(x, grid, ffn_cfg, &weights.ffn, |xn| {
        weights.mixer.forward(xn, grid, cfg)
    })?;
    Ok(trace.output)
}

/// Everything needed to build a block from a seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockConfig {
    pub kind: MixerKind,
    pub head: HeadConfig,
    pub ffn: FfnConfig,
    /// Local mixer depthwise kernel size, 3 or 5.
    pub dwc_kernel: usize,
    pub components: Components,
}

impl BlockConfig {
    pub fn gdla(head: HeadConfig, ffn: FfnConfig) -> Self {
        Self {
            kind: MixerKind::Gdla,
            head,
            ffn,
            dwc_kernel: 3,
            components: Components::FULL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.head.validate_block()?;
        self.ffn.validate()?;
        if self.dwc_kernel != 3 && self.dwc_kernel != 5 {
            return Err(Error::Config(format!(
                "dwc_kernel must be 3 or 5, got {}",
                self.dwc_kernel
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub config: BlockConfig,
    pub mixer: TokenMixer,
    pub ffn: FfnWeights,
}

impl Block {
    /// Mixer weights are drawn first, then FFN weights, from one stream.
    pub fn init(config: BlockConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed);
        let mut mixer = TokenMixer::init(config.kind, &config.head, config.dwc_kernel, &mut rng)?;
        if let TokenMixer::Gdla(m) = &mut mixer {
            m.components = config.components;
        }
        let ffn = FfnWeights::init(&config.ffn, config.head.d_model, &mut rng)?;
        Ok(Self { config, mixer, ffn })
    }

    pub fn zeros(config: BlockConfig) -> Result<Self> {
        config.validate()?;
        let mut mixer = TokenMixer::zeros(config.kind, &config.head, config.dwc_kernel)?;
        if let TokenMixer::Gdla(m) = &mut mixer {
            m.components = config.components;
        }
        let ffn = FfnWeights::zeros(&config.ffn, config.head.d_model)?;
        Ok(Self { config, mixer, ffn })
    }

    pub fn update(&self, x: &Tensor, grid: GridShape) -> Result<Tensor> {
        self.mixer.forward(x, grid, &self.config.head)
    }

    pub fn trace(&self, x: &Tensor, grid: GridShape) -> Result<BlockTrace> {
        block_forward_traced(x, grid, &self.config.ffn, &self.ffn, |xn| {
            self.mixer.forward(xn, grid, &self.config.head)
        })
    }

    pub fn forward(&self, x: &Tensor, grid: GridShape) -> Result<Tensor> {
        Ok(self.trace(x, grid)?.output)
    }
}
