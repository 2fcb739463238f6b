use std::fmt;
use std::str::FromStr;

use crate::conv::GridShape;
use crate::error::{Error, Result};
use crate::mixer::{Block, BlockConfig, MixerKind};
use crate::tensor::{rmsnorm_rows, Tensor, RMS_EPS};

/// A unit of computation that can be counted, timed and differentiated:
/// one of the four mixers on its own, or a full GDLA block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Workload {
    Softmax,
    Linear,
    Diff,
    Gdla,
    GdlaBlock,
}

impl Workload {
    pub const ALL: [Workload; 5] = [
        Workload::Softmax,
        Workload::Linear,
        Workload::Diff,
        Workload::Gdla,
        Workload::GdlaBlock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Workload::Softmax => "softmax",
            Workload::Linear => "linear",
            Workload::Diff => "diff",
            Workload::Gdla => "gdla",
            Workload::GdlaBlock => "gdla_block",
        }
    }

    pub fn mixer_kind(self) -> MixerKind {
        match self {
            Workload::Softmax => MixerKind::Softmax,
            Workload::Linear => MixerKind::Linear,
            Workload::Diff => MixerKind::Diff,
            Workload::Gdla | Workload::GdlaBlock => MixerKind::Gdla,
        }
    }

    /// Builds the seeded block this workload runs on. The mixer kind of
    /// `config` is overridden.
    pub fn build(self, config: &BlockConfig, seed: u64) -> Result<Block> {
        let config = BlockConfig {
            kind: self.mixer_kind(),
            ..*config
        };
        Block::init(config, seed)
    }

    /// Mixer update alone, or the whole block for [`Workload::GdlaBlock`].
    pub fn run(self, block: &Block, x: &Tensor, grid: GridShape) -> Result<Tensor> {
        match self {
            Workload::GdlaBlock => block.forward(x, grid),
            _ => block.update(x, grid),
        }
    }

    /// Points where [`Workload::run`] is only C¹: every argument of the
    /// `ELU + 1` feature map. The FFN and normalizations are smooth.
    pub fn feature_map_inputs(
        self,
        block: &Block,
        x: &Tensor,
        grid: GridShape,
    ) -> Result<Vec<f64>> {
        match self {
            Workload::GdlaBlock => block
                .mixer
                .feature_map_inputs(&rmsnorm_rows(x, RMS_EPS)?, grid),
            _ => block.mixer.feature_map_inputs(x, grid),
        }
    }
}

impl FromStr for Workload {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Workload::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| Error::UnknownKind {
                what: "workload",
                name: s.to_string(),
            })
    }
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
