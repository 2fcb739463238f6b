use std::fmt;
use std::str::FromStr;

use crate::conv::GridShape;
use crate::error::{Error, Result};
use crate::mixer::{Block, BlockConfig, MixerKind};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::maps::{channel_saliency_map, delta_attn_map, token_norm_map, DiagnosticMap};

/// Block tensor the token-norm and saliency maps are read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Probe {
    /// Block input `X`.
    #[default]
    Input,
    /// After the mixer residual, `X + update`.
    Mixed,
    /// Block output.
    Output,
}

impl Probe {
    pub const ALL: [Probe; 3] = [Probe::Input, Probe::Mixed, Probe::Output];

    pub fn name(self) -> &'static str {
        match self {
            Probe::Input => "input",
            Probe::Mixed => "mixed",
            Probe::Output => "output",
        }
    }
}

impl FromStr for Probe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Probe::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownKind {
                what: "probe",
                name: s.to_string(),
            })
    }
}

impl fmt::Display for Probe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three normalized maps of one block evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticSet {
    pub input_norm: DiagnosticMap,
    pub delta_attn: DiagnosticMap,
    pub channel_saliency: DiagnosticMap,
}

/// Seeded block input for a diagnostics run.
pub fn diagnostic_input(grid: GridShape, d_model: usize, seed: u64) -> Tensor {
    Rng::new(Rng::derive_seed(
        seed,
        &[grid.tokens() as u64, d_model as u64],
    ))
    .gaussian_matrix(grid.tokens(), d_model)
}

/// Builds a block with mixer `kind` from `seed` and maps one forward pass
/// over `x`. `∥Δattn∥` is the mixer's pre-residual update.
pub fn diagnostic_maps(
    kind: MixerKind,
    config: &BlockConfig,
    grid: GridShape,
    seed: u64,
    probe: Probe,
    x: &Tensor,
) -> Result<DiagnosticSet> {
    let block = Block::init(BlockConfig { kind, ..*config }, seed)?;
    let trace = block.trace(x, grid)?;
    let probed = match probe {
        Probe::Input => &trace.input,
        Probe::Mixed => &trace.mixed,
        Probe::Output => &trace.output,
    };
    Ok(DiagnosticSet {
        input_norm: token_norm_map(probed, grid)?,
        delta_attn: delta_attn_map(&trace.input, &trace.update, grid)?,
        channel_saliency: channel_saliency_map(probed, grid)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::HeadConfig;
    use crate::mixer::FfnConfig;

    fn config() -> BlockConfig {
        BlockConfig::gdla(HeadConfig::new(8, 2, 4).unwrap(), FfnConfig::default())
    }

    #[test]
    fn maps_are_deterministic_and_normalized() {
        let grid = GridShape::new(4, 4).unwrap();
        let x = diagnostic_input(grid, 8, 7);
        for kind in MixerKind::ALL {
            let a = diagnostic_maps(kind, &config(), grid, 7, Probe::Input, &x).unwrap();
            let b = diagnostic_maps(kind, &config(), grid, 7, Probe::Input, &x).unwrap();
            assert_eq!(a, b);
            for m in [&a.input_norm, &a.delta_attn, &a.channel_saliency] {
                assert!(m.values.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn gdla_and_linear_updates_differ() {
        let grid = GridShape::new(4, 4).unwrap();
        let x = diagnostic_input(grid, 8, 3);
        let g = diagnostic_maps(MixerKind::Gdla, &config(), grid, 3, Probe::Input, &x).unwrap();
        let l = diagnostic_maps(MixerKind::Linear, &config(), grid, 3, Probe::Input, &x).unwrap();
        assert_ne!(g.delta_attn.values, l.delta_attn.values);
        // The input maps only see `X`.
        assert_eq!(g.input_norm, l.input_norm);
    }

    #[test]
    fn probe_names_round_trip() {
        for p in Probe::ALL {
            assert_eq!(p.name().parse::<Probe>().unwrap(), p);
        }
        assert!("middle".parse::<Probe>().is_err());
    }
}
