use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use gdla::attention::{Components, GateKind, HeadConfig};
use gdla::conv::GridShape;
use gdla::diagnostics::{Probe, Workload};
use gdla::mixer::{BlockConfig, FfnConfig, FfnKind, MixerKind};

use crate::error::CliError;

/// Environment variable that overrides the default output directory.
pub const OUT_DIR_ENV: &str = "GDLA_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "gdla-out";

#[derive(Debug, Parser)]
#[command(
    name = "gdla",
    version,
    about = "Gated differential linear attention: suites, diagnostics and benchmarks"
)]
pub struct Cli {
    /// Output directory [default: $GDLA_OUT_DIR, else ./gdla-out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Associative vs quadratic linear attention over (N, d) sizes and seeds.
    Equiv(EquivArgs),
    /// Finite-difference smoothness of scalar losses over each workload.
    Gradcheck(GradcheckArgs),
    /// Token-norm, update-magnitude and channel-saliency maps as PGM.
    Diag(DiagArgs),
    /// Wall-clock timing and analytic FLOP counts over a token sweep.
    Bench(BenchArgs),
    /// Shape and degeneracy checks for every FFN variant.
    Ffncheck(FfncheckArgs),
}

#[derive(Debug, Args)]
pub struct EquivArgs {
    /// Comma-separated `NxD` cases [default: N in 1,2,4,8,16,64,256 by d in 2,4,8,16]
    #[arg(long, value_delimiter = ',', value_parser = parse_size)]
    pub sizes: Vec<(usize, usize)>,

    /// Number of seeds per size, counting up from --seed.
    #[arg(long, default_value_t = 4)]
    pub seeds: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Workloads to check.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "softmax,linear,diff,gdla_block"
    )]
    pub kind: Vec<Workload>,

    /// Number of seeds per workload, counting up from --seed.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,

    /// Largest finite-difference step.
    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,

    /// Coordinates sampled per case.
    #[arg(long, default_value_t = 8)]
    pub coords: usize,
}

#[derive(Debug, Args)]
pub struct DiagArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Token mixer of the probed block.
    #[arg(long, default_value = "gdla")]
    pub kind: MixerKind,

    /// Tensor the input-norm and saliency maps are read from.
    #[arg(long, default_value = "input")]
    pub probe: Probe,

    /// Second mixer whose update map is subtracted from this one.
    #[arg(long)]
    pub compare: Option<MixerKind>,

    /// Block input as a tensor file (N × d_model) instead of a seeded draw.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long, value_delimiter = ',', default_value = "linear,softmax")]
    pub kind: Vec<Workload>,

    /// Token counts.
    #[arg(long, value_delimiter = ',', default_value = "1024,2048,4096,8192")]
    pub n: Vec<usize>,

    /// Timed repetitions per point (after one warmup).
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
}

#[derive(Debug, Args)]
pub struct FfncheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("size `{s}` is not of the form NxD");
    let (n, d) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        n.trim().parse().map_err(|_| bad())?,
        d.trim().parse().map_err(|_| bad())?,
    ))
}

/// Block configuration flags. Anything unset falls back to `--config`,
/// then to the subcommand's defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Flat key-value TOML file with any of the fields below.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub d_model: Option<usize>,

    #[arg(long)]
    pub heads: Option<usize>,

    /// Per-head width [default: d_model / heads]
    #[arg(long)]
    pub d_head: Option<usize>,

    /// Layer index l ≥ 1 for the λ_init schedule.
    #[arg(long)]
    pub layer: Option<u32>,

    /// Gate activation: silu or sigmoid.
    #[arg(long)]
    pub gate: Option<GateKind>,

    /// Local token-mixer depthwise kernel: 3 or 5.
    #[arg(long)]
    pub dwc_kernel: Option<usize>,

    /// FFN variant: mlp, swiglu or mixffn.
    #[arg(long)]
    pub ffn: Option<FfnKind>,

    /// FFN expansion ratio.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Mix-FFN depthwise kernel.
    #[arg(long)]
    pub ffn_kernel: Option<usize>,

    /// Token grid `HxW`.
    #[arg(long)]
    pub grid: Option<GridShape>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Replace the two-branch subtraction by plain linear attention.
    #[arg(long)]
    pub no_diff: bool,

    /// Drop the multiplicative gate.
    #[arg(long)]
    pub no_gate: bool,

    /// Drop the local token-mixing branch.
    #[arg(long)]
    pub no_local: bool,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub d_model: Option<usize>,
    pub heads: Option<usize>,
    pub d_h: Option<usize>,
    pub layer_index: Option<u32>,
    pub gate: Option<String>,
    pub dwc_kernel: Option<usize>,
    pub ffn: Option<String>,
    pub alpha: Option<f64>,
    pub ffn_kernel: Option<usize>,
    pub grid_h: Option<usize>,
    pub grid_w: Option<usize>,
    pub seed: Option<u64>,
    pub differential: Option<bool>,
    pub gated: Option<bool>,
    pub local: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Subcommand defaults for unset model fields.
#[derive(Debug, Clone, Copy)]
pub struct Defaults {
    pub d_model: usize,
    pub heads: usize,
    pub grid: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub block: BlockConfig,
    pub grid: GridShape,
    pub seed: u64,
}

fn parsed<T: std::str::FromStr<Err = gdla::Error>>(
    v: Option<String>,
) -> Result<Option<T>, CliError> {
    v.map(|s| {
        s.parse()
            .map_err(|e: gdla::Error| CliError::Usage(e.to_string()))
    })
    .transpose()
}

impl ModelArgs {
    pub fn resolve(&self, defaults: Defaults) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let d_model = self.d_model.or(file.d_model).unwrap_or(defaults.d_model);
        let heads = self.heads.or(file.heads).unwrap_or(defaults.heads);
        if heads == 0 {
            return Err(CliError::Usage("heads must be positive".into()));
        }
        let d_head = self.d_head.or(file.d_h).unwrap_or(d_model / heads);
        let gate = match self.gate {
            Some(g) => g,
            None => parsed(file.gate)?.unwrap_or_default(),
        };
        let ffn_kind = match self.ffn {
            Some(f) => f,
            None => parsed(file.ffn)?.unwrap_or_default(),
        };
        let base_ffn = FfnConfig::default();
        let ffn = FfnConfig {
            kind: ffn_kind,
            alpha: self.alpha.or(file.alpha).unwrap_or(base_ffn.alpha),
            dw_kernel: self
                .ffn_kernel
                .or(file.ffn_kernel)
                .unwrap_or(base_ffn.dw_kernel),
        };
        let head = HeadConfig::new(d_model, heads, d_head)?
            .with_layer(self.layer.or(file.layer_index).unwrap_or(1))?
            .with_gate(gate);
        let grid = match (self.grid, file.grid_h, file.grid_w) {
            (Some(g), _, _) => g,
            (None, Some(h), Some(w)) => GridShape::new(h, w)?,
            (None, None, None) => GridShape::new(defaults.grid.0, defaults.grid.1)?,
            _ => {
                return Err(CliError::Usage(
                    "config needs both grid_h and grid_w".into(),
                ))
            }
        };
        let components = Components {
            differential: !self.no_diff && file.differential.unwrap_or(true),
            gate: !self.no_gate && file.gated.unwrap_or(true),
            local: !self.no_local && file.local.unwrap_or(true),
        };
        let block = BlockConfig {
            dwc_kernel: self.dwc_kernel.or(file.dwc_kernel).unwrap_or(3),
            components,
            ..BlockConfig::gdla(head, ffn)
        };
        block.validate()?;
        Ok(Settings {
            block,
            grid,
            seed: self.seed.or(file.seed).unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEFAULTS: Defaults = Defaults {
        d_model: 32,
        heads: 4,
        grid: (16, 16),
    };

    #[test]
    fn defaults_resolve() {
        let s = ModelArgs::default().resolve(DEFAULTS).unwrap();
        assert_eq!(s.block.head.d_head, 8);
        assert_eq!(s.grid.tokens(), 256);
        assert_eq!(s.block.components, Components::FULL);
        assert_eq!(s.block.ffn.kind, FfnKind::MixFfn);
    }

    #[test]
    fn file_keys_parse() {
        let f = FileConfig::parse(
            "d_model = 16\nheads = 2\nd_h = 8\ngate = \"sigmoid\"\nffn = \"swiglu\"\ngrid_h = 4\ngrid_w = 8\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(f.d_h, Some(8));
        assert_eq!(f.grid_w, Some(8));
        assert!(FileConfig::parse("colour = 1\n").is_err());
    }

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_size("8x4"), Ok((8, 4)));
        assert!(parse_size("8").is_err());
    }
}
