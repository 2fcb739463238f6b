//! Configuration-lattice suites: FFN variants and the ablation axes.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::attention::{GateKind, HeadConfig};
use crate::conv::GridShape;
use crate::error::Result;
use crate::mixer::{ffn_forward, Block, BlockConfig, FfnConfig, FfnKind, FfnWeights};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FfnCheckRecord {
    pub kind: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub d_hidden: usize,
    /// Output is `N × d` and finite.
    pub shape_ok: bool,
    /// All-zero weights give an all-zero output.
    pub zero_ok: bool,
    /// Two evaluations agree bit for bit.
    pub deterministic: bool,
    /// `mlp`/`swiglu` ignore the grid; `mixffn` refuses to run without one.
    pub grid_ok: bool,
    pub max_abs: Option<f64>,
    pub error: Option<String>,
    pub pass: bool,
}

fn ffn_case(cfg: FfnConfig, d: usize, grid: GridShape, seed: u64) -> Result<FfnCheckRecord> {
    let n = grid.tokens();
    let mut rng = Rng::new(seed);
    let weights = FfnWeights::init(&cfg, d, &mut rng)?;
    let x = rng.gaussian_matrix(n, d);
    let y = ffn_forward(&x, Some(grid), &cfg, &weights)?;
    let again = ffn_forward(&x, Some(grid), &cfg, &weights)?;
    let zero = ffn_forward(&x, Some(grid), &cfg, &FfnWeights::zeros(&cfg, d)?)?;
    let gridless = ffn_forward(&x, None, &cfg, &weights);
    let grid_ok = match cfg.kind {
        FfnKind::MixFfn => gridless.is_err(),
        _ => gridless.as_ref() == Ok(&y),
    };
    let shape_ok = y.shape() == [n, d] && y.is_finite();
    let zero_ok = zero.data().iter().all(|&v| v == 0.0);
    let deterministic = y
        .data()
        .iter()
        .zip(again.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    Ok(FfnCheckRecord {
        kind: cfg.kind.name().to_string(),
        n,
        d,
        seed,
        d_hidden: cfg.d_hidden(d),
        shape_ok,
        zero_ok,
        deterministic,
        grid_ok,
        max_abs: Some(y.max_abs()),
        error: None,
        pass: shape_ok && zero_ok && deterministic && grid_ok,
    })
}

/// Shape and degeneracy checks for every FFN kind, with `alpha` and
/// `dw_kernel` taken from `base`.
pub fn ffn_check(base: FfnConfig, d: usize, grid: GridShape, seed: u64) -> Vec<FfnCheckRecord> {
    FfnKind::ALL
        .into_iter()
        .map(|kind| {
            let cfg = FfnConfig { kind, ..base };
            ffn_case(cfg, d, grid, seed).unwrap_or_else(|e| FfnCheckRecord {
                kind: kind.name().to_string(),
                n: grid.tokens(),
                d,
                seed,
                d_hidden: cfg.d_hidden(d),
                shape_ok: false,
                zero_ok: false,
                deterministic: false,
                grid_ok: false,
                max_abs: None,
                error: Some(e.to_string()),
                pass: false,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRecord {
    pub gate: String,
    pub dwc_kernel: usize,
    pub ffn: String,
    pub n: usize,
    pub d_model: usize,
    pub heads: usize,
    pub max_abs: Option<f64>,
    pub elapsed_s: f64,
    pub error: Option<String>,
    pub pass: bool,
}

/// One GDLA block forward for every combination of gate activation, local
/// kernel size and FFN kind. A configuration passes when it runs and its
/// output is finite.
pub fn ablation_lattice(
    grid: GridShape,
    d_model: usize,
    heads: usize,
    seed: u64,
) -> Result<Vec<AblationRecord>> {
    let d_head = d_model / heads.max(1);
    let head = HeadConfig::new(d_model, heads, d_head)?;
    head.validate_block()?;
    let mut configs = Vec::new();
    for gate in [GateKind::Silu, GateKind::Sigmoid] {
        for dwc_kernel in [3, 5] {
            for ffn in FfnKind::ALL {
                configs.push(BlockConfig {
                    dwc_kernel,
                    ..BlockConfig::gdla(head.with_gate(gate), FfnConfig::new(ffn))
                });
            }
        }
    }
    let x = Rng::new(seed).gaussian_matrix(grid.tokens(), d_model);
    Ok(configs
        .par_iter()
        .map(|cfg| {
            let start = Instant::now();
            let out = Block::init(*cfg, seed).and_then(|b| b.forward(&x, grid));
            let elapsed_s = start.elapsed().as_secs_f64();
            let (max_abs, error) = match out {
                Ok(y) => (Some(y.max_abs()), None),
                Err(e) => (None, Some(e.to_string())),
            };
            AblationRecord {
                gate: cfg.head.gate.to_string(),
                dwc_kernel: cfg.dwc_kernel,
                ffn: cfg.ffn.kind.to_string(),
                n: grid.tokens(),
                d_model,
                heads,
                pass: max_abs.is_some_and(f64::is_finite),
                max_abs,
                elapsed_s,
                error,
            }
        })
        .collect())
}
