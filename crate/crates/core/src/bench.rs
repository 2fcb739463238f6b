//! Wall-clock timing over a token-count sweep, next to the analytic counts.

use std::time::Instant;

use serde::Serialize;

use crate::conv::GridShape;
use crate::diagnostics::{flop_count, Workload};
use crate::error::{Error, Result};
use crate::mixer::BlockConfig;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub kind: String,
    pub n: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_head: usize,
    pub reps: usize,
    pub min_s: f64,
    pub median_s: f64,
    /// Analytic total, multiplies + additions + divisions.
    pub flops: u64,
    pub nonlinear: u64,
    pub flops_per_s: f64,
    /// `median_s(N) / median_s(N/2)` when `N/2` is also in the sweep.
    pub ratio_vs_half: Option<f64>,
}

/// Fewest timed repetitions a record is built from.
pub const MIN_REPS: usize = 5;

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        0.5 * (sorted[m - 1] + sorted[m])
    }
}

/// Times `reps` runs after one untimed warmup on a seeded input laid out on
/// the near-square grid of `n` tokens.
pub fn bench_case(
    workload: Workload,
    config: &BlockConfig,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<BenchRecord> {
    if reps < MIN_REPS {
        return Err(Error::Config(format!(
            "reps must be at least {MIN_REPS}, got {reps}"
        )));
    }
    let grid = GridShape::near_square(n)?;
    let block = workload.build(config, seed)?;
    let d = config.head.d_model;
    let x = Rng::new(Rng::derive_seed(seed, &[n as u64, d as u64])).gaussian_matrix(n, d);
    workload.run(&block, &x, grid)?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let y = workload.run(&block, &x, grid)?;
        // Clamped to the timer resolution so rates stay finite.
        times.push(start.elapsed().as_secs_f64().max(1e-9));
        drop(y);
    }
    times.sort_by(f64::total_cmp);
    let report = flop_count(workload, config, n)?;
    let median_s = median(&times);
    Ok(BenchRecord {
        kind: workload.name().to_string(),
        n,
        d_model: d,
        heads: config.head.heads,
        d_head: config.head.d_head,
        reps,
        min_s: times[0],
        median_s,
        flops: report.total(),
        nonlinear: report.total_nonlinear(),
        flops_per_s: report.total() as f64 / median_s,
        ratio_vs_half: None,
    })
}

/// Every `(workload, n)` pair, run one at a time, rows grouped by workload.
pub fn bench_sweep(
    workloads: &[Workload],
    config: &BlockConfig,
    ns: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<BenchRecord>> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::Config(
            "token counts must be a nonempty list of positive values".into(),
        ));
    }
    let mut out = Vec::new();
    for &w in workloads {
        let rows = ns
            .iter()
            .map(|&n| bench_case(w, config, n, reps, seed))
            .collect::<Result<Vec<_>>>()?;
        for r in &rows {
            let half = rows.iter().find(|h| 2 * h.n == r.n);
            out.push(BenchRecord {
                ratio_vs_half: half.map(|h| r.median_s / h.median_s),
                ..r.clone()
            });
        }
    }
    Ok(out)
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
    fn records_are_consistent() {
        let rows = bench_sweep(
            &[Workload::Linear, Workload::GdlaBlock],
            &config(),
            &[16, 32],
            5,
            1,
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.median_s >= r.min_s && r.min_s > 0.0);
            assert!(r.flops_per_s > 0.0);
        }
        assert_eq!(rows[1].flops, 2 * rows[0].flops);
        assert!(rows[0].ratio_vs_half.is_none());
        assert!(rows[1].ratio_vs_half.is_some());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[1.0, 2.0, 10.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 4.0, 10.0]), 3.0);
    }

    #[test]
    fn rejects_empty_sweeps() {
        assert!(bench_sweep(&[Workload::Linear], &config(), &[], 5, 0).is_err());
        assert!(bench_sweep(&[Workload::Linear], &config(), &[0], 5, 0).is_err());
        assert!(bench_case(Workload::Linear, &config(), 4, 4, 0).is_err());
    }
}
