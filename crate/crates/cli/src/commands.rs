use std::fs;
use std::path::Path;

use serde::Serialize;

use gdla::bench::bench_sweep;
use gdla::diagnostics::{
    diagnostic_input, diagnostic_maps, difference_map, equivalence_suite, ffn_check, flop_count,
    smoothness_record, DiagnosticMap, GradCheckOptions,
};
use gdla::io::{load_tensor, write_csv, write_pgm};

use crate::args::{BenchArgs, Defaults, DiagArgs, EquivArgs, FfncheckArgs, GradcheckArgs};
use crate::error::CliError;

const SMALL: Defaults = Defaults {
    d_model: 8,
    heads: 2,
    grid: (4, 4),
};

const WIDE: Defaults = Defaults {
    d_model: 32,
    heads: 4,
    grid: (16, 16),
};

pub const EQUIV_NS: [usize; 7] = [1, 2, 4, 8, 16, 64, 256];
pub const EQUIV_DS: [usize; 4] = [2, 4, 8, 16];

fn prepare(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn verdict(failed: usize, total: usize, what: &str) -> Result<(), CliError> {
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "{what}: {failed} of {total} cases failed"
        )))
    }
}

pub fn run_equiv(args: &EquivArgs, out: &Path) -> Result<(), CliError> {
    let sizes = if args.sizes.is_empty() {
        EQUIV_NS
            .iter()
            .flat_map(|&n| EQUIV_DS.iter().map(move |&d| (n, d)))
            .collect()
    } else {
        args.sizes.clone()
    };
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be positive".into()));
    }
    let seeds: Vec<u64> = (args.seed..args.seed + args.seeds).collect();
    let report = equivalence_suite(&seeds, &sizes);
    prepare(out)?;
    let path = out.join("equiv.csv");
    write_csv(&path, &report.records)?;
    let failed = report.records.iter().filter(|r| !r.pass).count();
    println!(
        "equiv: {} cases, max deviation {:.3e} -> {}",
        report.records.len(),
        report.max_dev(),
        path.display()
    );
    verdict(failed, report.records.len(), "equiv")
}

pub fn run_gradcheck(args: &GradcheckArgs, out: &Path) -> Result<(), CliError> {
    let s = args.model.resolve(SMALL)?;
    let opts = GradCheckOptions {
        step: args.step,
        coords: args.coords,
        seed: 0,
    };
    let mut records = Vec::new();
    for &w in &args.kind {
        for seed in s.seed..s.seed + args.seeds {
            records.push(smoothness_record(w, &s.block, s.grid, seed, opts));
        }
    }
    prepare(out)?;
    let path = out.join("gradcheck.csv");
    write_csv(&path, &records)?;
    let failed = records.iter().filter(|r| !r.pass).count();
    println!("gradcheck: {} cases -> {}", records.len(), path.display());
    verdict(failed, records.len(), "gradcheck")
}

/// Signed `[−1, 1]` map shifted to `[0, 1]` for display.
fn shifted(map: &DiagnosticMap) -> Result<DiagnosticMap, CliError> {
    let values = map.values.iter().map(|v| 0.5 * (v + 1.0)).collect();
    Ok(DiagnosticMap::raw(map.grid, values)?)
}

pub fn run_diag(args: &DiagArgs, out: &Path) -> Result<(), CliError> {
    let s = args.model.resolve(WIDE)?;
    let d = s.block.head.d_model;
    let x = match &args.input {
        Some(p) => load_tensor(p)?,
        None => diagnostic_input(s.grid, d, s.seed),
    };
    if x.shape() != [s.grid.tokens(), d] {
        return Err(CliError::Usage(format!(
            "input shape {:?} does not match grid {} and d_model {d}",
            x.shape(),
            s.grid
        )));
    }
    let maps = diagnostic_maps(args.kind, &s.block, s.grid, s.seed, args.probe, &x)?;
    prepare(out)?;
    write_pgm(out.join("input_norm.pgm"), &maps.input_norm)?;
    write_pgm(out.join("delta_attn.pgm"), &maps.delta_attn)?;
    write_pgm(out.join("channel_saliency.pgm"), &maps.channel_saliency)?;
    if let Some(other) = args.compare {
        let theirs = diagnostic_maps(other, &s.block, s.grid, s.seed, args.probe, &x)?;
        let diff = difference_map(&maps.delta_attn, &theirs.delta_attn)?;
        write_pgm(
            out.join(format!("delta_attn_{other}.pgm")),
            &theirs.delta_attn,
        )?;
        write_pgm(out.join("delta_attn_diff.pgm"), &shifted(&diff)?)?;
    }
    println!(
        "diag: {} on {} grid, probe {} -> {}",
        args.kind,
        s.grid,
        args.probe,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FlopRow {
    kind: String,
    n: usize,
    stage: String,
    multiplies: u64,
    additions: u64,
    divisions: u64,
    nonlinear: u64,
    flops: u64,
    quadratic: bool,
}

pub fn run_bench(args: &BenchArgs, out: &Path) -> Result<(), CliError> {
    let s = args.model.resolve(WIDE)?;
    let records = bench_sweep(&args.kind, &s.block, &args.n, args.reps, s.seed)?;
    let mut stages = Vec::new();
    for &w in &args.kind {
        for &n in &args.n {
            let report = flop_count(w, &s.block, n)?;
            for (stage, count) in report.stages.iter().zip(report.evaluated()) {
                stages.push(FlopRow {
                    kind: w.name().to_string(),
                    n,
                    stage: count.stage,
                    multiplies: count.multiplies,
                    additions: count.additions,
                    divisions: count.divisions,
                    nonlinear: count.nonlinear,
                    flops: count.flops,
                    quadratic: stage.is_quadratic(),
                });
            }
        }
    }
    prepare(out)?;
    write_csv(out.join("bench.csv"), &records)?;
    write_csv(out.join("flops.csv"), &stages)?;
    for r in &records {
        let ratio = r
            .ratio_vs_half
            .map_or(String::from("-"), |x| format!("{x:.2}"));
        println!(
            "{:>10} N={:<6} median {:.3e} s  flops {:>14}  t(N)/t(N/2) {ratio}",
            r.kind, r.n, r.median_s, r.flops
        );
    }
    Ok(())
}

pub fn run_ffncheck(args: &FfncheckArgs, out: &Path) -> Result<(), CliError> {
    let s = args.model.resolve(WIDE)?;
    let records = ffn_check(s.block.ffn, s.block.head.d_model, s.grid, s.seed);
    prepare(out)?;
    let path = out.join("ffncheck.csv");
    write_csv(&path, &records)?;
    let failed = records.iter().filter(|r| !r.pass).count();
    println!("ffncheck: {} variants -> {}", records.len(), path.display());
    verdict(failed, records.len(), "ffncheck")
}
