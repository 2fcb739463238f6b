//! Associative versus quadratic evaluation of kernelized attention.

use rayon::prelude::*;
use serde::Serialize;

use crate::attention::{diff_linear_attention, linear_attention, LinearMode};
use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::{scale_columns, split_halves, sub};

/// Pass threshold on the largest absolute deviation of a case.
pub const EQUIV_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivRecord {
    pub kind: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub max_dev: Option<f64>,
    pub error: Option<String>,
    pub pass: bool,
}

/// Largest deviation between the associative and quadratic routes for one
/// seeded `(N, d)` instance.
///
/// Checks plain linear attention, and when `d` is even also the two
/// differential branches and their channel-wise difference, each against a
/// purely quadratic recomputation.
pub fn equivalence_deviation(n: usize, d: usize, seed: u64) -> Result<f64> {
    let mut rng = Rng::new(Rng::derive_seed(seed, &[n as u64, d as u64]));
    let q = rng.gaussian_matrix(n, d);
    let k = rng.gaussian_matrix(n, d);
    let v = rng.gaussian_matrix(n, d);

    let assoc = linear_attention(&q, &k, &v, LinearMode::Associative)?;
    let quad = linear_attention(&q, &k, &v, LinearMode::Quadratic)?;
    let mut dev = assoc.max_abs_diff(&quad)?;

    if d.is_multiple_of(2) {
        let lambda: Vec<f64> = (0..d).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let (q1, q2) = split_halves("equivalence", &q)?;
        let (k1, k2) = split_halves("equivalence", &k)?;
        let b1 = linear_attention(&q1, &k1, &v, LinearMode::Quadratic)?;
        let b2 = linear_attention(&q2, &k2, &v, LinearMode::Quadratic)?;
        let oracle = sub(&b1, &scale_columns(&b2, &lambda)?)?;
        let fast = diff_linear_attention(&q, &k, &v, &lambda)?;
        let (a1, a2) = crate::attention::diff_linear_branches(&q, &k, &v)?;
        dev = dev
            .max(a1.max_abs_diff(&b1)?)
            .max(a2.max_abs_diff(&b2)?)
            .max(fast.max_abs_diff(&oracle)?);
    }
    Ok(dev)
}

pub fn equivalence_case(n: usize, d: usize, seed: u64) -> EquivRecord {
    let (max_dev, error) = match equivalence_deviation(n, d, seed) {
        Ok(dev) => (Some(dev), None),
        Err(e) => (None, Some(e.to_string())),
    };
    EquivRecord {
        kind: "linear".to_string(),
        n,
        d,
        seed,
        pass: max_dev.is_some_and(|m| m <= EQUIV_TOL),
        max_dev,
        error,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivReport {
    /// Ordered by size, then seed.
    pub records: Vec<EquivRecord>,
}

impl EquivReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn max_dev(&self) -> f64 {
        self.records
            .iter()
            .filter_map(|r| r.max_dev)
            .fold(0.0, f64::max)
    }
}

/// Runs every `(size, seed)` case, in parallel, and reports them in key order.
pub fn equivalence_suite(seeds: &[u64], sizes: &[(usize, usize)]) -> EquivReport {
    let cases: Vec<(usize, usize, u64)> = sizes
        .iter()
        .flat_map(|&(n, d)| seeds.iter().map(move |&s| (n, d, s)))
        .collect();
    let records = cases
        .par_iter()
        .map(|&(n, d, s)| equivalence_case(n, d, s))
        .collect();
    EquivReport { records }
}
