//! Kernelized attention with the `ELU + 1` feature map.
//!
//! Both evaluation orders are exposed. The quadratic form builds the `N×N`
//! similarity `φ(Q)φ(K)ᵀ` explicitly and is kept as the reference the
//! associative form is checked against.

use std::fmt;
use std::str::FromStr;

use super::softmax::check_qkv;
use crate::error::{Error, Result};
use crate::tensor::{activation, matmul, matmul_transposed, Activation, Tensor};

/// Lower clamp applied to every normalizer entry before division.
pub const Z_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinearMode {
    /// `φ(Q)[φ(K)ᵀV] ⊘ z`, linear in `N`.
    Associative,
    /// `[φ(Q)φ(K)ᵀ]V ⊘ z`, quadratic in `N`.
    Quadratic,
}

impl FromStr for LinearMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "associative" => Ok(LinearMode::Associative),
            "quadratic" => Ok(LinearMode::Quadratic),
            _ => Err(Error::UnknownKind {
                what: "linear attention mode",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for LinearMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinearMode::Associative => "associative",
            LinearMode::Quadratic => "quadratic",
        })
    }
}

fn feature_map(t: &Tensor) -> Result<Tensor> {
    activation(t, Activation::Elu1)
}

/// Divides row `i` of `num` by `max(z[i], Z_FLOOR)`.
fn normalize_rows(num: Tensor, z: &[f64]) -> Result<Tensor> {
    let c = num.cols();
    let shape = num.shape().to_vec();
    let mut data = num.into_data();
    for (i, row) in data.chunks_mut(c.max(1)).enumerate().take(z.len()) {
        let denom = z[i].max(Z_FLOOR);
        for v in row {
            *v /= denom;
        }
    }
    let out = Tensor::new(shape, data)?;
    if !out.is_finite() {
        return Err(Error::NonFinite {
            op: "linear_attention",
        });
    }
    Ok(out)
}

pub fn linear_attention(q: &Tensor, k: &Tensor, v: &Tensor, mode: LinearMode) -> Result<Tensor> {
    check_qkv("linear_attention", q, k, v)?;
    let phi_q = feature_map(q)?;
    let phi_k = feature_map(k)?;
    match mode {
        LinearMode::Associative => {
            // state = φ(K)ᵀV (d×d_v), key_sum = φ(K)ᵀ1 (d)
            let (d, dv) = (phi_k.cols(), v.cols());
            let mut state = vec![0.0; d * dv];
            let mut key_sum = vec![0.0; d];
            for t in 0..phi_k.rows() {
                let kr = phi_k.row(t);
                let vr = v.row(t);
                for (c, &kc) in kr.iter().enumerate() {
                    key_sum[c] += kc;
                    for (s, &vv) in state[c * dv..(c + 1) * dv].iter_mut().zip(vr) {
                        *s += kc * vv;
                    }
                }
            }
            let state = Tensor::matrix(d, dv, state)?;
            let num = matmul(&phi_q, &state)?;
            let z: Vec<f64> = (0..phi_q.rows())
                .map(|i| {
                    phi_q
                        .row(i)
                        .iter()
                        .zip(&key_sum)
                        .fold(0.0, |s, (a, b)| s + a * b)
                })
                .collect();
            normalize_rows(num, &z)
        }
        LinearMode::Quadratic => {
            let sim = matmul_transposed(&phi_q, &phi_k)?;
            let z = crate::tensor::row_sums(&sim);
            normalize_rows(matmul(&sim, v)?, &z)
        }
    }
}

/// Normalized kernel weights `φ(Q)φ(K)ᵀ ⊘ z`, one row per query. Each row is
/// nonnegative and sums to one.
pub fn linear_attention_weights(q: &Tensor, k: &Tensor) -> Result<Tensor> {
    let sim = matmul_transposed(&feature_map(q)?, &feature_map(k)?)?;
    let z = crate::tensor::row_sums(&sim);
    normalize_rows(sim, &z)
}
