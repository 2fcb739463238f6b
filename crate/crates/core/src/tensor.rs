//! Dense row-major `f64` tensors and the handful of operations the attention
//! kernels are written in.
//!
//! Every operation is a pure function returning a fresh tensor. Outputs are
//! checked for NaN/Inf before they are handed back, so a non-finite value
//! surfaces as [`Error::NonFinite`] at the operation that produced it.
//!
//! Reductions accumulate left to right in index order, which keeps results
//! bit-reproducible across runs.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Epsilon used by every RMS normalization in the crate.
pub const RMS_EPS: f64 = 1e-6;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

impl Tensor {
    /// Builds a tensor, checking that `data` has exactly `product(shape)` entries.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::DataLength {
                shape,
                expected,
                found: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Builds a matrix from row slices. Panics on ragged input; meant for
    /// literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            shape: vec![rows.len(), cols],
            data,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Builds a matrix by evaluating `f(row, col)` for every entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self {
            shape: vec![rows, cols],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row count of a matrix.
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Column count of a matrix (product of all trailing extents).
    pub fn cols(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute elementwise difference. Shapes must agree.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        same_shape("max_abs_diff", self, other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

fn finite(op: &'static str, t: Tensor) -> Result<Tensor> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::NonFinite { op })
    }
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<()> {
    if t.shape.len() != 2 {
        return Err(Error::Rank {
            op,
            expected: 2,
            shape: t.shape.clone(),
        });
    }
    Ok(())
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch {
            op,
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    Ok(())
}

/// Matrix product `a · b` for `a: N×K`, `b: K×M`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_matrix("matmul", a)?;
    require_matrix("matmul", b)?;
    let (n, k) = (a.shape[0], a.shape[1]);
    let (k2, m) = (b.shape[0], b.shape[1]);
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a.data[i * k + p];
            let brow = &b.data[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    finite(
        "matmul",
        Tensor {
            shape: vec![n, m],
            data: out,
        },
    )
}

/// `a · bᵀ` for `a: N×K`, `b: M×K`, without materializing the transpose.
pub fn matmul_transposed(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_matrix("matmul_transposed", a)?;
    require_matrix("matmul_transposed", b)?;
    let (n, k) = (a.shape[0], a.shape[1]);
    let (m, k2) = (b.shape[0], b.shape[1]);
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul_transposed",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        let arow = a.row(i);
        for j in 0..m {
            let brow = b.row(j);
            let mut s = 0.0;
            for (x, y) in arow.iter().zip(brow) {
                s += x * y;
            }
            out.push(s);
        }
    }
    finite(
        "matmul_transposed",
        Tensor {
            shape: vec![n, m],
            data: out,
        },
    )
}

pub fn transpose(a: &Tensor) -> Result<Tensor> {
    require_matrix("transpose", a)?;
    let (n, m) = (a.shape[0], a.shape[1]);
    Ok(Tensor::from_fn(m, n, |i, j| a.data[j * m + i]))
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(a: &Tensor) -> Result<Tensor> {
    require_matrix("softmax_rows", a)?;
    if !a.is_finite() {
        return Err(Error::NonFinite { op: "softmax_rows" });
    }
    let m = a.cols();
    let mut data = Vec::with_capacity(a.len());
    for i in 0..a.rows() {
        let row = a.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = data.len();
        let mut sum = 0.0;
        for &v in row {
            let e = (v - max).exp();
            sum += e;
            data.push(e);
        }
        for v in &mut data[start..start + m] {
            *v /= sum;
        }
    }
    finite(
        "softmax_rows",
        Tensor {
            shape: a.shape.clone(),
            data,
        },
    )
}

/// Pointwise nonlinearities used by the kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    /// `ELU(x) + 1` with unit ELU slope: `x + 1` for `x ≥ 0`, `exp(x)` otherwise.
    Elu1,
    /// `x · σ(x)`
    Silu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu1 => {
                if x >= 0.0 {
                    x + 1.0
                } else {
                    x.exp()
                }
            }
            Activation::Silu => x * sigmoid(x),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Elu1 => "elu1",
            Activation::Silu => "silu",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elu1" => Ok(Activation::Elu1),
            "silu" => Ok(Activation::Silu),
            "sigmoid" => Ok(Activation::Sigmoid),
            _ => Err(Error::UnknownKind {
                what: "activation",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// Split on sign so neither branch exponentiates a large positive number.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activation(a: &Tensor, kind: Activation) -> Result<Tensor> {
    finite("activation", a.map(|v| kind.apply(v)))
}

/// `x / sqrt(mean(x²) + eps)` per row, without a learnable gain.
pub fn rmsnorm_rows(a: &Tensor, eps: f64) -> Result<Tensor> {
    require_matrix("rmsnorm_rows", a)?;
    let m = a.cols();
    if m == 0 {
        return Err(Error::Config(
            "rmsnorm_rows needs at least one column".into(),
        ));
    }
    let mut data = Vec::with_capacity(a.len());
    for i in 0..a.rows() {
        let row = a.row(i);
        let mut ss = 0.0;
        for &v in row {
            ss += v * v;
        }
        let denom = (ss / m as f64 + eps).sqrt();
        data.extend(row.iter().map(|&v| v / denom));
    }
    finite(
        "rmsnorm_rows",
        Tensor {
            shape: a.shape.clone(),
            data,
        },
    )
}

pub fn hadamard(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with("hadamard", a, b, |x, y| x * y)
}

/// Elementwise `a / (b + eps)`.
pub fn elementwise_div(a: &Tensor, b: &Tensor, eps: f64) -> Result<Tensor> {
    zip_with("elementwise_div", a, b, |x, y| x / (y + eps))
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with("add", a, b, |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with("sub", a, b, |x, y| x - y)
}

pub fn scale(a: &Tensor, s: f64) -> Result<Tensor> {
    finite("scale", a.map(|v| v * s))
}

fn zip_with(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor> {
    same_shape(op, a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
    finite(
        op,
        Tensor {
            shape: a.shape.clone(),
            data,
        },
    )
}

/// Multiplies column `j` of every row by `weights[j]`.
pub fn scale_columns(a: &Tensor, weights: &[f64]) -> Result<Tensor> {
    require_matrix("scale_columns", a)?;
    if weights.len() != a.cols() {
        return Err(Error::ShapeMismatch {
            op: "scale_columns",
            left: a.shape.clone(),
            right: vec![weights.len()],
        });
    }
    let c = a.cols();
    let data = a
        .data
        .iter()
        .enumerate()
        .map(|(idx, &v)| v * weights[idx % c])
        .collect();
    finite(
        "scale_columns",
        Tensor {
            shape: a.shape.clone(),
            data,
        },
    )
}

/// Row `i` of the output is row `i` of `a` followed by row `i` of `b`.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_matrix("concat_channels", a)?;
    require_matrix("concat_channels", b)?;
    if a.rows() != b.rows() {
        return Err(Error::ShapeMismatch {
            op: "concat_channels",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let (ca, cb) = (a.cols(), b.cols());
    let mut data = Vec::with_capacity(a.len() + b.len());
    for i in 0..a.rows() {
        data.extend_from_slice(&a.data[i * ca..(i + 1) * ca]);
        data.extend_from_slice(&b.data[i * cb..(i + 1) * cb]);
    }
    Ok(Tensor {
        shape: vec![a.rows(), ca + cb],
        data,
    })
}

/// Concatenates any number of equally tall matrices along channels.
pub fn concat_channels_all(parts: &[Tensor]) -> Result<Tensor> {
    let mut iter = parts.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::Config("concat_channels_all needs at least one part".into()))?;
    iter.try_fold(first.clone(), |acc, t| concat_channels(&acc, t))
}

/// Columns `start..end` of a matrix.
pub fn slice_channels(a: &Tensor, start: usize, end: usize) -> Result<Tensor> {
    require_matrix("slice_channels", a)?;
    if start > end || end > a.cols() {
        return Err(Error::ShapeMismatch {
            op: "slice_channels",
            left: a.shape.clone(),
            right: vec![start, end],
        });
    }
    let c = a.cols();
    let w = end - start;
    let mut data = Vec::with_capacity(a.rows() * w);
    for i in 0..a.rows() {
        data.extend_from_slice(&a.data[i * c + start..i * c + end]);
    }
    Ok(Tensor {
        shape: vec![a.rows(), w],
        data,
    })
}

/// Splits a matrix with an even column count into its first and second halves.
pub fn split_halves(op: &'static str, a: &Tensor) -> Result<(Tensor, Tensor)> {
    require_matrix(op, a)?;
    let c = a.cols();
    if !c.is_multiple_of(2) {
        return Err(Error::OddWidth { op, width: c });
    }
    Ok((slice_channels(a, 0, c / 2)?, slice_channels(a, c / 2, c)?))
}

/// Sum over rows: returns a length-`cols` vector.
pub fn column_sums(a: &Tensor) -> Vec<f64> {
    let c = a.cols();
    let mut out = vec![0.0; c];
    for i in 0..a.rows() {
        for (o, v) in out.iter_mut().zip(a.row(i)) {
            *o += v;
        }
    }
    out
}

/// Sum over columns: returns a length-`rows` vector.
pub fn row_sums(a: &Tensor) -> Vec<f64> {
    (0..a.rows())
        .map(|i| a.row(i).iter().fold(0.0, |s, v| s + v))
        .collect()
}
