//! Token grids and the two convolutions the local mixer is built from.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::{matmul, Tensor};

/// Spatial layout of a token sequence. Token `t` sits at
/// `(t / width, t % width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
}

impl GridShape {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Config(format!(
                "grid extents must be positive, got {height}x{width}"
            )));
        }
        Ok(Self { height, width })
    }

    /// The most square grid holding exactly `n` tokens.
    pub fn near_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("grid needs at least one token".into()));
        }
        let mut h = (n as f64).sqrt() as usize;
        while h > 1 && !n.is_multiple_of(h) {
            h -= 1;
        }
        Self::new(h.max(1), n / h.max(1))
    }

    pub fn tokens(&self) -> usize {
        self.height * self.width
    }

    pub fn position(&self, token: usize) -> (usize, usize) {
        (token / self.width, token % self.width)
    }

    pub fn token(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn check(&self, tokens: usize) -> Result<()> {
        if tokens != self.tokens() {
            return Err(Error::GridMismatch {
                tokens,
                height: self.height,
                width: self.width,
            });
        }
        Ok(())
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

impl FromStr for GridShape {
    type Err = Error;

    /// Parses `HxW`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("grid `{s}` is not of the form HxW"));
        let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let h = h.trim().parse().map_err(|_| bad())?;
        let w = w.trim().parse().map_err(|_| bad())?;
        Self::new(h, w)
    }
}

/// Depthwise 2-D cross-correlation with zero same-padding and stride 1.
///
/// `x` is `N×C` with `N == grid.tokens()`, `kernels` is `C×k×k` with `k` odd.
/// Channel `c` of the output only sees channel `c` of the input.
pub fn dwconv2d(x: &Tensor, grid: GridShape, kernels: &Tensor) -> Result<Tensor> {
    if x.shape().len() != 2 {
        return Err(Error::Rank {
            op: "dwconv2d",
            expected: 2,
            shape: x.shape().to_vec(),
        });
    }
    grid.check(x.rows())?;
    let channels = x.cols();
    let ks = kernels.shape();
    if ks.len() != 3 || ks[0] != channels || ks[1] != ks[2] {
        return Err(Error::ShapeMismatch {
            op: "dwconv2d",
            left: x.shape().to_vec(),
            right: ks.to_vec(),
        });
    }
    let k = ks[1];
    if k.is_multiple_of(2) {
        return Err(Error::EvenKernel(k));
    }
    let r = (k / 2) as isize;
    let (h, w) = (grid.height as isize, grid.width as isize);
    let xd = x.data();
    let kd = kernels.data();
    let mut out = vec![0.0; x.len()];
    for row in 0..h {
        for col in 0..w {
            let t = (row * w + col) as usize;
            let orow = &mut out[t * channels..(t + 1) * channels];
            for dy in -r..=r {
                let sy = row + dy;
                if sy < 0 || sy >= h {
                    continue;
                }
                for dx in -r..=r {
                    let sx = col + dx;
                    if sx < 0 || sx >= w {
                        continue;
                    }
                    let s = (sy * w + sx) as usize;
                    let tap = ((dy + r) as usize) * k + (dx + r) as usize;
                    let src = &xd[s * channels..(s + 1) * channels];
                    for (c, (o, &v)) in orow.iter_mut().zip(src).enumerate() {
                        *o += kd[c * k * k + tap] * v;
                    }
                }
            }
        }
    }
    let out = Tensor::new(x.shape().to_vec(), out)?;
    if !out.is_finite() {
        return Err(Error::NonFinite { op: "dwconv2d" });
    }
    Ok(out)
}

/// 1×1 convolution, i.e. a channel-mixing matrix product.
pub fn pwconv(x: &Tensor, w: &Tensor) -> Result<Tensor> {
    matmul(x, w)
}

/// `channels` copies of the `k×k` kernel with a single 1 at its centre.
pub fn delta_kernels(channels: usize, k: usize) -> Result<Tensor> {
    if k.is_multiple_of(2) {
        return Err(Error::EvenKernel(k));
    }
    let mut data = vec![0.0; channels * k * k];
    let centre = (k / 2) * k + k / 2;
    for c in 0..channels {
        data[c * k * k + centre] = 1.0;
    }
    Tensor::new(vec![channels, k, k], data)
}
