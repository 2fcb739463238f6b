//! Per-token scalar maps laid out on the token grid.

use serde::Serialize;

use crate::conv::GridShape;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Normalization {
    Raw,
    /// `(v − min) / (max − min)`, all zeros for a constant map.
    MinMax,
    /// Signed, clipped to `[−1, 1]`.
    Clipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticMap {
    pub grid: GridShape,
    /// Row-major over the grid, one value per token.
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

impl DiagnosticMap {
    pub fn raw(grid: GridShape, values: Vec<f64>) -> Result<Self> {
        grid.check(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                op: "diagnostic_map",
            });
        }
        Ok(Self {
            grid,
            values,
            normalization: Normalization::Raw,
        })
    }

    pub fn min_max(self) -> Self {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let values = if hi > lo {
            self.values.iter().map(|v| (v - lo) / (hi - lo)).collect()
        } else {
            vec![0.0; self.values.len()]
        };
        Self {
            values,
            normalization: Normalization::MinMax,
            ..self
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.grid.token(row, col)]
    }

    /// Rows of the grid, top to bottom.
    pub fn grid_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.grid.width)
    }
}

fn per_token(x: &Tensor, grid: GridShape, f: impl Fn(&[f64]) -> f64) -> Result<DiagnosticMap> {
    if x.shape().len() != 2 {
        return Err(Error::Rank {
            op: "diagnostic_map",
            expected: 2,
            shape: x.shape().to_vec(),
        });
    }
    grid.check(x.rows())?;
    DiagnosticMap::raw(grid, (0..x.rows()).map(|i| f(x.row(i))).collect())
}

fn l2(row: &[f64]) -> f64 {
    row.iter().fold(0.0, |s, v| s + v * v).sqrt()
}

/// `‖x_i‖₂` per token.
pub fn token_norm_raw(x: &Tensor, grid: GridShape) -> Result<DiagnosticMap> {
    per_token(x, grid, l2)
}

/// `‖u_i‖₂` per token of the mixer's pre-residual update `u`, taken for the
/// input `x`.
pub fn delta_attn_raw(x: &Tensor, update: &Tensor, grid: GridShape) -> Result<DiagnosticMap> {
    if x.shape() != update.shape() {
        return Err(Error::ShapeMismatch {
            op: "delta_attn_map",
            left: x.shape().to_vec(),
            right: update.shape().to_vec(),
        });
    }
    token_norm_raw(update, grid)
}

/// Root mean square over channels per token, `‖x_i‖₂ / √C`.
pub fn channel_saliency_raw(x: &Tensor, grid: GridShape) -> Result<DiagnosticMap> {
    let c = x.cols();
    if c == 0 {
        return Err(Error::Config(
            "channel saliency needs at least one channel".into(),
        ));
    }
    per_token(x, grid, |row| l2(row) / (c as f64).sqrt())
}

pub fn token_norm_map(x: &Tensor, grid: GridShape) -> Result<DiagnosticMap> {
    Ok(token_norm_raw(x, grid)?.min_max())
}

pub fn delta_attn_map(x: &Tensor, update: &Tensor, grid: GridShape) -> Result<DiagnosticMap> {
    Ok(delta_attn_raw(x, update, grid)?.min_max())
}

pub fn channel_saliency_map(x: &Tensor, grid: GridShape) -> Result<DiagnosticMap> {
    Ok(channel_saliency_raw(x, grid)?.min_max())
}

/// `a − b` per token, clipped to `[−1, 1]`. Both maps must share a grid.
pub fn difference_map(a: &DiagnosticMap, b: &DiagnosticMap) -> Result<DiagnosticMap> {
    if a.grid != b.grid {
        return Err(Error::ShapeMismatch {
            op: "difference_map",
            left: vec![a.grid.height, a.grid.width],
            right: vec![b.grid.height, b.grid.width],
        });
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).clamp(-1.0, 1.0))
        .collect();
    Ok(DiagnosticMap {
        grid: a.grid,
        values,
        normalization: Normalization::Clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn grid(h: usize, w: usize) -> GridShape {
        GridShape::new(h, w).unwrap()
    }

    #[test]
    fn token_norm_by_hand() {
        let x = Tensor::from_rows(&[[3.0, 4.0], [0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]);
        let raw = token_norm_raw(&x, grid(2, 2)).unwrap();
        assert_eq!(raw.values, vec![5.0, 0.0, 1.0, 2.0]);
        let m = raw.min_max();
        assert_eq!(m.values, vec![1.0, 0.0, 0.2, 0.4]);
        assert_eq!(m.get(1, 1), 0.4);
    }

    #[test]
    fn one_hot_token() {
        let mut x = Tensor::zeros(&[6, 3]);
        x.data_mut()[4 * 3 + 1] = -2.5;
        let m = token_norm_map(&x, grid(2, 3)).unwrap();
        assert_eq!(m.values, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn saliency_closed_form() {
        let x = Tensor::from_rows(&[[3.0, 4.0]]);
        let s = channel_saliency_raw(&x, grid(1, 1)).unwrap();
        assert!((s.values[0] - 12.5f64.sqrt()).abs() <= 1e-15);
    }

    #[test]
    fn constant_map_normalizes_to_zeros() {
        let x = Tensor::full(&[6, 3], 2.0);
        let m = token_norm_map(&x, grid(2, 3)).unwrap();
        assert_eq!(m.values, vec![0.0; 6]);
    }

    #[test]
    fn saliency_is_scaled_norm() {
        let x = Rng::new(1).gaussian_matrix(12, 5);
        let g = grid(3, 4);
        let n = token_norm_raw(&x, g).unwrap();
        let s = channel_saliency_raw(&x, g).unwrap();
        for (a, b) in n.values.iter().zip(&s.values) {
            assert!((a / 5f64.sqrt() - b).abs() <= 1e-15);
        }
        // Same map once normalized.
        let (a, b) = (n.min_max(), s.min_max());
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalized_values_are_in_unit_interval() {
        let x = Rng::new(3).gaussian_matrix(16, 4);
        let u = Rng::new(4).gaussian_matrix(16, 4);
        let m = delta_attn_map(&x, &u, grid(4, 4)).unwrap();
        assert!(m.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(m.values.contains(&0.0) && m.values.contains(&1.0));
        let z = delta_attn_map(&x, &Tensor::zeros(&[16, 4]), grid(4, 4)).unwrap();
        assert_eq!(z.values, vec![0.0; 16]);
        assert_eq!(difference_map(&m, &m).unwrap().values, vec![0.0; 16]);
        assert!(delta_attn_map(&x, &Tensor::zeros(&[16, 3]), grid(4, 4)).is_err());
    }

    #[test]
    fn difference_is_clipped() {
        let g = grid(1, 3);
        let a = DiagnosticMap::raw(g, vec![3.0, 0.5, -2.0]).unwrap();
        let b = DiagnosticMap::raw(g, vec![0.0, 0.25, 0.0]).unwrap();
        assert_eq!(
            difference_map(&a, &b).unwrap().values,
            vec![1.0, 0.25, -1.0]
        );
        let c = DiagnosticMap::raw(grid(3, 1), vec![0.0; 3]).unwrap();
        assert!(difference_map(&a, &c).is_err());
    }

    #[test]
    fn grid_must_match_tokens() {
        let x = Tensor::zeros(&[5, 2]);
        assert!(matches!(
            token_norm_map(&x, grid(2, 3)),
            Err(Error::GridMismatch { .. })
        ));
    }
}
