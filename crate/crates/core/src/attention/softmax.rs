use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_transposed, scale, softmax_rows, Tensor};

pub(crate) fn check_qkv(op: &'static str, q: &Tensor, k: &Tensor, v: &Tensor) -> Result<()> {
    for t in [q, k, v] {
        if t.shape().len() != 2 {
            return Err(Error::Rank {
                op,
                expected: 2,
                shape: t.shape().to_vec(),
            });
        }
    }
    if q.cols() != k.cols() || k.rows() != v.rows() {
        return Err(Error::ShapeMismatch {
            op,
            left: q.shape().to_vec(),
            right: k.shape().to_vec(),
        });
    }
    Ok(())
}

/// Row-stochastic weights `softmax(QKᵀ / √d)`.
pub fn softmax_weights(q: &Tensor, k: &Tensor) -> Result<Tensor> {
    let d = q.cols();
    let logits = matmul_transposed(q, k)?;
    softmax_rows(&scale(&logits, 1.0 / (d as f64).sqrt())?)
}

/// Scaled dot-product attention `softmax(QKᵀ / √d) · V`.
pub fn softmax_attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    check_qkv("softmax_attention", q, k, v)?;
    matmul(&softmax_weights(q, k)?, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn single_token_returns_value() {
        let q = Tensor::from_rows(&[[0.3, -2.0]]);
        let k = Tensor::from_rows(&[[1.7, 0.4]]);
        let v = Tensor::from_rows(&[[1.0, 2.0]]);
        assert_eq!(softmax_attention(&q, &k, &v).unwrap(), v);
    }

    #[test]
    fn identical_keys_average_values() {
        let mut rng = Rng::new(4);
        let q = rng.gaussian_matrix(5, 3);
        let k = Tensor::from_fn(5, 3, |_, j| j as f64 - 1.0);
        let v = rng.gaussian_matrix(5, 2);
        let out = softmax_attention(&q, &k, &v).unwrap();
        for j in 0..2 {
            let mean = (0..5).map(|i| v.get(i, j)).sum::<f64>() / 5.0;
            for i in 0..5 {
                assert!((out.get(i, j) - mean).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn matches_two_pass_oracle() {
        let mut rng = Rng::new(11);
        let (q, k, v) = (
            rng.gaussian_matrix(4, 3),
            rng.gaussian_matrix(4, 3),
            rng.gaussian_matrix(4, 3),
        );
        // First pass: logits and row maxima. Second pass: weights and output.
        let mut expected = vec![0.0; 12];
        for i in 0..4 {
            let logits: Vec<f64> = (0..4)
                .map(|j| (0..3).map(|c| q.get(i, c) * k.get(j, c)).sum::<f64>() / 3f64.sqrt())
                .collect();
            let m = logits.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for c in 0..3 {
                expected[i * 3 + c] = (0..4).map(|j| e[j] / z * v.get(j, c)).sum();
            }
        }
        let out = softmax_attention(&q, &k, &v).unwrap();
        for (a, b) in out.data().iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_mismatched_widths() {
        let q = Tensor::zeros(&[2, 3]);
        let k = Tensor::zeros(&[2, 4]);
        assert!(softmax_attention(&q, &k, &Tensor::zeros(&[2, 1])).is_err());
        assert!(softmax_attention(&q, &q, &Tensor::zeros(&[3, 1])).is_err());
    }
}
