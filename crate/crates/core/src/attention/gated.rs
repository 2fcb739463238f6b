//! Gated differential linear attention.
//!
//! Per head: queries and keys are split into two subspaces, each subspace
//! runs associative linear attention against the shared values with its own
//! normalizer, the second branch is subtracted channel-wise with a learnable
//! vector `λ`, the difference is RMS-normalized, and the result is multiplied
//! by a data-dependent gate `act(X·W_G)`. Heads are concatenated without any
//! further rescale.

use super::config::{Components, HeadConfig};
use super::differential::lambda_init;
use super::linear::{linear_attention, LinearMode};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{
    activation, concat_channels_all, hadamard, matmul, rmsnorm_rows, scale_columns, split_halves,
    sub, Tensor, RMS_EPS,
};

/// Learnable arrays of one GDLA head.
#[derive(Debug, Clone, PartialEq)]
pub struct GdlaHeadParams {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub w_g: Tensor,
    /// Channel-wise subtraction strength, length `d_head`.
    pub lambda: Vec<f64>,
}

impl GdlaHeadParams {
    /// Draw order W_Q, W_K, W_V, W_G; every λ entry starts at `lambda_init(l)`.
    pub fn init(cfg: &HeadConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            w_q: rng.fan_in_matrix(cfg.d_model, cfg.d_head),
            w_k: rng.fan_in_matrix(cfg.d_model, cfg.d_head),
            w_v: rng.fan_in_matrix(cfg.d_model, cfg.d_head),
            w_g: rng.fan_in_matrix(cfg.d_model, cfg.d_head),
            lambda: vec![lambda_init(cfg.layer_index)?; cfg.d_head],
        })
    }

    pub fn zeros(cfg: &HeadConfig) -> Self {
        let z = Tensor::zeros(&[cfg.d_model, cfg.d_head]);
        Self {
            w_q: z.clone(),
            w_k: z.clone(),
            w_v: z.clone(),
            w_g: z,
            lambda: vec![0.0; cfg.d_head],
        }
    }

    pub fn check(&self, cfg: &HeadConfig) -> Result<()> {
        let want = [cfg.d_model, cfg.d_head];
        for w in [&self.w_q, &self.w_k, &self.w_v, &self.w_g] {
            if w.shape() != want {
                return Err(Error::ShapeMismatch {
                    op: "gated_head",
                    left: w.shape().to_vec(),
                    right: want.to_vec(),
                });
            }
        }
        if self.lambda.len() != cfg.d_head {
            return Err(Error::Config(format!(
                "λ has length {}, expected d_head = {}",
                self.lambda.len(),
                cfg.d_head
            )));
        }
        Ok(())
    }
}

/// The two branch outputs `(A₁, A₂)` before subtraction.
pub fn diff_linear_branches(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<(Tensor, Tensor)> {
    let (q1, q2) = split_halves("diff_linear_attention", q)?;
    let (k1, k2) = split_halves("diff_linear_attention", k)?;
    Ok((
        linear_attention(&q1, &k1, v, LinearMode::Associative)?,
        linear_attention(&q2, &k2, v, LinearMode::Associative)?,
    ))
}

/// `A₁ − λ ⊙ A₂` with `λ` broadcast across tokens.
pub fn diff_linear_attention(q: &Tensor, k: &Tensor, v: &Tensor, lambda: &[f64]) -> Result<Tensor> {
    if lambda.len() != v.cols() {
        return Err(Error::ShapeMismatch {
            op: "diff_linear_attention",
            left: v.shape().to_vec(),
            right: vec![lambda.len()],
        });
    }
    let (a1, a2) = diff_linear_branches(q, k, v)?;
    sub(&a1, &scale_columns(&a2, lambda)?)
}

/// Gated head from already projected `Q, K, V` and raw gate logits.
pub fn gated_head_from_projections(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    gate_logits: &Tensor,
    lambda: &[f64],
    cfg: &HeadConfig,
    components: Components,
) -> Result<Tensor> {
    let mixed = if components.differential {
        diff_linear_attention(q, k, v, lambda)?
    } else {
        linear_attention(q, k, v, LinearMode::Associative)?
    };
    let normed = rmsnorm_rows(&mixed, RMS_EPS)?;
    if components.gate {
        hadamard(&normed, &activation(gate_logits, cfg.gate.activation())?)
    } else {
        Ok(normed)
    }
}

pub fn gated_head(x: &Tensor, params: &GdlaHeadParams, cfg: &HeadConfig) -> Result<Tensor> {
    gated_head_with(x, params, cfg, Components::FULL)
}

pub fn gated_head_with(
    x: &Tensor,
    params: &GdlaHeadParams,
    cfg: &HeadConfig,
    components: Components,
) -> Result<Tensor> {
    cfg.validate()?;
    params.check(cfg)?;
    let q = matmul(x, &params.w_q)?;
    let k = matmul(x, &params.w_k)?;
    let v = matmul(x, &params.w_v)?;
    let g = matmul(x, &params.w_g)?;
    gated_head_from_projections(&q, &k, &v, &g, &params.lambda, cfg, components)
}

/// Channel concatenation of the gated heads in head order: `N × heads·d_head`.
pub fn gdla_multihead(x: &Tensor, heads: &[GdlaHeadParams], cfg: &HeadConfig) -> Result<Tensor> {
    gdla_multihead_with(x, heads, cfg, Components::FULL)
}

pub fn gdla_multihead_with(
    x: &Tensor,
    heads: &[GdlaHeadParams],
    cfg: &HeadConfig,
    components: Components,
) -> Result<Tensor> {
    if heads.len() != cfg.heads {
        return Err(Error::Config(format!(
            "expected {} heads, got {}",
            cfg.heads,
            heads.len()
        )));
    }
    let outs = heads
        .iter()
        .map(|p| gated_head_with(x, p, cfg, components))
        .collect::<Result<Vec<_>>>()?;
    concat_channels_all(&outs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::config::GateKind;
    use crate::tensor::{concat_channels, scale};

    fn qkv(seed: u64, n: usize, d: usize, dv: usize) -> (Tensor, Tensor, Tensor) {
        let mut rng = Rng::new(seed);
        (
            rng.gaussian_matrix(n, d),
            rng.gaussian_matrix(n, d),
            rng.gaussian_matrix(n, dv),
        )
    }

    #[test]
    fn zero_lambda_gives_branch_one() {
        let (q, k, v) = qkv(1, 9, 6, 4);
        let out = diff_linear_attention(&q, &k, &v, &[0.0; 4]).unwrap();
        let (q1, _) = split_halves("t", &q).unwrap();
        let (k1, _) = split_halves("t", &k).unwrap();
        let a1 = linear_attention(&q1, &k1, &v, LinearMode::Associative).unwrap();
        assert!(out.max_abs_diff(&a1).unwrap() <= 1e-12);
    }

    #[test]
    fn identical_subspaces_cancel() {
        let mut rng = Rng::new(2);
        let h = rng.gaussian_matrix(7, 3);
        let g = rng.gaussian_matrix(7, 3);
        let v = rng.gaussian_matrix(7, 5);
        let q = concat_channels(&h, &h).unwrap();
        let k = concat_channels(&g, &g).unwrap();
        let out = diff_linear_attention(&q, &k, &v, &[1.0; 5]).unwrap();
        assert!(out.max_abs() <= 1e-12);
    }

    #[test]
    fn branches_match_quadratic_oracle() {
        let (q, k, v) = qkv(3, 12, 8, 8);
        let (a1, a2) = diff_linear_branches(&q, &k, &v).unwrap();
        let (q1, q2) = split_halves("t", &q).unwrap();
        let (k1, k2) = split_halves("t", &k).unwrap();
        let o1 = linear_attention(&q1, &k1, &v, LinearMode::Quadratic).unwrap();
        let o2 = linear_attention(&q2, &k2, &v, LinearMode::Quadratic).unwrap();
        assert!(a1.max_abs_diff(&o1).unwrap() <= 1e-12);
        assert!(a2.max_abs_diff(&o2).unwrap() <= 1e-12);
    }

    #[test]
    fn lambda_length_and_width_checked() {
        let (q, k, v) = qkv(4, 3, 4, 2);
        assert!(diff_linear_attention(&q, &k, &v, &[1.0; 3]).is_err());
        let (q, k, v) = qkv(4, 3, 3, 2);
        assert!(matches!(
            diff_linear_attention(&q, &k, &v, &[1.0; 2]),
            Err(Error::OddWidth { .. })
        ));
    }

    #[test]
    fn zero_gate_weights() {
        let cfg = HeadConfig::new(6, 1, 4).unwrap();
        let mut rng = Rng::new(5);
        let mut p = GdlaHeadParams::init(&cfg, &mut rng).unwrap();
        p.w_g = Tensor::zeros(&[6, 4]);
        let x = rng.gaussian_matrix(8, 6);
        let silu = gated_head(&x, &p, &cfg).unwrap();
        assert_eq!(silu.max_abs(), 0.0);

        let sig_cfg = cfg.with_gate(GateKind::Sigmoid);
        let sig = gated_head(&x, &p, &sig_cfg).unwrap();
        let q = matmul(&x, &p.w_q).unwrap();
        let k = matmul(&x, &p.w_k).unwrap();
        let v = matmul(&x, &p.w_v).unwrap();
        let y = diff_linear_attention(&q, &k, &v, &p.lambda).unwrap();
        let expected = scale(&rmsnorm_rows(&y, RMS_EPS).unwrap(), 0.5).unwrap();
        assert!(sig.max_abs_diff(&expected).unwrap() <= 1e-15);
    }

    #[test]
    fn lambda_initialized_from_schedule() {
        let cfg = HeadConfig::new(4, 1, 4).unwrap().with_layer(3).unwrap();
        let p = GdlaHeadParams::init(&cfg, &mut Rng::new(0)).unwrap();
        assert!(p.lambda.iter().all(|&l| l == lambda_init(3).unwrap()));
    }

    #[test]
    fn multihead_concatenates_in_order() {
        let cfg = HeadConfig::new(6, 3, 2).unwrap();
        let mut rng = Rng::new(6);
        let heads: Vec<_> = (0..3)
            .map(|_| GdlaHeadParams::init(&cfg, &mut rng).unwrap())
            .collect();
        let x = rng.gaussian_matrix(5, 6);
        let out = gdla_multihead(&x, &heads, &cfg).unwrap();
        assert_eq!(out.shape(), &[5, 6]);

        let rotated = vec![heads[2].clone(), heads[0].clone(), heads[1].clone()];
        let out_r = gdla_multihead(&x, &rotated, &cfg).unwrap();
        let block =
            |t: &Tensor, h: usize| crate::tensor::slice_channels(t, 2 * h, 2 * h + 2).unwrap();
        assert_eq!(block(&out_r, 0), block(&out, 2));
        assert_eq!(block(&out_r, 1), block(&out, 0));
        assert_eq!(block(&out_r, 2), block(&out, 1));

        assert!(gdla_multihead(&x, &heads[..2], &cfg).is_err());
    }

    #[test]
    fn single_head_multihead_is_gated_head() {
        let cfg = HeadConfig::new(4, 1, 4).unwrap();
        let mut rng = Rng::new(7);
        let p = GdlaHeadParams::init(&cfg, &mut rng).unwrap();
        let x = rng.gaussian_matrix(6, 4);
        assert_eq!(
            gdla_multihead(&x, std::slice::from_ref(&p), &cfg).unwrap(),
            gated_head(&x, &p, &cfg).unwrap()
        );
    }
}
