use super::local::{local_branch_with, LocalMixers};
use crate::attention::{gdla_multihead_with, Components, GdlaHeadParams, HeadConfig};
use crate::conv::GridShape;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{concat_channels, concat_channels_all, matmul, Tensor};

type Pick = fn(&GdlaHeadParams) -> &Tensor;

/// Global gated-differential branch, local token-mixing branch and fusion
/// projection of one GDLA mixer.
#[derive(Debug, Clone, PartialEq)]
pub struct GdlaMixer {
    pub global: Vec<GdlaHeadParams>,
    /// Local heads; their `lambda` vectors are the independent `λ′`.
    pub local: Vec<GdlaHeadParams>,
    pub local_mix: LocalMixers,
    /// `2·d_model × d_model`
    pub w_o: Tensor,
    pub components: Components,
}

impl GdlaMixer {
    /// Draw order: global heads, local heads, local mixers, fusion matrix.
    pub fn init(cfg: &HeadConfig, dwc_kernel: usize, rng: &mut Rng) -> Result<Self> {
        cfg.validate_block()?;
        let global = (0..cfg.heads)
            .map(|_| GdlaHeadParams::init(cfg, rng))
            .collect::<Result<Vec<_>>>()?;
        let local = (0..cfg.heads)
            .map(|_| GdlaHeadParams::init(cfg, rng))
            .collect::<Result<Vec<_>>>()?;
        let local_mix = LocalMixers::init(cfg.d_k(), dwc_kernel, rng)?;
        let w_o = rng.fan_in_matrix(2 * cfg.d_model, cfg.d_model);
        Ok(Self {
            global,
            local,
            local_mix,
            w_o,
            components: Components::FULL,
        })
    }

    pub fn zeros(cfg: &HeadConfig, dwc_kernel: usize) -> Result<Self> {
        cfg.validate_block()?;
        Ok(Self {
            global: vec![GdlaHeadParams::zeros(cfg); cfg.heads],
            local: vec![GdlaHeadParams::zeros(cfg); cfg.heads],
            local_mix: LocalMixers::zeros(cfg.d_k(), dwc_kernel)?,
            w_o: Tensor::zeros(&[2 * cfg.d_model, cfg.d_model]),
            components: Components::FULL,
        })
    }

    pub fn check(&self, cfg: &HeadConfig) -> Result<()> {
        cfg.validate_block()?;
        if self.w_o.shape() != [2 * cfg.d_model, cfg.d_model] {
            return Err(Error::ShapeMismatch {
                op: "gdla_mixer",
                left: self.w_o.shape().to_vec(),
                right: vec![2 * cfg.d_model, cfg.d_model],
            });
        }
        let k = self.local_mix.q.kernel_size();
        if k != 3 && k != 5 {
            return Err(Error::Config(format!(
                "local mixer kernel size must be 3 or 5, got {k}"
            )));
        }
        Ok(())
    }

    pub fn global_branch(&self, x: &Tensor, cfg: &HeadConfig) -> Result<Tensor> {
        gdla_multihead_with(x, &self.global, cfg, self.components)
    }

    pub fn local_branch(&self, x: &Tensor, grid: GridShape, cfg: &HeadConfig) -> Result<Tensor> {
        if !self.components.local {
            return Ok(Tensor::zeros(&[x.rows(), cfg.d_k()]));
        }
        local_branch_with(x, grid, &self.local, &self.local_mix, cfg, self.components)
    }

    /// Every argument the `ELU + 1` feature map is evaluated at for input
    /// `x`: global then local queries and keys. The map is only C¹ where one
    /// of these crosses zero.
    pub fn feature_map_inputs(&self, x: &Tensor, grid: GridShape) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for h in &self.global {
            out.extend_from_slice(matmul(x, &h.w_q)?.data());
            out.extend_from_slice(matmul(x, &h.w_k)?.data());
        }
        if self.components.local {
            let paths: [(Pick, _); 2] = [
                (|h| &h.w_q, &self.local_mix.q),
                (|h| &h.w_k, &self.local_mix.k),
            ];
            for (pick, mixer) in paths {
                let parts = self
                    .local
                    .iter()
                    .map(|h| matmul(x, pick(h)))
                    .collect::<Result<Vec<_>>>()?;
                out.extend_from_slice(mixer.apply(&concat_channels_all(&parts)?, grid)?.data());
            }
        }
        Ok(out)
    }

    /// Fused, pre-residual mixer output.
    pub fn forward(&self, x: &Tensor, grid: GridShape, cfg: &HeadConfig) -> Result<Tensor> {
        self.check(cfg)?;
        let global = self.global_branch(x, cfg)?;
        let local = self.local_branch(x, grid, cfg)?;
        fuse(&global, &local, &self.w_o)
    }
}

/// `[global ‖ local] · W_O` with `W_O: 2·d_model × d_model`.
pub fn fuse(global_out: &Tensor, local_out: &Tensor, w_o: &Tensor) -> Result<Tensor> {
    if global_out.shape() != local_out.shape() {
        return Err(Error::ShapeMismatch {
            op: "fuse",
            left: global_out.shape().to_vec(),
            right: local_out.shape().to_vec(),
        });
    }
    if w_o.rows() != 2 * global_out.cols() {
        return Err(Error::ShapeMismatch {
            op: "fuse",
            left: global_out.shape().to_vec(),
            right: w_o.shape().to_vec(),
        });
    }
    matmul(&concat_channels(global_out, local_out)?, w_o)
}
