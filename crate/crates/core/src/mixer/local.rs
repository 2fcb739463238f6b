//! Local token mixing: depthwise `k×k` convolution followed by a pointwise
//! channel mix, applied to the projected queries, keys, values and gate
//! logits before they enter the GDLA head computation.

use crate::attention::{gated_head_from_projections, Components, GdlaHeadParams, HeadConfig};
use crate::conv::{delta_kernels, dwconv2d, pwconv, GridShape};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{concat_channels_all, matmul, slice_channels, Tensor};

/// `pw ∘ dw` on `channels` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMixer {
    /// `channels × k × k`
    pub dw: Tensor,
    /// `channels × channels`
    pub pw: Tensor,
}

impl LocalMixer {
    pub fn init(channels: usize, kernel: usize, rng: &mut Rng) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::EvenKernel(kernel));
        }
        // Depthwise fan-in is k².
        let bound = 1.0 / kernel as f64;
        let data = (0..channels * kernel * kernel)
            .map(|_| rng.uniform_in(-bound, bound))
            .collect();
        Ok(Self {
            dw: Tensor::new(vec![channels, kernel, kernel], data)?,
            pw: rng.fan_in_matrix(channels, channels),
        })
    }

    /// Delta depthwise kernels and identity pointwise matrix.
    pub fn identity(channels: usize, kernel: usize) -> Result<Self> {
        Ok(Self {
            dw: delta_kernels(channels, kernel)?,
            pw: Tensor::identity(channels),
        })
    }

    pub fn zeros(channels: usize, kernel: usize) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::EvenKernel(kernel));
        }
        Ok(Self {
            dw: Tensor::zeros(&[channels, kernel, kernel]),
            pw: Tensor::zeros(&[channels, channels]),
        })
    }

    pub fn kernel_size(&self) -> usize {
        self.dw.shape().get(1).copied().unwrap_or(0)
    }

    pub fn apply(&self, x: &Tensor, grid: GridShape) -> Result<Tensor> {
        local_mix(x, grid, &self.dw, &self.pw)
    }
}

/// One local mixer per projected path.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMixers {
    pub q: LocalMixer,
    pub k: LocalMixer,
    pub v: LocalMixer,
    pub g: LocalMixer,
}

impl LocalMixers {
    /// Draw order q, k, v, g; each draws its depthwise taps then its pointwise matrix.
    pub fn init(channels: usize, kernel: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            q: LocalMixer::init(channels, kernel, rng)?,
            k: LocalMixer::init(channels, kernel, rng)?,
            v: LocalMixer::init(channels, kernel, rng)?,
            g: LocalMixer::init(channels, kernel, rng)?,
        })
    }

    pub fn identity(channels: usize, kernel: usize) -> Result<Self> {
        let m = LocalMixer::identity(channels, kernel)?;
        Ok(Self {
            q: m.clone(),
            k: m.clone(),
            v: m.clone(),
            g: m,
        })
    }

    pub fn zeros(channels: usize, kernel: usize) -> Result<Self> {
        let m = LocalMixer::zeros(channels, kernel)?;
        Ok(Self {
            q: m.clone(),
            k: m.clone(),
            v: m.clone(),
            g: m,
        })
    }
}

/// `pwconv(dwconv2d(x))`.
pub fn local_mix(x: &Tensor, grid: GridShape, dw_kernels: &Tensor, pw: &Tensor) -> Result<Tensor> {
    pwconv(&dwconv2d(x, grid, dw_kernels)?, pw)
}

/// GDLA multi-head computation on locally mixed projections.
///
/// Each path's per-head projections are concatenated to `N × d_k`, mixed,
/// and sliced back per head; head `i` owns channels `i·d_head..(i+1)·d_head`.
pub fn local_branch(
    x: &Tensor,
    grid: GridShape,
    heads: &[GdlaHeadParams],
    mixers: &LocalMixers,
    cfg: &HeadConfig,
) -> Result<Tensor> {
    local_branch_with(x, grid, heads, mixers, cfg, Components::FULL)
}

pub fn local_branch_with(
    x: &Tensor,
    grid: GridShape,
    heads: &[GdlaHeadParams],
    mixers: &LocalMixers,
    cfg: &HeadConfig,
    components: Components,
) -> Result<Tensor> {
    cfg.validate()?;
    grid.check(x.rows())?;
    if heads.len() != cfg.heads {
        return Err(Error::Config(format!(
            "expected {} local heads, got {}",
            cfg.heads,
            heads.len()
        )));
    }
    for h in heads {
        h.check(cfg)?;
    }
    let mixed = |pick: fn(&GdlaHeadParams) -> &Tensor, mixer: &LocalMixer| -> Result<Tensor> {
        let parts = heads
            .iter()
            .map(|h| matmul(x, pick(h)))
            .collect::<Result<Vec<_>>>()?;
        mixer.apply(&concat_channels_all(&parts)?, grid)
    };
    let q = mixed(|h| &h.w_q, &mixers.q)?;
    let k = mixed(|h| &h.w_k, &mixers.k)?;
    let v = mixed(|h| &h.w_v, &mixers.v)?;
    let g = mixed(|h| &h.w_g, &mixers.g)?;
    let dh = cfg.d_head;
    let outs = heads
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let (a, b) = (i * dh, (i + 1) * dh);
            gated_head_from_projections(
                &slice_channels(&q, a, b)?,
                &slice_channels(&k, a, b)?,
                &slice_channels(&v, a, b)?,
                &slice_channels(&g, a, b)?,
                &h.lambda,
                cfg,
                components,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    concat_channels_all(&outs)
}
