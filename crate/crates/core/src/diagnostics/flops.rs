//! Analytic operation counts.
//!
//! Every stage count is kept as a polynomial `a·N² + b·N + c` in the token
//! count, so the absence of quadratic terms is checked symbolically rather
//! than by timing. A multiply-add is two FLOPs (one multiply, one addition).
//! Nonlinearity evaluations (`exp`, `sqrt`, sigmoid, feature maps) are
//! counted per stage but kept out of the headline total.

use std::ops::{Add, Mul};

use serde::Serialize;

use super::workload::Workload;
use crate::error::Result;
use crate::mixer::{BlockConfig, FfnKind};

/// `quadratic·N² + linear·N + constant`
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Poly {
    pub quadratic: u64,
    pub linear: u64,
    pub constant: u64,
}

impl Poly {
    pub const ZERO: Poly = Poly {
        quadratic: 0,
        linear: 0,
        constant: 0,
    };

    pub fn n2(c: usize) -> Self {
        Self {
            quadratic: c as u64,
            ..Self::ZERO
        }
    }

    pub fn n(c: usize) -> Self {
        Self {
            linear: c as u64,
            ..Self::ZERO
        }
    }

    pub fn constant(c: usize) -> Self {
        Self {
            constant: c as u64,
            ..Self::ZERO
        }
    }

    pub fn at(&self, n: usize) -> u64 {
        let n = n as u64;
        self.quadratic * n * n + self.linear * n + self.constant
    }
}

impl Add for Poly {
    type Output = Poly;

    fn add(self, o: Poly) -> Poly {
        Poly {
            quadratic: self.quadratic + o.quadratic,
            linear: self.linear + o.linear,
            constant: self.constant + o.constant,
        }
    }
}

impl Mul<usize> for Poly {
    type Output = Poly;

    fn mul(self, k: usize) -> Poly {
        let k = k as u64;
        Poly {
            quadratic: self.quadratic * k,
            linear: self.linear * k,
            constant: self.constant * k,
        }
    }
}

impl std::iter::Sum for Poly {
    fn sum<I: Iterator<Item = Poly>>(iter: I) -> Poly {
        iter.fold(Poly::ZERO, Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub name: String,
    pub multiplies: Poly,
    pub additions: Poly,
    pub divisions: Poly,
    pub nonlinear: Poly,
}

impl Stage {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            multiplies: Poly::ZERO,
            additions: Poly::ZERO,
            divisions: Poly::ZERO,
            nonlinear: Poly::ZERO,
        }
    }

    fn mul(mut self, p: Poly) -> Self {
        self.multiplies = self.multiplies + p;
        self
    }

    fn add(mut self, p: Poly) -> Self {
        self.additions = self.additions + p;
        self
    }

    fn div(mut self, p: Poly) -> Self {
        self.divisions = self.divisions + p;
        self
    }

    fn nonlin(mut self, p: Poly) -> Self {
        self.nonlinear = self.nonlinear + p;
        self
    }

    /// Multiply-adds over a product whose count is `p`.
    fn mac(self, p: Poly) -> Self {
        self.mul(p).add(p)
    }

    pub fn flops(&self) -> Poly {
        self.multiplies + self.additions + self.divisions
    }

    pub fn is_quadratic(&self) -> bool {
        self.flops().quadratic != 0 || self.nonlinear.quadratic != 0
    }
}

/// Configuration point a report was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlopPoint {
    pub n: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_head: usize,
    pub dwc_kernel: usize,
}

/// Stage counts evaluated at a concrete `N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageCount {
    pub stage: String,
    pub multiplies: u64,
    pub additions: u64,
    pub divisions: u64,
    pub nonlinear: u64,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlopReport {
    pub workload: Workload,
    pub point: FlopPoint,
    pub stages: Vec<Stage>,
}

impl FlopReport {
    pub fn total_poly(&self) -> Poly {
        self.stages.iter().map(Stage::flops).sum()
    }

    /// Headline FLOPs: multiplies + additions + divisions over all stages.
    pub fn total(&self) -> u64 {
        self.evaluated().iter().map(|s| s.flops).sum()
    }

    pub fn total_nonlinear(&self) -> u64 {
        self.evaluated().iter().map(|s| s.nonlinear).sum()
    }

    pub fn quadratic_stages(&self) -> Vec<&str> {
        self.stages
            .iter()
            .filter(|s| s.is_quadratic())
            .map(|s| s.name.as_str())
            .collect()
    }

    pub fn evaluated(&self) -> Vec<StageCount> {
        let n = self.point.n;
        self.stages
            .iter()
            .map(|s| StageCount {
                stage: s.name.clone(),
                multiplies: s.multiplies.at(n),
                additions: s.additions.at(n),
                divisions: s.divisions.at(n),
                nonlinear: s.nonlinear.at(n),
                flops: s.flops().at(n),
            })
            .collect()
    }
}

/// Token-wise product `N×k · k×m`.
fn dense(name: &str, k: usize, m: usize) -> Stage {
    Stage::new(name).mac(Poly::n(k * m))
}

/// Row RMS normalization of `N × width` split into `groups` rows per token.
fn rmsnorm(name: &str, width: usize, groups: usize) -> Stage {
    Stage::new(name)
        .mul(Poly::n(width))
        .add(Poly::n(width + groups))
        .nonlin(Poly::n(groups))
        .div(Poly::n(width))
}

fn softmax_layer(c: &BlockConfig) -> Vec<Stage> {
    let (d, h, dh) = (c.head.d_model, c.head.heads, c.head.d_head);
    let dk = h * dh;
    vec![
        dense("qkv_projection", d, 3 * dk),
        Stage::new("scores_qk")
            .mac(Poly::n2(h * dh))
            .mul(Poly::n2(h)),
        Stage::new("softmax")
            .add(Poly::n2(2 * h))
            .div(Poly::n2(h))
            .nonlin(Poly::n2(h)),
        Stage::new("weights_v").mac(Poly::n2(h * dh)),
        dense("output_projection", dk, d),
    ]
}

fn linear_layer(c: &BlockConfig) -> Vec<Stage> {
    let (d, h, dh) = (c.head.d_model, c.head.heads, c.head.d_head);
    let dk = h * dh;
    vec![
        dense("qkv_projection", d, 3 * dk),
        Stage::new("feature_map").nonlin(Poly::n(2 * dk)),
        Stage::new("kv_state")
            .mac(Poly::n(h * dh * dh))
            .add(Poly::n(h * dh)),
        Stage::new("query_state").mac(Poly::n(h * dh * dh)),
        Stage::new("normalizer")
            .mac(Poly::n(h * dh))
            .div(Poly::n(h * dh)),
        dense("output_projection", dk, d),
    ]
}

fn diff_layer(c: &BlockConfig) -> Vec<Stage> {
    let (d, h, dh) = (c.head.d_model, c.head.heads, c.head.d_head);
    let (dk, half) = (h * dh, dh / 2);
    vec![
        dense("qkv_projection", d, 3 * dk),
        Stage::new("lambda")
            .mac(Poly::constant(2 * half))
            .add(Poly::constant(2))
            .nonlin(Poly::constant(2)),
        Stage::new("scores_qk")
            .mac(Poly::n2(2 * h * half))
            .mul(Poly::n2(2 * h)),
        Stage::new("softmax")
            .add(Poly::n2(4 * h))
            .div(Poly::n2(2 * h))
            .nonlin(Poly::n2(2 * h)),
        Stage::new("subtract_maps").mac(Poly::n2(h)),
        Stage::new("weights_v").mac(Poly::n2(h * dh)),
        rmsnorm("head_rmsnorm", dk, h),
        Stage::new("head_rescale").mul(Poly::n(dk)),
        dense("output_projection", dk, d),
    ]
}

/// GDLA heads on already projected (and possibly locally mixed) tensors.
fn gdla_heads(prefix: &str, c: &BlockConfig) -> Vec<Stage> {
    let (h, dh) = (c.head.heads, c.head.d_head);
    let dk = h * dh;
    let comps = c.components;
    let mut stages = vec![Stage::new(format!("{prefix}_feature_map")).nonlin(Poly::n(2 * dk))];
    // Each branch: state φ(K)ᵀV and numerator φ(Q)·state over `width`
    // feature channels, key sum, normalizer, division over `dh` values.
    let branch = |width: usize, copies: usize| {
        Stage::new(format!("{prefix}_linear_attention"))
            .mac(Poly::n(2 * width * dh * copies * h))
            .add(Poly::n(width * copies * h))
            .mac(Poly::n(width * copies * h))
            .div(Poly::n(dh * copies * h))
    };
    if comps.differential {
        stages.push(branch(dh / 2, 2));
        stages.push(Stage::new(format!("{prefix}_lambda_subtract")).mac(Poly::n(dk)));
    } else {
        stages.push(branch(dh, 1));
    }
    stages.push(rmsnorm(&format!("{prefix}_head_rmsnorm"), dk, h));
    if comps.gate {
        stages.push(
            Stage::new(format!("{prefix}_gate"))
                .nonlin(Poly::n(dk))
                .mul(Poly::n(dk)),
        );
    }
    stages
}

fn gdla_mixer(c: &BlockConfig) -> Vec<Stage> {
    let d = c.head.d_model;
    let dk = c.head.d_k();
    let paths = if c.components.gate { 4 } else { 3 };
    let mut stages = vec![dense("global_projection", d, paths * dk)];
    stages.extend(gdla_heads("global", c));
    if c.components.local {
        let k2 = c.dwc_kernel * c.dwc_kernel;
        stages.push(dense("local_projection", d, paths * dk));
        stages.push(Stage::new("local_depthwise").mac(Poly::n(paths * dk * k2)));
        stages.push(dense("local_pointwise", dk, paths * dk));
        stages.extend(gdla_heads("local", c));
    }
    stages.push(dense("fusion", 2 * d, d));
    stages
}

fn ffn(c: &BlockConfig) -> Vec<Stage> {
    let d = c.head.d_model;
    let hidden = c.ffn.d_hidden(d);
    match c.ffn.kind {
        FfnKind::Mlp => vec![
            dense("ffn_in", d, hidden),
            Stage::new("ffn_silu").nonlin(Poly::n(hidden)),
            dense("ffn_out", hidden, d),
        ],
        FfnKind::SwiGlu => vec![
            dense("ffn_in", d, 2 * hidden),
            Stage::new("ffn_silu_gate")
                .nonlin(Poly::n(hidden))
                .mul(Poly::n(hidden)),
            dense("ffn_out", hidden, d),
        ],
        FfnKind::MixFfn => {
            let k2 = c.ffn.dw_kernel * c.ffn.dw_kernel;
            vec![
                dense("ffn_in", d, 2 * hidden),
                Stage::new("ffn_silu").nonlin(Poly::n(2 * hidden)),
                Stage::new("ffn_depthwise").mac(Poly::n(2 * hidden * k2)),
                Stage::new("ffn_silu_gate")
                    .nonlin(Poly::n(hidden))
                    .mul(Poly::n(hidden)),
                dense("ffn_out", hidden, d),
            ]
        }
    }
}

pub fn flop_count(workload: Workload, config: &BlockConfig, n: usize) -> Result<FlopReport> {
    config.head.validate()?;
    let stages = match workload {
        Workload::Softmax => softmax_layer(config),
        Workload::Linear => linear_layer(config),
        Workload::Diff => diff_layer(config),
        Workload::Gdla => {
            config.validate()?;
            gdla_mixer(config)
        }
        Workload::GdlaBlock => {
            config.validate()?;
            let d = config.head.d_model;
            let mut s = vec![rmsnorm("mixer_prenorm", d, 1)];
            s.extend(gdla_mixer(config));
            s.push(Stage::new("mixer_residual").add(Poly::n(d)));
            s.push(rmsnorm("ffn_prenorm", d, 1));
            s.extend(ffn(config));
            s.push(Stage::new("ffn_residual").add(Poly::n(d)));
            s
        }
    };
    Ok(FlopReport {
        workload,
        point: FlopPoint {
            n,
            d_model: config.head.d_model,
            heads: config.head.heads,
            d_head: config.head.d_head,
            dwc_kernel: config.dwc_kernel,
        },
        stages,
    })
}
