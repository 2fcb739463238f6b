use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Activation;

/// Nonlinearity applied to the gate projection of each GDLA head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GateKind {
    #[default]
    Silu,
    Sigmoid,
}

impl GateKind {
    pub fn activation(self) -> Activation {
        match self {
            GateKind::Silu => Activation::Silu,
            GateKind::Sigmoid => Activation::Sigmoid,
        }
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "silu" => Ok(GateKind::Silu),
            "sigmoid" => Ok(GateKind::Sigmoid),
            _ => Err(Error::UnknownKind {
                what: "gate",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.activation().name())
    }
}

/// Nonnegative feature map for kernelized attention. Only `ELU(x) + 1` is
/// implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FeatureMap {
    #[default]
    Elu1,
}

impl FeatureMap {
    pub fn activation(self) -> Activation {
        match self {
            FeatureMap::Elu1 => Activation::Elu1,
        }
    }
}

/// Which parts of a GDLA mixer are switched on. Turning everything off
/// leaves RMS-normalized multi-head linear attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Components {
    /// Two-subspace subtraction; when off each head runs plain linear
    /// attention over its full query/key width.
    pub differential: bool,
    /// Multiplicative gate on the normalized head output.
    pub gate: bool,
    /// Parallel local token-mixing branch; when off its contribution to the
    /// fusion is zero.
    pub local: bool,
}

impl Components {
    pub const FULL: Components = Components {
        differential: true,
        gate: true,
        local: true,
    };
}

impl Default for Components {
    fn default() -> Self {
        Self::FULL
    }
}

/// Attention hyperparameters shared by every mechanism in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeadConfig {
    pub d_model: usize,
    pub heads: usize,
    /// Per-head width; queries and keys split into two halves of `d_head / 2`.
    pub d_head: usize,
    /// 1-based depth of the layer, drives the differential λ schedule.
    pub layer_index: u32,
    pub gate: GateKind,
    pub feature_map: FeatureMap,
}

impl HeadConfig {
    pub fn new(d_model: usize, heads: usize, d_head: usize) -> Result<Self> {
        let cfg = Self {
            d_model,
            heads,
            d_head,
            layer_index: 1,
            gate: GateKind::Silu,
            feature_map: FeatureMap::Elu1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_layer(mut self, layer_index: u32) -> Result<Self> {
        self.layer_index = layer_index;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gate(mut self, gate: GateKind) -> Self {
        self.gate = gate;
        self
    }

    /// Concatenated head width `heads · d_head`.
    pub fn d_k(&self) -> usize {
        self.heads * self.d_head
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.d_head == 0 {
            return Err(Error::Config(format!(
                "d_model, heads and d_head must be positive (got {}, {}, {})",
                self.d_model, self.heads, self.d_head
            )));
        }
        if !self.d_head.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "d_head = {} must be even",
                self.d_head
            )));
        }
        if self.layer_index < 1 {
            return Err(Error::Config("layer_index must be at least 1".into()));
        }
        Ok(())
    }

    /// Block-level constraint: each branch's multi-head output must be
    /// `d_model` wide so the fusion matrix is `2·d_model × d_model`.
    pub fn validate_block(&self) -> Result<()> {
        self.validate()?;
        if self.d_k() != self.d_model {
            return Err(Error::Config(format!(
                "heads·d_head = {} must equal d_model = {}",
                self.d_k(),
                self.d_model
            )));
        }
        Ok(())
    }
}
