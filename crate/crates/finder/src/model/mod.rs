//! The formula-graph self-attention network.
//!
//! P attention-integrated message-passing layers refine per-atom states; each
//! layer is probed by its own global attention pool and the pooled vectors
//! combine by summation into a material embedding, which a convolutional plus
//! dense post-processing stack maps to a robust output (prediction mean and
//! log aleatoric scale).

mod bundle;
mod finder;
mod loss;
mod net;

pub use bundle::{load_bundle, save_bundle, ModelBundle, ModelManifest};
pub use finder::{FinderModel, ForwardTrace, OutputVars, RobustOutput};
pub use loss::robust_loss;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Domain;
use crate::spectra::SPECTRUM_POINTS;

/// What the output head predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Scalar,
    /// Frequency-dependent dielectric component on the fixed 3000-point grid.
    Spectrum,
}

impl TargetKind {
    pub fn output_width(self) -> usize {
        match self {
            TargetKind::Scalar => 1,
            TargetKind::Spectrum => SPECTRUM_POINTS,
        }
    }
}

/// Structural ablation toggles. Each removes or replaces one architecture
/// component; all of them reduce the trainable parameter count relative to
/// the reference model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Drop the alignment scores entirely; messages are the raw phi_m output.
    pub no_self_attention: bool,
    /// Replace element-wise self-attention with scalar softmax gating over
    /// each node's neighbors.
    pub soft_attention: bool,
    /// Remove all residual connections and keep a single pool after the last
    /// message-passing layer.
    pub no_residuals: bool,
    /// Replace attention pooling with an unweighted sum of transformed node
    /// states.
    pub sum_pool: bool,
    /// Wire the material embedding directly to the output head.
    pub no_post_net: bool,
}

impl Ablation {
    pub fn active_flags(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.no_self_attention {
            v.push("no_self_attention");
        }
        if self.soft_attention {
            v.push("soft_attention");
        }
        if self.no_residuals {
            v.push("no_residuals");
        }
        if self.sum_pool {
            v.push("sum_pool");
        }
        if self.no_post_net {
            v.push("no_post_net");
        }
        v
    }

    pub fn parse_flag(name: &str) -> Result<fn(&mut Ablation)> {
        Ok(match name {
            "no_self_attention" => |a| a.no_self_attention = true,
            "soft_attention" => |a| a.soft_attention = true,
            "no_residuals" => |a| a.no_residuals = true,
            "sum_pool" => |a| a.sum_pool = true,
            "no_post_net" => |a| a.no_post_net = true,
            other => {
                return Err(Error::Config(format!("unknown ablation flag '{other}'")))
            }
        })
    }
}

/// Architecture hyperparameters. Defaults follow the reference setup: two
/// message-passing layers, 200-wide states and keys, phi networks with 128
/// and 64 hidden units, 256-unit pool networks, one 64-filter width-3
/// convolution and dense layers of 512, 1024, 1024 and 256 units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinderConfig {
    /// Number of message-passing layers P (at most 3).
    pub message_passes: usize,
    /// Node state width D; also the key dimension of the attention nets.
    pub state_dim: usize,
    /// Width of the input element embeddings.
    pub embed_dim: usize,
    pub phi_hidden: (usize, usize),
    pub pool_hidden: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub post_dense: Vec<usize>,
    pub node_cap: usize,
    pub weight_decay: f64,
    pub domain: Domain,
    pub target: TargetKind,
    pub ablation: Ablation,
}

impl FinderConfig {
    pub fn defaults(domain: Domain, target: TargetKind, embed_dim: usize) -> Self {
        FinderConfig {
            message_passes: 2,
            state_dim: 200,
            embed_dim,
            phi_hidden: (128, 64),
            pool_hidden: 256,
            conv_filters: 64,
            conv_kernel: 3,
            post_dense: vec![512, 1024, 1024, 256],
            node_cap: 64,
            weight_decay: 1e-6,
            domain,
            target,
            ablation: Ablation::default(),
        }
    }

    /// A small architecture for smoke tests and desk-scale experiments.
    pub fn compact(domain: Domain, target: TargetKind, embed_dim: usize) -> Self {
        FinderConfig {
            message_passes: 2,
            state_dim: 16,
            embed_dim,
            phi_hidden: (24, 16),
            pool_hidden: 24,
            conv_filters: 4,
            conv_kernel: 3,
            post_dense: vec![48, 24],
            ..FinderConfig::defaults(domain, target, embed_dim)
        }
    }

    /// Key dimension of the attention networks, tied to the state width so
    /// the element-wise products and additions type-check without extra
    /// projections.
    pub fn key_dim(&self) -> usize {
        self.state_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.message_passes == 0 || self.message_passes > 3 {
            return Err(Error::Config(format!(
                "message_passes must be 1..=3, got {}",
                self.message_passes
            )));
        }
        if self.state_dim == 0 || self.embed_dim == 0 {
            return Err(Error::Config("state_dim and embed_dim must be positive".into()));
        }
        if self.conv_kernel % 2 == 0 || self.conv_kernel == 0 {
            return Err(Error::Config(format!(
                "conv_kernel must be odd, got {}",
                self.conv_kernel
            )));
        }
        if !self.ablation.no_post_net && (self.post_dense.is_empty() || self.conv_filters == 0) {
            return Err(Error::Config(
                "post net needs conv filters and at least one dense layer".into(),
            ));
        }
        if self.ablation.no_self_attention && self.ablation.soft_attention {
            return Err(Error::Config(
                "no_self_attention and soft_attention are mutually exclusive".into(),
            ));
        }
        if self.node_cap == 0 {
            return Err(Error::Config("node_cap must be positive".into()));
        }
        Ok(())
    }
}
