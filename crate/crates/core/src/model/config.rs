use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::numeric::AdamConfig;

/// How local-context tags enter the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LceMode {
    /// Embedded tags multiply the global features position-wise.
    Dot,
    /// Embedded tags are added to the word embeddings before the global encoder.
    Additive,
    Off,
}

/// How the polarity head reduces the per-position features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Mean over valid positions.
    Mean,
    /// The first position only.
    First,
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $text),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(Error::Config(format!(
                        "{other:?} is not one of {}",
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

keyword_enum!(LceMode { Dot => "dot", Additive => "additive", Off => "off" });
keyword_enum!(Pooling { Mean => "mean", First => "first" });

/// Every hyperparameter of the network and its training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden size of both encoders.
    pub d_h: usize,
    pub heads: usize,
    /// Word-vector dimension.
    pub embed_dim: usize,
    pub dropout: f64,
    pub pad_len: usize,
    /// SRD threshold.
    pub alpha: usize,
    /// Weight of the local-context prediction loss.
    pub sigma: f64,
    /// L2 coefficient.
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lce_mode: LceMode,
    pub lcp_enabled: bool,
    pub cdm_enabled: bool,
    pub pooling: Pooling,
    pub freeze_embeddings: bool,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_h: 300,
            heads: 30,
            embed_dim: 300,
            dropout: 0.1,
            pad_len: 80,
            alpha: Dataset::Restaurant.default_alpha(),
            sigma: 0.5,
            lambda: 1e-4,
            learning_rate: 2e-3,
            batch_size: 32,
            epochs: 10,
            lce_mode: LceMode::Dot,
            lcp_enabled: true,
            cdm_enabled: true,
            pooling: Pooling::Mean,
            freeze_embeddings: true,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 1,
        }
    }
}

impl ModelConfig {
    /// Default settings with the dataset's SRD threshold.
    pub fn for_dataset(dataset: Dataset) -> Self {
        ModelConfig {
            alpha: dataset.default_alpha(),
            ..Default::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_h / self.heads
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.d_h == 0 || self.heads == 0 || self.embed_dim == 0 || self.pad_len == 0 {
            return fail("d_h, heads, embed_dim and pad_len must be positive".into());
        }
        if !self.d_h.is_multiple_of(self.heads) {
            return fail(format!("d_h = {} is not divisible by heads = {}", self.d_h, self.heads));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return fail(format!("sigma = {} outside [0, 1]", self.sigma));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout = {} outside [0, 1)", self.dropout));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda = {} must be non-negative", self.lambda));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate = {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return fail("Adam betas must lie in [0, 1)".into());
        }
        if self.adam_epsilon <= 0.0 {
            return fail("adam_epsilon must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults() {
        let c = ModelConfig::for_dataset(Dataset::Laptop);
        assert_eq!((c.d_h, c.heads, c.pad_len, c.alpha), (300, 30, 80, 5));
        assert_eq!(c.head_dim(), 10);
        assert_eq!(ModelConfig::for_dataset(Dataset::Restaurant).alpha, 3);
        assert_eq!(ModelConfig::for_dataset(Dataset::Twitter).alpha, 5);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            ModelConfig { sigma: 1.5, ..Default::default() },
            ModelConfig { sigma: -0.1, ..Default::default() },
            ModelConfig { heads: 7, ..Default::default() },
            ModelConfig { dropout: 1.0, ..Default::default() },
            ModelConfig { batch_size: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn keywords() {
        assert_eq!("additive".parse::<LceMode>().unwrap(), LceMode::Additive);
        assert!("sum".parse::<LceMode>().is_err());
        assert_eq!(Pooling::First.to_string(), "first");
    }
}
