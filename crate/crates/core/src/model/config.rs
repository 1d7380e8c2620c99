use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{DEFAULT_D_CLIP, DEFAULT_D_TEXT};
use crate::simvec::{SimVecConfig, SimVecMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// Pre-norm transformer encoder over the token sequence, CLS pooled.
    Transformer,
    /// No encoder: mean of the non-CLS tokens into a two-hidden-layer MLP.
    MlpAblation,
}

/// How per-reference scores are folded when references are scored one at
/// a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    None,
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ffn_mult: usize,
    pub head_hidden: usize,
    pub arch: Arch,
    pub aggregate: Aggregate,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || self.ffn_mult == 0 || self.head_hidden == 0 {
            return Err(Error::Config("model widths and head count must be positive".into()));
        }
        if self.arch == Arch::Transformer && self.n_layers == 0 {
            return Err(Error::Config("transformer needs at least one layer".into()));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn ffn_hidden(&self) -> usize {
        self.ffn_mult * self.d_model
    }

    /// Encoder layers actually instantiated for this architecture.
    pub fn encoder_layers(&self) -> usize {
        match self.arch {
            Arch::Transformer => self.n_layers,
            Arch::MlpAblation => 0,
        }
    }

    pub fn head_hidden_layers(&self) -> usize {
        match self.arch {
            Arch::Transformer => 1,
            Arch::MlpAblation => 2,
        }
    }
}

/// Everything needed to rebuild a scorer: feature layout plus model shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub simvec: SimVecConfig,
    pub model: ModelConfig,
}

/// Named size presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// d_model 64, 3 layers, 4 heads.
    Desk,
    /// d_model 512, 3 layers, 8 heads.
    Full,
}

/// Ablation selector shared by the library and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    Full,
    RawFeatures,
    MlpAblation,
    AggregateMax,
    AggregateMean,
}

impl std::str::FromStr for MetricMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(MetricMode::Full),
            "raw_features" | "raw-features" => Ok(MetricMode::RawFeatures),
            "mlp_ablation" | "mlp-ablation" => Ok(MetricMode::MlpAblation),
            "aggregate:max" => Ok(MetricMode::AggregateMax),
            "aggregate:mean" => Ok(MetricMode::AggregateMean),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for MetricMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetricMode::Full => "full",
            MetricMode::RawFeatures => "raw_features",
            MetricMode::MlpAblation => "mlp_ablation",
            MetricMode::AggregateMax => "aggregate:max",
            MetricMode::AggregateMean => "aggregate:mean",
        })
    }
}

impl MetricConfig {
    pub fn new(profile: Profile, mode: MetricMode, d_clip: usize, d_text: usize, max_refs: usize) -> Self {
        let (d_model, n_heads) = match profile {
            Profile::Desk => (64, 4),
            Profile::Full => (512, 8),
        };
        let mut model = ModelConfig {
            d_model,
            n_layers: 3,
            n_heads,
            ffn_mult: 4,
            head_hidden: d_model,
            arch: Arch::Transformer,
            aggregate: Aggregate::None,
        };
        let mut simvec = SimVecConfig {
            d_clip,
            d_text,
            d_model,
            max_refs,
            mode: SimVecMode::Full,
        };
        match mode {
            MetricMode::Full => {}
            MetricMode::RawFeatures => simvec.mode = SimVecMode::RawFeatures,
            MetricMode::MlpAblation => model.arch = Arch::MlpAblation,
            MetricMode::AggregateMax => model.aggregate = Aggregate::Max,
            MetricMode::AggregateMean => model.aggregate = Aggregate::Mean,
        }
        Self { simvec, model }
    }

    /// The ablation selector this configuration was built from.
    pub fn mode(&self) -> MetricMode {
        match (self.model.arch, self.model.aggregate, self.simvec.mode) {
            (Arch::MlpAblation, _, _) => MetricMode::MlpAblation,
            (_, Aggregate::Max, _) => MetricMode::AggregateMax,
            (_, Aggregate::Mean, _) => MetricMode::AggregateMean,
            (_, _, SimVecMode::RawFeatures) => MetricMode::RawFeatures,
            _ => MetricMode::Full,
        }
    }

    pub fn desk(d_clip: usize, d_text: usize) -> Self {
        Self::new(Profile::Desk, MetricMode::Full, d_clip, d_text, 16)
    }

    pub fn validate(&self) -> Result<()> {
        self.simvec.validate()?;
        self.model.validate()?;
        if self.simvec.d_model != self.model.d_model {
            return Err(Error::Config(format!(
                "feature d_model {} differs from model d_model {}",
                self.simvec.d_model, self.model.d_model
            )));
        }
        if self.model.aggregate != Aggregate::None && self.simvec.mode == SimVecMode::SingleRef {
            return Err(Error::Config(
                "aggregate scoring builds its own per-reference layout; use mode full or raw_features".into(),
            ));
        }
        Ok(())
    }

    /// Total trainable scalars, from shapes alone.
    pub fn param_count(&self) -> usize {
        let s = &self.simvec;
        let m = &self.model;
        let d = m.d_model;
        let f = m.ffn_hidden();
        let h = m.head_hidden;
        let projections = (s.d_clip + 1) * d + (s.d_text + 1) * d;
        let cls = d;
        let per_layer = 2 * d + 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d);
        let head = match m.arch {
            Arch::Transformer => (d * h + h) + (h + 1),
            Arch::MlpAblation => (d * h + h) + (h * h + h) + (h + 1),
        };
        projections + cls + m.encoder_layers() * per_layer + head
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self::desk(DEFAULT_D_CLIP, DEFAULT_D_TEXT)
    }
}
