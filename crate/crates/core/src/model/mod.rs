//! Transformer encoder over similarity tokens, CLS pooling, MLP head and
//! sigmoid, with exact manual backpropagation. Also hosts the MLP ablation
//! and the per-reference aggregate scorers.

mod backward;
mod checkpoint;
mod config;
mod forward;
mod params;
mod scoring;

pub use backward::{backward, backward_into, Gradients};
pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, round_to_stored, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{Aggregate, Arch, MetricConfig, MetricMode, ModelConfig, Profile};
pub use forward::{forward, forward_tokens, ForwardTrace, HeadTrace, LayerTrace};
pub use params::{init_params, EncoderLayer, HeadMlp, ModelParams};
pub use scoring::{backward_sample, forward_sample, score_sample, MetricScorer, SampleTrace};
