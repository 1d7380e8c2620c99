use super::backward::backward_into;
use super::config::{Aggregate, MetricConfig};
use super::forward::{forward, ForwardTrace};
use super::params::ModelParams;
use crate::error::Result;
use crate::io::EmbeddingSet;
use crate::nn::Real;
use crate::simvec::{token_inputs, SimVecConfig, SimVecMode};

/// One or more forward traces and the weights that fold their scores into
/// the sample score.
#[derive(Debug, Clone)]
pub struct SampleTrace<T> {
    pub parts: Vec<ForwardTrace<T>>,
    pub weights: Vec<T>,
    pub score: T,
}

/// Scores a sample. With `aggregate = none` the encoder sees all references
/// at once; otherwise each reference is scored alone and folded.
pub fn forward_sample<T: Real>(
    e: &EmbeddingSet,
    params: &ModelParams<T>,
    cfg: &MetricConfig,
) -> Result<(T, SampleTrace<T>)> {
    match cfg.model.aggregate {
        Aggregate::None => {
            let inputs = token_inputs(e, &cfg.simvec)?;
            let (score, trace) = forward(&inputs, params, &cfg.model)?;
            Ok((
                score,
                SampleTrace {
                    parts: vec![trace],
                    weights: vec![T::one()],
                    score,
                },
            ))
        }
        agg => {
            e.validate()?;
            if e.n_refs() > cfg.simvec.max_refs {
                // reuse the layout check for the error message
                token_inputs(e, &cfg.simvec)?;
            }
            let per_ref = SimVecConfig {
                mode: match cfg.simvec.mode {
                    SimVecMode::RawFeatures => SimVecMode::RawFeatures,
                    _ => SimVecMode::SingleRef,
                },
                ..cfg.simvec
            };
            let mut parts = Vec::with_capacity(e.n_refs());
            let mut scores = Vec::with_capacity(e.n_refs());
            for i in 0..e.n_refs() {
                let single = e.select_refs(&[i])?;
                let inputs = token_inputs(&single, &per_ref)?;
                let (s, trace) = forward(&inputs, params, &cfg.model)?;
                scores.push(s);
                parts.push(trace);
            }
            let (score, weights) = fold(agg, &scores);
            Ok((score, SampleTrace { parts, weights, score }))
        }
    }
}

fn fold<T: Real>(agg: Aggregate, scores: &[T]) -> (T, Vec<T>) {
    let mut weights = vec![T::zero(); scores.len()];
    match agg {
        Aggregate::Max | Aggregate::None => {
            let mut best = 0;
            for (i, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = i;
                }
            }
            weights[best] = T::one();
            (scores[best], weights)
        }
        Aggregate::Mean => {
            let n = T::lit(scores.len() as f64);
            let mut sum = T::zero();
            for &s in scores {
                sum += s;
            }
            weights.fill(T::one() / n);
            (sum / n, weights)
        }
    }
}

pub fn score_sample<T: Real>(e: &EmbeddingSet, params: &ModelParams<T>, cfg: &MetricConfig) -> Result<T> {
    Ok(forward_sample(e, params, cfg)?.0)
}

/// Accumulates `dscore`-scaled parameter gradients of a sample score.
pub fn backward_sample<T: Real>(
    trace: &SampleTrace<T>,
    dscore: T,
    params: &ModelParams<T>,
    grads: &mut ModelParams<T>,
) -> Result<()> {
    for (part, &w) in trace.parts.iter().zip(&trace.weights) {
        if w != T::zero() {
            backward_into(part, dscore * w, params, grads)?;
        }
    }
    Ok(())
}

/// A trained metric bundled with its configuration.
#[derive(Debug, Clone)]
pub struct MetricScorer<T> {
    pub params: ModelParams<T>,
    pub config: MetricConfig,
}

impl<T: Real> MetricScorer<T> {
    pub fn new(params: ModelParams<T>, config: MetricConfig) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config)?;
        Ok(Self { params, config })
    }

    pub fn score(&self, e: &EmbeddingSet) -> Result<T> {
        score_sample(e, &self.params, &self.config)
    }
}
