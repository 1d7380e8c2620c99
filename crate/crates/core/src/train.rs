//! Huber-loss regression onto human judgments with Adam, seeded mini-batch
//! shuffling and early stopping on validation Kendall τc.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::kendall_tau_c;
use crate::io::EmbeddingSet;
use crate::model::{backward_sample, forward_sample, init_params, score_sample, MetricConfig, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub huber_delta: f64,
    pub max_epochs: usize,
    pub patience_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-6,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 16,
            huber_delta: 0.5,
            max_epochs: 50,
            patience_epochs: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.adam_epsilon > 0.0
            && self.huber_delta > 0.0
            && self.batch_size > 0
            && self.patience_epochs > 0;
        if !ok {
            return Err(Error::Config(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

/// A training or validation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub embeddings: EmbeddingSet,
    pub human_score: Option<f64>,
}

/// Huber loss and its derivative with respect to the prediction.
pub fn huber_loss(y_hat: f64, y: f64, delta: f64) -> Result<(f64, f64)> {
    if !y_hat.is_finite() || !y.is_finite() {
        return Err(Error::Numeric {
            what: "in Huber loss inputs".into(),
        });
    }
    if delta <= 0.0 {
        return Err(Error::Domain("Huber delta must be positive".into()));
    }
    let e = y_hat - y;
    if e.abs() < delta {
        Ok((0.5 * e * e, e))
    } else {
        Ok((delta * (e.abs() - 0.5 * delta), delta * e.signum()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams<f64>,
    pub first_moment: ModelParams<f64>,
    pub second_moment: ModelParams<f64>,
    pub step: u64,
    pub best_tau: Option<f64>,
    pub epochs_since_improvement: usize,
    pub rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(params: ModelParams<f64>, seed: u64) -> Self {
        let zeros = params.zeros_like();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            params,
            step: 0,
            best_tau: None,
            epochs_since_improvement: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(state: &mut TrainState, grads: &ModelParams<f64>, cfg: &TrainConfig) -> Result<()> {
    let shapes_match = {
        let p = state.params.tensors();
        let g = grads.tensors();
        p.len() == g.len() && p.iter().zip(&g).all(|(a, b)| a.len() == b.len())
    };
    if !shapes_match {
        return Err(Error::Consistency("gradient shapes differ from parameters".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let params = state.params.tensors_mut();
    let m = state.first_moment.tensors_mut();
    let v = state.second_moment.tensors_mut();
    for (((p, m), v), g) in params.into_iter().zip(m).zip(v).zip(grads.tensors()) {
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// `None` when τc is undefined (e.g. constant predictions).
    pub val_tau_c: Option<f64>,
    pub wall_ms: f64,
}

/// Patience-based stopping on a strictly improving metric.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: Option<usize>,
    since: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            best_epoch: None,
            since: 0,
        }
    }

    /// Records the metric for `epoch` (1-based). Only strict improvement
    /// resets the counter.
    pub fn observe(&mut self, epoch: usize, value: Option<f64>) -> StopDecision {
        let improved = match (value, self.best) {
            (Some(v), Some(b)) => v > b,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if improved {
            self.best = value;
            self.best_epoch = Some(epoch);
            self.since = 0;
            return StopDecision::Improved;
        }
        self.since += 1;
        if self.since >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the highest validation τc (initial
    /// parameters if no epoch produced a defined τc).
    pub params: ModelParams<f64>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    /// Validation scores produced by `params`, in validation-set order.
    pub best_val_scores: Vec<f64>,
}

fn targets(set: &[Example], what: &str) -> Result<Vec<f64>> {
    set.iter()
        .map(|e| {
            e.human_score
                .ok_or_else(|| Error::Validation(format!("{what} sample {:?} has no human_score", e.id)))
        })
        .collect()
}

fn validation_scores(params: &ModelParams<f64>, val: &[Example], cfg: &MetricConfig) -> Result<Vec<f64>> {
    val.iter().map(|e| score_sample(&e.embeddings, params, cfg)).collect()
}

/// Trains from a seeded initialization; see [`train_from`].
pub fn train(train_set: &[Example], val_set: &[Example], cfg: &MetricConfig, tc: &TrainConfig) -> Result<TrainOutcome> {
    let params = init_params(cfg, tc.seed)?;
    train_from(params, train_set, val_set, cfg, tc)
}

/// Runs epochs of shuffled mini-batches, validating after each, until
/// validation τc fails to improve for `patience_epochs` epochs in a row or
/// `max_epochs` is reached.
pub fn train_from(
    params: ModelParams<f64>,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &MetricConfig,
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    tc.validate()?;
    cfg.validate()?;
    params.check_shapes(cfg)?;
    let y_train = targets(train_set, "training")?;
    let y_val = targets(val_set, "validation")?;
    if val_set.is_empty() {
        return Err(Error::Domain("validation set is empty".into()));
    }
    if train_set.is_empty() {
        return Err(Error::Domain("training set is empty".into()));
    }

    let mut state = TrainState::new(params, tc.seed);
    let mut best_params = state.params.clone();
    let mut best_val_scores = validation_scores(&best_params, val_set, cfg)?;
    let mut stopper = EarlyStopping::new(tc.patience_epochs);
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=tc.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut state.rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(tc.batch_size) {
            let mut grads = state.params.zeros_like();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (y_hat, trace) = forward_sample(&train_set[i].embeddings, &state.params, cfg)?;
                let (loss, dloss) = huber_loss(y_hat, y_train[i], tc.huber_delta)?;
                loss_sum += loss;
                backward_sample(&trace, dloss * scale, &state.params, &mut grads)?;
            }
            adam_step(&mut state, &grads, tc)?;
        }
        let scores = validation_scores(&state.params, val_set, cfg)?;
        let tau = kendall_tau_c(&scores, &y_val).ok();
        history.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / train_set.len() as f64,
            val_tau_c: tau,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        let decision = stopper.observe(epoch, tau);
        state.best_tau = stopper.best();
        match decision {
            StopDecision::Improved => {
                state.epochs_since_improvement = 0;
                best_params = state.params.clone();
                best_val_scores = scores;
            }
            StopDecision::Continue => state.epochs_since_improvement += 1,
            StopDecision::Stop => break,
        }
    }

    Ok(TrainOutcome {
        params: best_params,
        history,
        best_epoch: stopper.best_epoch(),
        best_val_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_examples() {
        assert_eq!(huber_loss(0.4, 0.4, 0.5).unwrap(), (0.0, 0.0));
        let (l, g) = huber_loss(0.8, 0.5, 0.5).unwrap();
        assert!((l - 0.045).abs() < 1e-12 && (g - 0.3).abs() < 1e-12);
        let (l, g) = huber_loss(1.0, 0.0, 0.5).unwrap();
        assert_eq!((l, g), (0.375, 0.5));
        let (l, g) = huber_loss(0.0, 1.0, 0.5).unwrap();
        assert_eq!((l, g), (0.375, -0.5));
        assert!(huber_loss(f64::NAN, 0.0, 0.5).is_err());
        assert!(huber_loss(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn early_stopping_sequence() {
        let mut es = EarlyStopping::new(1);
        assert_eq!(es.observe(1, Some(0.3)), StopDecision::Improved);
        assert_eq!(es.observe(2, Some(0.5)), StopDecision::Improved);
        assert_eq!(es.observe(3, Some(0.4)), StopDecision::Stop);
        assert_eq!(es.best_epoch(), Some(2));
    }

    #[test]
    fn equal_value_is_not_an_improvement() {
        let mut es = EarlyStopping::new(2);
        es.observe(1, Some(0.5));
        assert_eq!(es.observe(2, Some(0.5)), StopDecision::Continue);
        assert_eq!(es.observe(3, None), StopDecision::Stop);
        assert_eq!(es.best_epoch(), Some(1));
    }

    fn scalar_state(seed: u64) -> TrainState {
        let cfg = MetricConfig::desk(2, 2);
        TrainState::new(init_params(&cfg, seed).unwrap(), seed)
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let mut s = scalar_state(0);
        let before = s.params.clone();
        let zeros = before.zeros_like();
        adam_step(&mut s, &zeros, &TrainConfig::default()).unwrap();
        assert_eq!(s.params, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut s = scalar_state(0);
        let before = s.params.clone();
        let mut g = before.zeros_like();
        g.cls[0] = 1.0;
        let tc = TrainConfig {
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        adam_step(&mut s, &g, &tc).unwrap();
        // m̂ = 1, v̂ = 1, so the step is lr / (1 + ε)
        let moved = before.cls[0] - s.params.cls[0];
        assert!((moved - 1e-3 / (1.0 + 1e-8)).abs() < 1e-15, "{moved}");
        assert_eq!(s.params.cls[1], before.cls[1]);
    }

    #[test]
    fn adam_rejects_mismatched_shapes() {
        let mut s = scalar_state(0);
        let other = init_params(&MetricConfig::desk(3, 2), 0).unwrap();
        assert!(matches!(
            adam_step(&mut s, &other, &TrainConfig::default()),
            Err(Error::Consistency(_))
        ));
    }
}
