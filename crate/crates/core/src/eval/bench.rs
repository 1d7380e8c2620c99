use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::protocols::Scorer;
use crate::error::{Error, Result};
use crate::io::EmbeddingSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    /// Number of timed scoring calls.
    pub count: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub total_ms: f64,
}

impl TimingStats {
    /// Summary of per-call durations in milliseconds. Percentiles use the
    /// nearest-rank rule.
    pub fn from_durations(mut ms: Vec<f64>) -> Result<Self> {
        if ms.is_empty() {
            return Err(Error::Domain("no timings".into()));
        }
        ms.sort_by(f64::total_cmp);
        let n = ms.len();
        let total: f64 = ms.iter().sum();
        let median = if n % 2 == 1 {
            ms[n / 2]
        } else {
            (ms[n / 2 - 1] + ms[n / 2]) / 2.0
        };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Ok(Self {
            count: n,
            mean_ms: total / n as f64,
            median_ms: median,
            p95_ms: ms[rank - 1],
            total_ms: total,
        })
    }
}

/// Wall-clock time per scoring call. One untimed warm-up pass over the
/// samples precedes `repetitions` timed passes; calls run sequentially.
pub fn bench_inference<S: Scorer + ?Sized>(
    scorer: &S,
    samples: &[EmbeddingSet],
    repetitions: usize,
) -> Result<TimingStats> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples to benchmark".into()));
    }
    if repetitions == 0 {
        return Err(Error::Domain("repetitions must be at least 1".into()));
    }
    for s in samples {
        std::hint::black_box(scorer.score(s)?);
    }
    let mut ms = Vec::with_capacity(samples.len() * repetitions);
    for _ in 0..repetitions {
        for s in samples {
            let t0 = Instant::now();
            std::hint::black_box(scorer.score(s)?);
            ms.push(t0.elapsed().as_secs_f64() * 1e3);
        }
    }
    TimingStats::from_durations(ms)
}
