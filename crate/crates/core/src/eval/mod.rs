//! Evaluation protocols: rank correlation with human judgments, pairwise
//! hallucination accuracy, PASCAL-50S pairwise accuracy, and timing.

mod bench;
mod kendall;
mod protocols;

pub use bench::{bench_inference, TimingStats};
pub use kendall::{kendall_tau_b, kendall_tau_c, pair_counts, PairCounts};
pub use protocols::{
    foil_accuracy, foil_pairs_from, pairwise_accuracy, pascal50s_accuracy, pascal_items_from, score_all, Category,
    Choice, FoilOutcome, FoilPair, FoilRecord, Pascal50sItem, PascalOutcome, PascalRecord, ScoredPair, Scorer,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Serializable result of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: String,
    pub metrics: BTreeMap<String, f64>,
    pub sample_count: usize,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingStats>,
}

impl EvalReport {
    pub fn new(protocol: impl Into<String>, sample_count: usize) -> Self {
        Self {
            protocol: protocol.into(),
            metrics: BTreeMap::new(),
            sample_count,
            config: serde_json::Value::Null,
            timing: None,
        }
    }

    pub fn with_metric(mut self, name: impl Into<String>, value: f64) -> Self {
        self.metrics.insert(name.into(), value);
        self
    }

    /// Fixed-width table for terminals.
    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<24}{:>14}\n", format!("[{}]", self.protocol), "value");
        out.push_str(&format!("{:<24}{:>14}\n", "samples", self.sample_count));
        for (k, v) in &self.metrics {
            out.push_str(&format!("{k:<24}{v:>14.4}\n"));
        }
        if let Some(t) = &self.timing {
            for (k, v) in [("mean_ms", t.mean_ms), ("median_ms", t.median_ms), ("p95_ms", t.p95_ms)] {
                out.push_str(&format!("{k:<24}{v:>14.4}\n"));
            }
        }
        out
    }
}
