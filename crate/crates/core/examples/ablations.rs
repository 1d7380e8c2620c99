//! Trains every ablation on one synthetic suite and compares held-out
//! correlation and FOIL accuracy.
//!
//! ```text
//! cargo run --release --example ablations -- 1000
//! ```

use simvec_metric::eval::{foil_accuracy, foil_pairs_from, kendall_tau_c, score_all};
use simvec_metric::io::split_dataset;
use simvec_metric::model::{MetricConfig, MetricMode, MetricScorer, Profile};
use simvec_metric::synth::{generate, SynthConfig};
use simvec_metric::train::{train, Example, TrainConfig};

fn main() -> simvec_metric::Result<()> {
    let count = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let mut suite = generate(SynthConfig::new(count, 2))?;
    suite.cache.normalize();
    let examples = suite
        .samples
        .iter()
        .map(|s| {
            Ok(Example {
                id: s.id.clone(),
                embeddings: suite.cache.require(&s.id)?.clone(),
                human_score: s.human_score,
            })
        })
        .collect::<simvec_metric::Result<Vec<_>>>()?;
    let (tr, val, test) = split_dataset(examples, [0.8, 0.1, 0.1], 2)?;
    let pairs = foil_pairs_from(&suite.foil, &suite.cache)?;
    let tc = TrainConfig {
        learning_rate: 1e-3,
        seed: 2,
        ..TrainConfig::default()
    };

    println!(
        "{:<16}{:>10}{:>10}{:>10}{:>8}",
        "mode", "tau_c", "foil@1", "foil@4", "epochs"
    );
    for mode in [
        MetricMode::MlpAblation,
        MetricMode::RawFeatures,
        MetricMode::AggregateMax,
        MetricMode::AggregateMean,
        MetricMode::Full,
    ] {
        let cfg = MetricConfig::new(Profile::Desk, mode, suite.cache.d_clip(), suite.cache.d_text(), 16);
        let out = train(&tr, &val, &cfg, &tc)?;
        let scorer = MetricScorer::new(out.params, cfg)?;
        let inputs: Vec<_> = test.iter().map(|e| e.embeddings.clone()).collect();
        let truth: Vec<f64> = test.iter().filter_map(|e| e.human_score).collect();
        let tau = kendall_tau_c(&score_all(&scorer, &inputs, 4)?, &truth)?;
        let f1 = foil_accuracy(&scorer, &pairs, 1)?.accuracy;
        let f4 = foil_accuracy(&scorer, &pairs, 4)?.accuracy;
        println!(
            "{:<16}{tau:>10.4}{f1:>10.1}{f4:>10.1}{:>8}",
            mode.to_string(),
            out.history.len()
        );
    }
    Ok(())
}
