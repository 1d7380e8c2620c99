//! Trains the desk profile on a synthetic suite and reports held-out
//! correlation and FOIL accuracy.
//!
//! ```text
//! cargo run --release --example train_synthetic -- 2000
//! ```

use std::time::Instant;

use simvec_metric::eval::{foil_accuracy, foil_pairs_from, kendall_tau_c, score_all};
use simvec_metric::io::split_dataset;
use simvec_metric::model::{MetricConfig, MetricScorer};
use simvec_metric::synth::{generate, SynthConfig};
use simvec_metric::train::{train, Example, TrainConfig};

fn main() -> simvec_metric::Result<()> {
    let count = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mut suite = generate(SynthConfig::new(count, 7))?;
    suite.cache.normalize();

    let examples: Vec<Example> = suite
        .samples
        .iter()
        .map(|s| {
            Ok(Example {
                id: s.id.clone(),
                embeddings: suite.cache.require(&s.id)?.clone(),
                human_score: s.human_score,
            })
        })
        .collect::<simvec_metric::Result<_>>()?;
    let (tr, val, test) = split_dataset(examples, [0.8, 0.1, 0.1], 7)?;

    let cfg = MetricConfig::desk(suite.cache.d_clip(), suite.cache.d_text());
    let tc = TrainConfig {
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let out = train(&tr, &val, &cfg, &tc)?;
    for h in &out.history {
        println!(
            "epoch {:>2}  loss {:.5}  val tau_c {:>8}  {:>7.0} ms",
            h.epoch,
            h.mean_loss,
            h.val_tau_c.map_or("n/a".into(), |t| format!("{t:.4}")),
            h.wall_ms
        );
    }
    println!(
        "trained in {:.1} s, best epoch {:?}",
        t0.elapsed().as_secs_f64(),
        out.best_epoch
    );

    let scorer = MetricScorer::new(out.params, cfg)?;
    let inputs: Vec<_> = test.iter().map(|e| e.embeddings.clone()).collect();
    let truth: Vec<f64> = test.iter().filter_map(|e| e.human_score).collect();
    let scores = score_all(&scorer, &inputs, 4)?;
    println!("held-out tau_c  {:.4}", kendall_tau_c(&scores, &truth)?);

    let pairs = foil_pairs_from(&suite.foil, &suite.cache)?;
    let foil = foil_accuracy(&scorer, &pairs, 4)?;
    println!("foil accuracy   {:.2}% over {} pairs", foil.accuracy, pairs.len());
    Ok(())
}
