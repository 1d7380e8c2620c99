//! Per-sample inference timing for the desk profile at both precisions.
//!
//! ```text
//! cargo run --release --example bench -- 2000
//! ```

use simvec_metric::eval::bench_inference;
use simvec_metric::model::{init_params, MetricConfig, MetricScorer};
use simvec_metric::synth::{generate, SynthConfig};

fn main() -> simvec_metric::Result<()> {
    let count = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let mut suite = generate(SynthConfig::new(count, 1))?;
    suite.cache.normalize();
    let sets: Vec<_> = suite.cache.iter().map(|(_, e)| e.clone()).take(count).collect();

    let cfg = MetricConfig::desk(suite.cache.d_clip(), suite.cache.d_text());
    let params = init_params(&cfg, 0)?;
    let wide = MetricScorer::new(params.clone(), cfg)?;
    let narrow = MetricScorer::new(params.cast::<f32>(), cfg)?;

    for (name, stats) in [
        ("f64", bench_inference(&wide, &sets, 1)?),
        ("f32", bench_inference(&narrow, &sets, 1)?),
    ] {
        println!(
            "{name}: {} calls  mean {:.3} ms  median {:.3} ms  p95 {:.3} ms",
            stats.count, stats.mean_ms, stats.median_ms, stats.p95_ms
        );
    }
    Ok(())
}
