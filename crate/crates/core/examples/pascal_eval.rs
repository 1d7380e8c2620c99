//! PASCAL-50S style majority agreement with per-category breakdown.

use simvec_metric::eval::{pascal50s_accuracy, pascal_items_from};
use simvec_metric::io::EmbeddingSet;
use simvec_metric::synth::{generate, latent_score, SynthConfig};

fn main() -> simvec_metric::Result<()> {
    let mut suite = generate(SynthConfig::new(800, 5))?;
    suite.cache.normalize();
    let items = pascal_items_from(&suite.pascal, &suite.cache)?;

    // the latent rule plus a small caption-dependent jitter
    let noisy = |e: &EmbeddingSet| Ok(latent_score(e) + 0.05 * f64::from(e.cand_text[0]));
    let outcome = pascal50s_accuracy(&noisy, &items, 5, 0)?;
    for (cat, acc) in &outcome.per_category {
        println!("{cat}  {acc:6.2}%  ({} items)", outcome.counts[cat]);
    }
    println!("mean {:6.2}%", outcome.mean);
    Ok(())
}
