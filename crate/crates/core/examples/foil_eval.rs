//! Pairwise hallucination accuracy on synthetic FOIL pairs for three
//! scorers: the generator's latent rule, a constant and an untrained model.

use simvec_metric::eval::{foil_accuracy, foil_pairs_from};
use simvec_metric::io::EmbeddingSet;
use simvec_metric::model::{init_params, MetricConfig, MetricScorer};
use simvec_metric::synth::{generate, latent_score, SynthConfig};

fn main() -> simvec_metric::Result<()> {
    let mut suite = generate(SynthConfig::new(400, 3))?;
    suite.cache.normalize();
    let pairs = foil_pairs_from(&suite.foil, &suite.cache)?;

    let latent = |e: &EmbeddingSet| Ok(latent_score(e));
    let constant = |_: &EmbeddingSet| Ok(0.5);
    let cfg = MetricConfig::desk(suite.cache.d_clip(), suite.cache.d_text());
    let untrained = MetricScorer::new(init_params(&cfg, 0)?, cfg)?;

    for n_refs in [1, 4] {
        println!("{n_refs}-ref, {} pairs", pairs.len());
        println!(
            "  latent rule  {:6.2}%",
            foil_accuracy(&latent, &pairs, n_refs)?.accuracy
        );
        println!(
            "  constant     {:6.2}%  (ties count as failures)",
            foil_accuracy(&constant, &pairs, n_refs)?.accuracy
        );
        println!(
            "  untrained    {:6.2}%",
            foil_accuracy(&untrained, &pairs, n_refs)?.accuracy
        );
    }
    Ok(())
}
