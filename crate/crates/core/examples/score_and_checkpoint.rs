//! Initializes a desk-profile model, scores a sample in f64 and f32, and
//! round-trips the parameters through a checkpoint.

use simvec_metric::io::stub_embed;
use simvec_metric::io::EmbeddingSet;
use simvec_metric::model::{init_params, load_checkpoint, save_checkpoint, MetricConfig, MetricScorer};

fn main() -> simvec_metric::Result<()> {
    let cfg = MetricConfig::desk(512, 768);
    println!("desk profile: {} parameters", cfg.param_count());

    let stub = |k: &str, d| stub_embed(k, d, 1);
    let e = EmbeddingSet {
        image: stub("image", 512)?,
        cand_clip: stub("cand", 512)?,
        refs_clip: vec![stub("r0", 512)?, stub("r1", 512)?],
        cand_text: stub("cand/text", 768)?,
        refs_text: vec![stub("r0/text", 768)?, stub("r1/text", 768)?],
    };

    let params = init_params(&cfg, 0)?;
    let wide = MetricScorer::new(params.clone(), cfg)?;
    let narrow = MetricScorer::new(params.cast::<f32>(), cfg)?;
    println!("f64 score {:.9}", wide.score(&e)?);
    println!("f32 score {:.9}", narrow.score(&e)?);

    let path = std::env::temp_dir().join("simvec-example.svtm");
    save_checkpoint(&params, &cfg, &path)?;
    let (loaded, loaded_cfg) = load_checkpoint(&path)?;
    let reloaded = MetricScorer::new(loaded, loaded_cfg)?;
    // tensors are stored as f32 and evaluated in f64, so the last digits move
    println!("reloaded  {:.9}", reloaded.score(&e)?);
    Ok(())
}
