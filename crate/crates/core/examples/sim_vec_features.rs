//! Product and difference features on a hand-sized input, and the token
//! layout each mode produces.

use simvec_metric::io::EmbeddingSet;
use simvec_metric::simvec::{extract_sim_vec, token_inputs, SimVecConfig, SimVecMode};

fn main() -> simvec_metric::Result<()> {
    let e = EmbeddingSet {
        image: vec![3.0, 4.0],
        cand_clip: vec![1.0, 2.0],
        refs_clip: vec![vec![0.0, 1.0]],
        cand_text: vec![0.5, -0.5, 1.0],
        refs_text: vec![vec![1.0, 1.0, 1.0]],
    };
    let f = extract_sim_vec(&e)?;
    println!("h_clip  {:?}", f.h_clip);
    println!("dd_clip {:?}", f.dd_clip);
    println!("h_text  {:?}", f.h_text);
    println!("dd_text {:?}", f.dd_text);

    for mode in [SimVecMode::Full, SimVecMode::RawFeatures] {
        let cfg = SimVecConfig {
            d_clip: 2,
            d_text: 3,
            d_model: 8,
            max_refs: 4,
            mode,
        };
        let inputs = token_inputs(&e, &cfg)?;
        let tags: Vec<String> = inputs.items.iter().map(|t| format!("{:?}", t.source)).collect();
        println!("\n{mode:?}: {} tokens after CLS", inputs.items.len());
        println!("  {}", tags.join(", "));
    }
    Ok(())
}
