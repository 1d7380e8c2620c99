//! Builds an embedding cache from stub embeddings, writes it, reads it back
//! and prints one record.
//!
//! ```text
//! cargo run --example embedding_cache
//! ```

use simvec_metric::io::{read_cache, stub_embed, write_cache, EmbeddingCache, EmbeddingSet};

fn main() -> simvec_metric::Result<()> {
    let (d_clip, d_text, seed) = (512, 768, 42);
    let mut cache = EmbeddingCache::new(d_clip, d_text);
    for id in ["img-001", "img-002"] {
        let refs = 3;
        let set = EmbeddingSet {
            image: stub_embed(&format!("{id}/image"), d_clip, seed)?,
            cand_clip: stub_embed(&format!("{id}/cand"), d_clip, seed)?,
            refs_clip: (0..refs)
                .map(|j| stub_embed(&format!("{id}/ref{j}"), d_clip, seed))
                .collect::<Result<_, _>>()?,
            cand_text: stub_embed(&format!("{id}/cand/text"), d_text, seed)?,
            refs_text: (0..refs)
                .map(|j| stub_embed(&format!("{id}/ref{j}/text"), d_text, seed))
                .collect::<Result<_, _>>()?,
        };
        cache.insert(id, set)?;
    }

    let dir = std::env::temp_dir().join("simvec-example-cache");
    std::fs::create_dir_all(&dir).map_err(|e| simvec_metric::Error::io(&dir, e))?;
    let path = dir.join("embeddings.svec");
    write_cache(&path, &cache)?;
    let back = read_cache(&path)?;
    assert_eq!(back, cache);

    let bytes = std::fs::metadata(&path)
        .map_err(|e| simvec_metric::Error::io(&path, e))?
        .len();
    println!("{} records, {bytes} bytes at {}", back.len(), path.display());
    for (id, e) in back.iter() {
        println!("{id}: {} references, image[..4] = {:?}", e.n_refs(), &e.image[..4]);
    }
    Ok(())
}
